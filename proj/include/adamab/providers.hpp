#pragma once

// Pluggable frozen-embedder sources and synthetic-data generators. Remote
// sources speak an OpenAI-compatible JSON protocol over HTTP with bounded
// exponential-backoff retries and a content-hash-keyed embedding cache so
// reruns are offline-reproducible. The Gaussian oracle generator is the
// desk-scale stand-in with a fully known class-conditional distribution.

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "adamab/calibrator.hpp"
#include "adamab/common.hpp"

namespace adamab::providers {

// ---------------------------------------------------------------------------
// Prompt templates

// Template with {placeholder} slots. Rendering fails loudly on any
// placeholder left unbound.
class PromptTemplate {
public:
    PromptTemplate(std::string name, std::string text);

    const std::string& name() const { return name_; }
    const std::string& text() const { return text_; }
    std::string render(const std::map<std::string, std::string>& values) const;

    // Default augmentation templates for text-query and image-query tasks.
    static PromptTemplate text_augmentation();
    static PromptTemplate image_augmentation();

private:
    std::string name_;
    std::string text_;
};

// ---------------------------------------------------------------------------
// HTTP plumbing

struct RemoteConfig {
    std::string endpoint;                        // e.g. "http://127.0.0.1:8080"
    std::string model;
    std::string api_key_env = "ADAMAB_API_KEY";  // token read from the environment only
    int timeout_seconds = 30;
    int max_retries = 3;      // additional attempts after the first
    int backoff_base_ms = 100;  // doubles per retry
    int max_in_flight = 1;    // reserved; requests are issued in order
};

// POSTs JSON and retries transient failures (connect errors, 429, 5xx) with
// bounded exponential backoff before giving up with a ProviderError.
class HttpJsonClient {
public:
    explicit HttpJsonClient(RemoteConfig config);
    std::string post_json(const std::string& path, const std::string& body);
    std::size_t request_count() const { return request_count_; }
    const RemoteConfig& config() const { return config_; }

private:
    RemoteConfig config_;
    std::size_t request_count_ = 0;
};

// ---------------------------------------------------------------------------
// Embedding cache

// Append-only cache file: one JSON object per line,
//   {"key": <16-hex fnv1a64 of model \x1f text>, "model": ..., "text": ..., "vector": [...]}
// Lookups compare the full (model, text) pair, so hash collisions cannot
// alias entries. The format is documented so caches can be shared across
// machines.
class EmbeddingCache {
public:
    // In-memory only when path is empty.
    explicit EmbeddingCache(std::string path);

    std::optional<Vec> lookup(const std::string& model, const std::string& text) const;
    void insert(const std::string& model, const std::string& text, const Vec& vector);
    std::size_t size() const { return entries_.size(); }

    static std::string content_key(const std::string& model, const std::string& text);

private:
    std::string path_;
    std::map<std::pair<std::string, std::string>, Vec> entries_;
};

// ---------------------------------------------------------------------------
// Embedders

class Embedder {
public:
    virtual ~Embedder() = default;
    virtual std::size_t embed_dim() const = 0;
    virtual Vec embed(const std::string& text) = 0;
    virtual std::vector<Vec> embed_batch(const std::vector<std::string>& texts);
};

// Lookup table loaded from a line-delimited file of {"text":..., "vector":[...]}.
class FileEmbedder : public Embedder {
public:
    explicit FileEmbedder(const std::string& path);
    std::size_t embed_dim() const override { return dim_; }
    Vec embed(const std::string& text) override;

private:
    std::size_t dim_ = 0;
    std::unordered_map<std::string, Vec> table_;
};

// OpenAI-style /v1/embeddings client with read-through caching.
class RemoteEmbedder : public Embedder {
public:
    RemoteEmbedder(RemoteConfig config, std::size_t embed_dim, std::string cache_path);
    std::size_t embed_dim() const override { return dim_; }
    Vec embed(const std::string& text) override;
    std::vector<Vec> embed_batch(const std::vector<std::string>& texts) override;

    std::size_t remote_calls() const { return client_.request_count(); }

private:
    HttpJsonClient client_;
    std::size_t dim_;
    EmbeddingCache cache_;
};

// ---------------------------------------------------------------------------
// Generators

// Either ready embeddings (oracle/pool sources) or raw items that must pass
// through the embedder before entering the dataset (remote sources).
struct GeneratedBatch {
    std::vector<Vec> embeddings;
    std::vector<std::string> items;
    bool is_embeddings() const { return items.empty(); }
};

class Generator {
public:
    virtual ~Generator() = default;
    virtual GeneratedBatch generate(int class_id, std::size_t delta_n, std::uint64_t seed,
                                    const std::vector<std::string>& existing) = 0;
};

// Class-conditional Gaussian with known means: every draw is mean_C + sigma*z
// with z standard normal, fully determined by (seed, class). The true
// class-conditional distribution is known exactly, which makes gradient
// shifting measurable rather than merely estimable.
class GaussianOracleGenerator : public Generator {
public:
    GaussianOracleGenerator(std::vector<Vec> class_means, double sigma);
    GeneratedBatch generate(int class_id, std::size_t delta_n, std::uint64_t seed,
                            const std::vector<std::string>& existing) override;

    const Vec& class_mean(int class_id) const;
    double sigma() const { return sigma_; }
    std::size_t embed_dim() const { return means_.front().size(); }
    int num_classes() const { return static_cast<int>(means_.size()); }

private:
    std::vector<Vec> means_;
    double sigma_;
};

// Replays held-out labeled records, never emitting the same record twice.
// Exhaustion raises PoolExhaustedError, distinct from remote failures.
class PoolReplayGenerator : public Generator {
public:
    PoolReplayGenerator(int num_classes, const std::vector<std::pair<int, Vec>>& labeled_records);
    GeneratedBatch generate(int class_id, std::size_t delta_n, std::uint64_t seed,
                            const std::vector<std::string>& existing) override;

    std::size_t remaining(int class_id) const;

private:
    std::vector<std::vector<Vec>> pools_;   // per class, consumed front to back
    std::vector<std::size_t> next_;
};

// Chat-completions client that renders the augmentation prompt (label,
// description, count, existing examples) and parses one generated item per
// line. Short responses are an error; long ones are truncated to delta_n.
class RemoteGenerator : public Generator {
public:
    RemoteGenerator(RemoteConfig config, PromptTemplate prompt, double temperature,
                    std::vector<std::pair<std::string, std::string>> label_texts);
    GeneratedBatch generate(int class_id, std::size_t delta_n, std::uint64_t seed,
                            const std::vector<std::string>& existing) override;

    std::size_t remote_calls() const { return client_.request_count(); }

private:
    HttpJsonClient client_;
    PromptTemplate prompt_;
    double temperature_;
    std::vector<std::pair<std::string, std::string>> label_texts_;  // (name, description) per class
};

}  // namespace adamab::providers
