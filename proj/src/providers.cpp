#include "adamab/providers.hpp"

#include <cctype>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <thread>

#include "httplib.h"
#include "json.hpp"

namespace adamab::providers {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Prompt templates

PromptTemplate::PromptTemplate(std::string name, std::string text)
    : name_(std::move(name)), text_(std::move(text)) {}

std::string PromptTemplate::render(const std::map<std::string, std::string>& values) const {
    std::string out;
    out.reserve(text_.size());
    std::size_t i = 0;
    while (i < text_.size()) {
        if (text_[i] != '{') {
            out.push_back(text_[i++]);
            continue;
        }
        std::size_t j = i + 1;
        while (j < text_.size() && (std::isalnum(static_cast<unsigned char>(text_[j])) || text_[j] == '_'))
            ++j;
        if (j >= text_.size() || text_[j] != '}' || j == i + 1) {
            out.push_back(text_[i++]);  // literal brace, not a placeholder
            continue;
        }
        const std::string key = text_.substr(i + 1, j - i - 1);
        const auto it = values.find(key);
        if (it == values.end())
            throw std::invalid_argument("template '" + name_ + "': unresolved placeholder {" +
                                        key + "}");
        out += it->second;
        i = j + 1;
    }
    return out;
}

PromptTemplate PromptTemplate::text_augmentation() {
    return PromptTemplate(
        "text_augmentation",
        "Here is a rule that defines the topics of the queries that should not be answered by an "
        "LLM agent: \n{label}: {description}\n\nPlease generate {num_generate} **diverse** "
        "example queries that violate this rule. \nThe examples should be as **diverse** as "
        "possible so that the agent can learn from the examples if a query violates the rule. In "
        "addition, do not generate examples that are similar to the following existing "
        "examples:\n{existing_queries}\n\nIn your response, only list the examples with one "
        "example in each line, without any numbering or bullets.");
}

PromptTemplate PromptTemplate::image_augmentation() {
    return PromptTemplate(
        "image_augmentation",
        "Generate pictures of a pet belonging to {label} species in different scenarios.");
}

// ---------------------------------------------------------------------------
// HTTP plumbing

HttpJsonClient::HttpJsonClient(RemoteConfig config) : config_(std::move(config)) {
    if (config_.endpoint.empty()) throw ConfigError("remote provider: endpoint is empty");
}

std::string HttpJsonClient::post_json(const std::string& path, const std::string& body) {
    httplib::Client client(config_.endpoint);
    client.set_connection_timeout(config_.timeout_seconds, 0);
    client.set_read_timeout(config_.timeout_seconds, 0);
    client.set_write_timeout(config_.timeout_seconds, 0);

    httplib::Headers headers;
    if (!config_.api_key_env.empty()) {
        if (const char* token = std::getenv(config_.api_key_env.c_str()); token != nullptr)
            headers.emplace("Authorization", std::string("Bearer ") + token);
    }

    std::string last_error;
    for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
        if (attempt > 0) {
            const auto delay = std::chrono::milliseconds(
                static_cast<long>(config_.backoff_base_ms) * (1L << (attempt - 1)));
            std::this_thread::sleep_for(delay);
        }
        ++request_count_;
        auto res = client.Post(path, headers, body, "application/json");
        if (!res) {
            last_error = "transport error: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status == 200) return res->body;
        if (res->status == 429 || res->status >= 500) {
            last_error = "HTTP " + std::to_string(res->status);
            continue;
        }
        throw ProviderError("remote call " + config_.endpoint + path + " failed: HTTP " +
                            std::to_string(res->status) + " " + res->body);
    }
    throw ProviderError("remote call " + config_.endpoint + path + " failed after " +
                        std::to_string(config_.max_retries + 1) + " attempts (" + last_error + ")");
}

// ---------------------------------------------------------------------------
// Embedding cache

namespace {

std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 0; i < 16; ++i) out[15 - i] = digits[(v >> (4 * i)) & 0xF];
    return out;
}

}  // namespace

std::string EmbeddingCache::content_key(const std::string& model, const std::string& text) {
    return hex64(fnv1a64(model + '\x1f' + text));
}

EmbeddingCache::EmbeddingCache(std::string path) : path_(std::move(path)) {
    if (path_.empty()) return;
    std::ifstream is(path_);
    if (!is) return;  // fresh cache
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        const json j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object() || !j.contains("model") || !j.contains("text") ||
            !j.contains("vector") || !j["vector"].is_array())
            throw std::runtime_error("embedding cache corrupt at " + path_ + ":" +
                                     std::to_string(lineno));
        Vec v = j["vector"].get<Vec>();
        entries_[{j["model"].get<std::string>(), j["text"].get<std::string>()}] = std::move(v);
    }
}

std::optional<Vec> EmbeddingCache::lookup(const std::string& model, const std::string& text) const {
    const auto it = entries_.find({model, text});
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

void EmbeddingCache::insert(const std::string& model, const std::string& text, const Vec& vector) {
    entries_[{model, text}] = vector;
    if (path_.empty()) return;
    std::ofstream os(path_, std::ios::app | std::ios::binary);
    if (!os) throw std::runtime_error("cannot append to embedding cache: " + path_);
    json j;
    j["key"] = content_key(model, text);
    j["model"] = model;
    j["text"] = text;
    j["vector"] = vector;
    os << j.dump() << "\n";
}

// ---------------------------------------------------------------------------
// Embedders

std::vector<Vec> Embedder::embed_batch(const std::vector<std::string>& texts) {
    std::vector<Vec> out;
    out.reserve(texts.size());
    for (const std::string& t : texts) out.push_back(embed(t));
    return out;
}

FileEmbedder::FileEmbedder(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open embedding file: " + path);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        const json j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.contains("text") || !j.contains("vector"))
            throw std::runtime_error("embedding file " + path + ":" + std::to_string(lineno) +
                                     ": expected {\"text\", \"vector\"}");
        Vec v = j["vector"].get<Vec>();
        if (dim_ == 0) dim_ = v.size();
        check_dim(v.size(), dim_, "file embedder record");
        table_[j["text"].get<std::string>()] = std::move(v);
    }
    if (table_.empty()) throw std::runtime_error("embedding file is empty: " + path);
}

Vec FileEmbedder::embed(const std::string& text) {
    const auto it = table_.find(text);
    if (it == table_.end())
        throw ProviderError("file embedder: no stored vector for text '" + text + "'");
    return it->second;
}

RemoteEmbedder::RemoteEmbedder(RemoteConfig config, std::size_t embed_dim, std::string cache_path)
    : client_(std::move(config)), dim_(embed_dim), cache_(std::move(cache_path)) {
    if (dim_ == 0) throw ConfigError("remote embedder: embed_dim must be positive");
}

Vec RemoteEmbedder::embed(const std::string& text) { return embed_batch({text}).front(); }

std::vector<Vec> RemoteEmbedder::embed_batch(const std::vector<std::string>& texts) {
    const std::string& model = client_.config().model;
    std::vector<Vec> out(texts.size());
    std::vector<std::size_t> missing;
    for (std::size_t i = 0; i < texts.size(); ++i) {
        if (auto hit = cache_.lookup(model, texts[i]); hit.has_value()) {
            check_dim(hit->size(), dim_, "cached embedding");
            out[i] = std::move(*hit);
        } else {
            missing.push_back(i);
        }
    }
    if (missing.empty()) return out;

    json req;
    req["model"] = model;
    req["input"] = json::array();
    for (std::size_t i : missing) req["input"].push_back(texts[i]);
    const json res = json::parse(client_.post_json("/v1/embeddings", req.dump()), nullptr, false);
    if (res.is_discarded() || !res.contains("data") || !res["data"].is_array() ||
        res["data"].size() != missing.size())
        throw ProviderError("remote embedder: malformed response (expected data[" +
                            std::to_string(missing.size()) + "])");
    for (std::size_t k = 0; k < missing.size(); ++k) {
        const auto& item = res["data"][k];
        if (!item.contains("embedding") || !item["embedding"].is_array())
            throw ProviderError("remote embedder: response item missing 'embedding'");
        Vec v = item["embedding"].get<Vec>();
        check_dim(v.size(), dim_, "remote embedding");
        cache_.insert(model, texts[missing[k]], v);
        out[missing[k]] = std::move(v);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Generators

GaussianOracleGenerator::GaussianOracleGenerator(std::vector<Vec> class_means, double sigma)
    : means_(std::move(class_means)), sigma_(sigma) {
    if (means_.empty()) throw std::invalid_argument("gaussian oracle: no class means");
    for (const Vec& m : means_) check_dim(m.size(), means_.front().size(), "gaussian oracle mean");
    if (sigma_ < 0.0) throw std::invalid_argument("gaussian oracle: sigma must be >= 0");
}

const Vec& GaussianOracleGenerator::class_mean(int class_id) const {
    if (class_id < 1 || class_id > num_classes())
        throw std::invalid_argument("gaussian oracle: invalid class " + std::to_string(class_id));
    return means_[static_cast<std::size_t>(class_id - 1)];
}

GeneratedBatch GaussianOracleGenerator::generate(int class_id, std::size_t delta_n,
                                                 std::uint64_t seed,
                                                 const std::vector<std::string>&) {
    if (delta_n < 1) throw std::invalid_argument("generate: delta_n must be >= 1");
    const Vec& mean = class_mean(class_id);
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(class_id)));
    GeneratedBatch batch;
    batch.embeddings.reserve(delta_n);
    for (std::size_t i = 0; i < delta_n; ++i) {
        Vec v(mean.size());
        for (std::size_t j = 0; j < v.size(); ++j) v[j] = mean[j] + sigma_ * rng.normal();
        batch.embeddings.push_back(std::move(v));
    }
    return batch;
}

PoolReplayGenerator::PoolReplayGenerator(int num_classes,
                                         const std::vector<std::pair<int, Vec>>& labeled_records)
    : pools_(static_cast<std::size_t>(num_classes)), next_(static_cast<std::size_t>(num_classes), 0) {
    if (num_classes < 1) throw std::invalid_argument("pool replay: need at least one class");
    for (const auto& [label, vec] : labeled_records) {
        if (label < 1 || label > num_classes)
            throw std::invalid_argument("pool replay: class " + std::to_string(label) +
                                        " outside 1.." + std::to_string(num_classes));
        pools_[static_cast<std::size_t>(label - 1)].push_back(vec);
    }
}

std::size_t PoolReplayGenerator::remaining(int class_id) const {
    if (class_id < 1 || class_id > static_cast<int>(pools_.size()))
        throw std::invalid_argument("pool replay: invalid class " + std::to_string(class_id));
    return pools_[static_cast<std::size_t>(class_id - 1)].size() -
           next_[static_cast<std::size_t>(class_id - 1)];
}

GeneratedBatch PoolReplayGenerator::generate(int class_id, std::size_t delta_n, std::uint64_t,
                                             const std::vector<std::string>&) {
    if (delta_n < 1) throw std::invalid_argument("generate: delta_n must be >= 1");
    if (remaining(class_id) < delta_n)
        throw PoolExhaustedError("replay pool exhausted for class " + std::to_string(class_id) +
                                 ": requested " + std::to_string(delta_n) + ", have " +
                                 std::to_string(remaining(class_id)));
    auto& offset = next_[static_cast<std::size_t>(class_id - 1)];
    const auto& pool = pools_[static_cast<std::size_t>(class_id - 1)];
    GeneratedBatch batch;
    batch.embeddings.assign(pool.begin() + static_cast<long>(offset),
                            pool.begin() + static_cast<long>(offset + delta_n));
    offset += delta_n;
    return batch;
}

RemoteGenerator::RemoteGenerator(RemoteConfig config, PromptTemplate prompt, double temperature,
                                 std::vector<std::pair<std::string, std::string>> label_texts)
    : client_(std::move(config)),
      prompt_(std::move(prompt)),
      temperature_(temperature),
      label_texts_(std::move(label_texts)) {}

GeneratedBatch RemoteGenerator::generate(int class_id, std::size_t delta_n, std::uint64_t,
                                         const std::vector<std::string>& existing) {
    if (delta_n < 1) throw std::invalid_argument("generate: delta_n must be >= 1");
    if (class_id < 1 || class_id > static_cast<int>(label_texts_.size()))
        throw std::invalid_argument("remote generator: invalid class " + std::to_string(class_id));
    const auto& [name, description] = label_texts_[static_cast<std::size_t>(class_id - 1)];

    std::string existing_joined;
    for (const std::string& ex : existing) {
        if (!existing_joined.empty()) existing_joined += "\n";
        existing_joined += ex;
    }
    const std::string rendered = prompt_.render({{"label", name},
                                                 {"description", description},
                                                 {"num_generate", std::to_string(delta_n)},
                                                 {"existing_queries", existing_joined}});

    json req;
    req["model"] = client_.config().model;
    req["temperature"] = temperature_;
    req["messages"] = json::array({json{{"role", "user"}, {"content", rendered}}});
    const json res =
        json::parse(client_.post_json("/v1/chat/completions", req.dump()), nullptr, false);
    if (res.is_discarded() || !res.contains("choices") || res["choices"].empty() ||
        !res["choices"][0].contains("message"))
        throw ProviderError("remote generator: malformed response");
    const std::string content = res["choices"][0]["message"].value("content", std::string());

    GeneratedBatch batch;
    std::size_t start = 0;
    while (start <= content.size()) {
        std::size_t end = content.find('\n', start);
        if (end == std::string::npos) end = content.size();
        std::string item = content.substr(start, end - start);
        const auto first = item.find_first_not_of(" \t\r");
        const auto last = item.find_last_not_of(" \t\r");
        if (first != std::string::npos)
            batch.items.push_back(item.substr(first, last - first + 1));
        start = end + 1;
    }
    if (batch.items.size() < delta_n)
        throw ProviderError("remote generator: asked for " + std::to_string(delta_n) +
                            " items, got " + std::to_string(batch.items.size()));
    batch.items.resize(delta_n);
    return batch;
}

}  // namespace adamab::providers
