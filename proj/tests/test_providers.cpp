#include "doctest.h"

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <thread>

#include "httplib.h"
#include "json.hpp"

#include "adamab/providers.hpp"

using namespace adamab;
using namespace adamab::providers;
using nlohmann::json;

namespace {

namespace fs = std::filesystem;

std::string temp_path(const std::string& name) {
    return (fs::temp_directory_path() / name).string();
}

// mock provider endpoint on an ephemeral port
class MockServer {
public:
    MockServer() {
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~MockServer() {
        server_.stop();
        thread_.join();
    }
    httplib::Server& server() { return server_; }
    std::string endpoint() const { return "http://127.0.0.1:" + std::to_string(port_); }

private:
    httplib::Server server_;
    int port_ = 0;
    std::thread thread_;
};

RemoteConfig fast_config(const std::string& endpoint, const std::string& model) {
    RemoteConfig rc;
    rc.endpoint = endpoint;
    rc.model = model;
    rc.backoff_base_ms = 1;
    rc.max_retries = 2;
    rc.api_key_env = "ADAMAB_TEST_KEY";
    return rc;
}

}  // namespace

TEST_CASE("prompt templates render placeholders and fail loudly on unbound ones") {
    const PromptTemplate tmpl("demo", "make {num_generate} items about {label}; skip {label}");
    CHECK(tmpl.render({{"num_generate", "3"}, {"label", "dogs"}}) ==
          "make 3 items about dogs; skip dogs");
    CHECK_THROWS_WITH_AS(tmpl.render({{"label", "dogs"}}),
                         doctest::Contains("{num_generate}"), std::invalid_argument);

    // non-identifier braces pass through untouched
    const PromptTemplate lit("lit", "a {not valid} brace { } and {x}");
    CHECK(lit.render({{"x", "X"}}) == "a {not valid} brace { } and X");

    const PromptTemplate text = PromptTemplate::text_augmentation();
    const std::string rendered = text.render({{"label", "hate"},
                                              {"description", "hateful content"},
                                              {"num_generate", "5"},
                                              {"existing_queries", "a\nb"}});
    CHECK(rendered.find("generate 5") != std::string::npos);
    CHECK(rendered.find("hateful content") != std::string::npos);
    CHECK(rendered.find("a\nb") != std::string::npos);
    CHECK(PromptTemplate::image_augmentation().render({{"label", "beagle"}}).find("beagle") !=
          std::string::npos);
}

TEST_CASE("gaussian oracle: sigma=0 repeats the class mean") {
    GaussianOracleGenerator gen({{1.0, 2.0}, {3.0, 4.0}}, 0.0);
    const auto batch = gen.generate(2, 3, 42, {});
    REQUIRE(batch.embeddings.size() == 3);
    for (const Vec& v : batch.embeddings) {
        CHECK(v[0] == 3.0);
        CHECK(v[1] == 4.0);
    }
    CHECK(batch.is_embeddings());
}

TEST_CASE("gaussian oracle: a fixed seed replays bit-identically") {
    GaussianOracleGenerator gen({{0.0, 0.0, 0.0}, {1.0, 1.0, 1.0}}, 0.7);
    const auto a = gen.generate(1, 5, 99, {});
    const auto b = gen.generate(1, 5, 99, {});
    CHECK(a.embeddings == b.embeddings);
    const auto c = gen.generate(1, 5, 100, {});
    CHECK(a.embeddings != c.embeddings);
    const auto d = gen.generate(2, 5, 99, {});
    CHECK(a.embeddings != d.embeddings);
    CHECK_THROWS_AS(gen.generate(1, 0, 5, {}), std::invalid_argument);
    CHECK_THROWS_AS(gen.generate(3, 1, 5, {}), std::invalid_argument);
}

TEST_CASE("gaussian oracle: sample means obey the CLT band") {
    const double sigma = 1.0;
    GaussianOracleGenerator gen({{0.5, -0.25, 1.5, 0.0}}, sigma);
    const std::size_t draws = 10000;
    const auto batch = gen.generate(1, draws, 1234, {});
    Vec mean(4, 0.0);
    for (const Vec& v : batch.embeddings)
        for (std::size_t j = 0; j < 4; ++j) mean[j] += v[j] / static_cast<double>(draws);
    const double band = 4.0 * sigma / std::sqrt(static_cast<double>(draws));
    const Vec mu = gen.class_mean(1);
    for (std::size_t j = 0; j < 4; ++j) CHECK(std::abs(mean[j] - mu[j]) < band);
}

TEST_CASE("gaussian oracle: a long stream has no serial correlation") {
    GaussianOracleGenerator gen({{0.0}}, 1.0);
    const std::size_t draws = 20000;
    const auto batch = gen.generate(1, draws, 777, {});
    double lag = 0.0, var = 0.0;
    for (std::size_t i = 0; i + 1 < draws; ++i) {
        lag += batch.embeddings[i][0] * batch.embeddings[i + 1][0];
        var += batch.embeddings[i][0] * batch.embeddings[i][0];
    }
    CHECK(std::abs(lag / var) < 4.0 / std::sqrt(static_cast<double>(draws)));
}

TEST_CASE("gaussian oracle: disjoint per-round seed streams are uncorrelated") {
    GaussianOracleGenerator gen({{0.0}}, 1.0);
    const std::size_t rounds = 4000;
    // one draw per round, as the round loop issues them
    std::vector<double> stream;
    for (std::size_t t = 0; t < rounds + 1; ++t)
        stream.push_back(gen.generate(1, 1, mix_seed(555, t), {}).embeddings[0][0]);
    double cross = 0.0, var = 0.0;
    for (std::size_t t = 0; t < rounds; ++t) {
        cross += stream[t] * stream[t + 1];
        var += stream[t] * stream[t];
    }
    CHECK(std::abs(cross / var) < 4.0 / std::sqrt(static_cast<double>(rounds)));
}

TEST_CASE("pool replay: unique draws, then a distinct exhaustion error") {
    std::vector<std::pair<int, Vec>> pool;
    for (int i = 0; i < 5; ++i) pool.emplace_back(1, Vec{static_cast<double>(i)});
    pool.emplace_back(2, Vec{100.0});
    PoolReplayGenerator gen(2, pool);
    CHECK(gen.remaining(1) == 5);

    const auto first = gen.generate(1, 3, 0, {});
    const auto second = gen.generate(1, 2, 0, {});
    std::vector<double> seen;
    for (const auto& v : first.embeddings) seen.push_back(v[0]);
    for (const auto& v : second.embeddings) seen.push_back(v[0]);
    std::sort(seen.begin(), seen.end());
    CHECK(seen == std::vector<double>{0.0, 1.0, 2.0, 3.0, 4.0});  // no repeats
    CHECK(gen.remaining(1) == 0);
    CHECK_THROWS_AS(gen.generate(1, 1, 0, {}), PoolExhaustedError);
    // exhaustion is a ProviderError subtype but distinguishable
    try {
        gen.generate(1, 1, 0, {});
        FAIL("expected PoolExhaustedError");
    } catch (const PoolExhaustedError&) {
    }
}

TEST_CASE("file embedder returns stored vectors verbatim and rejects unknown text") {
    const std::string path = temp_path("adamab_file_emb.jsonl");
    {
        std::ofstream os(path);
        os << R"({"text": "alpha", "vector": [1.0, 2.0]})" << "\n";
        os << R"({"text": "beta", "vector": [3.0, 4.0]})" << "\n";
    }
    FileEmbedder emb(path);
    CHECK(emb.embed_dim() == 2);
    CHECK(emb.embed("alpha") == Vec{1.0, 2.0});
    CHECK_THROWS_AS(emb.embed("gamma"), ProviderError);
    fs::remove(path);
}

TEST_CASE("embedding cache: persists, reloads, and flags corruption") {
    const std::string path = temp_path("adamab_cache.jsonl");
    fs::remove(path);
    {
        EmbeddingCache cache(path);
        cache.insert("model-a", "hello", {0.1, 0.2});
        cache.insert("model-a", "world", {0.3, 0.4});
        CHECK(cache.lookup("model-a", "hello").value() == Vec{0.1, 0.2});
        CHECK_FALSE(cache.lookup("model-b", "hello").has_value());
    }
    {
        EmbeddingCache reloaded(path);
        CHECK(reloaded.size() == 2);
        CHECK(reloaded.lookup("model-a", "world").value() == Vec{0.3, 0.4});
    }
    {
        std::ofstream os(path, std::ios::app);
        os << "this is not json\n";
    }
    const auto reopen = [&] { return EmbeddingCache(path); };
    CHECK_THROWS_WITH_AS(reopen(), doctest::Contains("corrupt"), std::runtime_error);
    fs::remove(path);
}

TEST_CASE("remote embedder: caches responses and sends the bearer token") {
    setenv("ADAMAB_TEST_KEY", "sekrit-token", 1);
    MockServer mock;
    std::atomic<int> calls{0};
    std::string seen_auth;
    mock.server().Post("/v1/embeddings", [&](const httplib::Request& req, httplib::Response& res) {
        calls++;
        seen_auth = req.get_header_value("Authorization");
        const json body = json::parse(req.body);
        json data = json::array();
        for (const auto& text : body["input"]) {
            const double h = static_cast<double>(text.get<std::string>().size());
            data.push_back({{"embedding", {h, -h, 2.0 * h}}});
        }
        res.set_content(json{{"data", data}}.dump(), "application/json");
    });

    const std::string cache_path = temp_path("adamab_remote_cache.jsonl");
    fs::remove(cache_path);
    RemoteEmbedder emb(fast_config(mock.endpoint(), "mock-model"), 3, cache_path);

    const Vec a = emb.embed("four");
    CHECK(a == Vec{4.0, -4.0, 8.0});
    CHECK(calls == 1);
    CHECK(seen_auth == "Bearer sekrit-token");

    // identical text: served from cache, zero extra remote calls
    const Vec b = emb.embed("four");
    CHECK(b == a);
    CHECK(calls == 1);

    // batch with one hit and two misses goes out as a single request
    const auto batch = emb.embed_batch({"four", "seven!!", "x"});
    CHECK(calls == 2);
    CHECK(batch[0] == a);
    CHECK(batch[1] == Vec{7.0, -7.0, 14.0});
    CHECK(batch[2] == Vec{1.0, -1.0, 2.0});

    // a fresh instance sees the cache file and stays offline
    RemoteEmbedder offline(fast_config(mock.endpoint(), "mock-model"), 3, cache_path);
    CHECK(offline.embed("seven!!") == batch[1]);
    CHECK(offline.remote_calls() == 0);
    fs::remove(cache_path);
}

TEST_CASE("remote embedder: transient failures retry with backoff, then succeed") {
    MockServer mock;
    std::atomic<int> calls{0};
    mock.server().Post("/v1/embeddings", [&](const httplib::Request&, httplib::Response& res) {
        const int n = ++calls;
        if (n <= 2) {
            res.status = 500;
            return;
        }
        res.set_content(json{{"data", {{{"embedding", {1.0, 2.0}}}}}}.dump(), "application/json");
    });
    RemoteEmbedder emb(fast_config(mock.endpoint(), "m"), 2, "");
    CHECK(emb.embed("q") == Vec{1.0, 2.0});
    CHECK(calls == 3);
}

TEST_CASE("remote embedder: permanent failure surfaces as ProviderError") {
    MockServer mock;
    mock.server().Post("/v1/embeddings", [&](const httplib::Request&, httplib::Response& res) {
        res.status = 503;
    });
    RemoteEmbedder emb(fast_config(mock.endpoint(), "m"), 2, "");
    CHECK_THROWS_AS(emb.embed("q"), ProviderError);
    CHECK(emb.remote_calls() == 3);  // initial try + 2 retries

    RemoteEmbedder nowhere(fast_config("http://127.0.0.1:1", "m"), 2, "");
    CHECK_THROWS_AS(nowhere.embed("q"), ProviderError);
}

TEST_CASE("remote generator: renders the prompt and parses one item per line") {
    MockServer mock;
    std::string seen_prompt;
    std::atomic<int> item_count{5};
    mock.server().Post("/v1/chat/completions",
                       [&](const httplib::Request& req, httplib::Response& res) {
                           const json body = json::parse(req.body);
                           seen_prompt = body["messages"][0]["content"];
                           std::string content;
                           for (int i = 0; i < item_count; ++i)
                               content += "generated item " + std::to_string(i) + "\n";
                           res.set_content(
                               json{{"choices",
                                     {{{"message", {{"content", content}}}}}}}.dump(),
                               "application/json");
                       });

    RemoteGenerator gen(fast_config(mock.endpoint(), "gen-model"),
                        PromptTemplate::text_augmentation(), 0.8,
                        {{"illegal", "unlawful requests"}, {"hate", "hateful content"}});

    const auto batch = gen.generate(2, 3, 0, {"old example"});
    REQUIRE(batch.items.size() == 3);  // five lines come back, truncated to 3
    CHECK(batch.items[0] == "generated item 0");
    CHECK_FALSE(batch.is_embeddings());
    CHECK(seen_prompt.find("hate: hateful content") != std::string::npos);
    CHECK(seen_prompt.find("generate 3") != std::string::npos);
    CHECK(seen_prompt.find("old example") != std::string::npos);

    item_count = 2;  // too few items is an error
    CHECK_THROWS_AS(gen.generate(1, 3, 0, {}), ProviderError);
}
