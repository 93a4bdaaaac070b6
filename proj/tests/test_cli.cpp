#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "adamab/common.hpp"

// end-to-end tests against the built binary (path injected by the build)

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CliResult {
    int code = -1;
    std::string output;
};

CliResult run_cli(const std::string& args) {
    const fs::path out = fs::temp_directory_path() / "adamab_cli_output.txt";
    const std::string cmd =
        std::string(ADAMAB_CLI_PATH) + " " + args + " > " + out.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    CliResult result;
    result.code = WEXITSTATUS(status);
    std::ifstream is(out);
    std::stringstream ss;
    ss << is.rdbuf();
    result.output = ss.str();
    return result;
}

std::string slurp(const fs::path& path) {
    std::ifstream is(path, std::ios::binary);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

// K=3, d=8 toy task written as data files
struct ToyDir {
    fs::path root;

    ToyDir() {
        root = fs::temp_directory_path() / "adamab_cli_toy";
        fs::remove_all(root);
        fs::create_directories(root);
        adamab::Rng rng(4242);

        std::vector<adamab::Vec> means(3, adamab::Vec(8, 0.0));
        for (auto& mu : means)
            for (double& v : mu) v = 1.5 * rng.normal();

        std::ofstream labels(root / "labels.jsonl");
        for (int c = 0; c < 3; ++c) {
            json j;
            j["id"] = c + 1;
            j["label"] = "class" + std::to_string(c + 1);
            j["description"] = "toy class";
            j["vector"] = means[static_cast<std::size_t>(c)];
            labels << j.dump() << "\n";
        }
        const auto write_records = [&](const fs::path& path, int per_class) {
            std::ofstream os(path);
            for (int c = 0; c < 3; ++c)
                for (int i = 0; i < per_class; ++i) {
                    adamab::Vec x = means[static_cast<std::size_t>(c)];
                    for (double& v : x) v += 0.8 * rng.normal();
                    json j;
                    j["class"] = c + 1;
                    j["vector"] = x;
                    os << j.dump() << "\n";
                }
        };
        write_records(root / "train.jsonl", 5);
        write_records(root / "test.jsonl", 20);

        json config;
        config["rounds"] = 4;
        config["aug_rounds"] = 2;
        config["delta_n"] = 2;
        config["alpha"] = 30.0;
        config["batch_size"] = 8;
        config["mode"] = "init_only";
        config["seed"] = 7;
        config["data"] = {{"train", (root / "train.jsonl").string()},
                          {"test", (root / "test.jsonl").string()},
                          {"labels", (root / "labels.jsonl").string()}};
        config["generator"] = {{"type", "gaussian_oracle"}, {"sigma", 0.8}};
        std::ofstream os(root / "config.json");
        os << config.dump(2) << "\n";
    }
};

}  // namespace

TEST_CASE("train: missing dataset path exits 2") {
    ToyDir toy;
    json config = json::parse(slurp(toy.root / "config.json"));
    config["data"]["train"] = (toy.root / "does_not_exist.jsonl").string();
    std::ofstream((toy.root / "bad_config.json")) << config.dump();
    const auto result = run_cli("train --config " + (toy.root / "bad_config.json").string() +
                                " --out " + (toy.root / "out_bad").string());
    CHECK(result.code == 2);
}

TEST_CASE("train: unknown flags are rejected with exit 2") {
    ToyDir toy;
    const auto result = run_cli("train --config " + (toy.root / "config.json").string() +
                                " --no-such-flag 1");
    CHECK(result.code == 2);
}

TEST_CASE("train: init-only smoke run writes metrics, checkpoint, resolved config") {
    ToyDir toy;
    const fs::path out = toy.root / "run_smoke";
    const auto result =
        run_cli("train --config " + (toy.root / "config.json").string() + " --out " + out.string());
    CHECK(result.code == 0);
    CHECK(fs::exists(out / "metrics.jsonl"));
    CHECK(fs::exists(out / "checkpoint.txt"));
    CHECK(fs::exists(out / "resolved_config.json"));
    CHECK(fs::exists(out / "dataset_final.jsonl"));
    CHECK(fs::exists(out / "timing.log"));
    const std::string metrics = slurp(out / "metrics.jsonl");
    CHECK_FALSE(metrics.empty());
    CHECK(std::count(metrics.begin(), metrics.end(), '\n') == 4);  // one line per round
}

TEST_CASE("train: identical seeds give byte-identical metrics, overrides change them") {
    ToyDir toy;
    const fs::path out_a = toy.root / "run_a";
    const fs::path out_b = toy.root / "run_b";
    const std::string base = "train --config " + (toy.root / "config.json").string() +
                             " --mode adamab --seed 99 --out ";
    CHECK(run_cli(base + out_a.string()).code == 0);
    CHECK(run_cli(base + out_b.string()).code == 0);
    const std::string metrics_a = slurp(out_a / "metrics.jsonl");
    CHECK_FALSE(metrics_a.empty());
    CHECK(metrics_a == slurp(out_b / "metrics.jsonl"));
    CHECK(metrics_a.find("\"acquisition\":{") != std::string::npos);
    // every output except the timing sidecar is byte-identical
    CHECK(slurp(out_a / "checkpoint.txt") == slurp(out_b / "checkpoint.txt"));
    CHECK(slurp(out_a / "dataset_final.jsonl") == slurp(out_b / "dataset_final.jsonl"));
    CHECK(slurp(out_a / "resolved_config.json") == slurp(out_b / "resolved_config.json"));

    // the resolved snapshot alone reproduces the run
    const fs::path out_c = toy.root / "run_c";
    CHECK(run_cli("train --config " + (out_a / "resolved_config.json").string() + " --out " +
                  out_c.string())
              .code == 0);
    CHECK(metrics_a == slurp(out_c / "metrics.jsonl"));

    const fs::path out_d = toy.root / "run_d";
    CHECK(run_cli("train --config " + (toy.root / "config.json").string() +
                  " --mode adamab --seed 100 --out " + out_d.string())
              .code == 0);
    CHECK(metrics_a != slurp(out_d / "metrics.jsonl"));
}

TEST_CASE("eval: reports accuracy from a trained checkpoint") {
    ToyDir toy;
    const fs::path out = toy.root / "run_eval";
    REQUIRE(run_cli("train --config " + (toy.root / "config.json").string() + " --out " +
                    out.string())
                .code == 0);
    const auto result = run_cli("eval --checkpoint " + (out / "checkpoint.txt").string() +
                                " --labels " + (toy.root / "labels.jsonl").string() + " --test " +
                                (toy.root / "test.jsonl").string() + " --out " +
                                (toy.root / "eval_out").string());
    CHECK(result.code == 0);
    CHECK(result.output.find("accuracy") != std::string::npos);
    CHECK(fs::exists(toy.root / "eval_out" / "confusion.csv"));
}

TEST_CASE("export-plots: empty input exits 2; runs produce per-run CSV plus summary") {
    ToyDir toy;
    const fs::path empty = toy.root / "empty";
    fs::create_directories(empty);
    CHECK(run_cli("export-plots --runs " + empty.string() + " --out " +
                  (toy.root / "plots0").string())
              .code == 2);

    // two runs under one parent, then export the parent
    const fs::path runs = toy.root / "runs";
    for (const char* name : {"alpha30", "alpha0"}) {
        const std::string alpha = std::string(name) == "alpha30" ? "30" : "0";
        REQUIRE(run_cli("train --config " + (toy.root / "config.json").string() +
                        " --mode adamab --alpha " + alpha + " --out " +
                        (runs / name).string())
                    .code == 0);
    }
    const fs::path plots = toy.root / "plots";
    CHECK(run_cli("export-plots --runs " + runs.string() + " --out " + plots.string()).code == 0);
    CHECK(fs::exists(plots / "invocation.json"));
    CHECK(fs::exists(plots / "alpha30.csv"));
    CHECK(fs::exists(plots / "alpha0.csv"));
    const std::string csv = slurp(plots / "alpha30.csv");
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);  // header + one row per round
    CHECK(csv.find("t,mode,loss,accuracy,chosen_class,max_count_ratio") == 0);
    const std::string summary = slurp(plots / "summary.csv");
    CHECK(std::count(summary.begin(), summary.end(), '\n') == 3);  // header + one row per run
}

TEST_CASE("theory: hoeffding passes, zero-variance passes, bad eta exits 2") {
    ToyDir toy;
    const std::string out = (toy.root / "theory").string();
    auto result = run_cli("theory hoeffding --trials 20000 --out " + out);
    CHECK(result.code == 0);
    CHECK(result.output.find("PASS") != std::string::npos);
    CHECK(fs::exists(fs::path(out) / "hoeffding.csv"));
    CHECK(fs::exists(fs::path(out) / "invocation.json"));
    const std::string trace = slurp(fs::path(out) / "hoeffding.csv");
    CHECK(std::count(trace.begin(), trace.end(), '\n') == 11);  // header + cumulative blocks

    result = run_cli("theory hoeffding --trials 2000 --zero-variance --out " + out);
    CHECK(result.code == 0);

    result = run_cli("theory theorem1 --eta-scale 1.5 --out " + out);
    CHECK(result.code == 2);  // refuses eta above 1/beta

    result = run_cli("theory theorem1 --trials 5 --steps 300 --out " + out);
    CHECK(result.code == 0);
    CHECK(fs::exists(fs::path(out) / "theorem1.csv"));

    result = run_cli("theory no-such-check --out " + out);
    CHECK(result.code == 2);
}

TEST_CASE("train: a dead provider exits 3 and leaves resumable state behind") {
    ToyDir toy;
    json config = json::parse(slurp(toy.root / "config.json"));
    config["mode"] = "adamab";
    config["generator"] = {{"type", "remote"},
                           {"endpoint", "http://127.0.0.1:1"},
                           {"model", "m"},
                           {"max_retries", 0},
                           {"backoff_base_ms", 1},
                           {"timeout_seconds", 1}};
    std::ofstream(toy.root / "dead_config.json") << config.dump();
    const fs::path out = toy.root / "run_dead";
    const auto result = run_cli("train --config " + (toy.root / "dead_config.json").string() +
                                " --out " + out.string());
    CHECK(result.code == 3);
    CHECK(fs::exists(out / "resume_state.json"));
    CHECK(fs::exists(out / "abort_checkpoint.txt"));
    CHECK(fs::exists(out / "abort_dataset.jsonl"));
    const json state = json::parse(slurp(out / "resume_state.json"));
    CHECK(state["round"] == 1);
}

TEST_CASE("theory: regret and cb-compare run their pinned gates") {
    ToyDir toy;
    const std::string out = (toy.root / "theory2").string();
    auto result = run_cli("theory regret --rounds 1000 --seeds 10 --out " + out);
    CHECK(result.code == 0);
    CHECK(result.output.find("PASS") != std::string::npos);
    CHECK(fs::exists(fs::path(out) / "regret.csv"));

    result = run_cli("theory cb-compare --rounds 1000 --seeds 5 --out " + out);
    CHECK(result.code == 0);
    CHECK(fs::exists(fs::path(out) / "cb_compare.csv"));
}
