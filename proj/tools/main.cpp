// Command-line front end: train / eval / export-plots / theory subcommands
// with config-file + flag override semantics and a fixed exit-code contract
// (0 success, 2 usage or config error, 3 runtime or provider error).

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "json.hpp"

#include "adamab/bandit.hpp"
#include "adamab/dataset.hpp"
#include "adamab/theorylab.hpp"
#include "adamab/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace adamab;

namespace {

json read_json_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config file: " + path);
    json j = json::parse(is, nullptr, false);
    if (j.is_discarded()) throw ConfigError("config file is not valid JSON: " + path);
    return j;
}

void require_file(const std::string& path, const char* what) {
    if (path.empty()) throw ConfigError(std::string(what) + " path missing from config");
    if (!fs::exists(path)) throw ConfigError(std::string(what) + " file not found: " + path);
}

// every subcommand leaves a snapshot of its resolved invocation next to its
// outputs, so a run can be reproduced from the output directory alone
void write_invocation(const std::string& out_dir, json resolved) {
    fs::create_directories(out_dir);
    std::ofstream os(fs::path(out_dir) / "invocation.json");
    os << resolved.dump(2) << "\n";
}

// ---------------------------------------------------------------------------
// train

struct TrainSetup {
    train::TrainConfig config;
    json resolved;  // full config snapshot written next to the outputs
    std::string train_path;
    std::string test_path;    // optional
    std::string labels_path;
};

std::size_t read_count(const json& cfg, const char* key, std::size_t fallback) {
    if (!cfg.contains(key)) return fallback;
    const long value = cfg[key].get<long>();
    if (value < 0) throw ConfigError(std::string("config: ") + key + " must be >= 0");
    return static_cast<std::size_t>(value);
}

TrainSetup parse_train_config(const json& file_config) {
    TrainSetup setup;
    json cfg = file_config;
    train::TrainConfig& tc = setup.config;
    tc.rounds = cfg.value("rounds", tc.rounds);
    tc.aug_rounds = cfg.value("aug_rounds", tc.aug_rounds);
    tc.delta_n = read_count(cfg, "delta_n", tc.delta_n);
    tc.alpha = cfg.value("alpha", tc.alpha);
    tc.lr0 = cfg.value("lr0", tc.lr0);
    tc.lr_final = cfg.value("lr_final", tc.lr_final);
    tc.weight_decay = cfg.value("weight_decay", tc.weight_decay);
    tc.batch_size = read_count(cfg, "batch_size", tc.batch_size);
    tc.mode = train::mode_from_name(cfg.value("mode", std::string("init_only")));
    tc.seed = cfg.value("seed", tc.seed);
    tc.full_batch = cfg.value("full_batch", tc.full_batch);
    tc.eval_stride = cfg.value("eval_stride", tc.eval_stride);

    if (!cfg.contains("data") || !cfg["data"].is_object())
        throw ConfigError("config: missing 'data' section");
    setup.train_path = cfg["data"].value("train", std::string());
    setup.test_path = cfg["data"].value("test", std::string());
    setup.labels_path = cfg["data"].value("labels", std::string());
    setup.resolved = cfg;
    return setup;
}

std::unique_ptr<providers::Embedder> build_embedder(const json& cfg) {
    const std::string type = cfg.value("type", std::string());
    if (type == "file") {
        const std::string path = cfg.value("path", std::string());
        require_file(path, "embedder");
        return std::make_unique<providers::FileEmbedder>(path);
    }
    if (type == "remote") {
        providers::RemoteConfig rc;
        rc.endpoint = cfg.value("endpoint", std::string());
        rc.model = cfg.value("model", std::string());
        rc.api_key_env = cfg.value("api_key_env", rc.api_key_env);
        rc.timeout_seconds = cfg.value("timeout_seconds", rc.timeout_seconds);
        rc.max_retries = cfg.value("max_retries", rc.max_retries);
        rc.backoff_base_ms = cfg.value("backoff_base_ms", rc.backoff_base_ms);
        const std::size_t dim = cfg.value("embed_dim", std::size_t{0});
        return std::make_unique<providers::RemoteEmbedder>(rc, dim,
                                                           cfg.value("cache", std::string()));
    }
    throw ConfigError("embedder: unknown type '" + type + "' (expected file|remote)");
}

std::unique_ptr<providers::Generator> build_generator(const json& cfg,
                                                      const calib::LabelSet& labels) {
    const std::string type = cfg.value("type", std::string());
    if (type == "gaussian_oracle") {
        std::vector<Vec> means;
        if (cfg.contains("means")) {
            const std::string means_path = cfg["means"].get<std::string>();
            require_file(means_path, "generator means");
            const calib::LabelSet mean_set = data::read_labels(means_path);
            for (const auto& def : mean_set.all()) means.push_back(def.embedding);
        } else {
            for (const auto& def : labels.all()) means.push_back(def.embedding);
        }
        if (!cfg.contains("sigma")) throw ConfigError("gaussian_oracle: missing 'sigma'");
        return std::make_unique<providers::GaussianOracleGenerator>(std::move(means),
                                                                    cfg["sigma"].get<double>());
    }
    if (type == "pool_replay") {
        const std::string pool_path = cfg.value("pool", std::string());
        require_file(pool_path, "generator pool");
        const auto records = data::read_records(pool_path, &labels);
        std::vector<std::pair<int, Vec>> pool;
        pool.reserve(records.size());
        for (const auto& rec : records) pool.emplace_back(rec.label, rec.embedding);
        return std::make_unique<providers::PoolReplayGenerator>(static_cast<int>(labels.size()),
                                                                pool);
    }
    if (type == "remote") {
        providers::RemoteConfig rc;
        rc.endpoint = cfg.value("endpoint", std::string());
        rc.model = cfg.value("model", std::string());
        rc.api_key_env = cfg.value("api_key_env", rc.api_key_env);
        rc.timeout_seconds = cfg.value("timeout_seconds", rc.timeout_seconds);
        rc.max_retries = cfg.value("max_retries", rc.max_retries);
        rc.backoff_base_ms = cfg.value("backoff_base_ms", rc.backoff_base_ms);
        providers::PromptTemplate prompt = providers::PromptTemplate::text_augmentation();
        const std::string tmpl = cfg.value("template", std::string("text_augmentation"));
        if (tmpl == "image_augmentation")
            prompt = providers::PromptTemplate::image_augmentation();
        else if (tmpl != "text_augmentation")
            throw ConfigError("generator: unknown template '" + tmpl + "'");
        if (cfg.contains("template_text"))
            prompt = providers::PromptTemplate("custom", cfg["template_text"].get<std::string>());
        std::vector<std::pair<std::string, std::string>> label_texts;
        for (const auto& def : labels.all()) label_texts.emplace_back(def.name, def.description);
        return std::make_unique<providers::RemoteGenerator>(
            rc, std::move(prompt), cfg.value("temperature", 1.0), std::move(label_texts));
    }
    throw ConfigError("generator: unknown type '" + type +
                      "' (expected gaussian_oracle|pool_replay|remote)");
}

int cmd_train(const std::string& config_path, const std::string& out_dir,
              const std::optional<std::uint64_t>& seed, const std::optional<std::string>& mode,
              const std::optional<double>& alpha, const std::optional<long>& delta_n,
              const std::optional<long>& aug_rounds,
              const std::optional<std::string>& embedder_endpoint,
              const std::optional<std::string>& embedder_model,
              const std::optional<std::string>& generator_endpoint,
              const std::optional<std::string>& generator_model) {
    require_file(config_path, "config");
    json file_cfg = read_json_file(config_path);

    // flag overrides land in the snapshot so the snapshot alone replays the run
    if (seed) file_cfg["seed"] = *seed;
    if (mode) file_cfg["mode"] = *mode;
    if (alpha) file_cfg["alpha"] = *alpha;
    if (delta_n) file_cfg["delta_n"] = *delta_n;
    if (aug_rounds) file_cfg["aug_rounds"] = *aug_rounds;
    if (embedder_endpoint) file_cfg["embedder"]["endpoint"] = *embedder_endpoint;
    if (embedder_model) file_cfg["embedder"]["model"] = *embedder_model;
    if (generator_endpoint) file_cfg["generator"]["endpoint"] = *generator_endpoint;
    if (generator_model) file_cfg["generator"]["model"] = *generator_model;

    TrainSetup setup = parse_train_config(file_cfg);
    setup.config.validate();
    require_file(setup.labels_path, "labels");
    require_file(setup.train_path, "train data");

    const calib::LabelSet labels = data::read_labels(setup.labels_path);
    const auto train_records = data::read_records(setup.train_path, &labels);
    const data::ClassDataset initial =
        data::ClassDataset::load_initial(train_records, static_cast<int>(labels.size()));

    std::vector<data::Record> test_records;
    if (!setup.test_path.empty()) {
        require_file(setup.test_path, "test data");
        test_records = data::read_records(setup.test_path, &labels);
    }

    std::unique_ptr<providers::Generator> generator;
    std::unique_ptr<providers::Embedder> embedder;
    const bool needs_generator =
        setup.config.mode != train::Mode::init_only && setup.config.aug_rounds > 0;
    if (needs_generator) {
        if (!file_cfg.contains("generator"))
            throw ConfigError("config: mode " + train::mode_name(setup.config.mode) +
                              " needs a 'generator' section");
        generator = build_generator(file_cfg["generator"], labels);
        if (file_cfg.contains("embedder")) embedder = build_embedder(file_cfg["embedder"]);
    }

    fs::create_directories(out_dir);
    {
        std::ofstream os(fs::path(out_dir) / "resolved_config.json");
        os << setup.resolved.dump(2) << "\n";
    }
    std::ofstream metrics(fs::path(out_dir) / "metrics.jsonl", std::ios::binary);
    std::ofstream timing(fs::path(out_dir) / "timing.log");

    train::RunHooks hooks;
    hooks.emit = [&](const train::RoundLog& log) {
        metrics << train::round_log_to_json(log) << "\n";
        timing << "t=" << log.round << " wall_ms=" << log.wall_ms << "\n";
    };
    hooks.on_abort = [&](long round, const calib::CalibratorPair& pair,
                         const data::ClassDataset& ds, const nn::AdamState&) {
        const fs::path base(out_dir);
        calib::save_checkpoint(pair, (base / "abort_checkpoint.txt").string());
        data::write_records(ds, (base / "abort_dataset.jsonl").string());
        json state;
        state["round"] = round;
        state["checkpoint"] = "abort_checkpoint.txt";
        state["dataset"] = "abort_dataset.jsonl";
        state["config"] = "resolved_config.json";
        std::ofstream os(base / "resume_state.json");
        os << state.dump(2) << "\n";
        std::cerr << "provider failure at round " << round << "; resumable state written to "
                  << (base / "resume_state.json").string() << "\n";
    };

    const train::TrainResult result =
        train::run(setup.config, initial, labels, generator.get(), embedder.get(),
                   test_records.empty() ? nullptr : &test_records, hooks);

    calib::save_checkpoint(result.pair, (fs::path(out_dir) / "checkpoint.txt").string());
    data::write_records(result.dataset, (fs::path(out_dir) / "dataset_final.jsonl").string());

    std::cout << "trained " << setup.config.rounds << " rounds, mode "
              << train::mode_name(setup.config.mode) << ", n=" << result.dataset.size()
              << " (synthetic " << result.synthetic_samples << ", generator calls "
              << result.generator_calls << ")";
    if (result.final_accuracy) std::cout << ", final accuracy " << *result.final_accuracy;
    std::cout << "\noutputs in " << out_dir << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// eval

int cmd_eval(const std::string& checkpoint_path, const std::string& labels_path,
             const std::string& test_path, const std::string& out_dir) {
    require_file(checkpoint_path, "checkpoint");
    require_file(labels_path, "labels");
    require_file(test_path, "test data");
    const calib::CalibratorPair pair = calib::load_checkpoint(checkpoint_path);
    const calib::LabelSet labels = data::read_labels(labels_path);
    const auto test_records = data::read_records(test_path, &labels);
    const train::EvalResult result = train::evaluate(pair, test_records, labels);

    std::cout << "accuracy " << result.accuracy << " (" << result.correct << "/" << result.total
              << ")\n";
    if (!out_dir.empty()) {
        write_invocation(out_dir, json{{"subcommand", "eval"},
                                       {"checkpoint", checkpoint_path},
                                       {"labels", labels_path},
                                       {"test", test_path}});
        std::ofstream os(fs::path(out_dir) / "confusion.csv");
        os << "true_class";
        for (std::size_t c = 0; c < labels.size(); ++c) os << ",pred_" << c + 1;
        os << "\n";
        for (std::size_t r = 0; r < result.confusion.size(); ++r) {
            os << r + 1;
            for (std::size_t c = 0; c < result.confusion[r].size(); ++c)
                os << "," << result.confusion[r][c];
            os << "\n";
        }
        std::cout << "confusion matrix in " << (fs::path(out_dir) / "confusion.csv").string()
                  << "\n";
    } else {
        std::cout << "confusion:\n";
        for (const auto& row : result.confusion) {
            for (std::size_t c = 0; c < row.size(); ++c) std::cout << (c ? "," : "") << row[c];
            std::cout << "\n";
        }
    }
    return 0;
}

// ---------------------------------------------------------------------------
// export-plots

struct RunData {
    std::string name;
    json config;
    std::vector<json> rounds;
};

std::vector<RunData> collect_runs(const std::vector<std::string>& inputs) {
    std::vector<fs::path> run_dirs;
    for (const std::string& input : inputs) {
        const fs::path p(input);
        if (!fs::is_directory(p)) continue;
        if (fs::exists(p / "metrics.jsonl")) {
            run_dirs.push_back(p);
            continue;
        }
        for (const auto& entry : fs::directory_iterator(p))
            if (entry.is_directory() && fs::exists(entry.path() / "metrics.jsonl"))
                run_dirs.push_back(entry.path());
    }
    std::sort(run_dirs.begin(), run_dirs.end());

    std::vector<RunData> runs;
    for (const fs::path& dir : run_dirs) {
        RunData run;
        run.name = dir.filename().string();
        if (fs::exists(dir / "resolved_config.json"))
            run.config = read_json_file((dir / "resolved_config.json").string());
        std::ifstream is(dir / "metrics.jsonl");
        std::string line;
        while (std::getline(is, line)) {
            if (line.empty()) continue;
            json j = json::parse(line, nullptr, false);
            if (j.is_discarded())
                throw std::runtime_error("unparsable metrics line in " + dir.string());
            run.rounds.push_back(std::move(j));
        }
        runs.push_back(std::move(run));
    }
    return runs;
}

std::string csv_field(const json& j, const char* key) {
    if (!j.contains(key) || j[key].is_null()) return "";
    const json& v = j[key];
    if (v.is_string()) return v.get<std::string>();
    return v.dump();
}

int cmd_export_plots(const std::vector<std::string>& inputs, const std::string& out_dir) {
    const std::vector<RunData> runs = collect_runs(inputs);
    if (runs.empty()) throw ConfigError("export-plots: no runs with metrics.jsonl found");
    write_invocation(out_dir, json{{"subcommand", "export-plots"}, {"runs", inputs}});

    for (const RunData& run : runs) {
        std::ofstream os(fs::path(out_dir) / (run.name + ".csv"));
        os << "t,mode,loss,accuracy,chosen_class,max_count_ratio\n";
        for (const json& r : run.rounds)
            os << csv_field(r, "t") << "," << csv_field(r, "mode") << "," << csv_field(r, "loss")
               << "," << csv_field(r, "accuracy") << "," << csv_field(r, "chosen_class") << ","
               << csv_field(r, "max_count_ratio") << "\n";
    }

    std::ofstream summary(fs::path(out_dir) / "summary.csv");
    summary << "run,mode,alpha,seed,rounds,final_loss,final_accuracy\n";
    for (const RunData& run : runs) {
        const json& last = run.rounds.empty() ? json{} : run.rounds.back();
        summary << run.name << "," << csv_field(run.config, "mode") << ","
                << csv_field(run.config, "alpha") << "," << csv_field(run.config, "seed") << ","
                << run.rounds.size() << "," << csv_field(last, "loss") << ","
                << csv_field(last, "accuracy") << "\n";
    }
    std::cout << "wrote " << runs.size() << " run csv(s) and summary.csv to " << out_dir << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// theory

int theory_hoeffding(std::size_t dim, double g, std::size_t n, std::size_t horizon,
                     std::size_t trials, std::uint64_t seed, const std::string& out_dir,
                     bool zero_variance) {
    write_invocation(out_dir, json{{"subcommand", "theory hoeffding"},
                                   {"dim", dim},
                                   {"g", g},
                                   {"n", n},
                                   {"horizon", horizon},
                                   {"trials", trials},
                                   {"seed", seed},
                                   {"zero_variance", zero_variance}});
    // independent blocks give a cumulative trace of the violation rate
    const std::size_t blocks = 10;
    const std::size_t per_block = std::max<std::size_t>(1, trials / blocks);
    std::ofstream os(fs::path(out_dir) / "hoeffding.csv");
    os << "trials,violations,violation_rate,epsilon,bound\n";
    std::size_t done = 0, violations = 0;
    double epsilon = 0.0, bound = 0.0, rate = 0.0;
    for (std::size_t b = 0; b < blocks && done < trials; ++b) {
        const std::size_t batch = std::min(per_block, trials - done);
        const auto result = theory::hoeffding_trial(dim, g, n, horizon, batch,
                                                    mix_seed(seed, b), zero_variance);
        done += batch;
        violations += result.violations;
        epsilon = result.epsilon;
        bound = result.bound;
        rate = static_cast<double>(violations) / static_cast<double>(done);
        os << done << "," << violations << "," << rate << "," << epsilon << "," << bound << "\n";
    }
    const bool pass = rate <= bound;
    std::cout << "hoeffding: violation_rate=" << rate << " bound=" << bound << " -> "
              << (pass ? "PASS" : "FAIL") << "\n";
    return pass ? 0 : 1;
}

int theory_theorem1(std::size_t trials, std::size_t max_dim, std::size_t steps, double eta_scale,
                    double bias_max, std::uint64_t seed, const std::string& out_dir) {
    if (eta_scale > 1.0)
        throw std::invalid_argument("theorem1: eta_scale > 1 puts eta above 1/beta; refused");
    write_invocation(out_dir, json{{"subcommand", "theory theorem1"},
                                   {"trials", trials},
                                   {"max_dim", max_dim},
                                   {"steps", steps},
                                   {"eta_scale", eta_scale},
                                   {"bias_max", bias_max},
                                   {"seed", seed}});
    std::ofstream os(fs::path(out_dir) / "theorem1.csv");
    os << "trial,dim,beta,eta,holds,final_inf_grad_norm_sq,final_bound\n";
    bool all_hold = true;
    for (std::size_t i = 0; i < trials; ++i) {
        Rng rng(mix_seed(seed, i));
        const std::size_t dim = 2 + rng.below(max_dim - 1);
        const auto problem = theory::QuadraticProblem::random(dim, mix_seed(seed, 1000 + i));
        Vec w1(dim, 0.0);
        for (double& x : w1) x = rng.normal();
        std::vector<double> bias(steps, 0.0);
        for (double& b : bias) b = rng.uniform(0.0, bias_max);
        const double eta = eta_scale / problem.smoothness();
        const auto trace = theory::biased_gd_trace(problem, w1, bias, eta, mix_seed(seed, 2000 + i));
        all_hold = all_hold && trace.holds;
        os << i << "," << dim << "," << problem.smoothness() << "," << eta << "," << trace.holds
           << "," << trace.inf_grad_norm_sq.back() << "," << trace.prefix_bound.back() << "\n";
    }
    std::cout << "theorem1: " << trials << " quadratics, prefix inequality "
              << (all_hold ? "holds everywhere -> PASS" : "VIOLATED -> FAIL") << "\n";
    return all_hold ? 0 : 1;
}

int theory_regret(std::size_t arms, std::size_t dim, double alpha, std::size_t delta_n,
                  std::size_t rounds, std::size_t seeds, std::uint64_t seed,
                  const std::string& out_dir) {
    const auto problem = theory::GradientArmProblem::random(arms, dim, 0.7, 0.3, 5, seed);
    const auto trace = theory::regret_sim(problem, alpha, delta_n, rounds, seeds, seed + 1);
    write_invocation(out_dir, json{{"subcommand", "theory regret"},
                                   {"arms", arms},
                                   {"dim", dim},
                                   {"alpha", alpha},
                                   {"delta_n", delta_n},
                                   {"rounds", rounds},
                                   {"seeds", seeds},
                                   {"seed", seed}});
    std::ofstream os(fs::path(out_dir) / "regret.csv");
    os << "t,mean_regret,mean_count_ratio,max_count_ratio\n";
    for (std::size_t t = 0; t < trace.mean_regret.size(); ++t)
        os << t + 1 << "," << trace.mean_regret[t] << "," << trace.mean_count_ratio[t] << ","
           << trace.max_count_ratio[t] << "\n";
    const auto summary = theory::regret_decay_summary(trace, 10, 3.0, -0.3);
    std::cout << "regret: early(t=10)=" << summary.early << " late(t=" << rounds
              << ")=" << summary.late << " factor=" << summary.decay_factor
              << " slope=" << summary.slope << " -> " << (summary.pass ? "PASS" : "FAIL") << "\n";
    return summary.pass ? 0 : 1;
}

int theory_cb_compare(double alpha, std::size_t delta_n, std::size_t rounds, std::size_t seeds,
                      std::uint64_t seed, const std::string& out_dir) {
    const auto problem = theory::FixedShiftingProblem::adversarial();
    if (alpha <= 0.0) alpha = bandit::theoretical_alpha(1, 1.0, rounds);
    const auto cmp = theory::confidence_bound_compare(problem, alpha, delta_n, rounds, seeds, seed);
    write_invocation(out_dir, json{{"subcommand", "theory cb-compare"},
                                   {"alpha", alpha},
                                   {"delta_n", delta_n},
                                   {"rounds", rounds},
                                   {"seeds", seeds},
                                   {"seed", seed}});
    std::ofstream os(fs::path(out_dir) / "cb_compare.csv");
    os << "t,relaxed_mean_ratio,relaxed_max_ratio,tight_mean_ratio,tight_max_ratio\n";
    for (std::size_t t = 0; t < rounds; ++t)
        os << t + 1 << "," << cmp.relaxed.mean_count_ratio[t] << ","
           << cmp.relaxed.max_count_ratio[t] << "," << cmp.tight.mean_count_ratio[t] << ","
           << cmp.tight.max_count_ratio[t] << "\n";

    const double relaxed_peak =
        *std::max_element(cmp.relaxed.max_count_ratio.begin(), cmp.relaxed.max_count_ratio.end());
    const double tight_final = cmp.tight.mean_count_ratio.back();
    const double tight_half = cmp.tight.mean_count_ratio[rounds / 2 - 1];
    const bool bounded = relaxed_peak <= 20.0;
    const bool growing = tight_final >= 1.5 * tight_half && tight_final >= 3.0 * relaxed_peak;
    std::cout << "cb-compare: relaxed_peak_ratio=" << relaxed_peak
              << " tight_ratio(T/2)=" << tight_half << " tight_ratio(T)=" << tight_final << " -> "
              << (bounded && growing ? "PASS" : "FAIL") << "\n";
    return bounded && growing ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"calibrates frozen embedding models with bandit-driven data augmentation"};
    app.require_subcommand(1);

    // train
    auto* train_cmd = app.add_subcommand("train", "run the calibration round loop");
    std::string config_path, out_dir = "run_out";
    std::optional<std::uint64_t> seed;
    std::optional<std::string> mode, emb_endpoint, emb_model, gen_endpoint, gen_model;
    std::optional<double> alpha;
    std::optional<long> delta_n, aug_rounds;
    train_cmd->add_option("--config", config_path, "config JSON path")->required();
    train_cmd->add_option("--out", out_dir, "output directory");
    train_cmd->add_option("--seed", seed, "override the run seed");
    train_cmd->add_option("--mode", mode, "override mode (adamab|random_aug|init_only)");
    train_cmd->add_option("--alpha", alpha, "override the exploration constant");
    train_cmd->add_option("--delta-n", delta_n, "override samples generated per round");
    train_cmd->add_option("--aug-rounds", aug_rounds, "override the augmentation round count");
    train_cmd->add_option("--embedder-endpoint", emb_endpoint, "override embedder endpoint");
    train_cmd->add_option("--embedder-model", emb_model, "override embedder model");
    train_cmd->add_option("--generator-endpoint", gen_endpoint, "override generator endpoint");
    train_cmd->add_option("--generator-model", gen_model, "override generator model");

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on labeled records");
    std::string ckpt_path, labels_path, test_path, eval_out;
    eval_cmd->add_option("--checkpoint", ckpt_path, "checkpoint path")->required();
    eval_cmd->add_option("--labels", labels_path, "label file")->required();
    eval_cmd->add_option("--test", test_path, "test record file")->required();
    eval_cmd->add_option("--out", eval_out, "directory for confusion.csv");

    // export-plots
    auto* export_cmd = app.add_subcommand("export-plots", "flatten metrics streams to CSV");
    std::vector<std::string> run_inputs;
    std::string export_out;
    export_cmd->add_option("--runs", run_inputs, "run directories (or parents of runs)")
        ->required();
    export_cmd->add_option("--out", export_out, "output directory")->required();

    // theory
    auto* theory_cmd = app.add_subcommand("theory", "empirical convergence checks");
    theory_cmd->require_subcommand(1);
    std::string theory_out = "theory_out";
    std::uint64_t theory_seed = 42;

    auto* hoeffding_cmd = theory_cmd->add_subcommand("hoeffding", "vector concentration trial");
    std::size_t h_dim = 4, h_n = 50, h_horizon = 5, h_trials = 100000;
    double h_g = 1.0;
    bool h_zero_variance = false;
    hoeffding_cmd->add_option("--dim", h_dim);
    hoeffding_cmd->add_option("--g", h_g);
    hoeffding_cmd->add_option("--n", h_n);
    hoeffding_cmd->add_option("--horizon", h_horizon);
    hoeffding_cmd->add_option("--trials", h_trials);
    hoeffding_cmd->add_option("--seed", theory_seed);
    hoeffding_cmd->add_option("--out", theory_out);
    hoeffding_cmd->add_flag("--zero-variance", h_zero_variance);

    auto* theorem1_cmd = theory_cmd->add_subcommand("theorem1", "biased descent prefix bound");
    std::size_t t1_trials = 20, t1_max_dim = 16, t1_steps = 1000;
    double t1_eta_scale = 1.0, t1_bias_max = 1.0;
    theorem1_cmd->add_option("--trials", t1_trials);
    theorem1_cmd->add_option("--max-dim", t1_max_dim);
    theorem1_cmd->add_option("--steps", t1_steps);
    theorem1_cmd->add_option("--eta-scale", t1_eta_scale, "eta as a fraction of 1/beta");
    theorem1_cmd->add_option("--bias-max", t1_bias_max);
    theorem1_cmd->add_option("--seed", theory_seed);
    theorem1_cmd->add_option("--out", theory_out);

    auto* regret_cmd = theory_cmd->add_subcommand("regret", "policy regret decay");
    std::size_t r_arms = 6, r_dim = 4, r_delta_n = 1, r_rounds = 1000, r_seeds = 50;
    double r_alpha = 100.0;
    regret_cmd->add_option("--arms", r_arms);
    regret_cmd->add_option("--dim", r_dim);
    regret_cmd->add_option("--alpha", r_alpha);
    regret_cmd->add_option("--delta-n", r_delta_n);
    regret_cmd->add_option("--rounds", r_rounds);
    regret_cmd->add_option("--seeds", r_seeds);
    regret_cmd->add_option("--seed", theory_seed);
    regret_cmd->add_option("--out", theory_out);

    auto* cb_cmd = theory_cmd->add_subcommand("cb-compare", "relaxed vs tight bound contrast");
    std::size_t cb_delta_n = 1, cb_rounds = 1000, cb_seeds = 20;
    double cb_alpha = 0.0;  // 0 = use the theoretical value
    cb_cmd->add_option("--alpha", cb_alpha, "0 picks the analysis value");
    cb_cmd->add_option("--delta-n", cb_delta_n);
    cb_cmd->add_option("--rounds", cb_rounds);
    cb_cmd->add_option("--seeds", cb_seeds);
    cb_cmd->add_option("--seed", theory_seed);
    cb_cmd->add_option("--out", theory_out);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (train_cmd->parsed())
            return cmd_train(config_path, out_dir, seed, mode, alpha, delta_n, aug_rounds,
                             emb_endpoint, emb_model, gen_endpoint, gen_model);
        if (eval_cmd->parsed()) return cmd_eval(ckpt_path, labels_path, test_path, eval_out);
        if (export_cmd->parsed()) return cmd_export_plots(run_inputs, export_out);
        if (theory_cmd->parsed()) {
            if (hoeffding_cmd->parsed())
                return theory_hoeffding(h_dim, h_g, h_n, h_horizon, h_trials, theory_seed,
                                        theory_out, h_zero_variance);
            if (theorem1_cmd->parsed())
                return theory_theorem1(t1_trials, t1_max_dim, t1_steps, t1_eta_scale, t1_bias_max,
                                       theory_seed, theory_out);
            if (regret_cmd->parsed())
                return theory_regret(r_arms, r_dim, r_alpha, r_delta_n, r_rounds, r_seeds,
                                     theory_seed, theory_out);
            if (cb_cmd->parsed())
                return theory_cb_compare(cb_alpha, cb_delta_n, cb_rounds, cb_seeds, theory_seed,
                                         theory_out);
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const ProviderError& e) {
        std::cerr << "provider error: " << e.what() << "\n";
        return 3;
    } catch (const std::invalid_argument& e) {
        std::cerr << "invalid argument: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 2;
}
