#pragma once

// Round loop: per-round acquisition snapshot, class selection, generation,
// augmentation, weight update(s), metrics emission. Also the two baselines
// (init-only, uniformly random augmentation) sharing every other code path.

#include <functional>
#include <optional>
#include <string>

#include "adamab/bandit.hpp"
#include "adamab/calibrator.hpp"
#include "adamab/dataset.hpp"
#include "adamab/providers.hpp"

namespace adamab::train {

enum class Mode { adamab, random_aug, init_only };

std::string mode_name(Mode mode);
Mode mode_from_name(const std::string& name);

struct TrainConfig {
    long rounds = 30;       // T
    long aug_rounds = 0;    // augmentation happens in rounds 1..aug_rounds only
    std::size_t delta_n = 1;
    double alpha = 100.0;
    double lr0 = 0.005;
    double lr_final = -1.0;  // < 0 means 0.5 * lr0
    double weight_decay = 1e-4;
    std::size_t batch_size = 32;
    Mode mode = Mode::init_only;
    std::uint64_t seed = 1;
    bool full_batch = false;  // single full-batch Adam step per round
    long eval_stride = 1;     // evaluate every k rounds; 0 = final round only

    double resolved_lr_final() const { return lr_final < 0.0 ? 0.5 * lr0 : lr_final; }
    void validate() const;
};

struct RoundLog {
    long round = 0;
    Mode mode = Mode::init_only;
    double lr = 0.0;
    double train_loss = 0.0;
    std::optional<double> accuracy;
    std::size_t n = 0;
    std::vector<std::size_t> counts;
    double max_count_ratio = 1.0;
    std::optional<int> chosen_class;
    std::optional<bandit::AcquisitionReport> acquisition;
    double wall_ms = 0.0;  // never part of the metrics stream; sidecar only
};

// One metrics-stream line. Deterministic for a deterministic log (wall time
// is deliberately excluded).
std::string round_log_to_json(const RoundLog& log);

struct EvalResult {
    double accuracy = 0.0;
    std::size_t total = 0;
    std::size_t correct = 0;
    std::vector<std::vector<std::size_t>> confusion;  // [true-1][predicted-1]
};

struct TrainResult {
    calib::CalibratorPair pair;
    data::ClassDataset dataset;  // final store, synthetic provenance included
    std::vector<RoundLog> rounds;
    std::size_t generator_calls = 0;
    std::size_t synthetic_samples = 0;
    std::optional<double> final_accuracy;
};

// Hooks into the round loop. emit fires once per round, in order. on_abort
// fires when a provider fails mid-run, right before the error propagates,
// with everything needed to checkpoint and resume.
struct RunHooks {
    std::function<void(const RoundLog&)> emit;
    std::function<void(long round, const calib::CalibratorPair& pair,
                       const data::ClassDataset& dataset, const nn::AdamState& opt)>
        on_abort;
};

// generator may be null for init_only; embedder may be null when the
// generator emits embeddings directly. eval_records, when present, drive the
// per-round accuracy column.
TrainResult run(const TrainConfig& config, const data::ClassDataset& initial,
                const calib::LabelSet& labels, providers::Generator* generator,
                providers::Embedder* embedder,
                const std::vector<data::Record>* eval_records = nullptr,
                const RunHooks& hooks = {});

// Accuracy plus the per-class confusion counts. Test records must be labeled
// with known classes and disjoint from the training samples.
EvalResult evaluate(const calib::CalibratorPair& pair, const std::vector<data::Record>& test,
                    const calib::LabelSet& labels);

}  // namespace adamab::train
