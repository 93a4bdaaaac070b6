#include "adamab/trainer.hpp"

#include <chrono>
#include <cmath>

#include "json.hpp"

namespace adamab::train {

using nlohmann::json;

std::string mode_name(Mode mode) {
    switch (mode) {
        case Mode::adamab: return "adamab";
        case Mode::random_aug: return "random_aug";
        case Mode::init_only: return "init_only";
    }
    throw std::logic_error("mode_name: unreachable");
}

Mode mode_from_name(const std::string& name) {
    if (name == "adamab") return Mode::adamab;
    if (name == "random_aug") return Mode::random_aug;
    if (name == "init_only") return Mode::init_only;
    throw ConfigError("unknown mode '" + name + "' (expected adamab|random_aug|init_only)");
}

void TrainConfig::validate() const {
    if (rounds < 1) throw ConfigError("config: rounds must be >= 1");
    if (aug_rounds < 0 || aug_rounds > rounds)
        throw ConfigError("config: aug_rounds must lie in [0, rounds]");
    if (mode != Mode::init_only && delta_n < 1)
        throw ConfigError("config: delta_n must be >= 1 unless mode is init_only");
    if (batch_size < 1) throw ConfigError("config: batch_size must be >= 1");
    if (lr0 <= 0.0) throw ConfigError("config: lr0 must be > 0");
    if (resolved_lr_final() <= 0.0 || resolved_lr_final() > lr0)
        throw ConfigError("config: lr_final must lie in (0, lr0]");
    if (weight_decay < 0.0) throw ConfigError("config: weight_decay must be >= 0");
    if (alpha < 0.0) throw ConfigError("config: alpha must be >= 0");
    if (eval_stride < 0) throw ConfigError("config: eval_stride must be >= 0");
}

namespace {

// sub-stream tags carved out of the run seed
constexpr std::uint64_t kTagInit = 101;
constexpr std::uint64_t kTagShuffle = 102;
constexpr std::uint64_t kTagGenerate = 103;
constexpr std::uint64_t kTagRandomClass = 104;

// Mean gradient and loss over the whole store at the current parameters.
double full_gradient(const calib::CalibratorPair& pair, const data::ClassDataset& ds,
                     const calib::LabelSet& labels, Vec& grad_out) {
    grad_out.assign(pair.param_count(), 0.0);
    const calib::LabelActivations acts = calib::calibrate_labels(pair, labels);
    const double scale = 1.0 / static_cast<double>(ds.size());
    double loss_sum = 0.0;
    for (const data::Sample& s : ds.samples())
        loss_sum += calib::sample_gradient_accumulate(pair, s.embedding, s.label, labels, acts,
                                                      scale, grad_out.data());
    return loss_sum / static_cast<double>(ds.size());
}

// One epoch of seeded minibatch Adam. Returns the mean per-sample loss seen
// during the epoch.
double run_epoch(calib::CalibratorPair& pair, const data::ClassDataset& ds,
                 const calib::LabelSet& labels, const TrainConfig& config, long round,
                 nn::AdamState& opt, double lr) {
    const auto batches =
        ds.minibatches(config.batch_size, mix_seed(config.seed, kTagShuffle), round);
    Vec params = pair.flat_params();
    Vec grad(pair.param_count(), 0.0);
    double loss_sum = 0.0;
    for (const auto& batch : batches) {
        const calib::LabelActivations acts = calib::calibrate_labels(pair, labels);
        grad.assign(grad.size(), 0.0);
        const double scale = 1.0 / static_cast<double>(batch.size());
        for (long id : batch) {
            const data::Sample& s = ds.sample(id);
            loss_sum += calib::sample_gradient_accumulate(pair, s.embedding, s.label, labels,
                                                          acts, scale, grad.data());
        }
        nn::adam_step(params, grad, opt, lr);
        pair.set_flat_params(params);
    }
    return loss_sum / static_cast<double>(ds.size());
}

std::vector<Vec> materialize_embeddings(const providers::GeneratedBatch& batch,
                                        providers::Embedder* embedder,
                                        std::vector<std::string>* generated_texts) {
    if (batch.is_embeddings()) return batch.embeddings;
    if (embedder == nullptr)
        throw ConfigError("generator emits raw items but no embedder is configured");
    if (generated_texts != nullptr)
        generated_texts->insert(generated_texts->end(), batch.items.begin(), batch.items.end());
    return embedder->embed_batch(batch.items);
}

}  // namespace

TrainResult run(const TrainConfig& config, const data::ClassDataset& initial,
                const calib::LabelSet& labels, providers::Generator* generator,
                providers::Embedder* embedder, const std::vector<data::Record>* eval_records,
                const RunHooks& hooks) {
    config.validate();
    if (initial.num_classes() != static_cast<int>(labels.size()))
        throw ConfigError("dataset and label set disagree on the number of classes");
    if (initial.embed_dim() != labels.embed_dim())
        throw ConfigError("dataset and label set disagree on the embedding dimension");
    const bool augmenting = config.mode != Mode::init_only && config.aug_rounds > 0;
    if (augmenting && generator == nullptr)
        throw ConfigError("mode " + mode_name(config.mode) + " needs a generator");

    data::ClassDataset ds = initial;
    calib::CalibratorPair pair =
        calib::CalibratorPair::make(initial.embed_dim(), mix_seed(config.seed, kTagInit));
    nn::AdamState opt(pair.param_count(), config.weight_decay);
    const nn::CosineSchedule schedule(config.lr0, config.resolved_lr_final(), config.rounds);
    Rng class_rng(mix_seed(config.seed, kTagRandomClass));
    // raw items produced by a generative source, fed back into later prompts
    std::vector<std::vector<std::string>> generated_texts(labels.size());

    TrainResult result{std::move(pair), initial, {}, 0, 0, std::nullopt};
    result.rounds.reserve(static_cast<std::size_t>(config.rounds));

    for (long t = 1; t <= config.rounds; ++t) {
        const auto start = std::chrono::steady_clock::now();
        RoundLog log;
        log.round = t;
        log.mode = config.mode;
        log.lr = schedule.lr_at(t - 1);

        std::optional<bandit::GradientSnapshot> snap;
        try {
            if (augmenting && t <= config.aug_rounds) {
                int chosen = 0;
                if (config.mode == Mode::adamab) {
                    snap = bandit::snapshot_gradients(result.pair, ds, labels);
                    log.acquisition = bandit::select_class(*snap, config.alpha, config.delta_n);
                    chosen = log.acquisition->chosen_class;
                } else {
                    chosen = static_cast<int>(class_rng.below(labels.size())) + 1;
                }
                log.chosen_class = chosen;

                const auto batch = generator->generate(
                    chosen, config.delta_n, mix_seed(mix_seed(config.seed, kTagGenerate),
                                                     static_cast<std::uint64_t>(t)),
                    generated_texts[static_cast<std::size_t>(chosen - 1)]);
                result.generator_calls++;
                const auto embeddings = materialize_embeddings(
                    batch, embedder, &generated_texts[static_cast<std::size_t>(chosen - 1)]);
                ds.augment(chosen, embeddings, t);
                result.synthetic_samples += embeddings.size();
            }
        } catch (const ProviderError&) {
            if (hooks.on_abort) hooks.on_abort(t, result.pair, ds, opt);
            throw;
        }

        if (config.full_batch) {
            Vec grad;
            double mean_loss = 0.0;
            if (snap.has_value() && ds.size() > snap->total) {
                // reuse the snapshot aggregates for the pre-augmentation part
                grad.assign(result.pair.param_count(), 0.0);
                const calib::LabelActivations acts = calib::calibrate_labels(result.pair, labels);
                double new_loss = 0.0;
                for (std::size_t id = snap->total; id < ds.size(); ++id) {
                    const data::Sample& s = ds.sample(static_cast<long>(id));
                    new_loss += calib::sample_gradient_accumulate(
                        result.pair, s.embedding, s.label, labels, acts, 1.0, grad.data());
                }
                const double n_new = static_cast<double>(ds.size());
                const double n_old = static_cast<double>(snap->total);
                for (std::size_t i = 0; i < grad.size(); ++i)
                    grad[i] = (n_old * snap->dataset_gradient[i] + grad[i]) / n_new;
                mean_loss = (n_old * snap->mean_loss + new_loss) / n_new;
            } else if (snap.has_value()) {
                grad = snap->dataset_gradient;
                mean_loss = snap->mean_loss;
            } else {
                mean_loss = full_gradient(result.pair, ds, labels, grad);
            }
            Vec params = result.pair.flat_params();
            nn::adam_step(params, grad, opt, log.lr);
            result.pair.set_flat_params(params);
            log.train_loss = mean_loss;
        } else {
            log.train_loss = run_epoch(result.pair, ds, labels, config, t, opt, log.lr);
        }

        log.n = ds.size();
        log.counts = ds.counts();
        log.max_count_ratio = ds.max_count_ratio();
        if (eval_records != nullptr &&
            ((config.eval_stride > 0 && t % config.eval_stride == 0) || t == config.rounds)) {
            const EvalResult eval = evaluate(result.pair, *eval_records, labels);
            log.accuracy = eval.accuracy;
            if (t == config.rounds) result.final_accuracy = eval.accuracy;
        }
        log.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                                start)
                          .count();
        if (hooks.emit) hooks.emit(log);
        result.rounds.push_back(std::move(log));
    }
    result.dataset = std::move(ds);
    return result;
}

EvalResult evaluate(const calib::CalibratorPair& pair, const std::vector<data::Record>& test,
                    const calib::LabelSet& labels) {
    if (test.empty()) throw std::invalid_argument("evaluate: empty test set");
    const int k = static_cast<int>(labels.size());
    EvalResult result;
    result.confusion.assign(static_cast<std::size_t>(k),
                            std::vector<std::size_t>(static_cast<std::size_t>(k), 0));
    const calib::LabelActivations acts = calib::calibrate_labels(pair, labels);
    for (const data::Record& rec : test) {
        if (rec.label < 1 || rec.label > k)
            throw std::invalid_argument("evaluate: unknown class " + std::to_string(rec.label) +
                                        " in test data");
        const int pred = calib::score_cached(pair, rec.embedding, acts).predicted_class;
        result.total++;
        if (pred == rec.label) result.correct++;
        result.confusion[static_cast<std::size_t>(rec.label - 1)]
                        [static_cast<std::size_t>(pred - 1)]++;
    }
    result.accuracy = static_cast<double>(result.correct) / static_cast<double>(result.total);
    return result;
}

std::string round_log_to_json(const RoundLog& log) {
    json j;
    j["t"] = log.round;
    j["mode"] = mode_name(log.mode);
    j["lr"] = log.lr;
    j["loss"] = log.train_loss;
    if (log.accuracy.has_value())
        j["accuracy"] = *log.accuracy;
    else
        j["accuracy"] = nullptr;
    j["n"] = log.n;
    j["counts"] = log.counts;
    j["max_count_ratio"] = log.max_count_ratio;
    if (log.chosen_class.has_value())
        j["chosen_class"] = *log.chosen_class;
    else
        j["chosen_class"] = nullptr;
    if (log.acquisition.has_value()) {
        const auto& rep = *log.acquisition;
        json a;
        a["alpha"] = rep.alpha;
        a["delta_n"] = rep.delta_n;
        a["n_prev"] = rep.n_prev;
        a["counts_prev"] = rep.counts_prev;
        a["shifting"] = rep.shifting;
        a["bonus"] = rep.bonus;
        a["score"] = rep.score;
        a["chosen_class"] = rep.chosen_class;
        j["acquisition"] = a;
    } else {
        j["acquisition"] = nullptr;
    }
    return j.dump();
}

}  // namespace adamab::train
