#include "adamab/calibrator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace adamab::calib {

LabelSet::LabelSet(std::vector<LabelDef> labels) : labels_(std::move(labels)) {
    if (labels_.empty()) throw std::invalid_argument("LabelSet: empty");
    const std::size_t dim = labels_.front().embedding.size();
    for (std::size_t i = 0; i < labels_.size(); ++i) {
        if (labels_[i].class_id != static_cast<int>(i) + 1)
            throw std::invalid_argument("LabelSet: class ids must be exactly 1..K in order, got " +
                                        std::to_string(labels_[i].class_id) + " at position " +
                                        std::to_string(i));
        check_dim(labels_[i].embedding.size(), dim, "LabelSet embedding");
    }
}

CalibratorPair::CalibratorPair(nn::MlpNetwork query_net, nn::MlpNetwork label_net)
    : query_net_(std::move(query_net)), label_net_(std::move(label_net)) {
    if (query_net_.input_dim() != query_net_.output_dim() ||
        label_net_.input_dim() != label_net_.output_dim() ||
        query_net_.input_dim() != label_net_.input_dim())
        throw std::invalid_argument(
            "CalibratorPair: both nets must map embed_dim -> embed_dim over the same dim");
}

CalibratorPair CalibratorPair::make(std::size_t embed_dim, std::uint64_t seed) {
    Rng rng_q(mix_seed(seed, 0xca11b0d1));
    Rng rng_p(mix_seed(seed, 0xca11b0d2));
    return CalibratorPair(nn::MlpNetwork::calibrator_body(embed_dim, rng_q),
                          nn::MlpNetwork::calibrator_body(embed_dim, rng_p));
}

Vec CalibratorPair::flat_params() const {
    Vec flat = query_net_.flat_params();
    const Vec phi = label_net_.flat_params();
    flat.insert(flat.end(), phi.begin(), phi.end());
    return flat;
}

void CalibratorPair::set_flat_params(const Vec& flat) {
    check_dim(flat.size(), param_count(), "CalibratorPair::set_flat_params");
    Vec psi(flat.begin(), flat.begin() + query_net_.param_count());
    Vec phi(flat.begin() + query_net_.param_count(), flat.end());
    query_net_.set_flat_params(psi);
    label_net_.set_flat_params(phi);
}

namespace {

Vec residual_output(const Vec& input, const nn::ForwardTape& tape) {
    Vec out = tape.output;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += input[i];
    return out;
}

}  // namespace

Vec CalibratorPair::calibrate_query(const Vec& query_embedding) const {
    check_dim(query_embedding.size(), embed_dim(), "calibrate_query");
    return residual_output(query_embedding, query_net_.forward(query_embedding));
}

Vec CalibratorPair::calibrate_label(const Vec& label_embedding) const {
    check_dim(label_embedding.size(), embed_dim(), "calibrate_label");
    return residual_output(label_embedding, label_net_.forward(label_embedding));
}

LabelActivations calibrate_labels(const CalibratorPair& pair, const LabelSet& labels) {
    check_dim(labels.embed_dim(), pair.embed_dim(), "calibrate_labels");
    LabelActivations acts;
    acts.tapes.reserve(labels.size());
    acts.calibrated.reserve(labels.size());
    for (const LabelDef& def : labels.all()) {
        nn::ForwardTape tape = pair.label_net().forward(def.embedding);
        acts.calibrated.push_back(residual_output(def.embedding, tape));
        acts.tapes.push_back(std::move(tape));
    }
    return acts;
}

namespace {

void require_multiclass(const LabelSet& labels) {
    if (labels.size() < 2) throw std::invalid_argument("need at least 2 classes");
}

// softmax over inner products of calibrated embeddings, max-subtracted
ScoredPrediction softmax_scores(const Vec& calibrated_query, const std::vector<Vec>& calibrated_labels) {
    const std::size_t k = calibrated_labels.size();
    Vec logits(k, 0.0);
    for (std::size_t c = 0; c < k; ++c) logits[c] = dot(calibrated_query, calibrated_labels[c]);
    const double zmax = *std::max_element(logits.begin(), logits.end());
    ScoredPrediction pred;
    pred.scores.assign(k, 0.0);
    double total = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
        pred.scores[c] = std::exp(logits[c] - zmax);
        total += pred.scores[c];
    }
    for (double& s : pred.scores) s /= total;
    pred.predicted_class = 1;
    for (std::size_t c = 1; c < k; ++c)
        if (pred.scores[c] > pred.scores[pred.predicted_class - 1])
            pred.predicted_class = static_cast<int>(c) + 1;
    return pred;
}

constexpr double kProbFloor = 1e-300;

void check_label(int label, const LabelSet& labels) {
    if (label < 1 || label > static_cast<int>(labels.size()))
        throw std::invalid_argument("label " + std::to_string(label) + " outside 1.." +
                                    std::to_string(labels.size()));
}

}  // namespace

ScoredPrediction score_cached(const CalibratorPair& pair, const Vec& query_embedding,
                              const LabelActivations& acts) {
    if (acts.calibrated.size() < 2) throw std::invalid_argument("need at least 2 classes");
    if (acts.tapes.front().param_version != pair.label_net().param_version())
        throw std::runtime_error(
            "score_cached: stale label activations (parameters changed since calibrate_labels)");
    return softmax_scores(pair.calibrate_query(query_embedding), acts.calibrated);
}

ScoredPrediction score(const CalibratorPair& pair, const Vec& query_embedding,
                       const LabelSet& labels) {
    require_multiclass(labels);
    return score_cached(pair, query_embedding, calibrate_labels(pair, labels));
}

double loss(const CalibratorPair& pair, const Vec& query_embedding, int label,
            const LabelSet& labels) {
    check_label(label, labels);
    const ScoredPrediction pred = score(pair, query_embedding, labels);
    return -std::log(std::max(pred.scores[label - 1], kProbFloor));
}

int predict(const CalibratorPair& pair, const Vec& query_embedding, const LabelSet& labels) {
    return score(pair, query_embedding, labels).predicted_class;
}

double sample_gradient_accumulate(const CalibratorPair& pair, const Vec& query_embedding,
                                  int label, const LabelSet& labels,
                                  const LabelActivations& acts, double scale, double* accum) {
    require_multiclass(labels);
    check_label(label, labels);
    const std::size_t k = labels.size();
    const std::size_t d = pair.embed_dim();

    const nn::ForwardTape tape_q = pair.query_net().forward(query_embedding);
    Vec cal_q = tape_q.output;
    for (std::size_t i = 0; i < d; ++i) cal_q[i] += query_embedding[i];

    const ScoredPrediction pred = softmax_scores(cal_q, acts.calibrated);
    const double sample_loss = -std::log(std::max(pred.scores[label - 1], kProbFloor));

    // dz_C = p_C - [C == y]; the residual passes upstream gradients through
    // unchanged, so dq_tilde feeds Q's backward directly.
    Vec dq(d, 0.0);
    for (std::size_t c = 0; c < k; ++c) {
        const double dz = pred.scores[c] - (static_cast<int>(c) + 1 == label ? 1.0 : 0.0);
        const Vec& lab = acts.calibrated[c];
        for (std::size_t i = 0; i < d; ++i) dq[i] += dz * lab[i];
    }
    pair.query_net().backward_accumulate(tape_q, dq, scale, accum, nullptr);

    double* phi_accum = accum + pair.query_param_count();
    Vec dl(d, 0.0);
    for (std::size_t c = 0; c < k; ++c) {
        const double dz = pred.scores[c] - (static_cast<int>(c) + 1 == label ? 1.0 : 0.0);
        for (std::size_t i = 0; i < d; ++i) dl[i] = dz * cal_q[i];
        pair.label_net().backward_accumulate(acts.tapes[c], dl, scale, phi_accum, nullptr);
    }
    return sample_loss;
}

Vec sample_gradient(const CalibratorPair& pair, const Vec& query_embedding, int label,
                    const LabelSet& labels) {
    Vec grad(pair.param_count(), 0.0);
    const LabelActivations acts = calibrate_labels(pair, labels);
    sample_gradient_accumulate(pair, query_embedding, label, labels, acts, 1.0, grad.data());
    return grad;
}

namespace {
constexpr const char* kCheckpointMagic = "adamab-checkpoint v1";
}

void save_checkpoint(const CalibratorPair& pair, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open checkpoint for writing: " + path);
    os << kCheckpointMagic << "\n";
    os << "dim " << pair.embed_dim() << "\n";
    pair.query_net().write(os);
    pair.label_net().write(os);
    if (!os) throw std::runtime_error("checkpoint write failed: " + path);
}

CalibratorPair load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open checkpoint: " + path);
    std::string magic;
    std::getline(is, magic);
    if (magic != kCheckpointMagic)
        throw std::runtime_error("checkpoint: unsupported header '" + magic + "' in " + path);
    std::string tok;
    std::size_t dim = 0;
    is >> tok >> dim;
    if (tok != "dim" || dim == 0) throw std::runtime_error("checkpoint: bad dim line in " + path);
    is.ignore();
    nn::MlpNetwork q = nn::MlpNetwork::read(is);
    nn::MlpNetwork p = nn::MlpNetwork::read(is);
    CalibratorPair pair(std::move(q), std::move(p));
    if (pair.embed_dim() != dim)
        throw std::runtime_error("checkpoint: dim header disagrees with layer shapes in " + path);
    return pair;
}

}  // namespace adamab::calib
