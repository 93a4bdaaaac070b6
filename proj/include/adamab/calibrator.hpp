#pragma once

// Residual calibrator pair over a frozen embedder: a query net Q and a label
// net P, the inner-product matching score with softmax, the cross-entropy
// loss, and exact per-sample gradients over the joint parameter vector.

#include <cstdint>
#include <string>
#include <vector>

#include "adamab/common.hpp"
#include "adamab/tensor_nn.hpp"

namespace adamab::calib {

struct LabelDef {
    int class_id = 0;  // 1..K
    std::string name;
    std::string description;
    Vec embedding;  // frozen embedder output for the label text
};

// Ordered label catalog. Class ids must be exactly 1..K with no gaps.
class LabelSet {
public:
    explicit LabelSet(std::vector<LabelDef> labels);

    std::size_t size() const { return labels_.size(); }  // K
    std::size_t embed_dim() const { return labels_.front().embedding.size(); }
    const LabelDef& label(int class_id) const { return labels_.at(class_id - 1); }
    const std::vector<LabelDef>& all() const { return labels_; }

private:
    std::vector<LabelDef> labels_;
};

struct ScoredPrediction {
    Vec scores;              // softmax probabilities, one per class
    int predicted_class = 0;  // 1-based; ties break to the lowest class id
};

// Trainable parameters w = {psi, phi}. Flat layout: psi (query net) first,
// then phi (label net); each net uses the MlpNetwork flattening.
class CalibratorPair {
public:
    CalibratorPair(nn::MlpNetwork query_net, nn::MlpNetwork label_net);

    // Standard construction: two calibrator bodies over embed_dim, with
    // independent init streams derived from seed.
    static CalibratorPair make(std::size_t embed_dim, std::uint64_t seed);

    std::size_t embed_dim() const { return query_net_.input_dim(); }
    const nn::MlpNetwork& query_net() const { return query_net_; }
    const nn::MlpNetwork& label_net() const { return label_net_; }
    nn::MlpNetwork& mutable_query_net() { return query_net_; }
    nn::MlpNetwork& mutable_label_net() { return label_net_; }

    std::size_t param_count() const { return query_net_.param_count() + label_net_.param_count(); }
    std::size_t query_param_count() const { return query_net_.param_count(); }
    Vec flat_params() const;
    void set_flat_params(const Vec& flat);

    // e(q) + Q(e(q); psi)
    Vec calibrate_query(const Vec& query_embedding) const;
    // e(p) + P(e(p); phi)
    Vec calibrate_label(const Vec& label_embedding) const;

private:
    nn::MlpNetwork query_net_;
    nn::MlpNetwork label_net_;
};

// Calibrated label embeddings plus the tapes needed to backprop through P.
// Computed once per parameter state and reused across samples; stale use is
// rejected through the tape version check.
struct LabelActivations {
    std::vector<nn::ForwardTape> tapes;
    std::vector<Vec> calibrated;
};

LabelActivations calibrate_labels(const CalibratorPair& pair, const LabelSet& labels);

ScoredPrediction score(const CalibratorPair& pair, const Vec& query_embedding,
                       const LabelSet& labels);
ScoredPrediction score_cached(const CalibratorPair& pair, const Vec& query_embedding,
                              const LabelActivations& acts);

// Cross-entropy: -log(scores[y]), with the probability clamped below at
// 1e-300 before the log.
double loss(const CalibratorPair& pair, const Vec& query_embedding, int label,
            const LabelSet& labels);

int predict(const CalibratorPair& pair, const Vec& query_embedding, const LabelSet& labels);

// Exact gradient of the per-sample loss over w = {psi, phi}, including the
// softmax coupling of every label through the denominator.
Vec sample_gradient(const CalibratorPair& pair, const Vec& query_embedding, int label,
                    const LabelSet& labels);

// Hot path: accumulates scale * gradient into accum (sized param_count()).
// Returns the sample loss.
double sample_gradient_accumulate(const CalibratorPair& pair, const Vec& query_embedding,
                                  int label, const LabelSet& labels,
                                  const LabelActivations& acts, double scale, double* accum);

// Versioned checkpoint, bit-exact round trip.
void save_checkpoint(const CalibratorPair& pair, const std::string& path);
CalibratorPair load_checkpoint(const std::string& path);

}  // namespace adamab::calib
