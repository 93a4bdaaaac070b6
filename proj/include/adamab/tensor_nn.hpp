#pragma once

// Minimal dense feed-forward core: explicit forward/backward, Adam with
// L2-coupled weight decay, cosine-annealed learning rate, and a bit-exact
// checkpoint codec. Everything is 64-bit; argmax decisions downstream depend
// on exact reproducibility more than on speed at these sizes.

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "adamab/common.hpp"

namespace adamab::nn {

struct DenseLayer {
    std::size_t in_dim = 0;
    std::size_t out_dim = 0;
    Vec weights;  // out_dim x in_dim, row-major
    Vec biases;   // out_dim
};

// Activation tape from one forward pass. Valid only while the network
// parameters are unchanged (checked via version).
struct ForwardTape {
    std::uint64_t param_version = 0;
    std::vector<Vec> layer_inputs;  // input of each layer
    std::vector<Vec> pre_acts;      // pre-activation of each layer
    Vec output;
};

struct LayerGradient {
    Vec weights;
    Vec biases;
};

struct Gradients {
    std::vector<LayerGradient> layers;
    Vec input;  // gradient w.r.t. the network input
};

// Feed-forward network with ReLU on hidden layers and identity output.
//
// Flat parameter layout (fixed, relied upon by the bandit when comparing
// gradient vectors): layer-major, per layer the weight matrix row-major
// followed by the biases.
class MlpNetwork {
public:
    // dims = {input, layer1_out, ..., layerN_out}; parameters start at zero.
    explicit MlpNetwork(const std::vector<std::size_t>& dims);

    // Calibrator body: widths (d_e/4, d_e/4, d_e) on input dim d_e.
    // Hidden layers get uniform fan-in (Kaiming-style) init; the final layer
    // starts at exactly zero so a residual wrapper is the identity at t=0.
    static MlpNetwork calibrator_body(std::size_t embed_dim, Rng& rng);

    std::size_t input_dim() const { return layers_.front().in_dim; }
    std::size_t output_dim() const { return layers_.back().out_dim; }
    std::size_t layer_count() const { return layers_.size(); }
    const DenseLayer& layer(std::size_t i) const { return layers_.at(i); }
    std::uint64_t param_version() const { return version_; }

    // Replaces one layer's parameters (dims must match). Invalidates tapes.
    void set_layer(std::size_t i, Vec weights, Vec biases);

    // Uniform init of every parameter in [lo, hi). Invalidates tapes.
    void init_uniform(Rng& rng, double lo, double hi);

    std::size_t param_count() const { return param_count_; }
    Vec flat_params() const;
    void set_flat_params(const Vec& flat);

    ForwardTape forward(const Vec& x) const;

    // Chain-rule pass. Throws if the tape is stale (parameters changed since
    // the forward pass that produced it).
    Gradients backward(const ForwardTape& tape, const Vec& upstream) const;

    // Accumulates scale * (parameter gradient) into flat_accum (sized
    // param_count()) without allocating per-layer buffers. input_grad, when
    // non-null, receives the gradient w.r.t. the input (overwritten).
    void backward_accumulate(const ForwardTape& tape, const Vec& upstream, double scale,
                             double* flat_accum, Vec* input_grad) const;

    void write(std::ostream& os) const;
    static MlpNetwork read(std::istream& is);

private:
    void check_tape(const ForwardTape& tape) const;

    std::vector<DenseLayer> layers_;
    std::size_t param_count_ = 0;
    std::uint64_t version_ = 0;
};

struct AdamState {
    Vec m;  // first moment
    Vec v;  // second moment, elementwise >= 0
    long step = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;  // L2-coupled: folded into the gradient

    explicit AdamState(std::size_t dim, double weight_decay_ = 0.0)
        : m(dim, 0.0), v(dim, 0.0), weight_decay(weight_decay_) {}
};

// One Adam update in place. Weight decay is added to the gradient before the
// moment updates; bias correction is applied. Throws on non-finite gradients,
// naming the offending coordinate range.
void adam_step(Vec& params, const Vec& grad, AdamState& state, double lr);

struct CosineSchedule {
    double eta0 = 0.0;
    double etaT = 0.0;
    long total_rounds = 1;

    CosineSchedule(double eta0_, double etaT_, long total_rounds_);

    // eta(t) = etaT + (eta0 - etaT) * (1 + cos(pi t / T)) / 2; t > T clamps to etaT.
    double lr_at(long t) const;
};

// Bit-exact scalar codec used by checkpoints (16 hex digits of the IEEE-754
// pattern).
std::string double_to_hex(double x);
double hex_to_double(const std::string& hex);

}  // namespace adamab::nn
