#include "adamab/tensor_nn.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

namespace adamab::nn {

MlpNetwork::MlpNetwork(const std::vector<std::size_t>& dims) {
    if (dims.size() < 2) throw std::invalid_argument("MlpNetwork: need at least one layer");
    for (std::size_t d : dims)
        if (d == 0) throw std::invalid_argument("MlpNetwork: zero layer width");
    layers_.reserve(dims.size() - 1);
    for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
        DenseLayer layer;
        layer.in_dim = dims[i];
        layer.out_dim = dims[i + 1];
        layer.weights.assign(layer.in_dim * layer.out_dim, 0.0);
        layer.biases.assign(layer.out_dim, 0.0);
        param_count_ += layer.weights.size() + layer.biases.size();
        layers_.push_back(std::move(layer));
    }
}

MlpNetwork MlpNetwork::calibrator_body(std::size_t embed_dim, Rng& rng) {
    const std::size_t hidden = std::max<std::size_t>(1, embed_dim / 4);
    MlpNetwork net({embed_dim, hidden, hidden, embed_dim});
    for (std::size_t i = 0; i + 1 < net.layers_.size(); ++i) {
        DenseLayer& layer = net.layers_[i];
        const double bound = std::sqrt(6.0 / static_cast<double>(layer.in_dim));
        for (double& w : layer.weights) w = rng.uniform(-bound, bound);
    }
    // final layer stays all-zero: the residual starts as the identity
    net.version_++;
    return net;
}

void MlpNetwork::set_layer(std::size_t i, Vec weights, Vec biases) {
    DenseLayer& layer = layers_.at(i);
    check_dim(weights.size(), layer.weights.size(), "set_layer weights");
    check_dim(biases.size(), layer.biases.size(), "set_layer biases");
    layer.weights = std::move(weights);
    layer.biases = std::move(biases);
    version_++;
}

void MlpNetwork::init_uniform(Rng& rng, double lo, double hi) {
    for (DenseLayer& layer : layers_) {
        for (double& w : layer.weights) w = rng.uniform(lo, hi);
        for (double& b : layer.biases) b = rng.uniform(lo, hi);
    }
    version_++;
}

Vec MlpNetwork::flat_params() const {
    Vec flat;
    flat.reserve(param_count_);
    for (const DenseLayer& layer : layers_) {
        flat.insert(flat.end(), layer.weights.begin(), layer.weights.end());
        flat.insert(flat.end(), layer.biases.begin(), layer.biases.end());
    }
    return flat;
}

void MlpNetwork::set_flat_params(const Vec& flat) {
    check_dim(flat.size(), param_count_, "set_flat_params");
    std::size_t off = 0;
    for (DenseLayer& layer : layers_) {
        std::copy_n(flat.begin() + off, layer.weights.size(), layer.weights.begin());
        off += layer.weights.size();
        std::copy_n(flat.begin() + off, layer.biases.size(), layer.biases.begin());
        off += layer.biases.size();
    }
    version_++;
}

ForwardTape MlpNetwork::forward(const Vec& x) const {
    check_dim(x.size(), input_dim(), "forward input");
    ForwardTape tape;
    tape.param_version = version_;
    tape.layer_inputs.reserve(layers_.size());
    tape.pre_acts.reserve(layers_.size());
    Vec act = x;
    for (std::size_t li = 0; li < layers_.size(); ++li) {
        const DenseLayer& layer = layers_[li];
        Vec z(layer.out_dim, 0.0);
        for (std::size_t r = 0; r < layer.out_dim; ++r) {
            const double* row = layer.weights.data() + r * layer.in_dim;
            double s = layer.biases[r];
            for (std::size_t c = 0; c < layer.in_dim; ++c) s += row[c] * act[c];
            z[r] = s;
        }
        tape.layer_inputs.push_back(std::move(act));
        const bool last = (li + 1 == layers_.size());
        if (last) {
            act = z;
        } else {
            act.assign(layer.out_dim, 0.0);
            for (std::size_t r = 0; r < layer.out_dim; ++r) act[r] = z[r] > 0.0 ? z[r] : 0.0;
        }
        tape.pre_acts.push_back(std::move(z));
    }
    tape.output = act;
    return tape;
}

void MlpNetwork::check_tape(const ForwardTape& tape) const {
    if (tape.param_version != version_)
        throw std::runtime_error(
            "MlpNetwork::backward: stale tape (parameters changed since forward)");
}

void MlpNetwork::backward_accumulate(const ForwardTape& tape, const Vec& upstream, double scale,
                                     double* flat_accum, Vec* input_grad) const {
    check_tape(tape);
    check_dim(upstream.size(), output_dim(), "backward upstream");

    Vec delta = upstream;  // gradient w.r.t. the current layer's pre-activation
    std::size_t layer_end = param_count_;
    for (std::size_t li = layers_.size(); li-- > 0;) {
        const DenseLayer& layer = layers_[li];
        const Vec& in = tape.layer_inputs[li];
        const std::size_t off_w = layer_end - layer.biases.size() - layer.weights.size();
        const std::size_t off_b = layer_end - layer.biases.size();
        if (flat_accum != nullptr) {
            for (std::size_t r = 0; r < layer.out_dim; ++r) {
                const double d = delta[r] * scale;
                double* wrow = flat_accum + off_w + r * layer.in_dim;
                for (std::size_t c = 0; c < layer.in_dim; ++c) wrow[c] += d * in[c];
                flat_accum[off_b + r] += d;
            }
        }
        layer_end = off_w;

        const bool need_input = (li > 0) || (input_grad != nullptr);
        if (!need_input) break;
        Vec prev(layer.in_dim, 0.0);
        for (std::size_t r = 0; r < layer.out_dim; ++r) {
            const double d = delta[r];
            const double* row = layer.weights.data() + r * layer.in_dim;
            for (std::size_t c = 0; c < layer.in_dim; ++c) prev[c] += row[c] * d;
        }
        if (li > 0) {
            const Vec& z = tape.pre_acts[li - 1];
            for (std::size_t c = 0; c < layer.in_dim; ++c)
                if (z[c] <= 0.0) prev[c] = 0.0;
        }
        delta = std::move(prev);
    }
    if (input_grad != nullptr) *input_grad = std::move(delta);
}

Gradients MlpNetwork::backward(const ForwardTape& tape, const Vec& upstream) const {
    Vec flat(param_count_, 0.0);
    Gradients grads;
    backward_accumulate(tape, upstream, 1.0, flat.data(), &grads.input);
    grads.layers.reserve(layers_.size());
    std::size_t off = 0;
    for (const DenseLayer& layer : layers_) {
        LayerGradient lg;
        lg.weights.assign(flat.begin() + off, flat.begin() + off + layer.weights.size());
        off += layer.weights.size();
        lg.biases.assign(flat.begin() + off, flat.begin() + off + layer.biases.size());
        off += layer.biases.size();
        grads.layers.push_back(std::move(lg));
    }
    return grads;
}

void adam_step(Vec& params, const Vec& grad, AdamState& state, double lr) {
    check_dim(grad.size(), params.size(), "adam_step grad");
    check_dim(state.m.size(), params.size(), "adam_step state");
    std::size_t first_bad = grad.size(), last_bad = 0;
    for (std::size_t i = 0; i < grad.size(); ++i) {
        if (!std::isfinite(grad[i])) {
            first_bad = std::min(first_bad, i);
            last_bad = i;
        }
    }
    if (first_bad != grad.size())
        throw std::invalid_argument("adam_step: non-finite gradient in coordinates [" +
                                    std::to_string(first_bad) + ".." + std::to_string(last_bad) +
                                    "]");

    state.step++;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grad[i] + state.weight_decay * params[i];
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g;
        const double m_hat = state.m[i] / bc1;
        const double v_hat = state.v[i] / bc2;
        params[i] -= lr * m_hat / (std::sqrt(v_hat) + state.eps);
    }
}

CosineSchedule::CosineSchedule(double eta0_, double etaT_, long total_rounds_)
    : eta0(eta0_), etaT(etaT_), total_rounds(total_rounds_) {
    if (!(etaT > 0.0) || etaT > eta0)
        throw std::invalid_argument("CosineSchedule: need 0 < etaT <= eta0");
    if (total_rounds < 1) throw std::invalid_argument("CosineSchedule: need T >= 1");
}

double CosineSchedule::lr_at(long t) const {
    if (t < 0) throw std::invalid_argument("CosineSchedule::lr_at: negative round");
    if (t >= total_rounds) return etaT;
    const double frac = static_cast<double>(t) / static_cast<double>(total_rounds);
    return etaT + 0.5 * (eta0 - etaT) * (1.0 + std::cos(M_PI * frac));
}

std::string double_to_hex(double x) {
    const auto bits = std::bit_cast<std::uint64_t>(x);
    char buf[17];
    static const char* digits = "0123456789abcdef";
    for (int i = 0; i < 16; ++i) buf[15 - i] = digits[(bits >> (4 * i)) & 0xF];
    buf[16] = '\0';
    return std::string(buf);
}

double hex_to_double(const std::string& hex) {
    if (hex.size() != 16) throw std::runtime_error("hex_to_double: expected 16 hex digits");
    std::uint64_t bits = 0;
    const auto rc = std::from_chars(hex.data(), hex.data() + 16, bits, 16);
    if (rc.ec != std::errc() || rc.ptr != hex.data() + 16)
        throw std::runtime_error("hex_to_double: invalid hex scalar '" + hex + "'");
    return std::bit_cast<double>(bits);
}

void MlpNetwork::write(std::ostream& os) const {
    os << "net " << layers_.size() << "\n";
    for (const DenseLayer& layer : layers_) {
        os << "layer " << layer.in_dim << " " << layer.out_dim << "\n";
        os << "w";
        for (double w : layer.weights) os << " " << double_to_hex(w);
        os << "\nb";
        for (double b : layer.biases) os << " " << double_to_hex(b);
        os << "\n";
    }
}

namespace {

Vec read_scalar_line(std::istream& is, char tag, std::size_t count) {
    std::string line;
    if (!std::getline(is, line)) throw std::runtime_error("network read: truncated file");
    std::istringstream ls(line);
    std::string head;
    ls >> head;
    if (head.size() != 1 || head[0] != tag)
        throw std::runtime_error("network read: expected scalar line '" + std::string(1, tag) +
                                 "', got '" + head + "'");
    Vec out;
    out.reserve(count);
    std::string tok;
    while (ls >> tok) out.push_back(hex_to_double(tok));
    if (out.size() != count) throw std::runtime_error("network read: wrong scalar count");
    return out;
}

}  // namespace

MlpNetwork MlpNetwork::read(std::istream& is) {
    std::string tok;
    std::size_t n_layers = 0;
    is >> tok >> n_layers;
    if (tok != "net" || n_layers == 0) throw std::runtime_error("network read: bad header");
    is.ignore();  // trailing newline

    std::vector<std::size_t> dims;
    std::vector<std::pair<Vec, Vec>> payload;
    for (std::size_t li = 0; li < n_layers; ++li) {
        std::string line;
        if (!std::getline(is, line)) throw std::runtime_error("network read: truncated file");
        std::istringstream ls(line);
        std::size_t in_dim = 0, out_dim = 0;
        ls >> tok >> in_dim >> out_dim;
        if (tok != "layer" || in_dim == 0 || out_dim == 0)
            throw std::runtime_error("network read: bad layer header");
        if (dims.empty())
            dims.push_back(in_dim);
        else if (dims.back() != in_dim)
            throw std::runtime_error("network read: inconsistent layer dims");
        dims.push_back(out_dim);
        Vec weights = read_scalar_line(is, 'w', in_dim * out_dim);
        Vec biases = read_scalar_line(is, 'b', out_dim);
        payload.emplace_back(std::move(weights), std::move(biases));
    }
    MlpNetwork net(dims);
    for (std::size_t li = 0; li < n_layers; ++li)
        net.set_layer(li, std::move(payload[li].first), std::move(payload[li].second));
    return net;
}

}  // namespace adamab::nn
