#include "aglrls/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "aglrls/errors.hpp"

namespace aglrls {

Mlp::Mlp(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
    if (layers_.empty()) throw DimensionError("an mlp needs at least one layer");
    for (std::size_t k = 0; k < layers_.size(); ++k) {
        const DenseLayer& l = layers_[k];
        if (l.weight.size() != l.in * l.out || l.bias.size() != l.out) {
            throw DimensionError("layer " + std::to_string(k) + " parameter sizes disagree with in/out");
        }
        if (k > 0 && layers_[k - 1].out != l.in) {
            throw DimensionError("layer " + std::to_string(k) + " input does not chain with previous output");
        }
    }
}

Mlp Mlp::xavier(std::span<const std::size_t> dims, std::span<const Activation> activations, Rng& rng) {
    if (dims.size() != activations.size() + 1 || activations.empty()) {
        throw std::invalid_argument("xavier: need one activation per layer and one more dim than layers");
    }
    std::vector<DenseLayer> layers;
    for (std::size_t k = 0; k < activations.size(); ++k) {
        DenseLayer l;
        l.in = dims[k];
        l.out = dims[k + 1];
        l.activation = activations[k];
        const double limit = std::sqrt(6.0 / static_cast<double>(l.in + l.out));
        std::uniform_real_distribution<double> dist(-limit, limit);
        l.weight.resize(l.in * l.out);
        for (double& w : l.weight) w = dist(rng);
        l.bias.assign(l.out, 0.0);
        layers.push_back(std::move(l));
    }
    return Mlp(std::move(layers));
}

std::size_t Mlp::input_dim() const { return layers_.empty() ? 0 : layers_.front().in; }
std::size_t Mlp::output_dim() const { return layers_.empty() ? 0 : layers_.back().out; }

std::size_t Mlp::parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += l.weight.size() + l.bias.size();
    return n;
}

MlpGrads::MlpGrads(const Mlp& net) {
    for (const auto& l : net.layers()) {
        weight.emplace_back(l.weight.size(), 0.0);
        bias.emplace_back(l.bias.size(), 0.0);
    }
}

void MlpGrads::zero() {
    for (auto& w : weight) std::fill(w.begin(), w.end(), 0.0);
    for (auto& b : bias) std::fill(b.begin(), b.end(), 0.0);
}

void MlpGrads::scale(double factor) {
    for (auto& w : weight) for (double& v : w) v *= factor;
    for (auto& b : bias) for (double& v : b) v *= factor;
}

void MlpGrads::add(const MlpGrads& other) {
    if (other.weight.size() != weight.size()) throw DimensionError("gradient layer counts differ");
    for (std::size_t k = 0; k < weight.size(); ++k) {
        if (other.weight[k].size() != weight[k].size() || other.bias[k].size() != bias[k].size()) {
            throw DimensionError("gradient shapes differ");
        }
        for (std::size_t i = 0; i < weight[k].size(); ++i) weight[k][i] += other.weight[k][i];
        for (std::size_t i = 0; i < bias[k].size(); ++i) bias[k][i] += other.bias[k][i];
    }
}

double MlpGrads::squared_norm() const {
    double s = 0.0;
    for (const auto& w : weight) for (double v : w) s += v * v;
    for (const auto& b : bias) for (double v : b) s += v * v;
    return s;
}

Activations mlp_forward(const Mlp& net, const Tensor& input) {
    if (net.layers().empty()) throw DimensionError("forward through an empty mlp");
    if (input.rank() != 1 || input.size() != net.input_dim()) {
        throw DimensionError("mlp input has " + std::to_string(input.size()) + " values, expected " +
                             std::to_string(net.input_dim()));
    }
    Activations acts;
    acts.values.reserve(net.layers().size() + 1);
    acts.values.push_back(input);
    for (const DenseLayer& l : net.layers()) {
        const Tensor& x = acts.values.back();
        std::vector<double> y(l.out);
        for (std::size_t o = 0; o < l.out; ++o) {
            double s = l.bias[o];
            const double* w = l.weight.data() + o * l.in;
            for (std::size_t i = 0; i < l.in; ++i) s += w[i] * x[i];
            if (l.activation == Activation::relu && s < 0.0) s = 0.0;
            y[o] = s;
        }
        acts.values.push_back(Tensor::vector(std::move(y)));
    }
    return acts;
}

Tensor mlp_backward(const Mlp& net, const Activations& activations, const Tensor& output_grad, MlpGrads& grads) {
    const auto& layers = net.layers();
    if (activations.values.size() != layers.size() + 1) {
        throw DimensionError("activations were not produced by this mlp");
    }
    if (output_grad.size() != net.output_dim()) {
        throw DimensionError("output gradient has " + std::to_string(output_grad.size()) + " values, expected " +
                             std::to_string(net.output_dim()));
    }
    if (grads.weight.size() != layers.size()) throw DimensionError("gradient buffers do not match the mlp");

    std::vector<double> upstream(output_grad.values().begin(), output_grad.values().end());
    for (std::size_t k = layers.size(); k-- > 0;) {
        const DenseLayer& l = layers[k];
        const Tensor& x = activations.values[k];
        const Tensor& y = activations.values[k + 1];
        if (l.activation == Activation::relu) {
            // Post-activation zero means the unit was gated off.
            for (std::size_t o = 0; o < l.out; ++o) {
                if (y[o] <= 0.0) upstream[o] = 0.0;
            }
        }
        std::vector<double>& gw = grads.weight[k];
        std::vector<double>& gb = grads.bias[k];
        std::vector<double> downstream(l.in, 0.0);
        for (std::size_t o = 0; o < l.out; ++o) {
            const double g = upstream[o];
            if (g == 0.0) continue;
            gb[o] += g;
            double* gwr = gw.data() + o * l.in;
            const double* w = l.weight.data() + o * l.in;
            for (std::size_t i = 0; i < l.in; ++i) {
                gwr[i] += g * x[i];
                downstream[i] += g * w[i];
            }
        }
        upstream = std::move(downstream);
    }
    return Tensor::vector(std::move(upstream));
}

OptimState::OptimState(const Mlp& net, double lr, double mom, double wd)
    : learning_rate(lr), momentum(mom), weight_decay(wd) {
    for (const auto& l : net.layers()) {
        weight_velocity.emplace_back(l.weight.size(), 0.0);
        bias_velocity.emplace_back(l.bias.size(), 0.0);
    }
}

void sgd_step(Mlp& net, const MlpGrads& grads, OptimState& state) {
    auto& layers = net.layers();
    if (grads.weight.size() != layers.size() || state.weight_velocity.size() != layers.size()) {
        throw DimensionError("sgd_step: gradient or optimizer state does not match the mlp");
    }
    for (std::size_t k = 0; k < layers.size(); ++k) {
        DenseLayer& l = layers[k];
        auto& vw = state.weight_velocity[k];
        auto& vb = state.bias_velocity[k];
        if (grads.weight[k].size() != l.weight.size() || vw.size() != l.weight.size() ||
            grads.bias[k].size() != l.bias.size() || vb.size() != l.bias.size()) {
            throw DimensionError("sgd_step: layer " + std::to_string(k) + " shapes disagree");
        }
        for (std::size_t i = 0; i < l.weight.size(); ++i) {
            vw[i] = state.momentum * vw[i] + grads.weight[k][i] + state.weight_decay * l.weight[i];
            l.weight[i] -= state.learning_rate * vw[i];
        }
        for (std::size_t i = 0; i < l.bias.size(); ++i) {
            vb[i] = state.momentum * vb[i] + grads.bias[k][i];
            l.bias[i] -= state.learning_rate * vb[i];
        }
    }
}

std::vector<double> softmax(std::span<const double> logits) {
    if (logits.empty()) throw std::invalid_argument("softmax of an empty vector");
    const double m = *std::max_element(logits.begin(), logits.end());
    std::vector<double> out(logits.size());
    double z = 0.0;
    for (std::size_t j = 0; j < logits.size(); ++j) {
        out[j] = std::exp(logits[j] - m);
        z += out[j];
    }
    for (double& v : out) v /= z;
    return out;
}

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

LossAndGrad cross_entropy(std::span<const double> logits, std::size_t label) {
    if (label >= logits.size()) {
        throw std::invalid_argument("cross_entropy: label " + std::to_string(label) + " out of range for " +
                                    std::to_string(logits.size()) + " classes");
    }
    const double m = *std::max_element(logits.begin(), logits.end());
    double z = 0.0;
    for (double v : logits) z += std::exp(v - m);
    const double log_z = m + std::log(z);
    LossAndGrad out;
    out.loss = log_z - logits[label];
    out.grad.resize(logits.size());
    for (std::size_t j = 0; j < logits.size(); ++j) out.grad[j] = std::exp(logits[j] - log_z);
    out.grad[label] -= 1.0;
    return out;
}

ScalarLossAndGrad binary_cross_entropy(double prob, int domain_flag) {
    const double p = std::clamp(prob, kProbClamp, 1.0 - kProbClamp);
    const double y = domain_flag != 0 ? 1.0 : 0.0;
    ScalarLossAndGrad out;
    out.loss = -y * std::log(p) - (1.0 - y) * std::log(1.0 - p);
    out.grad = -y / p + (1.0 - y) / (1.0 - p);
    return out;
}

ScalarLossAndGrad binary_cross_entropy_logit(double logit, int domain_flag) {
    const double y = domain_flag != 0 ? 1.0 : 0.0;
    const double z = y == 1.0 ? -logit : logit;  // loss = softplus(z)
    ScalarLossAndGrad out;
    out.loss = std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z)));
    out.grad = sigmoid(logit) - y;
    return out;
}

}  // namespace aglrls
