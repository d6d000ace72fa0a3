#pragma once

// Fully connected layers, the losses used for training, and momentum SGD.
// Everything is 64-bit and allocation-per-call; nets here are tiny.

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "aglrls/tensor.hpp"

namespace aglrls {

using Rng = std::mt19937_64;

enum class Activation { none, relu };

/// y = act(W x + b); `weight` is out x in, row-major.
struct DenseLayer {
    std::size_t in = 0;
    std::size_t out = 0;
    std::vector<double> weight;
    std::vector<double> bias;
    Activation activation = Activation::none;

    friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

class Mlp {
public:
    Mlp() = default;
    /// Validates that adjacent layers chain.
    explicit Mlp(std::vector<DenseLayer> layers);

    /// Xavier-uniform weights (gain 1), zero biases. `dims` has one more entry than `activations`.
    static Mlp xavier(std::span<const std::size_t> dims, std::span<const Activation> activations, Rng& rng);

    std::size_t input_dim() const;
    std::size_t output_dim() const;
    std::size_t parameter_count() const;

    std::vector<DenseLayer>& layers() noexcept { return layers_; }
    const std::vector<DenseLayer>& layers() const noexcept { return layers_; }

    friend bool operator==(const Mlp&, const Mlp&) = default;

private:
    std::vector<DenseLayer> layers_;
};

/// values[0] is the input, values[k] the (post-activation) output of layer k.
struct Activations {
    std::vector<Tensor> values;
    const Tensor& output() const { return values.back(); }
};

/// Gradient buffers shaped like an Mlp's parameters.
struct MlpGrads {
    std::vector<std::vector<double>> weight;
    std::vector<std::vector<double>> bias;

    MlpGrads() = default;
    explicit MlpGrads(const Mlp& net);

    void zero();
    void scale(double factor);
    void add(const MlpGrads& other);
    double squared_norm() const;
};

Activations mlp_forward(const Mlp& net, const Tensor& input);

/// Accumulates d(loss)/d(params) into `grads` and returns d(loss)/d(input).
/// `activations` must come from mlp_forward on the same net.
Tensor mlp_backward(const Mlp& net, const Activations& activations, const Tensor& output_grad, MlpGrads& grads);

struct OptimState {
    double learning_rate = 1e-4;
    double momentum = 0.9;
    double weight_decay = 5e-4;
    std::vector<std::vector<double>> weight_velocity;
    std::vector<std::vector<double>> bias_velocity;

    OptimState() = default;
    OptimState(const Mlp& net, double learning_rate, double momentum, double weight_decay);
};

/// v <- momentum*v + g + weight_decay*p ; p <- p - lr*v. Biases are not decayed.
void sgd_step(Mlp& net, const MlpGrads& grads, OptimState& state);

/// Max-subtracted softmax. Throws std::invalid_argument on empty input.
std::vector<double> softmax(std::span<const double> logits);

double sigmoid(double x);

inline constexpr double kProbClamp = 1e-12;

struct LossAndGrad {
    double loss = 0.0;
    std::vector<double> grad;
};

/// -log softmax(logits)[label], gradient softmax - onehot.
LossAndGrad cross_entropy(std::span<const double> logits, std::size_t label);

struct ScalarLossAndGrad {
    double loss = 0.0;
    double grad = 0.0;
};

/// Binary cross-entropy against a domain flag (1 = source, 0 = target); prob is clamped
/// to [1e-12, 1-1e-12]. The gradient is taken w.r.t. the clamped probability.
ScalarLossAndGrad binary_cross_entropy(double prob, int domain_flag);

/// Same loss evaluated on the logit z (softplus form); gradient w.r.t. z is sigmoid(z) - flag,
/// which stays informative when the probability saturates.
ScalarLossAndGrad binary_cross_entropy_logit(double logit, int domain_flag);

}  // namespace aglrls
