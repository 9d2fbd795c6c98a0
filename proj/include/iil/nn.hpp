#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "iil/matrix.hpp"

namespace iil {

enum class Activation { relu, tanh };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& s);

// Layer sizes run from the input dimension through the hidden widths to the
// number of classes. Hidden layers use `activation`; the output is softmax.
struct NetworkSpec {
    std::vector<std::size_t> layer_sizes;
    Activation activation = Activation::relu;

    void validate() const;
    std::size_t input_dim() const { return layer_sizes.front(); }
    std::size_t num_classes() const { return layer_sizes.back(); }
    std::size_t num_layers() const { return layer_sizes.size() - 1; }
    std::size_t param_count() const;
};

// Flat parameters. Per layer l, the weight block W_l (out x in, row-major)
// is followed by the bias block b_l (out).
struct ParamVector {
    std::vector<double> values;

    ParamVector() = default;
    explicit ParamVector(std::size_t n, double fill = 0.0) : values(n, fill) {}
    explicit ParamVector(std::vector<double> v) : values(std::move(v)) {}

    std::size_t size() const { return values.size(); }
    double& operator[](std::size_t i) { return values[i]; }
    double operator[](std::size_t i) const { return values[i]; }

    bool operator==(const ParamVector&) const = default;
};

// A probability vector over the fixed class set.
struct LabelDistribution {
    std::vector<double> probs;

    static LabelDistribution one_hot(std::size_t num_classes, std::size_t label);
    static LabelDistribution from_row(std::span<const double> row);

    std::size_t size() const { return probs.size(); }
    double operator[](std::size_t k) const { return probs[k]; }
    // Lowest index among the maxima.
    std::size_t argmax() const;
    bool is_valid(double tol = 1e-9) const;
    bool is_one_hot() const;
};

std::size_t argmax_row(std::span<const double> row);

struct ForwardCache {
    // inputs[0] is the batch; inputs[l] is the activation fed to layer l.
    std::vector<Matrix> inputs;
    // Pre-activations (logits for the last layer).
    std::vector<Matrix> pre;
};

struct ForwardResult {
    Matrix probs;  // one softmax row per input row
    ForwardCache cache;
};

// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases.
ParamVector init_network(const NetworkSpec& spec, std::uint64_t seed);

ForwardResult forward(const ParamVector& params, const NetworkSpec& spec, const Matrix& batch);

// Softmax probabilities only.
Matrix predict(const ParamVector& params, const NetworkSpec& spec, const Matrix& batch);

// Stable softmax of one logit row, written into `out`.
void softmax_row(std::span<const double> logits, std::span<double> out);

// -sum_k target_k log(max(predicted_k, 1e-12)).
double soft_cross_entropy(std::span<const double> target, std::span<const double> predicted);
double soft_cross_entropy(const LabelDistribution& target, const LabelDistribution& predicted);
double entropy(std::span<const double> q);

inline constexpr double kProbFloor = 1e-12;

// Gradient of `scale * sum_rows soft_cross_entropy(targets_r, softmax(logits_r))`
// with respect to the logits: scale * (probs - targets).
Matrix soft_ce_logit_grad(const Matrix& targets, const Matrix& probs, double scale);

// Backpropagates per-row loss gradients taken with respect to the output
// logits. Returns the gradient in ParamVector layout.
ParamVector backward(const ParamVector& params, const NetworkSpec& spec, const ForwardCache& cache,
                     const Matrix& logit_grad);

// params - lr * gradient. lr = 0 is the identity; negative lr is rejected.
ParamVector sgd_step(const ParamVector& params, const ParamVector& gradient, double lr);

// In-place a += b.
void accumulate(ParamVector& a, const ParamVector& b);

}  // namespace iil
