#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "iil/data.hpp"
#include "iil/matrix.hpp"
#include "iil/nn.hpp"

// Decision-boundary-aware distillation: fused labels on clean inputs plus
// teacher distillation on noise-dusted inputs.
namespace iil::dbd {

struct NoiseSpec {
    double mu = 0.0;
    double delta = 2.0;  // standard deviation, in standardized feature units
    std::uint64_t seed = 0;

    void validate() const;
};

enum class FuseVariant {
    literal,           // (y + p_t) / sum(y + p_t); the temperature cancels
    tempered_softmax,  // softmax((y + p_t) / tau)
};

std::string to_string(FuseVariant v);
FuseVariant fuse_variant_from_string(const std::string& s);

struct FuseConfig {
    double tau = 1.0;
    FuseVariant variant = FuseVariant::literal;

    void validate() const;
};

// Learning target assigned to a new sample.
enum class Target { one_hot, teacher, fused };

std::string to_string(Target t);
Target target_from_string(const std::string& s);

// Targets for samples the teacher already classifies correctly (inner) and
// for misclassified ones (outer). Fused for both is the default.
struct LabelAssignment {
    Target inner = Target::fused;
    Target outer = Target::fused;
};

enum class SampleKind { inner, outer };

LabelDistribution fuse_labels(const LabelDistribution& y, const LabelDistribution& p_t, const FuseConfig& cfg);

// inner iff argmax(p_t) (lowest index on ties) equals the annotated class.
SampleKind classify_inner_outer(const LabelDistribution& p_t, const LabelDistribution& y);

// Source of the additive noise values, one call per matrix entry in row-major
// order.
using NoiseDraw = std::function<double()>;

// norm(batch) + G(mu, delta); no clipping.
Matrix dust_inputs(const Matrix& batch, const NormStats& stats, const NoiseSpec& noise);
// Same, with caller-supplied draws (a constant-zero draw yields norm(batch)).
Matrix dust_inputs(const Matrix& batch, const NormStats& stats, const NoiseDraw& draw);

struct LossTerms {
    double learn_term = 0.0;    // fused-label cross-entropy on clean inputs
    double distill_term = 0.0;  // teacher -> student cross-entropy on dusted inputs
    double lambda = 0.0;
    double total = 0.0;         // learn_term + lambda * distill_term
    std::size_t inner_count = 0;
    std::size_t outer_count = 0;
};

struct LossResult {
    LossTerms terms;
    ParamVector gradient;  // with respect to the student only
};

struct LossInputs {
    const ParamVector& student;
    const ParamVector& teacher;
    const NetworkSpec& spec;
    const Matrix& batch;  // raw features
    std::span<const std::size_t> labels;
    const NormStats& stats;
};

struct LossOptions {
    NoiseSpec noise;
    FuseConfig fuse;
    double lambda = 0.1;
    LabelAssignment assignment;
    // Overrides the Gaussian draws when set.
    NoiseDraw draw;
};

// Mean-reduced loss over the batch. Teacher predictions are constants.
// With lambda = 0 the dusted pass contributes nothing to the gradient.
LossResult dbd_loss(const LossInputs& in, const LossOptions& opt);

// Per-row learning targets for the clean batch given teacher probabilities.
Matrix learning_targets(const Matrix& teacher_probs, std::span<const std::size_t> labels, const FuseConfig& fuse,
                        const LabelAssignment& assignment, std::size_t* inner_count = nullptr,
                        std::size_t* outer_count = nullptr);

}  // namespace iil::dbd
