#include "iil/dbd.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace iil::dbd {

void NoiseSpec::validate() const {
    if (!(delta > 0.0)) throw std::invalid_argument("noise delta must be positive");
}

std::string to_string(FuseVariant v) { return v == FuseVariant::literal ? "literal" : "tempered_softmax"; }

FuseVariant fuse_variant_from_string(const std::string& s) {
    if (s == "literal") return FuseVariant::literal;
    if (s == "tempered_softmax") return FuseVariant::tempered_softmax;
    throw std::invalid_argument("unknown fuse variant: " + s);
}

void FuseConfig::validate() const {
    if (!(tau > 0.0)) throw std::invalid_argument("fuse temperature must be positive");
}

std::string to_string(Target t) {
    switch (t) {
        case Target::one_hot: return "one_hot";
        case Target::teacher: return "teacher";
        case Target::fused: return "fused";
    }
    return "?";
}

Target target_from_string(const std::string& s) {
    if (s == "one_hot") return Target::one_hot;
    if (s == "teacher") return Target::teacher;
    if (s == "fused") return Target::fused;
    throw std::invalid_argument("unknown target kind: " + s);
}

LabelDistribution fuse_labels(const LabelDistribution& y, const LabelDistribution& p_t, const FuseConfig& cfg) {
    cfg.validate();
    if (!y.is_one_hot()) throw std::invalid_argument("annotation must be one-hot");
    if (!p_t.is_valid()) throw std::invalid_argument("teacher prediction is not a distribution");
    if (y.size() != p_t.size()) throw std::invalid_argument("label size mismatch");

    LabelDistribution out;
    out.probs.resize(y.size());
    if (cfg.variant == FuseVariant::literal) {
        double denom = 0.0;
        for (std::size_t k = 0; k < y.size(); ++k) {
            out.probs[k] = (y[k] + p_t[k]) / cfg.tau;
            denom += out.probs[k];
        }
        for (auto& v : out.probs) v /= denom;
    } else {
        std::vector<double> logits(y.size());
        for (std::size_t k = 0; k < y.size(); ++k) logits[k] = (y[k] + p_t[k]) / cfg.tau;
        softmax_row(logits, out.probs);
    }
    return out;
}

SampleKind classify_inner_outer(const LabelDistribution& p_t, const LabelDistribution& y) {
    return p_t.argmax() == y.argmax() ? SampleKind::inner : SampleKind::outer;
}

Matrix dust_inputs(const Matrix& batch, const NormStats& stats, const NoiseDraw& draw) {
    Matrix out = normalize(batch, stats);
    for (auto& v : out.data()) v += draw();
    return out;
}

Matrix dust_inputs(const Matrix& batch, const NormStats& stats, const NoiseSpec& noise) {
    noise.validate();
    std::mt19937_64 rng(noise.seed);
    std::normal_distribution<double> g(noise.mu, noise.delta);
    return dust_inputs(batch, stats, NoiseDraw([&] { return g(rng); }));
}

Matrix learning_targets(const Matrix& teacher_probs, std::span<const std::size_t> labels, const FuseConfig& fuse,
                        const LabelAssignment& assignment, std::size_t* inner_count, std::size_t* outer_count) {
    if (labels.size() != teacher_probs.rows()) throw std::invalid_argument("label count does not match batch");
    const std::size_t k = teacher_probs.cols();
    Matrix targets(teacher_probs.rows(), k);
    std::size_t inner = 0, outer = 0;
    for (std::size_t r = 0; r < labels.size(); ++r) {
        const auto y = LabelDistribution::one_hot(k, labels[r]);
        const auto p_t = LabelDistribution::from_row(teacher_probs.row(r));
        const auto kind = classify_inner_outer(p_t, y);
        (kind == SampleKind::inner ? inner : outer)++;
        const Target t = kind == SampleKind::inner ? assignment.inner : assignment.outer;
        const LabelDistribution* src = &y;
        LabelDistribution fused;
        if (t == Target::teacher) {
            src = &p_t;
        } else if (t == Target::fused) {
            fused = fuse_labels(y, p_t, fuse);
            src = &fused;
        }
        for (std::size_t c = 0; c < k; ++c) targets(r, c) = (*src)[c];
    }
    if (inner_count) *inner_count = inner;
    if (outer_count) *outer_count = outer;
    return targets;
}

LossResult dbd_loss(const LossInputs& in, const LossOptions& opt) {
    if (in.student.size() != in.teacher.size()) throw std::invalid_argument("teacher and student must share a spec");
    if (opt.lambda < 0.0) throw std::invalid_argument("lambda must be non-negative");
    if (in.labels.size() != in.batch.rows()) throw std::invalid_argument("label count does not match batch");
    const std::size_t n = in.batch.rows();
    if (n == 0) throw std::invalid_argument("empty batch");
    const double inv_n = 1.0 / static_cast<double>(n);

    LossResult res;
    res.terms.lambda = opt.lambda;

    // Clean inputs: fused-label learning.
    const Matrix clean = normalize(in.batch, in.stats);
    const Matrix p_t = predict(in.teacher, in.spec, clean);
    const Matrix targets =
        learning_targets(p_t, in.labels, opt.fuse, opt.assignment, &res.terms.inner_count, &res.terms.outer_count);
    auto fs = forward(in.student, in.spec, clean);
    for (std::size_t r = 0; r < n; ++r) res.terms.learn_term += soft_cross_entropy(targets.row(r), fs.probs.row(r));
    res.terms.learn_term *= inv_n;
    res.gradient = backward(in.student, in.spec, fs.cache, soft_ce_logit_grad(targets, fs.probs, inv_n));

    // Dusted inputs: distill the teacher's boundary.
    const Matrix dusted = opt.draw ? dust_inputs(in.batch, in.stats, opt.draw) : dust_inputs(in.batch, in.stats, opt.noise);
    const Matrix p_t_dust = predict(in.teacher, in.spec, dusted);
    auto fd = forward(in.student, in.spec, dusted);
    for (std::size_t r = 0; r < n; ++r) res.terms.distill_term += soft_cross_entropy(p_t_dust.row(r), fd.probs.row(r));
    res.terms.distill_term *= inv_n;
    if (opt.lambda != 0.0)
        accumulate(res.gradient,
                   backward(in.student, in.spec, fd.cache, soft_ce_logit_grad(p_t_dust, fd.probs, opt.lambda * inv_n)));

    res.terms.total = res.terms.learn_term + opt.lambda * res.terms.distill_term;
    return res;
}

}  // namespace iil::dbd
