#include "iil/nn.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace iil {

std::string to_string(Activation a) { return a == Activation::relu ? "relu" : "tanh"; }

Activation activation_from_string(const std::string& s) {
    if (s == "relu") return Activation::relu;
    if (s == "tanh") return Activation::tanh;
    throw std::invalid_argument("unknown activation: " + s);
}

void NetworkSpec::validate() const {
    if (layer_sizes.size() < 2)
        throw std::invalid_argument("network needs at least an input and an output layer");
    for (auto n : layer_sizes)
        if (n == 0) throw std::invalid_argument("layer sizes must be positive");
}

std::size_t NetworkSpec::param_count() const {
    validate();
    std::size_t n = 0;
    for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l)
        n += layer_sizes[l] * layer_sizes[l + 1] + layer_sizes[l + 1];
    return n;
}

LabelDistribution LabelDistribution::one_hot(std::size_t num_classes, std::size_t label) {
    if (label >= num_classes) throw std::out_of_range("label outside class set");
    LabelDistribution d;
    d.probs.assign(num_classes, 0.0);
    d.probs[label] = 1.0;
    return d;
}

LabelDistribution LabelDistribution::from_row(std::span<const double> row) {
    return LabelDistribution{std::vector<double>(row.begin(), row.end())};
}

std::size_t argmax_row(std::span<const double> row) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < row.size(); ++k)
        if (row[k] > row[best]) best = k;
    return best;
}

std::size_t LabelDistribution::argmax() const { return argmax_row(probs); }

bool LabelDistribution::is_valid(double tol) const {
    if (probs.empty()) return false;
    double sum = 0.0;
    for (double p : probs) {
        if (!(p >= 0.0 && p <= 1.0)) return false;
        sum += p;
    }
    return std::abs(sum - 1.0) <= tol;
}

bool LabelDistribution::is_one_hot() const {
    std::size_t ones = 0;
    for (double p : probs) {
        if (p == 1.0)
            ++ones;
        else if (p != 0.0)
            return false;
    }
    return ones == 1;
}

namespace {

struct LayerView {
    std::size_t in, out, w_offset, b_offset;
};

std::vector<LayerView> layer_views(const NetworkSpec& spec) {
    std::vector<LayerView> views;
    std::size_t off = 0;
    for (std::size_t l = 0; l < spec.num_layers(); ++l) {
        LayerView v{spec.layer_sizes[l], spec.layer_sizes[l + 1], off, 0};
        v.b_offset = off + v.in * v.out;
        off = v.b_offset + v.out;
        views.push_back(v);
    }
    return views;
}

double activate(Activation a, double z) { return a == Activation::relu ? (z > 0.0 ? z : 0.0) : std::tanh(z); }

// Derivative expressed through the pre-activation and the activation value.
double activate_grad(Activation a, double z, double h) {
    return a == Activation::relu ? (z > 0.0 ? 1.0 : 0.0) : 1.0 - h * h;
}

void check_params(const ParamVector& params, const NetworkSpec& spec) {
    if (params.size() != spec.param_count())
        throw std::invalid_argument("parameter vector does not match network spec");
}

}  // namespace

ParamVector init_network(const NetworkSpec& spec, std::uint64_t seed) {
    spec.validate();
    ParamVector p(spec.param_count());
    std::mt19937_64 rng(seed);
    for (const auto& v : layer_views(spec)) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(v.in));
        std::uniform_real_distribution<double> dist(-bound, bound);
        for (std::size_t i = 0; i < v.in * v.out; ++i) p[v.w_offset + i] = dist(rng);
    }
    return p;
}

void softmax_row(std::span<const double> logits, std::span<double> out) {
    const double mx = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (std::size_t k = 0; k < logits.size(); ++k) {
        out[k] = std::exp(logits[k] - mx);
        sum += out[k];
    }
    for (auto& o : out) o /= sum;
}

ForwardResult forward(const ParamVector& params, const NetworkSpec& spec, const Matrix& batch) {
    spec.validate();
    check_params(params, spec);
    if (batch.cols() != spec.input_dim())
        throw std::invalid_argument("batch width does not match network input dimension");

    const auto views = layer_views(spec);
    ForwardResult res;
    res.cache.inputs.reserve(views.size());
    res.cache.pre.reserve(views.size());
    res.cache.inputs.push_back(batch);

    const std::size_t n = batch.rows();
    for (std::size_t l = 0; l < views.size(); ++l) {
        const auto& v = views[l];
        const Matrix& x = res.cache.inputs.back();
        Matrix z(n, v.out);
        for (std::size_t r = 0; r < n; ++r) {
            const auto xr = x.row(r);
            for (std::size_t o = 0; o < v.out; ++o) {
                const double* w = params.values.data() + v.w_offset + o * v.in;
                double acc = params[v.b_offset + o];
                for (std::size_t i = 0; i < v.in; ++i) acc += w[i] * xr[i];
                z(r, o) = acc;
            }
        }
        const bool last = l + 1 == views.size();
        if (!last) {
            Matrix h(n, v.out);
            for (std::size_t i = 0; i < z.data().size(); ++i) h.data()[i] = activate(spec.activation, z.data()[i]);
            res.cache.pre.push_back(std::move(z));
            res.cache.inputs.push_back(std::move(h));
        } else {
            res.probs = Matrix(n, v.out);
            for (std::size_t r = 0; r < n; ++r) softmax_row(z.row(r), res.probs.row(r));
            res.cache.pre.push_back(std::move(z));
        }
    }
    return res;
}

Matrix predict(const ParamVector& params, const NetworkSpec& spec, const Matrix& batch) {
    return forward(params, spec, batch).probs;
}

double soft_cross_entropy(std::span<const double> target, std::span<const double> predicted) {
    if (target.size() != predicted.size()) throw std::invalid_argument("distribution size mismatch");
    double loss = 0.0;
    for (std::size_t k = 0; k < target.size(); ++k) {
        if (target[k] == 0.0) continue;
        loss -= target[k] * std::log(std::clamp(predicted[k], kProbFloor, 1.0));
    }
    return loss;
}

double soft_cross_entropy(const LabelDistribution& target, const LabelDistribution& predicted) {
    return soft_cross_entropy(target.probs, predicted.probs);
}

double entropy(std::span<const double> q) { return soft_cross_entropy(q, q); }

Matrix soft_ce_logit_grad(const Matrix& targets, const Matrix& probs, double scale) {
    if (targets.rows() != probs.rows() || targets.cols() != probs.cols())
        throw std::invalid_argument("target/probability shape mismatch");
    Matrix g(probs.rows(), probs.cols());
    for (std::size_t i = 0; i < g.data().size(); ++i)
        g.data()[i] = scale * (probs.data()[i] - targets.data()[i]);
    return g;
}

ParamVector backward(const ParamVector& params, const NetworkSpec& spec, const ForwardCache& cache,
                     const Matrix& logit_grad) {
    check_params(params, spec);
    const auto views = layer_views(spec);
    if (cache.inputs.size() != views.size() || cache.pre.size() != views.size())
        throw std::invalid_argument("forward cache does not match network depth");
    const std::size_t n = cache.inputs.front().rows();
    if (logit_grad.rows() != n || logit_grad.cols() != spec.num_classes())
        throw std::invalid_argument("loss gradient shape does not match forward cache");

    ParamVector grad(params.size());
    Matrix delta = logit_grad;  // dL/dz for the current layer
    for (std::size_t li = views.size(); li-- > 0;) {
        const auto& v = views[li];
        const Matrix& x = cache.inputs[li];
        if (x.rows() != n || x.cols() != v.in || delta.cols() != v.out)
            throw std::invalid_argument("forward cache shape mismatch");
        // Fixed row order keeps the reduction deterministic.
        for (std::size_t r = 0; r < n; ++r) {
            const auto xr = x.row(r);
            const auto dr = delta.row(r);
            for (std::size_t o = 0; o < v.out; ++o) {
                const double d = dr[o];
                if (d == 0.0) continue;
                double* gw = grad.values.data() + v.w_offset + o * v.in;
                for (std::size_t i = 0; i < v.in; ++i) gw[i] += d * xr[i];
                grad[v.b_offset + o] += d;
            }
        }
        if (li == 0) break;
        const Matrix& zprev = cache.pre[li - 1];
        Matrix next(n, v.in);
        for (std::size_t r = 0; r < n; ++r) {
            const auto dr = delta.row(r);
            for (std::size_t o = 0; o < v.out; ++o) {
                const double d = dr[o];
                if (d == 0.0) continue;
                const double* w = params.values.data() + v.w_offset + o * v.in;
                for (std::size_t i = 0; i < v.in; ++i) next(r, i) += d * w[i];
            }
            for (std::size_t i = 0; i < v.in; ++i)
                next(r, i) *= activate_grad(spec.activation, zprev(r, i), x(r, i));
        }
        delta = std::move(next);
    }
    return grad;
}

ParamVector sgd_step(const ParamVector& params, const ParamVector& gradient, double lr) {
    if (!(lr >= 0.0)) throw std::invalid_argument("learning rate must be non-negative");
    if (params.size() != gradient.size()) throw std::invalid_argument("gradient length mismatch");
    ParamVector out = params;
    if (lr == 0.0) return out;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= lr * gradient[i];
    return out;
}

void accumulate(ParamVector& a, const ParamVector& b) {
    if (a.size() != b.size()) throw std::invalid_argument("parameter length mismatch");
    for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
}

}  // namespace iil
