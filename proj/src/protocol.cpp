#include "iil/protocol.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <stdexcept>

#include "iil/seed.hpp"

namespace iil {

void IILBenchmark::validate(double max_phase_ratio) const {
    if (num_classes < 2) throw std::invalid_argument("benchmark needs at least two classes");
    if (base.empty()) throw std::invalid_argument("base set is empty");
    auto check_labels = [&](const Dataset& d, const std::string& name) {
        for (const auto& s : d.samples) {
            if (s.label >= num_classes)
                throw std::invalid_argument(name + ": label " + std::to_string(s.label) + " outside the class set of size " +
                                            std::to_string(num_classes));
            for (double v : s.features)
                if (!std::isfinite(v)) throw std::invalid_argument(name + ": non-finite feature");
        }
        if (!d.empty() && d.dim != base.dim) throw std::invalid_argument(name + ": feature dimension differs from base");
    };
    check_labels(base, "base");
    check_labels(test, "test");
    std::vector<bool> seen(num_classes, false);
    for (const auto& s : base.samples) seen[s.label] = true;
    for (std::size_t k = 0; k < num_classes; ++k)
        if (!seen[k]) throw std::invalid_argument("class " + std::to_string(k) + " missing from the base set");
    for (std::size_t t = 0; t < phases.size(); ++t) {
        const std::string name = "phase " + std::to_string(t + 1);
        check_labels(phases[t], name);
        if (max_phase_ratio > 0.0 &&
            static_cast<double>(phases[t].size()) > max_phase_ratio * static_cast<double>(base.size()))
            throw std::invalid_argument(name + " has " + std::to_string(phases[t].size()) +
                                        " samples, more than the allowed fraction of the base set");
    }
}

std::string to_string(Imbalance i) { return i == Imbalance::uniform_random ? "uniform_random" : "dirichlet"; }

Imbalance imbalance_from_string(const std::string& s) {
    if (s == "uniform_random") return Imbalance::uniform_random;
    if (s == "dirichlet") return Imbalance::dirichlet;
    throw std::invalid_argument("unknown imbalance mode: " + s);
}

namespace {

std::vector<std::size_t> largest_remainder(std::size_t total, const std::vector<double>& weights) {
    const double sum = std::accumulate(weights.begin(), weights.end(), 0.0);
    std::vector<std::size_t> counts(weights.size());
    std::vector<double> frac(weights.size());
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        const double exact = static_cast<double>(total) * weights[i] / sum;
        counts[i] = static_cast<std::size_t>(std::floor(exact));
        frac[i] = exact - std::floor(exact);
        assigned += counts[i];
    }
    std::vector<std::size_t> order(weights.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return frac[a] > frac[b]; });
    for (std::size_t i = 0; assigned < total; ++i, ++assigned) ++counts[order[i % order.size()]];
    return counts;
}

Dataset subset(const Dataset& data, std::span<const std::size_t> idx) {
    Dataset out;
    out.dim = data.dim;
    out.samples.reserve(idx.size());
    for (auto i : idx) out.samples.push_back(data.samples[i]);
    return out;
}

}  // namespace

IILBenchmark split_benchmark(const Dataset& data, double base_fraction, std::size_t num_phases, std::uint64_t seed,
                             Imbalance imbalance, double dirichlet_alpha, std::size_t num_classes) {
    if (!(base_fraction > 0.0 && base_fraction < 1.0)) throw std::invalid_argument("base_fraction must lie in (0, 1)");
    if (num_phases == 0) throw std::invalid_argument("need at least one incremental phase");
    if (data.empty()) throw std::invalid_argument("dataset is empty");
    std::size_t max_label = 0;
    for (const auto& s : data.samples) max_label = std::max(max_label, s.label);
    if (num_classes == 0) num_classes = max_label + 1;
    if (max_label >= num_classes)
        throw std::invalid_argument("label " + std::to_string(max_label) + " outside the class set of size " +
                                    std::to_string(num_classes));
    std::vector<bool> present(num_classes, false);
    for (const auto& s : data.samples) present[s.label] = true;
    for (std::size_t k = 0; k < num_classes; ++k)
        if (!present[k]) throw std::invalid_argument("class " + std::to_string(k) + " missing from dataset");

    std::vector<std::size_t> perm(data.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::mt19937_64 rng(derive_seed(seed, {stream::split}));
    std::shuffle(perm.begin(), perm.end(), rng);

    const auto n_base = static_cast<std::size_t>(std::llround(base_fraction * static_cast<double>(data.size())));
    IILBenchmark bm;
    bm.num_classes = num_classes;
    bm.base = subset(data, std::span(perm).first(n_base));
    const std::span<const std::size_t> rest = std::span(perm).subspan(n_base);

    std::vector<std::vector<std::size_t>> phase_idx(num_phases);
    if (imbalance == Imbalance::uniform_random) {
        const std::size_t q = rest.size() / num_phases, r = rest.size() % num_phases;
        std::size_t pos = 0;
        for (std::size_t t = 0; t < num_phases; ++t) {
            const std::size_t len = q + (t < r ? 1 : 0);
            phase_idx[t].assign(rest.begin() + pos, rest.begin() + pos + len);
            pos += len;
        }
    } else {
        if (!(dirichlet_alpha > 0.0)) throw std::invalid_argument("dirichlet alpha must be positive");
        std::vector<std::vector<std::size_t>> by_class(num_classes);
        for (auto i : rest) by_class[data.samples[i].label].push_back(i);
        std::gamma_distribution<double> gamma(dirichlet_alpha, 1.0);
        for (const auto& members : by_class) {
            std::vector<double> w(num_phases);
            for (auto& v : w) v = gamma(rng);
            const auto counts = largest_remainder(members.size(), w);
            std::size_t pos = 0;
            for (std::size_t t = 0; t < num_phases; ++t) {
                phase_idx[t].insert(phase_idx[t].end(), members.begin() + pos, members.begin() + pos + counts[t]);
                pos += counts[t];
            }
        }
        for (auto& idx : phase_idx) std::shuffle(idx.begin(), idx.end(), rng);
    }
    for (const auto& idx : phase_idx) bm.phases.push_back(subset(data, idx));
    bm.test.dim = data.dim;
    bm.validate(0.0);
    return bm;
}

IILBenchmark make_synthetic_benchmark(const SyntheticSpec& spec, std::size_t num_phases) {
    IILBenchmark bm;
    bm.num_classes = spec.num_classes;
    bm.base = gen_base(spec);
    for (std::size_t t = 1; t <= num_phases; ++t) bm.phases.push_back(gen_phase(spec, t));
    bm.test = gen_test(spec, num_phases);
    return bm;
}

std::string to_string(Strategy s) {
    switch (s) {
        case Strategy::dbd_kc: return "dbd_kc";
        case Strategy::fine_tune: return "fine_tune";
        case Strategy::vanilla_distill: return "vanilla_distill";
        case Strategy::full_data: return "full_data";
    }
    return "?";
}

Strategy strategy_from_string(const std::string& s) {
    for (auto st : kAllStrategies)
        if (to_string(st) == s) return st;
    throw std::invalid_argument("unknown strategy: " + s);
}

std::string to_string(KcMode m) {
    switch (m) {
        case KcMode::kc_ema: return "kc_ema";
        case KcMode::per_iteration: return "per_iteration";
        case KcMode::off: return "off";
    }
    return "?";
}

KcMode kc_mode_from_string(const std::string& s) {
    for (auto m : {KcMode::kc_ema, KcMode::per_iteration, KcMode::off})
        if (to_string(m) == s) return m;
    throw std::invalid_argument("unknown kc mode: " + s);
}

NetworkSpec RunConfig::network(std::size_t input_dim, std::size_t num_classes) const {
    NetworkSpec spec;
    spec.activation = activation;
    spec.layer_sizes.push_back(input_dim);
    spec.layer_sizes.insert(spec.layer_sizes.end(), hidden.begin(), hidden.end());
    spec.layer_sizes.push_back(num_classes);
    spec.validate();
    return spec;
}

void RunConfig::validate() const {
    if (epochs_per_phase == 0) throw std::invalid_argument("epochs_per_phase must be positive");
    if (batch_size == 0) throw std::invalid_argument("batch_size must be positive");
    if (!(lr_base > 0.0) || !(lr_inc() > 0.0)) throw std::invalid_argument("learning rates must be positive");
    if (lambda < 0.0) throw std::invalid_argument("lambda must be non-negative");
    if (!(exemplar_fraction >= 0.0 && exemplar_fraction <= 1.0))
        throw std::invalid_argument("exemplar_fraction must lie in [0, 1]");
    noise.validate();
    fuse.validate();
    sched.validate();
}

PhaseContext PhaseContext::make(const IILBenchmark& bm, const RunConfig& cfg) {
    PhaseContext ctx;
    ctx.spec = cfg.network(bm.base.dim, bm.num_classes);
    ctx.stats = compute_norm_stats(bm.base);
    ctx.base = normalize(bm.base, ctx.stats);
    if (!bm.test.empty()) ctx.test = normalize(bm.test, ctx.stats);
    return ctx;
}

std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n, std::size_t batch_size, std::uint64_t seed) {
    if (batch_size == 0) throw std::invalid_argument("batch_size must be positive");
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<std::vector<std::size_t>> out;
    if (n == 0) return out;
    if (n < batch_size) {
        out.push_back(std::move(perm));
        return out;
    }
    for (std::size_t b = 0; b + batch_size <= n; b += batch_size)
        out.emplace_back(perm.begin() + b, perm.begin() + b + batch_size);
    return out;
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::vector<std::size_t> labels_at(const Dataset& data, std::span<const std::size_t> idx) {
    std::vector<std::size_t> out;
    out.reserve(idx.size());
    for (auto i : idx) out.push_back(data.samples[i].label);
    return out;
}

Matrix one_hot_rows(std::span<const std::size_t> labels, std::size_t k) {
    Matrix m(labels.size(), k);
    for (std::size_t r = 0; r < labels.size(); ++r) m(r, labels[r]) = 1.0;
    return m;
}

// One SGD step on the mean soft cross-entropy of `inputs` (network space)
// against `targets`. Returns the batch loss.
double soft_target_step(ParamVector& params, const NetworkSpec& spec, const Matrix& inputs, const Matrix& targets,
                        double lr) {
    auto fw = forward(params, spec, inputs);
    const double inv_n = 1.0 / static_cast<double>(inputs.rows());
    double loss = 0.0;
    for (std::size_t r = 0; r < inputs.rows(); ++r) loss += soft_cross_entropy(targets.row(r), fw.probs.row(r));
    params = sgd_step(params, backward(params, spec, fw.cache, soft_ce_logit_grad(targets, fw.probs, inv_n)), lr);
    return loss * inv_n;
}

std::uint64_t shuffle_root(const RunConfig& cfg, std::size_t phase) {
    return derive_seed(cfg.seed, {stream::shuffle, phase});
}

void finish(PhaseResult& res, const PhaseContext& ctx) {
    if (!ctx.test.empty()) {
        res.acc_test = accuracy(res.model, ctx.spec, ctx.test);
        res.student_acc_test = accuracy(res.student, ctx.spec, ctx.test);
    }
    res.acc_base = accuracy(res.model, ctx.spec, ctx.base);
}

}  // namespace

ParamVector train_supervised(ParamVector params, const Dataset& data, const PhaseContext& ctx, std::size_t epochs,
                             double lr, std::size_t batch_size, std::uint64_t seed, std::vector<double>* epoch_loss) {
    const std::size_t k = ctx.spec.num_classes();
    for (std::size_t e = 1; e <= epochs; ++e) {
        double sum = 0.0;
        const auto batches = epoch_batches(data.size(), batch_size, derive_seed(seed, {e}));
        for (const auto& idx : batches) {
            const auto labels = labels_at(data, idx);
            sum += soft_target_step(params, ctx.spec, normalize(feature_matrix(data, idx), ctx.stats),
                                    one_hot_rows(labels, k), lr);
        }
        if (epoch_loss) epoch_loss->push_back(batches.empty() ? 0.0 : sum / static_cast<double>(batches.size()));
        if (ctx.on_epoch) ctx.on_epoch(e, params, params);
    }
    return params;
}

ParamVector train_base(const IILBenchmark& bm, const RunConfig& cfg) {
    cfg.validate();
    PhaseContext ctx = PhaseContext::make(bm, cfg);
    const auto init = init_network(ctx.spec, derive_seed(cfg.seed, {stream::init}));
    return train_supervised(init, bm.base, ctx, cfg.epochs_per_phase, cfg.lr_base, cfg.batch_size, shuffle_root(cfg, 0));
}

PhaseResult run_phase_dbd_kc(const ParamVector& model_prev, const Dataset& phase_data, const RunConfig& cfg,
                             const PhaseContext& ctx) {
    if (phase_data.empty()) throw std::invalid_argument("phase data is empty");
    const auto t0 = Clock::now();
    PhaseResult res;
    res.phase = ctx.phase;

    ParamVector student = model_prev;
    kc::EmaState ema{model_prev, 0, {}};
    dbd::LossOptions opt;
    opt.noise = cfg.noise;
    opt.fuse = cfg.fuse;
    opt.lambda = cfg.lambda;
    opt.assignment = cfg.assignment;
    const double lr = cfg.lr_inc();
    const auto root = shuffle_root(cfg, ctx.phase);

    for (std::size_t e = 1; e <= cfg.epochs_per_phase; ++e) {
        const auto batches = epoch_batches(phase_data.size(), cfg.batch_size, derive_seed(root, {e}));
        double sum = 0.0;
        for (std::size_t b = 0; b < batches.size(); ++b) {
            const Matrix raw = feature_matrix(phase_data, batches[b]);
            const auto labels = labels_at(phase_data, batches[b]);
            opt.noise.seed = derive_seed(cfg.seed, {stream::noise, cfg.noise.seed, ctx.phase, e, b});
            const auto loss = dbd::dbd_loss({student, ema.teacher, ctx.spec, raw, labels, ctx.stats}, opt);
            student = sgd_step(student, loss.gradient, lr);
            sum += loss.terms.total;
            if (cfg.kc_mode == KcMode::per_iteration && e > cfg.sched.freeze_epochs)
                ema = kc::consolidate(std::move(ema), student, cfg.sched.alpha0);
        }
        res.epoch_loss.push_back(batches.empty() ? 0.0 : sum / static_cast<double>(batches.size()));
        if (cfg.kc_mode == KcMode::kc_ema && kc::should_consolidate(e, cfg.sched))
            ema = kc::consolidate(std::move(ema), student, kc::adaptive_momentum(e, cfg.sched), e);
        if (ctx.on_epoch) ctx.on_epoch(e, student, ema.teacher);
    }
    // Without consolidation there is no teacher to hand back; the student is deployed.
    res.model = cfg.kc_mode == KcMode::off ? student : std::move(ema.teacher);
    res.student = std::move(student);
    res.consolidations = std::move(ema.history);
    finish(res, ctx);
    res.wall_time = seconds_since(t0);
    return res;
}

PhaseResult run_phase_fine_tune(const ParamVector& model_prev, const Dataset& phase_data, const RunConfig& cfg,
                                const PhaseContext& ctx) {
    const auto t0 = Clock::now();
    PhaseResult res;
    res.phase = ctx.phase;
    res.model = train_supervised(model_prev, phase_data, ctx, cfg.fine_tune_epochs, cfg.lr_inc(), cfg.batch_size,
                                 shuffle_root(cfg, ctx.phase), &res.epoch_loss);
    res.student = res.model;
    finish(res, ctx);
    res.wall_time = seconds_since(t0);
    return res;
}

std::size_t exemplar_count(std::size_t n, double fraction) {
    return static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
}

PhaseResult run_phase_vanilla_distill(const ParamVector& model_prev, const Dataset& phase_data, const RunConfig& cfg,
                                      const PhaseContext& ctx) {
    if (phase_data.empty()) throw std::invalid_argument("phase data is empty");
    const auto t0 = Clock::now();
    PhaseResult res;
    res.phase = ctx.phase;
    const std::size_t k = ctx.spec.num_classes();

    std::vector<std::size_t> perm(phase_data.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::mt19937_64 rng(derive_seed(cfg.seed, {stream::exemplar, ctx.phase}));
    std::shuffle(perm.begin(), perm.end(), rng);
    const std::size_t n_ex = exemplar_count(phase_data.size(), cfg.exemplar_fraction);
    const std::vector<std::size_t> exemplars(perm.begin(), perm.begin() + n_ex);
    const std::vector<std::size_t> rest(perm.begin() + n_ex, perm.end());

    // The teacher stays at model_prev, so its scores on E are fixed.
    const Matrix ex_inputs = normalize(feature_matrix(phase_data, exemplars), ctx.stats);
    const Matrix ex_targets = n_ex ? predict(model_prev, ctx.spec, ex_inputs) : Matrix();

    ParamVector student = model_prev;
    const double lr = cfg.lr_inc();
    const auto root = shuffle_root(cfg, ctx.phase);
    const std::size_t half = std::max<std::size_t>(1, cfg.batch_size / 2);
    std::vector<std::size_t> ex_cycle(n_ex);
    std::iota(ex_cycle.begin(), ex_cycle.end(), 0);
    std::size_t ex_pos = n_ex;

    for (std::size_t e = 1; e <= cfg.distill_epochs; ++e) {
        double sum = 0.0;
        std::size_t steps = 0;
        if (rest.empty()) {
            for (const auto& idx : epoch_batches(n_ex, cfg.batch_size, derive_seed(root, {e}))) {
                Matrix in(idx.size(), ex_inputs.cols()), tg(idx.size(), k);
                for (std::size_t r = 0; r < idx.size(); ++r) {
                    std::copy_n(ex_inputs.row(idx[r]).begin(), in.cols(), in.row(r).begin());
                    std::copy_n(ex_targets.row(idx[r]).begin(), k, tg.row(r).begin());
                }
                sum += soft_target_step(student, ctx.spec, in, tg, lr);
                ++steps;
            }
        } else {
            for (const auto& idx : epoch_batches(rest.size(), half, derive_seed(root, {e}))) {
                std::vector<std::size_t> rows;
                for (auto i : idx) rows.push_back(rest[i]);
                const std::size_t n_new = rows.size();
                const std::size_t n_old = n_ex ? std::min(n_new, half) : 0;
                Matrix in(n_new + n_old, ctx.spec.input_dim()), tg(n_new + n_old, k);
                const Matrix new_in = normalize(feature_matrix(phase_data, rows), ctx.stats);
                for (std::size_t r = 0; r < n_new; ++r) {
                    std::copy_n(new_in.row(r).begin(), in.cols(), in.row(r).begin());
                    tg(r, phase_data.samples[rows[r]].label) = 1.0;
                }
                // Exemplar half, re-sampled by cycling through reshuffled passes over E.
                for (std::size_t r = 0; r < n_old; ++r) {
                    if (ex_pos == n_ex) {
                        std::shuffle(ex_cycle.begin(), ex_cycle.end(), rng);
                        ex_pos = 0;
                    }
                    const std::size_t j = ex_cycle[ex_pos++];
                    std::copy_n(ex_inputs.row(j).begin(), in.cols(), in.row(n_new + r).begin());
                    std::copy_n(ex_targets.row(j).begin(), k, tg.row(n_new + r).begin());
                }
                sum += soft_target_step(student, ctx.spec, in, tg, lr);
                ++steps;
            }
        }
        res.epoch_loss.push_back(steps ? sum / static_cast<double>(steps) : 0.0);
        if (ctx.on_epoch) ctx.on_epoch(e, student, model_prev);
    }
    res.model = student;
    res.student = std::move(student);
    finish(res, ctx);
    res.wall_time = seconds_since(t0);
    return res;
}

PhaseResult run_phase_full_data(const Dataset& accumulated, const RunConfig& cfg, std::uint64_t seed,
                                const PhaseContext& ctx) {
    const auto t0 = Clock::now();
    PhaseResult res;
    res.phase = ctx.phase;
    RunConfig c = cfg;
    c.seed = seed;
    const auto init = init_network(ctx.spec, derive_seed(seed, {stream::init}));
    res.model = train_supervised(init, accumulated, ctx, cfg.epochs_per_phase, cfg.lr_base, cfg.batch_size,
                                 shuffle_root(c, ctx.phase), &res.epoch_loss);
    res.student = res.model;
    finish(res, ctx);
    res.wall_time = seconds_since(t0);
    return res;
}

BenchmarkRun run_benchmark(const IILBenchmark& bm, const RunConfig& cfg, const std::string& config_digest,
                           const std::function<void(const MetricsRecord&)>& on_record, const EpochObserver& on_epoch) {
    cfg.validate();
    bm.validate(cfg.max_phase_ratio);
    PhaseContext ctx = PhaseContext::make(bm, cfg);
    if (ctx.test.empty()) throw std::invalid_argument("benchmark has no test set");

    BenchmarkRun run;
    run.record.strategy = to_string(cfg.strategy);
    run.record.seed = cfg.seed;
    run.record.config_digest = config_digest;
    auto emit = [&](const PhaseResult& r) {
        run.record.append({r.phase, r.acc_test, r.acc_base});
        run.phases.push_back(r);
        if (on_record) on_record(run.record);
    };

    {
        const auto t0 = Clock::now();
        PhaseResult base;
        base.model = train_base(bm, cfg);
        base.student = base.model;
        finish(base, ctx);
        base.wall_time = seconds_since(t0);
        emit(base);
    }

    ctx.on_epoch = on_epoch;
    Dataset accumulated = bm.base;
    for (std::size_t t = 1; t <= bm.phases.size(); ++t) {
        ctx.phase = t;
        const Dataset& data = bm.phases[t - 1];
        const ParamVector& prev = run.phases.back().model;
        switch (cfg.strategy) {
            case Strategy::dbd_kc: emit(run_phase_dbd_kc(prev, data, cfg, ctx)); break;
            case Strategy::fine_tune: emit(run_phase_fine_tune(prev, data, cfg, ctx)); break;
            case Strategy::vanilla_distill: emit(run_phase_vanilla_distill(prev, data, cfg, ctx)); break;
            case Strategy::full_data:
                accumulated.append(data);
                emit(run_phase_full_data(accumulated, cfg, cfg.seed, ctx));
                break;
        }
    }
    return run;
}

}  // namespace iil
