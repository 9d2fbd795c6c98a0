// Acceptance checks: one PASS/FAIL line per criterion, nonzero exit on any FAIL.
#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <string>

#include "iil/config.hpp"
#include "iil/dbd.hpp"
#include "iil/experiment.hpp"
#include "iil/kc.hpp"
#include "iil/metrics.hpp"
#include "iil/nn.hpp"

using namespace iil;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void report(int id, bool ok, const std::string& detail) {
    std::printf("criterion %2d: %s  %s\n", id, ok ? "PASS" : "FAIL", detail.c_str());
    std::fflush(stdout);
    failures += !ok;
}

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

Matrix random_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng) {
    std::normal_distribution<double> g(0.0, 1.0);
    Matrix m(r, c);
    for (auto& v : m.data()) v = g(rng);
    return m;
}

Matrix random_targets(std::size_t r, std::size_t k, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.05, 1.0);
    Matrix t(r, k);
    for (std::size_t i = 0; i < r; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < k; ++j) s += t(i, j) = u(rng);
        for (std::size_t j = 0; j < k; ++j) t(i, j) /= s;
    }
    return t;
}

double batch_loss(const ParamVector& p, const NetworkSpec& spec, const Matrix& x, const Matrix& t) {
    const Matrix probs = predict(p, spec, x);
    double s = 0.0;
    for (std::size_t r = 0; r < x.rows(); ++r) s += soft_cross_entropy(t.row(r), probs.row(r));
    return s / static_cast<double>(x.rows());
}

void gradients() {
    std::mt19937_64 rng(7);
    std::uniform_int_distribution<std::size_t> width(1, 8), cls(2, 6), depth(1, 2);
    double worst = 0.0;
    const int nets = 24;
    for (int n = 0; n < nets; ++n) {
        NetworkSpec spec;
        spec.activation = n % 2 ? Activation::tanh : Activation::relu;
        spec.layer_sizes.push_back(width(rng));
        for (std::size_t h = depth(rng); h > 0; --h) spec.layer_sizes.push_back(width(rng));
        spec.layer_sizes.push_back(cls(rng));
        auto p = init_network(spec, static_cast<std::uint64_t>(n));
        std::normal_distribution<double> g(0.0, 0.1);
        for (auto& v : p.values) v += g(rng);
        const Matrix x = random_matrix(6, spec.input_dim(), rng);
        const Matrix t = random_targets(6, spec.num_classes(), rng);
        auto fw = forward(p, spec, x);
        const auto grad = backward(p, spec, fw.cache, soft_ce_logit_grad(t, fw.probs, 1.0 / 6.0));
        const double h = 1e-5;
        for (std::size_t i = 0; i < p.size(); ++i) {
            ParamVector up = p, dn = p;
            up[i] += h;
            dn[i] -= h;
            const double fd = (batch_loss(up, spec, x, t) - batch_loss(dn, spec, x, t)) / (2 * h);
            const double rel = std::abs(fd - grad[i]) / std::max({std::abs(fd), std::abs(grad[i]), 1e-7});
            worst = std::max(worst, rel);
        }
    }
    report(1, worst < 1e-4, fmt("%d nets, max relative error %.2e (< 1e-4)", nets, worst));
}

void closed_form() {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> g(0.0, 1.0);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    auto rp = [&] {
        ParamVector p(12);
        for (auto& v : p.values) v = g(rng);
        return p;
    };
    double worst = 0.0;
    for (std::size_t n = 1; n <= 200; n += (n < 10 ? 1 : 19)) {
        const double alpha = n % 3 ? u(rng) : 0.97;
        const auto t0 = rp();
        kc::EmaState st{t0, 0, {}};
        std::vector<ParamVector> students;
        for (std::size_t i = 0; i < n; ++i) {
            students.push_back(rp());
            st = kc::consolidate(st, students.back(), alpha);
        }
        const auto cf = kc::closed_form_teacher(t0, students, alpha);
        for (std::size_t j = 0; j < cf.size(); ++j) worst = std::max(worst, std::abs(cf[j] - st.teacher[j]));
    }
    report(2, worst < 1e-10, fmt("closed form vs recursion, n <= 200: max error %.2e (< 1e-10)", worst));
}

void fused_labels() {
    std::mt19937_64 rng(3);
    std::uniform_int_distribution<std::size_t> kdist(2, 10);
    std::gamma_distribution<double> gam(0.7, 1.0);
    int bad_simplex = 0, bad_sharpen = 0, bad_half = 0, bad_rank = 0;
    const dbd::FuseConfig cfg{1.0, dbd::FuseVariant::literal};
    for (int i = 0; i < 10000; ++i) {
        const std::size_t k = kdist(rng);
        LabelDistribution p;
        p.probs.resize(k);
        double s = 0.0;
        for (auto& v : p.probs) s += v = gam(rng) + 1e-12;
        for (auto& v : p.probs) v /= s;
        const std::size_t label = std::uniform_int_distribution<std::size_t>(0, k - 1)(rng);
        const auto f = dbd::fuse_labels(LabelDistribution::one_hot(k, label), p, cfg);
        double sum = 0.0;
        bool neg = false;
        for (double v : f.probs) {
            sum += v;
            neg |= v < 0.0;
        }
        bad_simplex += neg || std::abs(sum - 1.0) > 1e-9;
        bad_sharpen += std::abs(f[label] - (1.0 + p[label]) / 2.0) > 1e-12 || f[label] < p[label];
        for (std::size_t a = 0; a < k; ++a) {
            if (a == label) continue;
            bad_half += std::abs(f[a] - p[a] / 2.0) > 1e-12;
            for (std::size_t b = 0; b < k; ++b)
                if (b != label && p[a] > p[b] && !(f[a] > f[b])) ++bad_rank;
        }
    }
    report(3, bad_simplex + bad_sharpen + bad_half + bad_rank == 0,
           fmt("10^4 cases: simplex %d, sharpening %d, halving %d, rank %d violations", bad_simplex, bad_sharpen,
               bad_half, bad_rank));
}

void metric_identities() {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
        std::vector<double> acc(11);
        for (auto& v : acc) v = u(rng);
        worst = std::max(worst, std::abs(performance_promotion(acc) - (acc.back() - acc.front())));
    }
    const std::vector<double> ours = {64.34, 69.27};
    const double pp = performance_promotion(ours, Unit::percent);
    char buf[32];
    std::snprintf(buf, sizeof buf, "%+.2f", pp);
    const bool sign = forgetting_rate(90.0, 92.0, Unit::percent) < 0.0 && forgetting_rate(93.0, 92.0, Unit::percent) > 0.0;
    report(4, worst < 1e-12 && std::string(buf) == "+4.93" && sign,
           fmt("telescoping error %.1e; PP(64.34 -> 69.27) = %s; forgetting negative: %s", worst, buf,
               sign ? "yes" : "no"));
}

void collapse() {
    ExperimentConfig cfg;
    bool same = true;
    for (std::uint64_t seed : {0u, 1u, 2u}) {
        const auto bm = build_benchmark(cfg, seed, 3);
        RunConfig a = cfg.cell(Strategy::dbd_kc, seed);
        a.lambda = 0.0;
        a.assignment = {dbd::Target::one_hot, dbd::Target::one_hot};
        a.kc_mode = KcMode::off;
        a.epochs_per_phase = 10;
        RunConfig b = a;
        b.strategy = Strategy::fine_tune;
        b.fine_tune_epochs = 10;
        std::vector<ParamVector> ta, tb;
        const auto ra = run_benchmark(bm, a, "", {}, [&](std::size_t, const ParamVector& s, const ParamVector&) {
            ta.push_back(s);
        });
        const auto rb = run_benchmark(bm, b, "", {}, [&](std::size_t, const ParamVector& s, const ParamVector&) {
            tb.push_back(s);
        });
        same &= !ta.empty() && ta == tb && ra.record.per_phase == rb.record.per_phase;
        for (std::size_t t = 0; t < ra.phases.size(); ++t) same &= ra.phases[t].model == rb.phases[t].model;
    }
    report(5, same, "stripped-down dbd_kc vs fine_tune, 3 seeds x 3 phases: per-epoch parameters bitwise equal");
}

struct Reference {
    std::map<Strategy, std::vector<MetricsRecord>> records;
    std::vector<double> kc_teacher, kc_student, it_teacher;
};

Reference run_reference() {
    ExperimentConfig cfg;
    Reference ref;
    for (auto seed : cfg.seeds) {
        const auto bm = build_benchmark(cfg, seed);
        for (auto s : kAllStrategies) {
            const auto run = run_benchmark(bm, cfg.cell(s, seed));
            ref.records[s].push_back(run.record);
            if (s == Strategy::dbd_kc) {
                ref.kc_teacher.push_back(run.phases.back().acc_test);
                ref.kc_student.push_back(run.phases.back().student_acc_test);
            }
        }
        auto it = cfg.cell(Strategy::dbd_kc, seed);
        it.kc_mode = KcMode::per_iteration;
        ref.it_teacher.push_back(run_benchmark(bm, it).phases.back().acc_test);
    }
    return ref;
}

double med(const std::vector<MetricsRecord>& rs, auto f) {
    std::vector<double> v;
    for (const auto& r : rs) v.push_back(f(r));
    return median(v);
}

void orderings(const Reference& ref) {
    auto final_test = [](const MetricsRecord& r) { return 100.0 * r.per_phase.back().acc_test; };
    auto pp = [](const MetricsRecord& r) { return 100.0 * *r.pp; };
    auto forget = [](const MetricsRecord& r) { return 100.0 * *r.forgetting; };
    const auto& dbd = ref.records.at(Strategy::dbd_kc);
    const auto& ft = ref.records.at(Strategy::fine_tune);
    const auto& full = ref.records.at(Strategy::full_data);
    const double a_full = med(full, final_test), a_dbd = med(dbd, final_test), a_ft = med(ft, final_test);
    const double f_dbd = med(dbd, forget), f_ft = med(ft, forget);
    const double pp_dbd = med(dbd, pp), pp_ft = med(ft, pp);
    int positive = 0;
    for (const auto& r : dbd) positive += *r.pp > 0.0;
    const bool a = a_full >= a_dbd && a_dbd >= a_ft;
    const bool b = std::abs(f_dbd) < std::abs(f_ft);
    const bool c = pp_dbd > 0.0 && pp_dbd > pp_ft && positive >= 4;
    const bool d = pp_ft <= 1.0;
    report(6, a && b && c && d,
           fmt("(a) final test %.2f >= %.2f >= %.2f %s; (b) |F| %.2f < %.2f %s; (c) PP %+.2f > %+.2f, %d/5 positive "
               "%s; (d) PP(fine_tune) %+.2f <= 1 %s",
               a_full, a_dbd, a_ft, a ? "ok" : "no", std::abs(f_dbd), std::abs(f_ft), b ? "ok" : "no", pp_dbd, pp_ft,
               positive, c ? "ok" : "no", pp_ft, d ? "ok" : "no"));
}

void kc_vs_iteration(const Reference& ref) {
    const double kc_t = 100.0 * median(ref.kc_teacher), kc_s = 100.0 * median(ref.kc_student);
    const double it_t = 100.0 * median(ref.it_teacher);
    report(7, it_t <= kc_t && kc_t >= kc_s,
           fmt("per-iteration teacher %.2f <= KC teacher %.2f; KC teacher %.2f >= student %.2f", it_t, kc_t, kc_t,
               kc_s));
}

void sweep_shape(const fs::path& scratch) {
    ExperimentConfig cfg;
    cfg.out_dir = scratch / "sweep";
    const auto d = cmd_sweep(cfg, SweepKnob::delta, cfg.sweep_delta).median_m1();
    const auto l = cmd_sweep(cfg, SweepKnob::lambda, cfg.sweep_lambda).median_m1();
    double best_interior = 0.0;
    for (std::size_t i = 1; i + 1 < d.size(); ++i) best_interior = std::max(best_interior, d[i]);
    const double last = d.back();
    const double spread = 100.0 * (*std::max_element(l.begin(), l.end()) - *std::min_element(l.begin(), l.end()));
    std::ostringstream dv, lv;
    for (std::size_t i = 0; i < d.size(); ++i) dv << (i ? " " : "") << fmt("%g:%.2f", cfg.sweep_delta[i], 100 * d[i]);
    for (std::size_t i = 0; i < l.size(); ++i) lv << (i ? " " : "") << fmt("%g:%.2f", cfg.sweep_lambda[i], 100 * l[i]);
    report(8, last < best_interior && spread < 1.0,
           fmt("delta [%s]: largest %.2f < best interior %.2f; lambda [%s]: spread %.2f pp (< 1)", dv.str().c_str(),
               100 * last, 100 * best_interior, lv.str().c_str(), spread));
}

void schedule() {
    const kc::Schedule s;
    std::vector<std::size_t> fired;
    for (std::size_t e = 1; e <= 60; ++e)
        if (kc::should_consolidate(e, s)) fired.push_back(e);
    const std::vector<std::size_t> expect = {15, 20, 25, 30, 35, 40, 45, 50, 55, 60};
    const double a15 = kc::adaptive_momentum(15, s);
    const double oracle = std::min(0.99, 1.0 - 15.0 / 515.0);
    report(9, fired == expect && std::abs(a15 - oracle) < 1e-9 && std::abs(a15 - 0.97087) < 1e-5,
           fmt("%zu consolidations at 15..60 step 5; alpha(15) = %.9f", fired.size(), a15));
}

void reproducibility(const fs::path& scratch) {
    ExperimentConfig cfg;
    std::string first, second;
    bool ok = true;
    for (auto s : kAllStrategies) {
        for (const char* tag : {"a", "b"}) {
            cfg.out_dir = scratch / tag;
            const auto out = run_cell(cfg, s, 1);
            ok &= out.ok;
        }
        const auto rel = fs::relative(run_dir(cfg, s, 1), cfg.out_dir) / "per_phase.csv";
        std::ifstream fa(scratch / "a" / rel, std::ios::binary), fb(scratch / "b" / rel, std::ios::binary);
        std::stringstream sa, sb;
        sa << fa.rdbuf();
        sb << fb.rdbuf();
        ok &= !sa.str().empty() && sa.str() == sb.str();
    }
    report(10, ok, "two runs per strategy with the same config and seed: per_phase.csv byte-identical");
}

}  // namespace

int main() {
    const fs::path scratch = fs::temp_directory_path() / ("iil_acceptance_" + std::to_string(::getpid()));
    fs::create_directories(scratch);
    try {
        gradients();
        closed_form();
        fused_labels();
        metric_identities();
        collapse();
        const auto ref = run_reference();
        orderings(ref);
        kc_vs_iteration(ref);
        sweep_shape(scratch);
        schedule();
        reproducibility(scratch);
    } catch (const std::exception& e) {
        std::printf("error: %s\n", e.what());
        ++failures;
    }
    fs::remove_all(scratch);
    std::printf("%s: %d failing\n", failures ? "FAIL" : "PASS", failures);
    return failures ? 1 : 0;
}
