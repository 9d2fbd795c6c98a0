#include "iil/metrics.hpp"

#include <algorithm>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "iil/version.hpp"

namespace iil {

double accuracy(const ParamVector& params, const NetworkSpec& spec, const Dataset& data) {
    if (data.empty()) throw std::invalid_argument("accuracy of an empty dataset");
    const Matrix probs = predict(params, spec, feature_matrix(data));
    std::size_t correct = 0;
    for (std::size_t r = 0; r < data.size(); ++r)
        if (argmax_row(probs.row(r)) == data.samples[r].label) ++correct;
    return static_cast<double>(correct) / static_cast<double>(data.size());
}

namespace {

void check_range(double v, Unit unit) {
    const double hi = unit == Unit::fraction ? 1.0 : 100.0;
    if (!(v >= 0.0 && v <= hi))
        throw std::invalid_argument("accuracy " + format_double(v) + " outside the " +
                                    (unit == Unit::fraction ? "fraction range [0,1]" : "percent range [0,100]"));
}

}  // namespace

double performance_promotion(std::span<const double> test_acc, Unit unit) {
    if (test_acc.size() < 2) throw std::invalid_argument("performance promotion needs P_0 and at least one phase");
    for (double v : test_acc) check_range(v, unit);
    double pp = 0.0;
    for (std::size_t t = 1; t < test_acc.size(); ++t) pp += test_acc[t] - test_acc[t - 1];
    return pp;
}

double forgetting_rate(double p_final_base, double p0_base, Unit unit) {
    check_range(p_final_base, unit);
    check_range(p0_base, unit);
    return p_final_base - p0_base;
}

void MetricsRecord::append(const PhaseMetrics& m) {
    if (m.t != per_phase.size()) throw std::invalid_argument("phase records must be appended in order");
    per_phase.push_back(m);
    finalize();
}

void MetricsRecord::finalize() {
    pp.reset();
    forgetting.reset();
    if (per_phase.size() < 2) return;
    std::vector<double> test;
    for (const auto& p : per_phase) test.push_back(p.acc_test);
    pp = performance_promotion(test);
    forgetting = forgetting_rate(per_phase.back().acc_base, per_phase.front().acc_base);
}

BoundaryGrid export_boundary_grid(const ParamVector& params, const NetworkSpec& spec, const GridRanges& ranges,
                                  std::size_t resolution, const NormStats* stats) {
    if (spec.input_dim() != 2)
        throw std::invalid_argument("boundary grid needs 2-D inputs; project the data to two dimensions first");
    if (resolution < 2) throw std::invalid_argument("grid resolution must be >= 2");
    BoundaryGrid g;
    g.ranges = ranges;
    g.resolution = resolution;
    Matrix pts(resolution * resolution, 2);
    const double step = 1.0 / static_cast<double>(resolution - 1);
    for (std::size_t j = 0; j < resolution; ++j)
        for (std::size_t i = 0; i < resolution; ++i) {
            const double x = ranges.x_min + (ranges.x_max - ranges.x_min) * static_cast<double>(i) * step;
            const double y = ranges.y_min + (ranges.y_max - ranges.y_min) * static_cast<double>(j) * step;
            pts(j * resolution + i, 0) = x;
            pts(j * resolution + i, 1) = y;
            g.x.push_back(x);
            g.y.push_back(y);
        }
    const Matrix probs = predict(params, spec, stats ? normalize(pts, *stats) : pts);
    for (std::size_t r = 0; r < probs.rows(); ++r) {
        const auto k = argmax_row(probs.row(r));
        g.cls.push_back(k);
        g.prob.push_back(probs(r, k));
    }
    return g;
}

void write_boundary_grid(const std::filesystem::path& path, const BoundaryGrid& grid) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << "x,y,class,prob\n";
    for (std::size_t i = 0; i < grid.cls.size(); ++i)
        out << format_double(grid.x[i]) << ',' << format_double(grid.y[i]) << ',' << grid.cls[i] << ','
            << format_double(grid.prob[i]) << '\n';
}

double median(std::vector<double> values) {
    if (values.empty()) throw std::invalid_argument("median of an empty set");
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

SummaryStats summarize(std::span<const double> values) {
    SummaryStats s;
    s.n = values.size();
    if (s.n == 0) return s;
    s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(s.n);
    s.median = median({values.begin(), values.end()});
    if (s.n < 2) return s;
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    const double sd = std::sqrt(ss / static_cast<double>(s.n - 1));
    const boost::math::students_t dist(static_cast<double>(s.n - 1));
    s.ci95 = boost::math::quantile(dist, 0.975) * sd / std::sqrt(static_cast<double>(s.n));
    return s;
}

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

namespace {

std::string pct(double fraction) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", 100.0 * fraction);
    return buf;
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    return out;
}

}  // namespace

void write_per_phase_csv(const std::filesystem::path& path, std::span<const MetricsRecord> records) {
    auto out = open_out(path);
    out << kPerPhaseHeader << '\n';
    for (const auto& r : records)
        for (const auto& p : r.per_phase)
            out << r.strategy << ',' << r.seed << ',' << r.config_digest << ',' << p.t << ',' << format_double(p.acc_test)
                << ',' << format_double(p.acc_base) << ',' << pct(p.acc_test) << ',' << pct(p.acc_base) << '\n';
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::vector<MetricsRecord> read_per_phase_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::string line;
    if (!std::getline(in, line) || line != kPerPhaseHeader)
        throw std::runtime_error(path.string() + ": unexpected header");
    std::vector<MetricsRecord> out;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::istringstream ss(line);
        for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
        if (f.size() != 8) throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": expected 8 fields");
        const auto seed = std::stoull(f[1]);
        if (out.empty() || out.back().strategy != f[0] || out.back().seed != seed || out.back().config_digest != f[2]) {
            out.emplace_back();
            out.back().strategy = f[0];
            out.back().seed = seed;
            out.back().config_digest = f[2];
        }
        out.back().append({std::stoull(f[3]), std::stod(f[4]), std::stod(f[5])});
    }
    return out;
}

void export_report(std::span<const MetricsRecord> records, const std::filesystem::path& dir) {
    if (records.empty()) throw std::invalid_argument("no records to report");
    std::filesystem::create_directories(dir);
    write_per_phase_csv(dir / "per_phase.csv", records);

    {
        auto out = open_out(dir / "summary.csv");
        out << kSummaryHeader << '\n';
        for (const auto& r : records) {
            const auto& first = r.per_phase.front();
            const auto& last = r.per_phase.back();
            out << r.strategy << ',' << r.seed << ',' << r.config_digest << ',' << (r.per_phase.size() - 1) << ','
                << pct(first.acc_test) << ',' << pct(last.acc_test) << ',' << (r.pp ? pct(*r.pp) : "") << ','
                << (r.forgetting ? pct(*r.forgetting) : "") << '\n';
        }
    }

    // Strategies in first-appearance order.
    std::vector<std::string> order;
    std::map<std::string, std::vector<const MetricsRecord*>> by_strategy;
    for (const auto& r : records) {
        if (!by_strategy.contains(r.strategy)) order.push_back(r.strategy);
        by_strategy[r.strategy].push_back(&r);
    }
    {
        auto out = open_out(dir / "aggregate.csv");
        out << kAggregateHeader << '\n';
        for (const auto& name : order) {
            std::vector<double> fin, pp, f;
            for (const auto* r : by_strategy[name]) {
                fin.push_back(100.0 * r->per_phase.back().acc_test);
                if (r->pp) pp.push_back(100.0 * *r->pp);
                if (r->forgetting) f.push_back(100.0 * *r->forgetting);
            }
            auto cols = [&](const std::vector<double>& v) {
                if (v.empty()) return std::string(",,");
                const auto s = summarize(v);
                char buf[96];
                std::snprintf(buf, sizeof buf, "%.4f,%.4f,%.4f", s.mean, s.median, s.ci95);
                return std::string(buf);
            };
            out << name << ',' << fin.size() << ',' << cols(fin) << ',' << cols(pp) << ',' << cols(f) << '\n';
        }
    }
    {
        auto out = open_out(dir / "manifest.txt");
        out << "tool=" << kToolName << '\n' << "version=" << kVersion << '\n';
        out << "records=" << records.size() << '\n';
        out << "accuracy_unit=fraction in per_phase.csv acc_* columns; percent in *_pct columns\n";
        out << "ci_method=two-sided 95% Student-t interval over seeds, half width = t(0.975, n-1) * sd / sqrt(n)\n";
        for (const auto& r : records)
            out << "run=" << r.strategy << " seed=" << r.seed << " config_digest=" << r.config_digest << '\n';
    }
}

}  // namespace iil
