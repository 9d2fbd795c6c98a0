#include "iil/config.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "iil/seed.hpp"

namespace iil {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream in(s);
    while (std::getline(in, cur, sep)) {
        cur = trim(cur);
        if (!cur.empty()) out.push_back(cur);
    }
    return out;
}

double to_double(const std::string& key, const std::string& v) {
    double x = 0.0;
    const auto* end = v.data() + v.size();
    auto [p, ec] = std::from_chars(v.data(), end, x);
    if (ec != std::errc() || p != end) throw ConfigError("expected a number, got '" + v + "'", 0, key);
    return x;
}

std::uint64_t to_uint(const std::string& key, const std::string& v) {
    std::uint64_t x = 0;
    const auto* end = v.data() + v.size();
    auto [p, ec] = std::from_chars(v.data(), end, x);
    if (ec != std::errc() || p != end)
        throw ConfigError("expected a non-negative integer, got '" + v + "'", 0, key);
    return x;
}

std::string fmt(double v) {
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, p);
}

template <class T, class F>
std::string join(const std::vector<T>& xs, F f, const char* sep = ",") {
    std::string out;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (i) out += sep;
        out += f(xs[i]);
    }
    return out;
}

std::vector<double> doubles(const std::string& key, const std::string& v) {
    std::vector<double> out;
    for (const auto& s : split(v, ',')) out.push_back(to_double(key, s));
    return out;
}

// Manifest bookkeeping keys that a config file may carry.
const std::set<std::string> kIgnoredKeys = {"tool", "version", "status", "stage", "error", "config_digest"};

// Settings that do not change results.
const std::set<std::string> kNonDigestKeys = {"seeds", "strategies", "out_dir", "grid.resolution", "grid.margin",
                                              "sweep.delta", "sweep.lambda"};

}  // namespace

ConfigError::ConfigError(const std::string& detail, std::size_t line, std::string key)
    : std::runtime_error((line ? "line " + std::to_string(line) + ": " : std::string()) +
                         (key.empty() ? std::string() : "'" + key + "': ") + detail),
      line(line),
      key(std::move(key)),
      detail(detail) {}

std::string to_string(DataSource s) { return s == DataSource::synthetic ? "synthetic" : "csv"; }

void ExperimentConfig::set(const std::string& key, const std::string& raw) {
    const std::string v = trim(raw);
    auto num = [&] { return to_double(key, v); };
    auto uint = [&] { return static_cast<std::size_t>(to_uint(key, v)); };
    auto wrap = [&](auto&& fn) {
        try {
            fn();
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception& e) {
            throw ConfigError(e.what(), 0, key);
        }
    };

    wrap([&] {
        if (key == "strategies") {
            strategies.clear();
            for (const auto& s : split(v, ',')) {
                if (s == "all") {
                    for (auto st : kAllStrategies)
                        if (std::find(strategies.begin(), strategies.end(), st) == strategies.end())
                            strategies.push_back(st);
                } else {
                    auto st = strategy_from_string(s);
                    if (std::find(strategies.begin(), strategies.end(), st) == strategies.end())
                        strategies.push_back(st);
                }
            }
        } else if (key == "seeds") {
            seeds.clear();
            for (const auto& s : split(v, ',')) {
                const auto dash = s.find('-');
                if (dash != std::string::npos && dash > 0) {
                    const auto lo = to_uint(key, trim(s.substr(0, dash)));
                    const auto hi = to_uint(key, trim(s.substr(dash + 1)));
                    if (hi < lo) throw ConfigError("empty seed range '" + s + "'", 0, key);
                    for (auto x = lo; x <= hi; ++x) seeds.push_back(x);
                } else {
                    seeds.push_back(to_uint(key, s));
                }
            }
        } else if (key == "out_dir") {
            out_dir = v;
        } else if (key == "source") {
            if (v == "synthetic") source = DataSource::synthetic;
            else if (v == "csv") source = DataSource::csv;
            else throw ConfigError("expected synthetic or csv, got '" + v + "'", 0, key);
        } else if (key == "num_phases") {
            num_phases = uint();
        } else if (key == "synthetic.means") {
            // "x0 y0; x1 y1; ..." one point per class
            std::vector<std::vector<double>> means;
            for (const auto& pt : split(v, ';')) {
                std::vector<double> m;
                std::istringstream in(pt);
                std::string tok;
                while (in >> tok) m.push_back(to_double(key, tok));
                means.push_back(std::move(m));
            }
            if (means.empty()) throw ConfigError("no means given", 0, key);
            synthetic.cluster_means = means;
            synthetic.num_classes = means.size();
            synthetic.dim = means.front().size();
            if (synthetic.cluster_cov.rows() != synthetic.dim) {
                const double s2 = synthetic.cluster_cov.rows() ? synthetic.cluster_cov(0, 0) : 1.0;
                synthetic.cluster_cov = Matrix(synthetic.dim, synthetic.dim);
                for (std::size_t i = 0; i < synthetic.dim; ++i) synthetic.cluster_cov(i, i) = s2;
            }
        } else if (key == "synthetic.cov") {
            // row-major, space separated, dim x dim
            std::vector<double> xs;
            std::istringstream in(v);
            std::string tok;
            while (in >> tok) xs.push_back(to_double(key, tok));
            const std::size_t d = synthetic.dim;
            if (xs.size() != d * d)
                throw ConfigError("expected " + std::to_string(d * d) + " entries for a " + std::to_string(d) + "x" +
                                      std::to_string(d) + " covariance",
                                  0, key);
            Matrix c(d, d);
            c.data() = xs;
            synthetic.cluster_cov = c;
        } else if (key == "synthetic.samples_per_class_base") {
            synthetic.samples_per_class_base = uint();
        } else if (key == "synthetic.samples_per_class_phase") {
            synthetic.samples_per_class_phase = uint();
        } else if (key == "synthetic.samples_per_class_test") {
            synthetic.samples_per_class_test = uint();
        } else if (key == "synthetic.phase_class_dirichlet") {
            synthetic.phase_class_dirichlet = num();
        } else if (key == "drift.mean_shift") {
            synthetic.drift.mean_shift = num();
        } else if (key == "drift.cov_scale") {
            synthetic.drift.cov_scale = num();
        } else if (key == "drift.rotation") {
            synthetic.drift.rotation = num();
        } else if (key == "csv.path") {
            csv_path = v;
        } else if (key == "csv.test_path") {
            csv_test_path = v;
        } else if (key == "csv.label_col") {
            csv_schema.label_col = v;
        } else if (key == "csv.feature_cols") {
            csv_schema.feature_cols = split(v, ',');
        } else if (key == "csv.test_fraction") {
            csv_test_fraction = num();
        } else if (key == "split.base_fraction") {
            base_fraction = num();
        } else if (key == "split.imbalance") {
            imbalance = imbalance_from_string(v);
        } else if (key == "split.dirichlet_alpha") {
            dirichlet_alpha = num();
        } else if (key == "num_classes") {
            num_classes = uint();
        } else if (key == "hidden") {
            run.hidden.clear();
            for (const auto& s : split(v, ',')) run.hidden.push_back(static_cast<std::size_t>(to_uint(key, s)));
        } else if (key == "activation") {
            run.activation = activation_from_string(v);
        } else if (key == "epochs_per_phase") {
            run.epochs_per_phase = uint();
        } else if (key == "lr_base") {
            run.lr_base = num();
        } else if (key == "lr_incremental") {
            if (v == "auto") run.lr_incremental.reset();
            else run.lr_incremental = num();
        } else if (key == "batch_size") {
            run.batch_size = uint();
        } else if (key == "lambda") {
            run.lambda = num();
        } else if (key == "noise.mu") {
            run.noise.mu = num();
        } else if (key == "noise.delta") {
            run.noise.delta = num();
        } else if (key == "noise.seed") {
            run.noise.seed = to_uint(key, v);
        } else if (key == "fuse.tau") {
            run.fuse.tau = num();
        } else if (key == "fuse.variant") {
            run.fuse.variant = dbd::fuse_variant_from_string(v);
        } else if (key == "assign.inner") {
            run.assignment.inner = dbd::target_from_string(v);
        } else if (key == "assign.outer") {
            run.assignment.outer = dbd::target_from_string(v);
        } else if (key == "kc.mode") {
            run.kc_mode = kc_mode_from_string(v);
        } else if (key == "kc.freeze_epochs") {
            run.sched.freeze_epochs = uint();
        } else if (key == "kc.period_epochs") {
            run.sched.period_epochs = uint();
        } else if (key == "kc.alpha0") {
            run.sched.alpha0 = num();
        } else if (key == "kc.e_w") {
            run.sched.e_w = num();
        } else if (key == "fine_tune_epochs") {
            run.fine_tune_epochs = uint();
        } else if (key == "distill_epochs") {
            run.distill_epochs = uint();
        } else if (key == "exemplar_fraction") {
            run.exemplar_fraction = num();
        } else if (key == "max_phase_ratio") {
            run.max_phase_ratio = num();
        } else if (key == "grid.resolution") {
            grid_resolution = uint();
        } else if (key == "grid.margin") {
            grid_margin = num();
        } else if (key == "sweep.delta") {
            sweep_delta = doubles(key, v);
        } else if (key == "sweep.lambda") {
            sweep_lambda = doubles(key, v);
        } else if (kIgnoredKeys.count(key)) {
        } else {
            throw ConfigError("unknown key", 0, key);
        }
    });
}

std::vector<std::pair<std::string, std::string>> ExperimentConfig::entries() const {
    std::vector<std::pair<std::string, std::string>> e;
    auto u = [](std::uint64_t x) { return std::to_string(x); };
    e.emplace_back("strategies", join(strategies, [](Strategy s) { return to_string(s); }));
    e.emplace_back("seeds", join(seeds, u));
    e.emplace_back("out_dir", out_dir.string());
    e.emplace_back("source", to_string(source));
    e.emplace_back("num_phases", u(num_phases));
    if (source == DataSource::synthetic) {
        e.emplace_back("synthetic.means", join(synthetic.cluster_means,
                                               [](const std::vector<double>& m) { return join(m, fmt, " "); }, "; "));
        e.emplace_back("synthetic.cov", join(synthetic.cluster_cov.data(), fmt, " "));
        e.emplace_back("synthetic.samples_per_class_base", u(synthetic.samples_per_class_base));
        e.emplace_back("synthetic.samples_per_class_phase", u(synthetic.samples_per_class_phase));
        e.emplace_back("synthetic.samples_per_class_test", u(synthetic.samples_per_class_test));
        e.emplace_back("synthetic.phase_class_dirichlet", fmt(synthetic.phase_class_dirichlet));
        e.emplace_back("drift.mean_shift", fmt(synthetic.drift.mean_shift));
        e.emplace_back("drift.cov_scale", fmt(synthetic.drift.cov_scale));
        e.emplace_back("drift.rotation", fmt(synthetic.drift.rotation));
    } else {
        e.emplace_back("csv.path", csv_path.string());
        e.emplace_back("csv.test_path", csv_test_path.string());
        e.emplace_back("csv.label_col", csv_schema.label_col);
        e.emplace_back("csv.feature_cols", join(csv_schema.feature_cols, [](const std::string& s) { return s; }));
        e.emplace_back("csv.test_fraction", fmt(csv_test_fraction));
        e.emplace_back("split.base_fraction", fmt(base_fraction));
        e.emplace_back("split.imbalance", to_string(imbalance));
        e.emplace_back("split.dirichlet_alpha", fmt(dirichlet_alpha));
        e.emplace_back("num_classes", u(num_classes));
    }
    e.emplace_back("hidden", join(run.hidden, u));
    e.emplace_back("activation", to_string(run.activation));
    e.emplace_back("epochs_per_phase", u(run.epochs_per_phase));
    e.emplace_back("lr_base", fmt(run.lr_base));
    e.emplace_back("lr_incremental", run.lr_incremental ? fmt(*run.lr_incremental) : "auto");
    e.emplace_back("batch_size", u(run.batch_size));
    e.emplace_back("lambda", fmt(run.lambda));
    e.emplace_back("noise.mu", fmt(run.noise.mu));
    e.emplace_back("noise.delta", fmt(run.noise.delta));
    e.emplace_back("noise.seed", u(run.noise.seed));
    e.emplace_back("fuse.tau", fmt(run.fuse.tau));
    e.emplace_back("fuse.variant", dbd::to_string(run.fuse.variant));
    e.emplace_back("assign.inner", dbd::to_string(run.assignment.inner));
    e.emplace_back("assign.outer", dbd::to_string(run.assignment.outer));
    e.emplace_back("kc.mode", to_string(run.kc_mode));
    e.emplace_back("kc.freeze_epochs", u(run.sched.freeze_epochs));
    e.emplace_back("kc.period_epochs", u(run.sched.period_epochs));
    e.emplace_back("kc.alpha0", fmt(run.sched.alpha0));
    e.emplace_back("kc.e_w", fmt(run.sched.e_w));
    e.emplace_back("fine_tune_epochs", u(run.fine_tune_epochs));
    e.emplace_back("distill_epochs", u(run.distill_epochs));
    e.emplace_back("exemplar_fraction", fmt(run.exemplar_fraction));
    e.emplace_back("max_phase_ratio", fmt(run.max_phase_ratio));
    e.emplace_back("grid.resolution", u(grid_resolution));
    e.emplace_back("grid.margin", fmt(grid_margin));
    e.emplace_back("sweep.delta", join(sweep_delta, fmt));
    e.emplace_back("sweep.lambda", join(sweep_lambda, fmt));
    return e;
}

std::string ExperimentConfig::to_text() const {
    std::string out;
    for (const auto& [k, v] : entries()) out += k + " = " + v + "\n";
    return out;
}

std::string ExperimentConfig::digest() const {
    std::string canon;
    for (const auto& [k, v] : entries())
        if (!kNonDigestKeys.count(k)) canon += k + "=" + v + "\n";
    return fnv1a_hex(canon);
}

void ExperimentConfig::validate() const {
    if (seeds.empty()) throw ConfigError("at least one seed is required", 0, "seeds");
    if (strategies.empty()) throw ConfigError("at least one strategy is required", 0, "strategies");
    if (out_dir.empty()) throw ConfigError("output directory is empty", 0, "out_dir");
    if (source == DataSource::synthetic) {
        synthetic.validate();
    } else {
        if (csv_path.empty()) throw ConfigError("csv source needs a path", 0, "csv.path");
        if (csv_test_path.empty() && !(csv_test_fraction > 0.0 && csv_test_fraction < 1.0))
            throw ConfigError("must lie in (0,1) when no csv.test_path is given", 0, "csv.test_fraction");
        if (!(base_fraction > 0.0 && base_fraction < 1.0))
            throw ConfigError("must lie in (0,1)", 0, "split.base_fraction");
    }
    if (grid_resolution == 1) throw ConfigError("must be 0 (off) or at least 2", 0, "grid.resolution");
    RunConfig r = run;
    r.validate();
}

RunConfig ExperimentConfig::cell(Strategy s, std::uint64_t seed) const {
    RunConfig r = run;
    r.strategy = s;
    r.seed = seed;
    return r;
}

ExperimentConfig parse_config(const std::string& text) {
    ExperimentConfig cfg;
    std::istringstream in(text);
    std::string line;
    std::size_t no = 0;
    std::set<std::string> seen;
    while (std::getline(in, line)) {
        ++no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError("expected key = value", no, {});
        const std::string key = trim(line.substr(0, eq));
        if (key.empty()) throw ConfigError("empty key", no, {});
        if (!seen.insert(key).second) throw ConfigError("duplicate key", no, key);
        try {
            cfg.set(key, line.substr(eq + 1));
        } catch (const ConfigError& e) {
            throw ConfigError(e.detail, no, key);
        }
    }
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read config " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    try {
        return parse_config(ss.str());
    } catch (const ConfigError& e) {
        throw ConfigError(path.string() + ": " + e.what(), 0, {});
    }
}

void apply_override(ExperimentConfig& cfg, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) throw ConfigError("override must look like key=value, got '" + assignment + "'", 0, {});
    cfg.set(trim(assignment.substr(0, eq)), assignment.substr(eq + 1));
}

std::string fnv1a_hex(const std::string& text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace iil
