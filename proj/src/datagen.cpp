#include "iil/datagen.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include "iil/seed.hpp"

namespace iil {

namespace {

constexpr std::uint64_t kTestFamily = 0x7e57;

// Lower Cholesky factor; throws when the matrix is not positive definite.
Matrix cholesky(const Matrix& a) {
    const std::size_t n = a.rows();
    Matrix l(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            double s = a(i, j);
            for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
            if (i == j) {
                if (!(s > 0.0)) throw std::invalid_argument("cluster covariance is not positive definite");
                l(i, i) = std::sqrt(s);
            } else {
                l(i, j) = s / l(j, j);
            }
        }
    }
    return l;
}

std::vector<double> global_mean(const std::vector<std::vector<double>>& means) {
    std::vector<double> g(means.front().size(), 0.0);
    for (const auto& m : means)
        for (std::size_t c = 0; c < g.size(); ++c) g[c] += m[c];
    for (auto& v : g) v /= static_cast<double>(means.size());
    return g;
}

}  // namespace

void SyntheticSpec::validate() const {
    if (num_classes < 2) throw std::invalid_argument("need at least two classes");
    if (dim == 0) throw std::invalid_argument("dimension must be positive");
    if (cluster_means.size() != num_classes) throw std::invalid_argument("one cluster mean per class required");
    for (const auto& m : cluster_means)
        if (m.size() != dim) throw std::invalid_argument("cluster mean dimension does not match dim");
    for (std::size_t i = 0; i < num_classes; ++i)
        for (std::size_t j = i + 1; j < num_classes; ++j)
            if (cluster_means[i] == cluster_means[j]) throw std::invalid_argument("cluster means must be distinct");
    if (cluster_cov.rows() != dim || cluster_cov.cols() != dim)
        throw std::invalid_argument("cluster covariance must be dim x dim");
    for (std::size_t i = 0; i < dim; ++i)
        for (std::size_t j = 0; j < dim; ++j)
            if (cluster_cov(i, j) != cluster_cov(j, i)) throw std::invalid_argument("cluster covariance must be symmetric");
    cholesky(cluster_cov);
    if (!(drift.cov_scale > 0.0)) throw std::invalid_argument("drift cov_scale must be positive");
    if (phase_class_dirichlet < 0.0) throw std::invalid_argument("phase_class_dirichlet must be non-negative");
}

SyntheticSpec SyntheticSpec::reference() {
    SyntheticSpec s;
    s.cluster_means = {{1.5, 0.0}, {0.0, 1.5}, {-1.5, 0.0}, {0.0, -1.5}};
    s.cluster_cov = Matrix(2, 2);
    s.cluster_cov(0, 0) = s.cluster_cov(1, 1) = 0.55 * 0.55;
    return s;
}

double base_sigma(const SyntheticSpec& spec) {
    double tr = 0.0;
    for (std::size_t i = 0; i < spec.dim; ++i) tr += spec.cluster_cov(i, i);
    return std::sqrt(tr / static_cast<double>(spec.dim));
}

ClusterParams phase_distribution(const SyntheticSpec& spec, std::size_t t) {
    spec.validate();
    ClusterParams p;
    const auto g = global_mean(spec.cluster_means);
    const double shift = static_cast<double>(t) * spec.drift.mean_shift * base_sigma(spec);
    const double angle = static_cast<double>(t) * spec.drift.rotation;
    for (const auto& m : spec.cluster_means) {
        std::vector<double> dir(spec.dim);
        double norm = 0.0;
        for (std::size_t c = 0; c < spec.dim; ++c) {
            dir[c] = m[c] - g[c];
            norm += dir[c] * dir[c];
        }
        norm = std::sqrt(norm);
        std::vector<double> moved = m;
        if (norm > 0.0)
            for (std::size_t c = 0; c < spec.dim; ++c) moved[c] += shift * dir[c] / norm;
        if (angle != 0.0 && spec.dim >= 2) {
            const double x = moved[0] - g[0], y = moved[1] - g[1];
            moved[0] = g[0] + std::cos(angle) * x - std::sin(angle) * y;
            moved[1] = g[1] + std::sin(angle) * x + std::cos(angle) * y;
        }
        p.means.push_back(std::move(moved));
    }
    p.cov = spec.cluster_cov;
    const double scale = std::pow(spec.drift.cov_scale, static_cast<double>(t));
    for (auto& v : p.cov.data()) v *= scale;
    return p;
}

Dataset sample_clusters(const ClusterParams& params, const std::vector<std::size_t>& counts, std::uint64_t seed) {
    if (counts.size() != params.means.size()) throw std::invalid_argument("one count per class required");
    const std::size_t dim = params.cov.rows();
    const Matrix l = cholesky(params.cov);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Dataset out;
    out.dim = dim;
    std::vector<double> z(dim);
    for (std::size_t k = 0; k < counts.size(); ++k) {
        for (std::size_t n = 0; n < counts[k]; ++n) {
            for (auto& v : z) v = normal(rng);
            Sample s{params.means[k], k};
            for (std::size_t i = 0; i < dim; ++i)
                for (std::size_t j = 0; j <= i; ++j) s.features[i] += l(i, j) * z[j];
            out.samples.push_back(std::move(s));
        }
    }
    return out;
}

std::uint64_t cluster_stream_seed(const SyntheticSpec& spec, std::uint64_t family, std::size_t t) {
    return derive_seed(spec.seed, {stream::data, family, t});
}

Dataset gen_base(const SyntheticSpec& spec) {
    spec.validate();
    return sample_clusters(phase_distribution(spec, 0),
                           std::vector<std::size_t>(spec.num_classes, spec.samples_per_class_base),
                           cluster_stream_seed(spec, 0, 0));
}

std::vector<std::size_t> phase_class_counts(const SyntheticSpec& spec, std::size_t t) {
    std::vector<std::size_t> counts(spec.num_classes, spec.samples_per_class_phase);
    if (spec.phase_class_dirichlet <= 0.0) return counts;

    std::mt19937_64 rng(derive_seed(spec.seed, {stream::split, t}));
    std::gamma_distribution<double> gamma(spec.phase_class_dirichlet, 1.0);
    std::vector<double> w(spec.num_classes);
    for (auto& v : w) v = gamma(rng);
    const double sum = std::accumulate(w.begin(), w.end(), 0.0);
    const std::size_t total = spec.samples_per_class_phase * spec.num_classes;

    // Largest-remainder rounding so that the counts sum to `total`.
    std::vector<double> exact(spec.num_classes);
    std::size_t assigned = 0;
    for (std::size_t k = 0; k < w.size(); ++k) {
        exact[k] = static_cast<double>(total) * w[k] / sum;
        counts[k] = static_cast<std::size_t>(std::floor(exact[k]));
        assigned += counts[k];
    }
    std::vector<std::size_t> order(w.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return exact[a] - std::floor(exact[a]) > exact[b] - std::floor(exact[b]);
    });
    for (std::size_t i = 0; assigned < total; ++i, ++assigned) ++counts[order[i % order.size()]];
    return counts;
}

Dataset gen_phase(const SyntheticSpec& spec, std::size_t t) {
    if (t < 1) throw std::invalid_argument("phase index must be >= 1");
    return sample_clusters(phase_distribution(spec, t), phase_class_counts(spec, t), cluster_stream_seed(spec, 0, t));
}

Dataset gen_test(const SyntheticSpec& spec, std::size_t num_phases) {
    Dataset out;
    out.dim = spec.dim;
    const std::size_t base_per_class =
        spec.samples_per_class_phase == 0
            ? spec.samples_per_class_test
            : spec.samples_per_class_test * spec.samples_per_class_base / spec.samples_per_class_phase;
    for (std::size_t t = 0; t <= num_phases; ++t) {
        const std::vector<std::size_t> counts(spec.num_classes, t == 0 ? base_per_class : spec.samples_per_class_test);
        out.append(sample_clusters(phase_distribution(spec, t), counts, cluster_stream_seed(spec, kTestFamily, t)));
    }
    return out;
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) {
        while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
        std::size_t b = 0;
        while (b < cell.size() && cell[b] == ' ') ++b;
        out.push_back(cell.substr(b));
    }
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

std::string at_line(const std::filesystem::path& path, std::size_t line) {
    return path.string() + ": line " + std::to_string(line) + ": ";
}

}  // namespace

CsvLoadResult load_csv(const std::filesystem::path& path, const CsvSchema& schema) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error(path.string() + ": empty file");
    if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);  // UTF-8 BOM
    const auto header = split_line(line);

    auto find_col = [&](const std::string& name) {
        auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) throw std::runtime_error(path.string() + ": missing column '" + name + "'");
        return static_cast<std::size_t>(it - header.begin());
    };
    const std::size_t label_idx = find_col(schema.label_col);
    std::vector<std::size_t> feat_idx;
    CsvLoadResult res;
    if (schema.feature_cols.empty()) {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (i != label_idx) {
                feat_idx.push_back(i);
                res.feature_names.push_back(header[i]);
            }
    } else {
        for (const auto& name : schema.feature_cols) {
            feat_idx.push_back(find_col(name));
            res.feature_names.push_back(name);
        }
    }
    if (feat_idx.empty()) throw std::runtime_error(path.string() + ": no feature columns");
    res.data.dim = feat_idx.size();

    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        const auto cells = split_line(line);
        if (cells.size() != header.size())
            throw std::runtime_error(at_line(path, lineno) + "expected " + std::to_string(header.size()) + " fields, got " +
                                     std::to_string(cells.size()));
        Sample s;
        bool finite = true;
        for (auto idx : feat_idx) {
            double v = 0.0;
            try {
                std::size_t used = 0;
                v = std::stod(cells[idx], &used);
                if (used != cells[idx].size()) throw std::invalid_argument("trailing characters");
            } catch (const std::exception&) {
                throw std::runtime_error(at_line(path, lineno) + "field '" + header[idx] + "' is not a number: '" +
                                         cells[idx] + "'");
            }
            if (!std::isfinite(v)) finite = false;
            s.features.push_back(v);
        }
        const auto& lab = cells[label_idx];
        long long label = -1;
        auto [ptr, ec] = std::from_chars(lab.data(), lab.data() + lab.size(), label);
        if (ec != std::errc() || ptr != lab.data() + lab.size() || label < 0)
            throw std::runtime_error(at_line(path, lineno) + "label '" + lab + "' is not a non-negative integer");
        if (!finite) {
            ++res.skipped_rows;
            continue;
        }
        s.label = static_cast<std::size_t>(label);
        res.data.samples.push_back(std::move(s));
    }
    if (res.skipped_rows > 0)
        std::cerr << "warning: " << path.string() << ": skipped " << res.skipped_rows << " row(s) with non-finite features\n";
    if (res.data.empty()) throw std::runtime_error(path.string() + ": dataset is empty");
    return res;
}

void write_csv(const std::filesystem::path& path, const Dataset& data, const std::vector<std::string>& feature_names) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    for (std::size_t c = 0; c < data.dim; ++c)
        out << (c < feature_names.size() ? feature_names[c] : "f" + std::to_string(c)) << ',';
    out << "label\n";
    char buf[32];
    for (const auto& s : data.samples) {
        for (double v : s.features) {
            std::snprintf(buf, sizeof buf, "%.17g", v);
            out << buf << ',';
        }
        out << s.label << '\n';
    }
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

NormStats compute_norm_stats(const Dataset& data) {
    if (data.empty()) throw std::invalid_argument("cannot compute normalization stats of an empty dataset");
    NormStats st;
    st.mean.assign(data.dim, 0.0);
    st.stddev.assign(data.dim, 0.0);
    const double n = static_cast<double>(data.size());
    for (const auto& s : data.samples)
        for (std::size_t c = 0; c < data.dim; ++c) st.mean[c] += s.features[c];
    for (auto& m : st.mean) m /= n;
    for (const auto& s : data.samples)
        for (std::size_t c = 0; c < data.dim; ++c) {
            const double d = s.features[c] - st.mean[c];
            st.stddev[c] += d * d;
        }
    for (auto& v : st.stddev) v = std::max(std::sqrt(v / n), kStdFloor);
    return st;
}

}  // namespace iil
