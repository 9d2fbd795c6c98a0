#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "iil/data.hpp"
#include "iil/matrix.hpp"

namespace iil {

// Geometric concept drift applied per phase t.
struct DriftSpec {
    double mean_shift = 0.5;  // per phase, in units of the base cluster sigma
    double cov_scale = 1.04;  // covariance multiplier per phase (compounds: cov_scale^t)
    double rotation = 0.13;   // radians per phase, first two coordinates, about the global mean
};

struct SyntheticSpec {
    std::size_t num_classes = 4;
    std::size_t dim = 2;
    std::size_t samples_per_class_base = 500;
    std::size_t samples_per_class_phase = 50;
    // Per phase distribution; the base distribution gets this many times
    // samples_per_class_base / samples_per_class_phase, so the test mix follows
    // the training volume of each distribution.
    std::size_t samples_per_class_test = 20;
    std::vector<std::vector<double>> cluster_means;
    Matrix cluster_cov;  // shared by all classes
    DriftSpec drift;
    // Dirichlet concentration for per-phase class proportions; 0 keeps phases balanced.
    double phase_class_dirichlet = 0.0;
    std::uint64_t seed = 0;

    void validate() const;
    // Reference 4-class 2-D mixture: means on a circle of radius 1.5, sigma 0.55.
    static SyntheticSpec reference();
};

struct ClusterParams {
    std::vector<std::vector<double>> means;
    Matrix cov;
};

// Base cluster sigma: sqrt of the mean diagonal covariance entry.
double base_sigma(const SyntheticSpec& spec);

// Cluster parameters of phase t (t = 0 is the base distribution). Class k
// moves by t * mean_shift * sigma along the unit direction from the global
// mean to its base mean; the covariance is scaled by cov_scale^t.
ClusterParams phase_distribution(const SyntheticSpec& spec, std::size_t t);

// counts[k] i.i.d. draws from N(means[k], cov), class-major order.
Dataset sample_clusters(const ClusterParams& params, const std::vector<std::size_t>& counts, std::uint64_t seed);

Dataset gen_base(const SyntheticSpec& spec);
Dataset gen_phase(const SyntheticSpec& spec, std::size_t t);
// Fixed test set over distributions 0..num_phases, weighted as described above.
Dataset gen_test(const SyntheticSpec& spec, std::size_t num_phases);

// Per-class sample counts of phase t (balanced unless phase_class_dirichlet > 0).
std::vector<std::size_t> phase_class_counts(const SyntheticSpec& spec, std::size_t t);

// Seed of the sample stream for distribution t in the given stream family.
std::uint64_t cluster_stream_seed(const SyntheticSpec& spec, std::uint64_t family, std::size_t t);

struct CsvSchema {
    std::vector<std::string> feature_cols;  // empty: every column except the label
    std::string label_col = "label";
};

struct CsvLoadResult {
    Dataset data;
    std::size_t skipped_rows = 0;  // rows with NaN/Inf features
    std::vector<std::string> feature_names;
};

CsvLoadResult load_csv(const std::filesystem::path& path, const CsvSchema& schema = {});
// Header f0..f{d-1},label; values printed with round-trip precision.
void write_csv(const std::filesystem::path& path, const Dataset& data, const std::vector<std::string>& feature_names = {});

NormStats compute_norm_stats(const Dataset& data);

}  // namespace iil
