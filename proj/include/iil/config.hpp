#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "iil/datagen.hpp"
#include "iil/protocol.hpp"

namespace iil {

enum class DataSource { synthetic, csv };

std::string to_string(DataSource s);

// Parse failure with the offending line (0 when not from a file) and key.
struct ConfigError : std::runtime_error {
    ConfigError(const std::string& detail, std::size_t line, std::string key);
    std::size_t line;
    std::string key;
    std::string detail;
};

struct ExperimentConfig {
    RunConfig run;  // strategy and seed are filled per cell

    DataSource source = DataSource::synthetic;
    SyntheticSpec synthetic = SyntheticSpec::reference();
    std::size_t num_phases = 10;

    std::filesystem::path csv_path;
    std::filesystem::path csv_test_path;  // empty: carve csv_test_fraction out of csv_path
    CsvSchema csv_schema;
    double csv_test_fraction = 0.2;
    double base_fraction = 0.5;
    Imbalance imbalance = Imbalance::uniform_random;
    double dirichlet_alpha = 5.0;
    std::size_t num_classes = 0;  // 0: inferred from labels

    std::filesystem::path out_dir = "results";
    std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4};
    std::vector<Strategy> strategies = {std::begin(kAllStrategies), std::end(kAllStrategies)};

    std::size_t grid_resolution = 50;  // boundary grid per phase; 0 disables
    double grid_margin = 0.5;          // fraction of the data span added on each side

    std::vector<double> sweep_delta = {4, 40, 200, 400, 800, 2000};
    std::vector<double> sweep_lambda = {0.1, 0.5, 1, 2, 5, 10};

    void validate() const;

    // Applies one key=value assignment. Unknown keys throw.
    void set(const std::string& key, const std::string& value);

    // Canonical key=value lines in a fixed order.
    std::vector<std::pair<std::string, std::string>> entries() const;
    std::string to_text() const;

    // Digest of every setting that influences results (seed, strategy list
    // and output directory excluded).
    std::string digest() const;

    // The run configuration for one strategy x seed cell.
    RunConfig cell(Strategy s, std::uint64_t seed) const;
};

// Flat key=value text; '#' starts a comment. Keys written by run manifests
// for bookkeeping (status, stage, tool, ...) are accepted and ignored.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);

// "key=value" override, as passed with --set.
void apply_override(ExperimentConfig& cfg, const std::string& assignment);

// 64-bit FNV-1a, hex encoded.
std::string fnv1a_hex(const std::string& text);

}  // namespace iil
