#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "iil/data.hpp"
#include "iil/nn.hpp"

namespace iil {

// Fraction of rows whose argmax (lowest index on ties) equals the label.
// `data` must already live in the network's input space.
double accuracy(const ParamVector& params, const NetworkSpec& spec, const Dataset& data);

enum class Unit { fraction, percent };

// sum_{t=1..T} (P_t - P_{t-1}); needs at least P_0 and P_1.
double performance_promotion(std::span<const double> test_acc, Unit unit = Unit::fraction);

// P_T(D_0) - P_0(D_0); negative means forgetting. Inputs are range-checked
// against the unit.
double forgetting_rate(double p_final_base, double p0_base, Unit unit = Unit::fraction);

struct PhaseMetrics {
    std::size_t t = 0;
    double acc_test = 0.0;
    double acc_base = 0.0;

    bool operator==(const PhaseMetrics&) const = default;
};

struct MetricsRecord {
    std::string strategy;
    std::uint64_t seed = 0;
    std::string config_digest;
    std::vector<PhaseMetrics> per_phase;
    std::optional<double> pp;          // set once T >= 1
    std::optional<double> forgetting;  // set once T >= 1

    // Appends phase t (which must equal the current size) and refreshes pp/F.
    void append(const PhaseMetrics& m);
    void finalize();

    bool operator==(const MetricsRecord&) const = default;
};

struct GridRanges {
    double x_min = -1.0, x_max = 1.0, y_min = -1.0, y_max = 1.0;
};

// g x g lattice including the range endpoints, row-major with x varying fastest.
struct BoundaryGrid {
    GridRanges ranges;
    std::size_t resolution = 0;
    std::vector<double> x, y;
    std::vector<std::size_t> cls;
    std::vector<double> prob;
};

// Grid coordinates are raw features; `stats` (if given) maps them into the
// network's input space.
BoundaryGrid export_boundary_grid(const ParamVector& params, const NetworkSpec& spec, const GridRanges& ranges,
                                  std::size_t resolution, const NormStats* stats = nullptr);
// Columns x,y,class,prob.
void write_boundary_grid(const std::filesystem::path& path, const BoundaryGrid& grid);

// Two-sided 95% Student-t interval over runs.
struct SummaryStats {
    std::size_t n = 0;
    double mean = 0.0;
    double median = 0.0;
    double ci95 = 0.0;  // half width; 0 for n < 2
};

SummaryStats summarize(std::span<const double> values);
double median(std::vector<double> values);

std::string format_double(double v);

inline constexpr const char* kPerPhaseHeader = "strategy,seed,config_digest,t,acc_test,acc_base,acc_test_pct,acc_base_pct";
inline constexpr const char* kSummaryHeader = "strategy,seed,config_digest,phases,p0_test,pT_test,pp_pct,forgetting_pct";
inline constexpr const char* kAggregateHeader =
    "strategy,runs,final_test_pct_mean,final_test_pct_median,final_test_pct_ci95,pp_pct_mean,pp_pct_median,pp_pct_ci95,"
    "forgetting_pct_mean,forgetting_pct_median,forgetting_pct_ci95";

void write_per_phase_csv(const std::filesystem::path& path, std::span<const MetricsRecord> records);
std::vector<MetricsRecord> read_per_phase_csv(const std::filesystem::path& path);

// per_phase.csv, summary.csv, aggregate.csv and manifest.txt in `dir`.
void export_report(std::span<const MetricsRecord> records, const std::filesystem::path& dir);

}  // namespace iil
