#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "iil/config.hpp"
#include "iil/metrics.hpp"
#include "iil/protocol.hpp"

namespace iil {

// Benchmark for one seed. Synthetic data and CSV splits both draw from
// streams of that seed. `num_phases` overrides cfg.num_phases when set.
IILBenchmark build_benchmark(const ExperimentConfig& cfg, std::uint64_t seed, std::optional<std::size_t> num_phases = {});

// Writes <out>/split/seed_<s>/{base,phase_NN,test}.csv plus manifest.txt per seed.
std::vector<std::filesystem::path> cmd_split(const ExperimentConfig& cfg);

struct RunOutcome {
    Strategy strategy = Strategy::dbd_kc;
    std::uint64_t seed = 0;
    bool ok = false;
    std::string stage;  // last stage entered
    std::string error;
    std::filesystem::path dir;
    MetricsRecord record;
};

using Progress = std::function<void(const std::string&)>;

std::filesystem::path run_dir(const ExperimentConfig& cfg, Strategy s, std::uint64_t seed);

// One strategy x seed cell: per_phase.csv (flushed after each phase),
// timing.csv, boundary_tNN.csv for 2-D data, and manifest.txt. The manifest
// is a loadable config that reproduces the cell, followed by its status.
RunOutcome run_cell(const ExperimentConfig& cfg, Strategy s, std::uint64_t seed);

// Every strategy x seed cell on up to `parallel` threads, then the aggregate
// report in cfg.out_dir over the cells that completed.
std::vector<RunOutcome> cmd_run(const ExperimentConfig& cfg, std::size_t parallel = 1, const Progress& progress = {});

enum class SweepKnob { delta, lambda };

std::string to_string(SweepKnob k);
SweepKnob sweep_knob_from_string(const std::string& s);

struct SweepRow {
    double value = 0.0;
    std::uint64_t seed = 0;
    double acc_m0 = 0.0;          // base model on the test set
    double acc_m1 = 0.0;          // phase-1 student, the model the noise and lambda act on
    double teacher_acc_m1 = 0.0;  // returned phase-1 model
};

struct SweepResult {
    SweepKnob knob = SweepKnob::delta;
    std::vector<double> values;
    std::vector<SweepRow> rows;  // value-major, then seed

    // Median over seeds of acc_m1 (or teacher_acc_m1) per value, in value order.
    std::vector<double> median_m1(bool teacher = false) const;
};

// dbd_kc on one incremental phase per value and seed. Writes
// sweep_<knob>.csv (one row per value) and sweep_<knob>_runs.csv.
SweepResult cmd_sweep(const ExperimentConfig& cfg, SweepKnob knob, const std::vector<double>& values,
                      std::size_t parallel = 1);

// Collects runs/*/*/per_phase.csv below results_dir and writes the report
// into `out` (results_dir when empty). Returns the number of records.
std::size_t cmd_report(const std::filesystem::path& results_dir, const std::filesystem::path& out = {});

}  // namespace iil
