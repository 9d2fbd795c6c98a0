#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "iil/data.hpp"
#include "iil/datagen.hpp"
#include "iil/dbd.hpp"
#include "iil/kc.hpp"
#include "iil/metrics.hpp"
#include "iil/nn.hpp"

namespace iil {

// Base set, ordered incremental sets over the same fixed classes, and a
// fixed test set. All features are raw (unnormalized).
struct IILBenchmark {
    Dataset base;
    std::vector<Dataset> phases;
    Dataset test;
    std::size_t num_classes = 0;

    // Label range, every class present in the base set, and
    // |phase| <= max_phase_ratio * |base| (skipped when max_phase_ratio <= 0).
    void validate(double max_phase_ratio = 0.2) const;
};

enum class Imbalance { uniform_random, dirichlet };

std::string to_string(Imbalance i);
Imbalance imbalance_from_string(const std::string& s);

// Random base subset of size round(base_fraction * N); the remainder is
// partitioned into num_phases incremental sets. uniform_random shuffles and
// cuts into near-equal chunks; dirichlet spreads each class over the phases
// with Dirichlet(dirichlet_alpha) proportions. The test set is left empty.
IILBenchmark split_benchmark(const Dataset& data, double base_fraction, std::size_t num_phases, std::uint64_t seed,
                             Imbalance imbalance = Imbalance::uniform_random, double dirichlet_alpha = 5.0,
                             std::size_t num_classes = 0);

IILBenchmark make_synthetic_benchmark(const SyntheticSpec& spec, std::size_t num_phases);

enum class Strategy { dbd_kc, fine_tune, vanilla_distill, full_data };

std::string to_string(Strategy s);
Strategy strategy_from_string(const std::string& s);
inline constexpr Strategy kAllStrategies[] = {Strategy::dbd_kc, Strategy::fine_tune, Strategy::vanilla_distill,
                                              Strategy::full_data};

// How the DBD teacher receives student knowledge.
enum class KcMode {
    kc_ema,         // scheduled EMA with adaptive momentum
    per_iteration,  // EMA after every SGD step once the freeze period is over, momentum alpha0
    off,            // teacher frozen at the previous model; the student is returned
};

std::string to_string(KcMode m);
KcMode kc_mode_from_string(const std::string& s);

struct RunConfig {
    Strategy strategy = Strategy::dbd_kc;
    std::vector<std::size_t> hidden = {16};
    Activation activation = Activation::relu;
    std::size_t epochs_per_phase = 60;
    double lr_base = 0.1;
    std::optional<double> lr_incremental;  // defaults to 0.1 * lr_base
    std::size_t batch_size = 32;
    dbd::FuseConfig fuse;
    dbd::NoiseSpec noise;
    double lambda = 0.1;
    dbd::LabelAssignment assignment;
    kc::Schedule sched;
    KcMode kc_mode = KcMode::kc_ema;
    std::size_t fine_tune_epochs = 10;
    std::size_t distill_epochs = 10;  // vanilla distillation baseline
    double exemplar_fraction = 0.1;
    // Upper bound on |phase| / |base| checked before a run; <= 0 disables it.
    double max_phase_ratio = 0.2;
    std::uint64_t seed = 0;

    double lr_inc() const { return lr_incremental.value_or(0.1 * lr_base); }
    NetworkSpec network(std::size_t input_dim, std::size_t num_classes) const;
    void validate() const;
};

// Per-epoch hook: (epoch, student, teacher). Teacher equals the student for
// single-model strategies.
using EpochObserver = std::function<void(std::size_t, const ParamVector&, const ParamVector&)>;

// Fixed inputs shared by every phase of a run. `test` and `base` are kept
// normalized with the frozen base statistics, ready for evaluation.
struct PhaseContext {
    NetworkSpec spec;
    NormStats stats;
    Dataset test;
    Dataset base;
    std::size_t phase = 0;
    EpochObserver on_epoch;

    static PhaseContext make(const IILBenchmark& bm, const RunConfig& cfg);
};

struct PhaseResult {
    std::size_t phase = 0;
    ParamVector model;    // the returned phase model
    ParamVector student;  // the trained student (equals model for single-model strategies)
    double acc_test = 0.0;
    double acc_base = 0.0;
    double student_acc_test = 0.0;
    double wall_time = 0.0;  // seconds
    std::vector<double> epoch_loss;
    std::vector<kc::EmaState::Step> consolidations;
};

// Shuffled mini-batches of one epoch: floor(n / batch_size) full batches, or a
// single batch of everything when n < batch_size.
std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n, std::size_t batch_size, std::uint64_t seed);

// Plain one-hot cross-entropy SGD on `data` starting from `params`.
ParamVector train_supervised(ParamVector params, const Dataset& data, const PhaseContext& ctx, std::size_t epochs,
                             double lr, std::size_t batch_size, std::uint64_t seed, std::vector<double>* epoch_loss = nullptr);

// M_0: fresh init, epochs_per_phase epochs on D(0) at lr_base.
ParamVector train_base(const IILBenchmark& bm, const RunConfig& cfg);

PhaseResult run_phase_dbd_kc(const ParamVector& model_prev, const Dataset& phase_data, const RunConfig& cfg,
                             const PhaseContext& ctx);
PhaseResult run_phase_fine_tune(const ParamVector& model_prev, const Dataset& phase_data, const RunConfig& cfg,
                                const PhaseContext& ctx);
PhaseResult run_phase_vanilla_distill(const ParamVector& model_prev, const Dataset& phase_data, const RunConfig& cfg,
                                      const PhaseContext& ctx);
PhaseResult run_phase_full_data(const Dataset& accumulated, const RunConfig& cfg, std::uint64_t seed,
                                const PhaseContext& ctx);

// Exemplar subset size used by vanilla distillation.
std::size_t exemplar_count(std::size_t n, double fraction);

struct BenchmarkRun {
    std::vector<PhaseResult> phases;  // index 0 is the base model
    MetricsRecord record;
};

// train_base, then phases 1..T under cfg.strategy. `on_record` sees the
// record after every phase so callers can flush partial results.
BenchmarkRun run_benchmark(const IILBenchmark& bm, const RunConfig& cfg, const std::string& config_digest = {},
                           const std::function<void(const MetricsRecord&)>& on_record = {},
                           const EpochObserver& on_epoch = {});

}  // namespace iil
