#include "iil/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "iil/datagen.hpp"
#include "iil/seed.hpp"
#include "iil/version.hpp"

namespace fs = std::filesystem;

namespace iil {

namespace {

std::ofstream open_out(const fs::path& p) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + p.string());
    return out;
}

std::string pct(double fraction) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", 100.0 * fraction);
    return buf;
}

std::string two_digits(std::size_t t) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%02zu", t);
    return buf;
}

// Splits off round(fraction * n) random rows as a held-out test set.
std::pair<Dataset, Dataset> holdout(const Dataset& data, double fraction, std::uint64_t seed) {
    std::vector<std::size_t> idx(data.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    const auto n_test = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(data.size())));
    std::vector<std::size_t> test_idx(idx.begin(), idx.begin() + n_test);
    std::vector<std::size_t> keep_idx(idx.begin() + n_test, idx.end());
    std::sort(test_idx.begin(), test_idx.end());
    std::sort(keep_idx.begin(), keep_idx.end());
    Dataset keep{data.dim, {}}, test{data.dim, {}};
    for (auto i : keep_idx) keep.push_back(data.samples[i]);
    for (auto i : test_idx) test.push_back(data.samples[i]);
    return {keep, test};
}

std::size_t max_label(const Dataset& d) {
    std::size_t m = 0;
    for (const auto& s : d.samples) m = std::max(m, s.label);
    return m;
}

GridRanges data_ranges(const IILBenchmark& bm, double margin) {
    double lo[2] = {std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
    double hi[2] = {-lo[0], -lo[1]};
    auto visit = [&](const Dataset& d) {
        for (const auto& s : d.samples)
            for (int c = 0; c < 2; ++c) {
                lo[c] = std::min(lo[c], s.features[c]);
                hi[c] = std::max(hi[c], s.features[c]);
            }
    };
    visit(bm.base);
    for (const auto& p : bm.phases) visit(p);
    visit(bm.test);
    GridRanges r;
    const double px = margin * (hi[0] - lo[0]), py = margin * (hi[1] - lo[1]);
    r.x_min = lo[0] - px;
    r.x_max = hi[0] + px;
    r.y_min = lo[1] - py;
    r.y_max = hi[1] + py;
    return r;
}

// Runs fn(i) for i in [0, n) on up to `threads` workers; rethrows the first
// failure after all workers stop.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn) {
    threads = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(n, 1));
    if (threads == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr first;
    std::mutex mu;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < threads; ++w)
        pool.emplace_back([&] {
            for (std::size_t i; (i = next++) < n;) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(mu);
                    if (!first) first = std::current_exception();
                }
            }
        });
    for (auto& t : pool) t.join();
    if (first) std::rethrow_exception(first);
}

void write_benchmark_manifest(const fs::path& path, const ExperimentConfig& cfg, std::uint64_t seed,
                              const IILBenchmark& bm) {
    auto out = open_out(path);
    out << "tool = " << kToolName << "\nversion = " << kVersion << "\nseed = " << seed
        << "\nconfig_digest = " << cfg.digest() << "\nnum_classes = " << bm.num_classes << "\ndim = " << bm.base.dim
        << "\nbase_size = " << bm.base.size() << "\ntest_size = " << bm.test.size()
        << "\nnum_phases = " << bm.phases.size() << '\n';
    for (std::size_t t = 0; t < bm.phases.size(); ++t) {
        std::vector<std::size_t> counts(bm.num_classes, 0);
        for (const auto& s : bm.phases[t].samples) ++counts[s.label];
        out << "phase_" << two_digits(t + 1) << ".class_counts = ";
        for (std::size_t k = 0; k < counts.size(); ++k) out << (k ? "," : "") << counts[k];
        out << '\n';
    }
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace

IILBenchmark build_benchmark(const ExperimentConfig& cfg, std::uint64_t seed, std::optional<std::size_t> num_phases) {
    const std::size_t phases = num_phases.value_or(cfg.num_phases);
    if (cfg.source == DataSource::synthetic) {
        SyntheticSpec spec = cfg.synthetic;
        spec.seed = derive_seed(seed, {stream::data});
        return make_synthetic_benchmark(spec, phases);
    }

    const auto loaded = load_csv(cfg.csv_path, cfg.csv_schema);
    if (loaded.skipped_rows)
        std::fprintf(stderr, "warning: %s: skipped %zu rows with non-finite features\n", cfg.csv_path.string().c_str(),
                     loaded.skipped_rows);
    Dataset pool = loaded.data, test;
    if (!cfg.csv_test_path.empty()) {
        auto t = load_csv(cfg.csv_test_path, cfg.csv_schema);
        if (t.skipped_rows)
            std::fprintf(stderr, "warning: %s: skipped %zu rows with non-finite features\n",
                         cfg.csv_test_path.string().c_str(), t.skipped_rows);
        if (t.data.dim != pool.dim) throw std::invalid_argument("test CSV feature count differs from training CSV");
        test = std::move(t.data);
    } else {
        std::tie(pool, test) = holdout(pool, cfg.csv_test_fraction, derive_seed(seed, {stream::split, 1}));
    }
    std::size_t k = cfg.num_classes;
    if (k == 0) k = std::max(max_label(pool), test.empty() ? 0 : max_label(test)) + 1;
    IILBenchmark bm = split_benchmark(pool, cfg.base_fraction, phases, derive_seed(seed, {stream::split}),
                                      cfg.imbalance, cfg.dirichlet_alpha, k);
    bm.test = std::move(test);
    bm.validate(cfg.run.max_phase_ratio);
    return bm;
}

std::vector<fs::path> cmd_split(const ExperimentConfig& cfg) {
    cfg.validate();
    std::vector<fs::path> dirs;
    for (auto seed : cfg.seeds) {
        const IILBenchmark bm = build_benchmark(cfg, seed);
        bm.validate(cfg.run.max_phase_ratio);
        const fs::path dir = cfg.out_dir / "split" / ("seed_" + std::to_string(seed));
        fs::create_directories(dir);
        write_csv(dir / "base.csv", bm.base);
        for (std::size_t t = 0; t < bm.phases.size(); ++t)
            write_csv(dir / ("phase_" + two_digits(t + 1) + ".csv"), bm.phases[t]);
        write_csv(dir / "test.csv", bm.test);
        write_benchmark_manifest(dir / "manifest.txt", cfg, seed, bm);
        dirs.push_back(dir);
    }
    return dirs;
}

fs::path run_dir(const ExperimentConfig& cfg, Strategy s, std::uint64_t seed) {
    return cfg.out_dir / "runs" / to_string(s) / ("seed_" + std::to_string(seed));
}

RunOutcome run_cell(const ExperimentConfig& cfg, Strategy s, std::uint64_t seed) {
    RunOutcome res;
    res.strategy = s;
    res.seed = seed;
    res.dir = run_dir(cfg, s, seed);

    ExperimentConfig cell_cfg = cfg;
    cell_cfg.seeds = {seed};
    cell_cfg.strategies = {s};
    const std::string digest = cfg.digest();

    auto write_manifest = [&](const std::string& status) {
        auto out = open_out(res.dir / "manifest.txt");
        out << "# " << kToolName << " run manifest; usable as --config to repeat this run\n"
            << cell_cfg.to_text() << "tool = " << kToolName << "\nversion = " << kVersion
            << "\nconfig_digest = " << digest << "\nstatus = " << status << "\nstage = " << res.stage << '\n';
        if (!res.error.empty()) {
            std::string e = res.error;
            std::replace(e.begin(), e.end(), '\n', ' ');
            std::replace(e.begin(), e.end(), '#', ' ');
            out << "error = " << e << '\n';
        }
    };

    try {
        fs::create_directories(res.dir);
        res.stage = "data";
        write_manifest("running");
        const IILBenchmark bm = build_benchmark(cfg, seed);

        res.stage = "phase 0";
        write_manifest("running");
        const RunConfig rc = cfg.cell(s, seed);
        const fs::path per_phase = res.dir / "per_phase.csv";
        auto flush = [&](const MetricsRecord& rec) {
            write_per_phase_csv(per_phase, std::span(&rec, 1));
            res.record = rec;
            res.stage = "phase " + std::to_string(rec.per_phase.size());
            if (rec.per_phase.size() <= bm.phases.size()) write_manifest("running");
        };
        const BenchmarkRun run = run_benchmark(bm, rc, digest, flush);
        res.record = run.record;

        res.stage = "export";
        {
            auto out = open_out(res.dir / "timing.csv");
            out << "t,wall_time_s,student_acc_test,consolidations\n";
            for (const auto& p : run.phases)
                out << p.phase << ',' << format_double(p.wall_time) << ',' << format_double(p.student_acc_test) << ','
                    << p.consolidations.size() << '\n';
        }
        if (cfg.grid_resolution >= 2 && bm.base.dim == 2) {
            const auto ctx = PhaseContext::make(bm, rc);
            const GridRanges ranges = data_ranges(bm, cfg.grid_margin);
            for (const auto& p : run.phases)
                write_boundary_grid(res.dir / ("boundary_t" + two_digits(p.phase) + ".csv"),
                                    export_boundary_grid(p.model, ctx.spec, ranges, cfg.grid_resolution, &ctx.stats));
        }
        res.stage = "done";
        res.ok = true;
        write_manifest("ok");
    } catch (const std::exception& e) {
        res.ok = false;
        res.error = e.what();
        try {
            write_manifest("failed");
        } catch (const std::exception&) {
        }
    }
    return res;
}

std::vector<RunOutcome> cmd_run(const ExperimentConfig& cfg, std::size_t parallel, const Progress& progress) {
    cfg.validate();
    std::vector<std::pair<Strategy, std::uint64_t>> cells;
    for (auto s : cfg.strategies)
        for (auto seed : cfg.seeds) cells.emplace_back(s, seed);

    std::vector<RunOutcome> out(cells.size());
    std::mutex mu;
    parallel_for(cells.size(), parallel, [&](std::size_t i) {
        out[i] = run_cell(cfg, cells[i].first, cells[i].second);
        if (progress) {
            const auto& r = out[i];
            std::string msg = to_string(r.strategy) + " seed " + std::to_string(r.seed) + ": ";
            if (r.ok) {
                const auto& last = r.record.per_phase.back();
                msg += "final test " + pct(last.acc_test) + "%";
                if (r.record.pp) msg += ", PP " + pct(*r.record.pp) + ", F " + pct(*r.record.forgetting);
            } else {
                msg += "FAILED at " + r.stage + ": " + r.error;
            }
            std::lock_guard lock(mu);
            progress(msg);
        }
    });

    std::vector<MetricsRecord> done;
    for (const auto& r : out)
        if (r.ok) done.push_back(r.record);
    if (!done.empty()) {
        export_report(done, cfg.out_dir);
        auto c = open_out(cfg.out_dir / "config.txt");
        c << cfg.to_text();
    }
    return out;
}

std::string to_string(SweepKnob k) { return k == SweepKnob::delta ? "delta" : "lambda"; }

SweepKnob sweep_knob_from_string(const std::string& s) {
    if (s == "delta" || s == "noise") return SweepKnob::delta;
    if (s == "lambda") return SweepKnob::lambda;
    throw std::invalid_argument("unknown sweep knob '" + s + "' (expected delta or lambda)");
}

std::vector<double> SweepResult::median_m1(bool teacher) const {
    std::vector<double> out;
    for (double v : values) {
        std::vector<double> xs;
        for (const auto& r : rows)
            if (r.value == v) xs.push_back(teacher ? r.teacher_acc_m1 : r.acc_m1);
        out.push_back(median(xs));
    }
    return out;
}

SweepResult cmd_sweep(const ExperimentConfig& cfg, SweepKnob knob, const std::vector<double>& values,
                      std::size_t parallel) {
    if (values.empty()) throw std::invalid_argument("sweep needs at least one value");
    cfg.validate();
    SweepResult res;
    res.knob = knob;
    res.values = values;
    res.rows.resize(values.size() * cfg.seeds.size());

    parallel_for(res.rows.size(), parallel, [&](std::size_t i) {
        const double v = values[i / cfg.seeds.size()];
        const std::uint64_t seed = cfg.seeds[i % cfg.seeds.size()];
        RunConfig rc = cfg.cell(Strategy::dbd_kc, seed);
        if (knob == SweepKnob::delta) rc.noise.delta = v;
        else rc.lambda = v;
        const IILBenchmark bm = build_benchmark(cfg, seed, 1);
        const BenchmarkRun run = run_benchmark(bm, rc, cfg.digest());
        res.rows[i] = {v, seed, run.phases[0].acc_test, run.phases[1].student_acc_test, run.phases[1].acc_test};
    });

    fs::create_directories(cfg.out_dir);
    const std::string name = "sweep_" + to_string(knob);
    {
        auto out = open_out(cfg.out_dir / (name + "_runs.csv"));
        out << "knob,value,seed,m0_acc_test,m1_acc_test,teacher_m1_acc_test\n";
        for (const auto& r : res.rows)
            out << to_string(knob) << ',' << format_double(r.value) << ',' << r.seed << ',' << format_double(r.acc_m0)
                << ',' << format_double(r.acc_m1) << ',' << format_double(r.teacher_acc_m1) << '\n';
    }
    {
        auto out = open_out(cfg.out_dir / (name + ".csv"));
        out << "knob,value,runs,m1_acc_pct_median,m1_acc_pct_mean,m1_acc_pct_ci95,teacher_m1_acc_pct_median,"
               "m0_acc_pct_median\n";
        for (double v : values) {
            std::vector<double> m1, te, m0;
            for (const auto& r : res.rows)
                if (r.value == v) {
                    m1.push_back(r.acc_m1);
                    te.push_back(r.teacher_acc_m1);
                    m0.push_back(r.acc_m0);
                }
            const auto s = summarize(m1);
            out << to_string(knob) << ',' << format_double(v) << ',' << s.n << ',' << pct(s.median) << ','
                << pct(s.mean) << ',' << pct(s.ci95) << ',' << pct(median(te)) << ',' << pct(median(m0)) << '\n';
        }
    }
    return res;
}

std::size_t cmd_report(const fs::path& results_dir, const fs::path& out) {
    const fs::path runs = results_dir / "runs";
    if (!fs::is_directory(runs)) throw std::runtime_error("no runs directory under " + results_dir.string());

    // Strategy order as in the run matrix, then seed.
    std::map<std::pair<std::size_t, std::uint64_t>, MetricsRecord> found;
    for (const auto& sdir : fs::directory_iterator(runs)) {
        if (!sdir.is_directory()) continue;
        const Strategy s = strategy_from_string(sdir.path().filename().string());
        const auto rank = static_cast<std::size_t>(
            std::find(std::begin(kAllStrategies), std::end(kAllStrategies), s) - std::begin(kAllStrategies));
        for (const auto& rdir : fs::directory_iterator(sdir.path())) {
            const fs::path csv = rdir.path() / "per_phase.csv";
            const fs::path manifest = rdir.path() / "manifest.txt";
            if (!fs::exists(csv) || !fs::exists(manifest)) continue;
            std::ifstream m(manifest);
            std::string line;
            bool ok = false;
            while (std::getline(m, line))
                if (line == "status = ok") ok = true;
            if (!ok) continue;
            for (auto& rec : read_per_phase_csv(csv)) found[{rank, rec.seed}] = std::move(rec);
        }
    }
    if (found.empty()) throw std::runtime_error("no completed runs under " + runs.string());
    std::vector<MetricsRecord> records;
    for (auto& [key, rec] : found) records.push_back(std::move(rec));
    export_report(records, out.empty() ? results_dir : out);
    return records.size();
}

}  // namespace iil
