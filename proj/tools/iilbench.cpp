#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "iil/config.hpp"
#include "iil/experiment.hpp"
#include "iil/version.hpp"

namespace {

struct Common {
    std::string config;
    std::vector<std::string> sets;
    std::vector<std::string> seeds;
    std::vector<std::string> strategies;
    std::string out;
    bool dry_run = false;
    std::size_t parallel = 1;
};

void add_common(CLI::App* app, Common& c) {
    app->add_option("--config,-c", c.config, "key=value config file")->check(CLI::ExistingFile);
    app->add_option("--set", c.sets, "override one config key (key=value); repeatable");
    app->add_option("--seed", c.seeds, "seed or seed range (3, 0-4); repeatable")->delimiter(',');
    app->add_option("--strategy", c.strategies, "dbd_kc, fine_tune, vanilla_distill, full_data or all")
        ->delimiter(',');
    app->add_option("--out,-o", c.out, "output directory (default: config out_dir, then $BD_OUT_DIR)");
    app->add_flag("--dry-run", c.dry_run, "print the resolved config and exit");
    app->add_option("--parallel,-j", c.parallel, "worker threads for independent runs")->check(CLI::PositiveNumber);
}

bool file_sets_key(const std::string& path, const std::string& key) {
    std::ifstream in(path);
    std::string line;
    while (std::getline(in, line)) {
        const auto b = line.find_first_not_of(" \t");
        if (b != std::string::npos && line.compare(b, key.size(), key) == 0) {
            const auto rest = line.find_first_not_of(" \t", b + key.size());
            if (rest != std::string::npos && line[rest] == '=') return true;
        }
    }
    return false;
}

std::string join(const std::vector<std::string>& xs) {
    std::string out;
    for (std::size_t i = 0; i < xs.size(); ++i) out += (i ? "," : "") + xs[i];
    return out;
}

iil::ExperimentConfig resolve(const Common& c) {
    iil::ExperimentConfig cfg = c.config.empty() ? iil::ExperimentConfig{} : iil::load_config(c.config);
    bool out_set = !c.config.empty() && file_sets_key(c.config, "out_dir");
    for (const auto& s : c.sets) {
        iil::apply_override(cfg, s);
        if (s.rfind("out_dir", 0) == 0) out_set = true;
    }
    if (!c.seeds.empty()) cfg.set("seeds", join(c.seeds));
    if (!c.strategies.empty()) cfg.set("strategies", join(c.strategies));
    if (!c.out.empty()) {
        cfg.out_dir = c.out;
    } else if (!out_set) {
        if (const char* env = std::getenv("BD_OUT_DIR"); env && *env) cfg.out_dir = env;
    }
    cfg.validate();
    return cfg;
}

void print_resolved(const iil::ExperimentConfig& cfg) {
    std::cout << cfg.to_text() << "# config_digest = " << cfg.digest() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Instance-incremental learning benchmark: decision-boundary-aware distillation with knowledge "
                 "consolidation, plus fine-tune, vanilla distillation and full-data baselines."};
    app.set_version_flag("--version", std::string(iil::kToolName) + " " + iil::kVersion);
    app.require_subcommand(1);

    Common split_c, run_c, sweep_c;
    auto* split = app.add_subcommand("split", "materialize benchmark splits as CSV files");
    add_common(split, split_c);

    auto* run = app.add_subcommand("run", "run the strategy x seed matrix and write the report");
    add_common(run, run_c);

    auto* sweep = app.add_subcommand("sweep", "phase-1 sensitivity sweep of dbd_kc over delta or lambda");
    add_common(sweep, sweep_c);
    std::string knob = "delta";
    std::vector<double> values;
    sweep->add_option("--knob", knob, "delta or lambda")->check(CLI::IsMember({"delta", "lambda"}));
    sweep->add_option("--values", values, "values to test (default: sweep.<knob> from the config)")->delimiter(',');

    auto* report = app.add_subcommand("report", "aggregate completed runs of a results directory");
    std::string results_dir, report_out;
    report->add_option("results_dir", results_dir, "directory written by run")->required();
    report->add_option("--out,-o", report_out, "where to write the report (default: results_dir)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (split->parsed()) {
            const auto cfg = resolve(split_c);
            if (split_c.dry_run) {
                print_resolved(cfg);
                return 0;
            }
            for (const auto& dir : iil::cmd_split(cfg)) std::cout << dir.string() << '\n';
            return 0;
        }

        if (run->parsed()) {
            const auto cfg = resolve(run_c);
            if (run_c.dry_run) {
                print_resolved(cfg);
                return 0;
            }
            const auto outcomes = iil::cmd_run(cfg, run_c.parallel, [](const std::string& m) {
                std::cerr << m << '\n';
            });
            std::size_t failed = 0;
            for (const auto& o : outcomes) failed += o.ok ? 0 : 1;
            std::cout << outcomes.size() - failed << "/" << outcomes.size() << " runs completed; results in "
                      << cfg.out_dir.string() << '\n';
            return failed ? 1 : 0;
        }

        if (sweep->parsed()) {
            const auto cfg = resolve(sweep_c);
            const auto k = iil::sweep_knob_from_string(knob);
            if (values.empty()) values = k == iil::SweepKnob::delta ? cfg.sweep_delta : cfg.sweep_lambda;
            if (sweep_c.dry_run) {
                print_resolved(cfg);
                return 0;
            }
            const auto res = iil::cmd_sweep(cfg, k, values, sweep_c.parallel);
            const auto m1 = res.median_m1();
            const auto te = res.median_m1(true);
            std::printf("%-10s %16s %12s\n", knob.c_str(), "M1 student %", "teacher %");
            for (std::size_t i = 0; i < values.size(); ++i)
                std::printf("%-10g %16.2f %12.2f\n", values[i], 100.0 * m1[i], 100.0 * te[i]);
            return 0;
        }

        if (report->parsed()) {
            const auto n = iil::cmd_report(results_dir, report_out);
            std::cout << n << " records reported\n";
            return 0;
        }
    } catch (const iil::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
