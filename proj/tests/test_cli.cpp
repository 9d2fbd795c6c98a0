#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "test_util.hpp"

namespace fs = std::filesystem;

namespace {

const char* kSmall =
    "num_phases = 2\n"
    "synthetic.samples_per_class_base = 100\n"
    "synthetic.samples_per_class_phase = 10\n"
    "synthetic.samples_per_class_test = 5\n"
    "epochs_per_phase = 5\n"
    "grid.resolution = 5\n";

int run(const std::string& args, const fs::path& log) {
    const std::string cmd = std::string("\"") + IILBENCH_EXE + "\" " + args + " > \"" + log.string() + "\" 2>&1";
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

void write_text(const fs::path& p, const std::string& s) {
    std::ofstream out(p, std::ios::binary);
    out << s;
}

std::size_t count_lines(const std::string& s) {
    std::size_t n = 0;
    for (char c : s) n += c == '\n';
    return n;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("dry run prints the resolved config") {
    test::TempDir dir("cli_dry");
    write_text(dir.path / "c.txt", kSmall);
    const auto log = dir.path / "log";
    CHECK(run("run --dry-run -c \"" + (dir.path / "c.txt").string() + "\" --set lambda=2", log) == 0);
    const auto out = test::slurp(log);
    CHECK(out.find("lambda = 2") != std::string::npos);
    CHECK(out.find("config_digest") != std::string::npos);
    CHECK_FALSE(fs::exists(dir.path / "results"));
}

TEST_CASE("one strategy and one seed give one record; the manifest reproduces it") {
    test::TempDir dir("cli_run");
    const auto cfg = dir.path / "c.txt";
    write_text(cfg, kSmall);
    const auto out = dir.path / "out";
    REQUIRE(run("run -c \"" + cfg.string() + "\" --strategy dbd_kc --seed 3 -o \"" + out.string() + "\"",
                dir.path / "log") == 0);
    const auto cell = out / "runs" / "dbd_kc" / "seed_3";
    CHECK(count_lines(test::slurp(out / "summary.csv")) == 2);
    CHECK(count_lines(test::slurp(cell / "per_phase.csv")) == 4);  // header + t = 0..2
    CHECK(fs::exists(cell / "timing.csv"));
    CHECK(fs::exists(cell / "boundary_t02.csv"));
    const auto manifest = test::slurp(cell / "manifest.txt");
    CHECK(manifest.find("status = ok") != std::string::npos);

    const auto again = dir.path / "again";
    REQUIRE(run("run -c \"" + (cell / "manifest.txt").string() + "\" -o \"" + again.string() + "\"",
                dir.path / "log2") == 0);
    CHECK(test::slurp(again / "runs" / "dbd_kc" / "seed_3" / "per_phase.csv") == test::slurp(cell / "per_phase.csv"));
    CHECK(test::slurp(again / "summary.csv") == test::slurp(out / "summary.csv"));

    // report rebuilds the same summary from the run directories.
    const auto rep = dir.path / "rep";
    REQUIRE(run("report \"" + out.string() + "\" -o \"" + rep.string() + "\"", dir.path / "log3") == 0);
    CHECK(test::slurp(rep / "summary.csv") == test::slurp(out / "summary.csv"));
}

TEST_CASE("split is byte-identical across invocations") {
    test::TempDir dir("cli_split");
    const auto cfg = dir.path / "c.txt";
    write_text(cfg, kSmall);
    for (const char* o : {"a", "b"})
        REQUIRE(run("split -c \"" + cfg.string() + "\" --seed 1 -o \"" + (dir.path / o).string() + "\"",
                    dir.path / "log") == 0);
    for (const char* f : {"base.csv", "phase_01.csv", "phase_02.csv", "test.csv", "manifest.txt"}) {
        const auto rel = fs::path("split") / "seed_1" / f;
        REQUIRE(fs::exists(dir.path / "a" / rel));
        CHECK(test::slurp(dir.path / "a" / rel) == test::slurp(dir.path / "b" / rel));
    }
}

TEST_CASE("output directory from the environment") {
    test::TempDir dir("cli_env");
    const auto cfg = dir.path / "c.txt";
    write_text(cfg, kSmall);
    const auto env_out = dir.path / "env_out";
    ::setenv("BD_OUT_DIR", env_out.string().c_str(), 1);
    const int rc = run("split -c \"" + cfg.string() + "\" --seed 0", dir.path / "log");
    ::unsetenv("BD_OUT_DIR");
    CHECK(rc == 0);
    CHECK(fs::exists(env_out / "split" / "seed_0" / "base.csv"));
}

TEST_CASE("failures exit nonzero with a readable message") {
    test::TempDir dir("cli_fail");
    const auto log = dir.path / "log";
    write_text(dir.path / "bad.txt", "lambda = 1\nfoo = 2\n");
    CHECK(run("run -c \"" + (dir.path / "bad.txt").string() + "\"", log) == 2);
    CHECK(test::slurp(log).find("line 2") != std::string::npos);

    write_text(dir.path / "d.csv", "x,y,target\n1,2,0\n3,4,1\n");
    write_text(dir.path / "csv.txt", "source = csv\ncsv.path = " + (dir.path / "d.csv").string() + "\n");
    CHECK(run("split -c \"" + (dir.path / "csv.txt").string() + "\" -o \"" + (dir.path / "o").string() + "\"", log) !=
          0);
    CHECK(test::slurp(log).find("label") != std::string::npos);

    CHECK(run("run --strategy nonsense --dry-run", log) != 0);
}

TEST_CASE("sweep writes one row per value") {
    test::TempDir dir("cli_sweep");
    const auto cfg = dir.path / "c.txt";
    write_text(cfg, kSmall);
    REQUIRE(run("sweep -c \"" + cfg.string() + "\" --knob lambda --values 0.1,1,5 --seed 0-1 -o \"" +
                    (dir.path / "o").string() + "\"",
                dir.path / "log") == 0);
    CHECK(count_lines(test::slurp(dir.path / "o" / "sweep_lambda.csv")) == 4);
    CHECK(count_lines(test::slurp(dir.path / "o" / "sweep_lambda_runs.csv")) == 7);
}

}  // TEST_SUITE
