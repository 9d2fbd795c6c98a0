#include <doctest.h>

#include <fstream>

#include "iil/config.hpp"
#include "test_util.hpp"

using namespace iil;

TEST_SUITE("config") {

TEST_CASE("defaults round-trip through text") {
    const ExperimentConfig a;
    const auto b = parse_config(a.to_text());
    CHECK(b.to_text() == a.to_text());
    CHECK(b.digest() == a.digest());
    CHECK(a.digest().size() == 16);
}

TEST_CASE("parsing values, comments and ranges") {
    const auto c = parse_config(
        "# comment\n"
        "strategies = dbd_kc, fine_tune\n"
        "seeds = 0-2, 7\n"
        "hidden = 8,8\n"
        "lambda = 0.5\n"
        "noise.delta = 40\n"
        "kc.mode = per_iteration\n"
        "synthetic.means = 1 0; -1 0\n"
        "synthetic.cov = 0.25 0 0 0.25\n"
        "\n");
    CHECK(c.strategies == std::vector<Strategy>{Strategy::dbd_kc, Strategy::fine_tune});
    CHECK(c.seeds == std::vector<std::uint64_t>{0, 1, 2, 7});
    CHECK(c.run.hidden == std::vector<std::size_t>{8, 8});
    CHECK(c.run.lambda == 0.5);
    CHECK(c.run.noise.delta == 40.0);
    CHECK(c.run.kc_mode == KcMode::per_iteration);
    CHECK(c.synthetic.num_classes == 2);
    CHECK(c.synthetic.cluster_cov(1, 1) == 0.25);
    CHECK(parse_config("strategies = all").strategies.size() == 4);
    const auto r = c.cell(Strategy::fine_tune, 7);
    CHECK(r.strategy == Strategy::fine_tune);
    CHECK(r.seed == 7);
}

TEST_CASE("errors name the line and key") {
    auto expect = [](const std::string& text, std::size_t line, const std::string& key) {
        try {
            parse_config(text);
            FAIL("expected an error for " << text);
        } catch (const ConfigError& e) {
            CHECK(e.line == line);
            CHECK(e.key == key);
            CHECK(std::string(e.what()).find("line " + std::to_string(line)) != std::string::npos);
        }
    };
    expect("lambda = 1\nbogus = 3\n", 2, "bogus");
    expect("lambda = 1\nlambda = 2\n", 2, "lambda");
    expect("\n\nepochs_per_phase = -1\n", 3, "epochs_per_phase");
    expect("lambda = abc\n", 1, "lambda");
    expect("kc.mode = sometimes\n", 1, "kc.mode");
    expect("no equals sign\n", 1, "");
    CHECK_THROWS_AS(parse_config("seeds = 5-2"), ConfigError);
}

TEST_CASE("bookkeeping keys are ignored") {
    const auto c = parse_config("tool = iilbench\nstatus = ok\nstage = done\nconfig_digest = x\nlambda = 2\n");
    CHECK(c.run.lambda == 2.0);
}

TEST_CASE("overrides") {
    ExperimentConfig c;
    apply_override(c, "lambda=3");
    apply_override(c, "kc.freeze_epochs = 20");
    CHECK(c.run.lambda == 3.0);
    CHECK(c.run.sched.freeze_epochs == 20);
    CHECK_THROWS_AS(apply_override(c, "lambda"), ConfigError);
    CHECK_THROWS_AS(apply_override(c, "nope=1"), ConfigError);
}

TEST_CASE("digest tracks result-relevant keys only") {
    ExperimentConfig a, b;
    b.seeds = {9};
    b.out_dir = "elsewhere";
    b.strategies = {Strategy::full_data};
    b.grid_resolution = 0;
    CHECK(a.digest() == b.digest());
    b.run.lambda = 0.2;
    CHECK(a.digest() != b.digest());
    CHECK(fnv1a_hex("") == "cbf29ce484222325");
    CHECK(fnv1a_hex("a") == "af63dc4c8601ec8c");
}

TEST_CASE("validation") {
    CHECK_THROWS_AS(parse_config("source = csv").validate(), ConfigError);
    CHECK_THROWS_AS(parse_config("source = csv\ncsv.path = d.csv\nsplit.base_fraction = 1.5").validate(), ConfigError);
    CHECK_THROWS_AS(parse_config("grid.resolution = 1").validate(), ConfigError);
    CHECK_NOTHROW(ExperimentConfig{}.validate());
}

TEST_CASE("load from file") {
    test::TempDir dir("cfg");
    {
        std::ofstream out(dir.path / "c.txt");
        out << "lambda = 4\n";
    }
    CHECK(load_config(dir.path / "c.txt").run.lambda == 4.0);
    CHECK_THROWS(load_config(dir.path / "missing.txt"));
}

}  // TEST_SUITE
