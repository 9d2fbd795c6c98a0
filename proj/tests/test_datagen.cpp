#include <doctest.h>

#include <cmath>
#include <fstream>
#include <limits>

#include "iil/datagen.hpp"
#include "iil/protocol.hpp"
#include "test_util.hpp"

using namespace iil;

namespace {

SyntheticSpec two_blobs() {
    SyntheticSpec s;
    s.num_classes = 2;
    s.dim = 2;
    s.cluster_means = {{-3.0, 0.0}, {3.0, 0.0}};
    s.cluster_cov = Matrix(2, 2);
    s.cluster_cov(0, 0) = s.cluster_cov(1, 1) = 1.0;
    s.samples_per_class_base = 1000;
    s.seed = 5;
    return s;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Nearest-mean rule: Bayes-optimal for equal isotropic covariances and priors.
std::size_t nearest_mean(const std::vector<std::vector<double>>& means, const std::vector<double>& x) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < means.size(); ++k) {
        double d = 0.0;
        for (std::size_t c = 0; c < x.size(); ++c) d += (x[c] - means[k][c]) * (x[c] - means[k][c]);
        if (d < best_d) {
            best_d = d;
            best = k;
        }
    }
    return best;
}

double error_rate(const std::vector<std::vector<double>>& means, const Dataset& d) {
    std::size_t wrong = 0;
    for (const auto& s : d.samples) wrong += nearest_mean(means, s.features) != s.label;
    return static_cast<double>(wrong) / static_cast<double>(d.size());
}

void write_text(const std::filesystem::path& p, const std::string& s) {
    std::ofstream out(p, std::ios::binary);
    out << s;
}

}  // namespace

TEST_SUITE("datagen") {

TEST_CASE("base blobs at +-3 are almost perfectly separable") {
    const auto spec = two_blobs();
    const Dataset d = gen_base(spec);
    REQUIRE(d.size() == 2000);
    // Oracle: the Bayes error of the x = 0 boundary is Phi(-3).
    const double bayes = normal_cdf(-3.0);
    CHECK(bayes == doctest::Approx(0.0013498980316301).epsilon(1e-9));
    const double emp = error_rate(spec.cluster_means, d);
    // 2000 draws: binomial sd ~ 8e-4.
    CHECK(std::abs(emp - bayes) < 4e-3);

    // A trained linear softmax classifier gets there too.
    IILBenchmark bm;
    bm.base = d;
    bm.num_classes = 2;
    RunConfig cfg;
    cfg.hidden = {};
    cfg.epochs_per_phase = 20;
    const auto ctx = PhaseContext::make(bm, cfg);
    const auto p = train_base(bm, cfg);
    CHECK(accuracy(p, ctx.spec, ctx.base) > 0.99);
}

TEST_CASE("generators are deterministic per seed") {
    auto spec = SyntheticSpec::reference();
    CHECK(gen_base(spec) == gen_base(spec));
    CHECK(gen_phase(spec, 3) == gen_phase(spec, 3));
    CHECK_FALSE(gen_phase(spec, 3) == gen_phase(spec, 4));
    auto other = spec;
    other.seed = 1;
    CHECK_FALSE(gen_base(spec) == gen_base(other));
}

TEST_CASE("spec validation") {
    auto spec = SyntheticSpec::reference();
    spec.dim = 3;
    CHECK_THROWS(gen_base(spec));
    spec = SyntheticSpec::reference();
    spec.cluster_means[1] = spec.cluster_means[0];
    CHECK_THROWS(gen_base(spec));
    spec = SyntheticSpec::reference();
    spec.cluster_cov(0, 0) = 0.0;
    CHECK_THROWS(gen_base(spec));
    spec = SyntheticSpec::reference();
    spec.cluster_cov(0, 1) = 0.2;
    CHECK_THROWS(gen_base(spec));
    spec = SyntheticSpec::reference();
    spec.drift.cov_scale = 0.0;
    CHECK_THROWS(gen_base(spec));
    CHECK_THROWS(gen_phase(SyntheticSpec::reference(), 0));
}

TEST_CASE("zero drift reproduces the base distribution") {
    auto spec = SyntheticSpec::reference();
    spec.drift = {0.0, 1.0, 0.0};
    const auto p0 = phase_distribution(spec, 0), p4 = phase_distribution(spec, 4);
    CHECK(p0.means == p4.means);
    CHECK(p0.cov == p4.cov);
    const std::vector<std::size_t> counts(4, 25);
    CHECK(sample_clusters(p0, counts, 9) == sample_clusters(p4, counts, 9));
}

TEST_CASE("phase size and drift geometry") {
    auto spec = SyntheticSpec::reference();
    CHECK(gen_phase(spec, 1).size() == spec.samples_per_class_phase * spec.num_classes);
    spec.drift = {0.5, 1.5, 0.0};
    const auto p1 = phase_distribution(spec, 1), p2 = phase_distribution(spec, 2);
    const double sigma = 0.55;
    // Class 0 sits at (1.5, 0); outward is +x.
    CHECK(p1.means[0][0] == doctest::Approx(1.5 + 0.5 * sigma));
    CHECK(p2.means[0][0] == doctest::Approx(1.5 + 1.0 * sigma));
    CHECK(p2.cov(0, 0) == doctest::Approx(sigma * sigma * 2.25));
}

TEST_CASE("outward drift with inflated covariance misclassifies more under the base Bayes boundary") {
    auto spec = SyntheticSpec::reference();
    spec.drift = {0.5, 1.5, 0.0};
    const std::vector<std::size_t> counts(4, 25000);  // 10^5 samples
    const double base = error_rate(spec.cluster_means, sample_clusters(phase_distribution(spec, 0), counts, 1));
    const double phase1 = error_rate(spec.cluster_means, sample_clusters(phase_distribution(spec, 1), counts, 2));
    CHECK(phase1 > base);
}

TEST_CASE("misclassification of the frozen base boundary grows with the phase index") {
    const auto spec = SyntheticSpec::reference();
    const std::vector<std::size_t> counts(4, 5000);
    std::vector<double> rates;
    for (std::size_t t = 0; t <= 10; ++t)
        rates.push_back(error_rate(spec.cluster_means, sample_clusters(phase_distribution(spec, t), counts, 100 + t)));
    int inversions = 0;
    for (std::size_t t = 1; t < rates.size(); ++t) inversions += rates[t] < rates[t - 1];
    CHECK(inversions <= 1);
    CHECK(rates.back() > rates.front());
}

TEST_CASE("dirichlet class proportions vary per phase and keep the phase size") {
    auto spec = SyntheticSpec::reference();
    spec.phase_class_dirichlet = 2.0;
    const auto c = phase_class_counts(spec, 1);
    std::size_t total = 0;
    for (auto v : c) total += v;
    CHECK(total == spec.samples_per_class_phase * spec.num_classes);
    CHECK(*std::max_element(c.begin(), c.end()) > *std::min_element(c.begin(), c.end()));
}

TEST_CASE("test set follows the training volume of each distribution") {
    const auto spec = SyntheticSpec::reference();
    const Dataset test = gen_test(spec, 10);
    // Base: 20 * 500 / 50 = 200 per class; each phase: 20 per class.
    CHECK(test.size() == 4 * 200 + 10 * 4 * 20);
}

TEST_CASE("csv round trip") {
    test::TempDir dir("csv");
    const Dataset d = gen_phase(SyntheticSpec::reference(), 2);
    write_csv(dir.path / "d.csv", d);
    const auto back = load_csv(dir.path / "d.csv");
    REQUIRE(back.data.size() == d.size());
    CHECK(back.skipped_rows == 0);
    CHECK(back.feature_names == std::vector<std::string>{"f0", "f1"});
    for (std::size_t i = 0; i < d.size(); ++i) {
        CHECK(back.data.samples[i].label == d.samples[i].label);
        for (std::size_t c = 0; c < d.dim; ++c)
            CHECK(std::abs(back.data.samples[i].features[c] - d.samples[i].features[c]) < 1e-12);
    }
}

TEST_CASE("csv loading") {
    test::TempDir dir("csvload");
    const auto p = dir.path / "a.csv";

    write_text(p, "x,y,label\n1,2,0\n3,4,1\n5.5,-6,2\n");
    auto r = load_csv(p);
    CHECK(r.data.size() == 3);
    CHECK(r.data.samples[2].features == std::vector<double>{5.5, -6.0});

    write_text(p, "x,y,label\n1,2,0\ninf,4,1\n5,6,1\n");
    r = load_csv(p);
    CHECK(r.data.size() == 2);
    CHECK(r.skipped_rows == 1);

    write_text(p, "a,cls,b\n1,1,2\n3,0,4\n");
    r = load_csv(p, CsvSchema{{"b"}, "cls"});
    CHECK(r.data.dim == 1);
    CHECK(r.data.samples[0].features[0] == 2.0);
    CHECK(r.data.samples[0].label == 1);

    write_text(p, "x,y,target\n1,2,0\n");
    try {
        load_csv(p);
        FAIL("expected an error");
    } catch (const std::exception& e) {
        CHECK(std::string(e.what()).find("label") != std::string::npos);
    }

    write_text(p, "x,y,label\n1,2,0\n1,abc,1\n");
    try {
        load_csv(p);
        FAIL("expected an error");
    } catch (const std::exception& e) {
        const std::string msg = e.what();
        CHECK(msg.find("line 3") != std::string::npos);
        CHECK(msg.find("abc") != std::string::npos);
    }

    write_text(p, "x,y,label\n1,2,0.5\n");
    CHECK_THROWS(load_csv(p));
    write_text(p, "x,y,label\n");
    CHECK_THROWS(load_csv(p));
    CHECK_THROWS(load_csv(dir.path / "missing.csv"));
}

TEST_CASE("out-of-range labels fail at benchmark assembly") {
    test::TempDir dir("csvlabel");
    write_text(dir.path / "a.csv", "x,label\n1,0\n2,1\n3,2\n");
    const auto r = load_csv(dir.path / "a.csv");
    IILBenchmark bm;
    bm.base = r.data;
    bm.num_classes = 2;
    CHECK_THROWS(bm.validate(0.0));
}

TEST_CASE("normalization statistics") {
    Dataset d{2, {}};
    d.push_back({{0.0, 5.0}, 0});
    d.push_back({{2.0, 5.0}, 1});
    const auto st = compute_norm_stats(d);
    CHECK(st.mean[0] == 1.0);
    CHECK(st.stddev[0] == 1.0);
    CHECK(st.stddev[1] == kStdFloor);
    const Dataset n = normalize(d, st);
    CHECK(n.samples[0].features[1] == 0.0);
    CHECK_THROWS(compute_norm_stats(Dataset{2, {}}));
}

TEST_CASE("run-time normalization uses base statistics only") {
    const auto spec = SyntheticSpec::reference();
    const IILBenchmark bm = make_synthetic_benchmark(spec, 3);
    const auto ctx = PhaseContext::make(bm, RunConfig{});
    CHECK(ctx.stats == compute_norm_stats(bm.base));
    CHECK_FALSE(ctx.stats == compute_norm_stats(bm.phases[2]));
}

}  // TEST_SUITE
