#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>

#include "okaem/problems.hpp"
#include "okaem/rng.hpp"

using namespace okaem;
using namespace okaem::problems;

namespace {

constexpr std::array<Family, 8> kFamilies = {
    Family::sphere,   Family::ellipsoid, Family::schwefel22, Family::quartic_noise,
    Family::ackley,   Family::rastrigin, Family::griewank,   Family::levy,
};

} // namespace

TEST_CASE("every family evaluates to zero at its shift") {
    Rng rng(1);
    for (Family fam : kFamilies) {
        Problem p = make_problem(fam, 7, 42);
        Tensor2 at_opt = p.optimum_unit();
        if (fam == Family::quartic_noise) {
            // only the U(0,1) noise remains: mean 0.5 within 3 sigma over 1e4 draws
            const int reps = 10000;
            double mean = 0.0;
            for (int i = 0; i < reps; ++i)
                mean += evaluate(p, at_opt, rng)(0, 0);
            mean /= reps;
            const double sigma = std::sqrt(1.0 / 12.0 / reps);
            CHECK(std::fabs(mean - 0.5) < 3.0 * sigma);
        } else {
            CHECK(std::fabs(evaluate(p, at_opt, rng)(0, 0)) < 1e-9);
        }
    }
}

TEST_CASE("evaluate is deterministic except for the noisy family") {
    Rng r1(9), r2(9), r3(10);
    for (Family fam : kFamilies) {
        Problem p = make_problem(fam, 5, 7);
        Tensor2 x(3, 5);
        Rng xr(55);
        for (std::size_t i = 0; i < x.size(); ++i) x.data()[i] = xr.uniform();
        Tensor2 f1 = evaluate(p, x, r1);
        Tensor2 f2 = evaluate(p, x, r2);
        for (idx i = 0; i < 3; ++i)
            CHECK(f1(i, 0) == f2(i, 0));
        if (fam == Family::quartic_noise) {
            Tensor2 f3 = evaluate(p, x, r3);
            bool differs = false;
            for (idx i = 0; i < 3; ++i)
                differs = differs || f3(i, 0) != f1(i, 0);
            CHECK(differs);
        }
    }
}

TEST_CASE("known values away from the optimum") {
    // sphere with optimum at native 0: f(x) = sum x_i^2
    Problem p;
    p.family = Family::sphere;
    p.dim = 2;
    p.optimum = Tensor2(1, 2);  // native zeros
    Rng rng(3);
    Tensor2 x = Tensor2::from_values(1, 2, {0.5, 0.75});  // native (0, 50)
    CHECK(evaluate(p, x, rng)(0, 0) == doctest::Approx(2500.0).epsilon(1e-12));

    // rastrigin one unit off per coordinate: cos term cancels, z^2 remains
    Problem r;
    r.family = Family::rastrigin;
    r.dim = 3;
    r.optimum = Tensor2(1, 3);
    Tensor2 xr = Tensor2::from_values(1, 3, {0.55, 0.55, 0.55});  // z = 1 each
    CHECK(evaluate(r, xr, rng)(0, 0) == doctest::Approx(3.0).epsilon(1e-9));

    CHECK_THROWS_AS(evaluate(p, Tensor2::from_values(1, 2, {1.5, 0.0}), rng), param_error);
    CHECK_THROWS_AS(evaluate(p, Tensor2(1, 3), rng), shape_error);
}

TEST_CASE("similarity distributions: endpoints and moments") {
    Rng rng(4);
    for (int i = 0; i < 100; ++i) {
        CHECK(sample_similarity(SimilarityDist::h1h, rng) == 1.0);
        CHECK(sample_similarity(SimilarityDist::h1l, rng) == 0.0);
    }
    const int reps = 100000;
    auto mean_of = [&](SimilarityDist d) {
        double m = 0.0;
        for (int i = 0; i < reps; ++i) {
            const double s = sample_similarity(d, rng);
            REQUIRE(s >= 0.0);
            REQUIRE(s <= 1.0);
            m += s;
        }
        return m / reps;
    };
    CHECK(std::fabs(mean_of(SimilarityDist::h1m) - 0.5) < 0.01);
    CHECK(std::fabs(mean_of(SimilarityDist::h2m) - 2.0 / 3.0) < 0.01);
    CHECK(std::fabs(mean_of(SimilarityDist::h3m) - 1.0 / 3.0) < 0.01);
    CHECK(std::fabs(mean_of(SimilarityDist::h4m) - 0.5) < 0.01);
    // ReLU kernels live on their halves; means at 1/2 +- 1/3
    for (int i = 0; i < 1000; ++i) {
        CHECK(sample_similarity(SimilarityDist::h2h, rng) >= 0.5);
        CHECK(sample_similarity(SimilarityDist::h2l, rng) <= 0.5);
    }
    CHECK(std::fabs(mean_of(SimilarityDist::h2h) - (0.5 + 1.0 / 3.0)) < 0.01);
    CHECK(std::fabs(mean_of(SimilarityDist::h2l) - (0.5 - 1.0 / 3.0)) < 0.01);
}

TEST_CASE("source optimum construction: exact endpoints, monotone distance") {
    Rng rng(5);
    Tensor2 target(1, 6), u(1, 6);
    for (idx i = 0; i < 6; ++i) {
        target(0, i) = rng.uniform();
        u(0, i) = rng.uniform();
    }
    Tensor2 at0 = source_optimum_unit(0.0, target, u);
    Tensor2 at1 = source_optimum_unit(1.0, target, u);
    for (idx i = 0; i < 6; ++i) {
        CHECK(at0(0, i) == u(0, i));
        CHECK(at1(0, i) == target(0, i));
    }
    double prev = 1e300;
    for (double s : {0.0, 0.25, 0.5, 0.75, 1.0}) {
        Tensor2 o = source_optimum_unit(s, target, u);
        double dist = 0.0;
        for (idx i = 0; i < 6; ++i) {
            const double dd = o(0, i) - target(0, i);
            dist += dd * dd;
        }
        CHECK(dist <= prev + 1e-15);
        prev = dist;
    }
}

TEST_CASE("expected source-target distance shrinks with similarity over instances") {
    StopSpec spec{Family::ackley, Scenario::intra_family, SimilarityDist::h1m, 25, 300};
    StopInstance inst = make_stop_instance(spec, 77);
    const Tensor2 t_unit = inst.target.optimum_unit();
    std::array<double, 4> bin_sum{}, bin_cnt{};
    for (const auto& s : inst.sources) {
        double dist = 0.0;
        const Tensor2 o_unit = s.problem.optimum_unit();
        for (idx i = 0; i < 25; ++i) {
            const double dd = o_unit(0, i) - t_unit(0, i);
            dist += dd * dd;
        }
        const int bin = std::min(3, static_cast<int>(s.similarity * 4.0));
        bin_sum[static_cast<std::size_t>(bin)] += std::sqrt(dist);
        bin_cnt[static_cast<std::size_t>(bin)] += 1.0;
    }
    double prev = 1e300;
    for (std::size_t b = 0; b < 4; ++b) {
        REQUIRE(bin_cnt[b] > 0.0);
        const double mean = bin_sum[b] / bin_cnt[b];
        CHECK(mean < prev);
        prev = mean;
    }
}

TEST_CASE("suite table matches the twelve benchmark rows") {
    struct Row {
        const char* id;
        Family fam;
        Scenario sc;
        SimilarityDist dist;
        idx d;
        int k;
    };
    const Row rows[] = {
        {"STOP1", Family::sphere, Scenario::intra_family, SimilarityDist::h1h, 50, 10},
        {"STOP2", Family::ellipsoid, Scenario::inter_family, SimilarityDist::h2h, 25, 10},
        {"STOP3", Family::schwefel22, Scenario::intra_family, SimilarityDist::h2h, 30, 10},
        {"STOP4", Family::quartic_noise, Scenario::inter_family, SimilarityDist::h1h, 50, 10},
        {"STOP5", Family::ackley, Scenario::intra_family, SimilarityDist::h1m, 25, 10},
        {"STOP6", Family::rastrigin, Scenario::inter_family, SimilarityDist::h2m, 50, 10},
        {"STOP7", Family::griewank, Scenario::intra_family, SimilarityDist::h3m, 25, 10},
        {"STOP8", Family::levy, Scenario::inter_family, SimilarityDist::h4m, 30, 10},
        {"STOP9", Family::sphere, Scenario::intra_family, SimilarityDist::h1l, 25, 10},
        {"STOP10", Family::rastrigin, Scenario::inter_family, SimilarityDist::h2l, 30, 10},
        {"STOP11", Family::ackley, Scenario::intra_family, SimilarityDist::h2l, 50, 10},
        {"STOP12", Family::ellipsoid, Scenario::inter_family, SimilarityDist::h1l, 50, 10},
    };
    for (const Row& row : rows) {
        StopSpec spec = suite_spec(row.id);
        CHECK(spec.family == row.fam);
        CHECK(spec.scenario == row.sc);
        CHECK(spec.dist == row.dist);
        CHECK(spec.dim == row.d);
        CHECK(spec.sources == row.k);
    }
    CHECK_THROWS_AS(suite_spec("STOP13"), param_error);
}

TEST_CASE("instances: STOP1 sources coincide with the target in common space") {
    StopInstance inst = make_stop_instance("STOP1", 123);
    CHECK(inst.suite == "STOP1");
    const Tensor2 t_unit = inst.target.optimum_unit();
    REQUIRE(inst.sources.size() == 10);
    for (const auto& s : inst.sources) {
        CHECK(s.similarity == 1.0);
        CHECK(s.problem.family == Family::sphere);
        const Tensor2 o_unit = s.problem.optimum_unit();
        for (idx i = 0; i < 50; ++i)
            CHECK(o_unit(0, i) == doctest::Approx(t_unit(0, i)).epsilon(1e-12));
    }

    // inter-family scenario never reuses the target family
    StopInstance inter = make_stop_instance("STOP2", 5);
    for (const auto& s : inter.sources)
        CHECK(s.problem.family != Family::ellipsoid);

    StopSpec bad{Family::sphere, Scenario::intra_family, SimilarityDist::h1m, 10, 5};
    CHECK_THROWS_AS(make_stop_instance(bad, 1), param_error);
}

TEST_CASE("descriptor round trip preserves every field bit-exactly") {
    StopInstance inst = make_stop_instance("STOP8", 31);
    const std::string path = (std::filesystem::temp_directory_path() /
                              "okaem_test_instance.txt").string();
    write_instance(inst, path);
    StopInstance back = read_instance(path);
    CHECK(back.suite == inst.suite);
    CHECK(back.scenario == inst.scenario);
    CHECK(back.dist == inst.dist);
    CHECK(back.seed == inst.seed);
    CHECK(back.target.family == inst.target.family);
    REQUIRE(back.target.dim == inst.target.dim);
    for (idx i = 0; i < inst.target.dim; ++i)
        CHECK(back.target.optimum(0, i) == inst.target.optimum(0, i));
    REQUIRE(back.sources.size() == inst.sources.size());
    for (std::size_t k = 0; k < inst.sources.size(); ++k) {
        CHECK(back.sources[k].problem.family == inst.sources[k].problem.family);
        CHECK(back.sources[k].similarity == inst.sources[k].similarity);
        for (idx i = 0; i < inst.target.dim; ++i)
            CHECK(back.sources[k].problem.optimum(0, i) ==
                  inst.sources[k].problem.optimum(0, i));
    }
    std::filesystem::remove(path);
    CHECK_THROWS_AS(read_instance("/nonexistent/instance.txt"), usage_error);
}

TEST_CASE("same seed reproduces the same instance") {
    StopInstance a = make_stop_instance("STOP5", 99);
    StopInstance b = make_stop_instance("STOP5", 99);
    StopInstance c = make_stop_instance("STOP5", 100);
    bool same = true, differs = false;
    for (idx i = 0; i < a.target.dim; ++i) {
        same = same && a.target.optimum(0, i) == b.target.optimum(0, i);
        differs = differs || a.target.optimum(0, i) != c.target.optimum(0, i);
    }
    CHECK(same);
    CHECK(differs);
}
