#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "okaem/evolution.hpp"

using namespace okaem;
using namespace okaem::evolution;

TEST_CASE("lhs: stratification, single point, seed sensitivity") {
    Tensor2 one = lhs_init(1, 4, 5);
    for (idx j = 0; j < 4; ++j) {
        CHECK(one(0, j) >= 0.0);
        CHECK(one(0, j) < 1.0);
    }

    for (auto [n, d, seed] : {std::tuple<idx, idx, std::uint64_t>{8, 3, 1},
                              {20, 10, 2},
                              {5, 1, 3}}) {
        Tensor2 x = lhs_init(n, d, seed);
        for (idx j = 0; j < d; ++j) {
            std::vector<int> counts(static_cast<std::size_t>(n), 0);
            for (idx i = 0; i < n; ++i) {
                const int bin = static_cast<int>(x(i, j) * static_cast<double>(n));
                REQUIRE(bin >= 0);
                REQUIRE(bin < n);
                counts[static_cast<std::size_t>(bin)]++;
            }
            for (int c : counts)
                CHECK(c == 1);  // exactly one sample per stratum
        }
    }

    Tensor2 a = lhs_init(10, 4, 100);
    Tensor2 b = lhs_init(10, 4, 101);
    bool differs = false;
    for (std::size_t i = 0; i < a.size(); ++i)
        differs = differs || a.data()[i] != b.data()[i];
    CHECK(differs);
}

TEST_CASE("normalize_fitness: z-score, constant column, affine invariance") {
    Tensor2 f = Tensor2::from_values(3, 1, {1, 2, 3});
    Tensor2 z = normalize_fitness(f);
    CHECK(z(0, 0) == doctest::Approx(-1.2247).epsilon(1e-4));
    CHECK(z(1, 0) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(z(2, 0) == doctest::Approx(1.2247).epsilon(1e-4));

    Tensor2 c = Tensor2::filled(4, 1, 7.5);
    Tensor2 zc = normalize_fitness(c);
    for (idx i = 0; i < 4; ++i)
        CHECK(zc(i, 0) == 0.0);

    Tensor2 g(3, 1);
    for (idx i = 0; i < 3; ++i)
        g(i, 0) = -4.0 + 13.0 * f(i, 0);  // affine rescale
    Tensor2 zg = normalize_fitness(g);
    for (idx i = 0; i < 3; ++i)
        CHECK(zg(i, 0) == doctest::Approx(z(i, 0)).epsilon(1e-12));

    CHECK_THROWS_AS(normalize_fitness(Tensor2(3, 2)), shape_error);
}

TEST_CASE("elitism: worked examples and tie-breaking") {
    Tensor2 parents = Tensor2::from_values(2, 1, {30, 10});
    Tensor2 pf = Tensor2::from_values(2, 1, {3, 1});
    Tensor2 off = Tensor2::from_values(2, 1, {20, 0});
    Tensor2 of = Tensor2::from_values(2, 1, {2, 0});
    auto [pop, fit] = elitism(parents, pf, off, of, 2);
    CHECK(fit(0, 0) == 0.0);
    CHECK(fit(1, 0) == 1.0);
    CHECK(pop(0, 0) == 0.0);
    CHECK(pop(1, 0) == 10.0);

    // offspring all worse: parents survive, sorted
    Tensor2 of2 = Tensor2::from_values(2, 1, {9, 8});
    auto [pop2, fit2] = elitism(parents, pf, off, of2, 2);
    CHECK(fit2(0, 0) == 1.0);
    CHECK(fit2(1, 0) == 3.0);
    CHECK(pop2(0, 0) == 10.0);
    CHECK(pop2(1, 0) == 30.0);

    // exact ties: parent wins, then lower original index
    Tensor2 p3 = Tensor2::from_values(2, 1, {111, 222});
    Tensor2 f3 = Tensor2::from_values(2, 1, {5, 5});
    Tensor2 o3 = Tensor2::from_values(2, 1, {333, 444});
    Tensor2 fo3 = Tensor2::from_values(2, 1, {5, 5});
    auto [pop3, fit3] = elitism(p3, f3, o3, fo3, 3);
    CHECK(pop3(0, 0) == 111.0);
    CHECK(pop3(1, 0) == 222.0);
    CHECK(pop3(2, 0) == 333.0);

    CHECK_THROWS_AS(elitism(p3, f3, o3, fo3, 5), usage_error);
}

TEST_CASE("elitism random case matches a full-sort oracle") {
    Rng rng(9);
    const idx n = 12, d = 3;
    Tensor2 p(n, d), pf(n, 1), o(n, d), of(n, 1);
    for (std::size_t i = 0; i < p.size(); ++i) p.data()[i] = rng.uniform();
    for (std::size_t i = 0; i < o.size(); ++i) o.data()[i] = rng.uniform();
    for (idx i = 0; i < n; ++i) {
        pf(i, 0) = rng.uniform(0.0, 10.0);
        of(i, 0) = rng.uniform(0.0, 10.0);
    }
    auto [pop, fit] = elitism(p, pf, o, of, n);

    std::vector<double> all;
    for (idx i = 0; i < n; ++i) all.push_back(pf(i, 0));
    for (idx i = 0; i < n; ++i) all.push_back(of(i, 0));
    std::sort(all.begin(), all.end());
    for (idx i = 0; i < n; ++i)
        CHECK(fit(i, 0) == all[static_cast<std::size_t>(i)]);
    for (idx i = 0; i + 1 < n; ++i)
        CHECK(fit(i, 0) <= fit(i + 1, 0));
}

namespace {

struct RunSetup {
    problems::Problem problem;
    model::ModelConfig mc;
    training::TrainConfig tc;
    EvoConfig ec;
};

RunSetup small_setup(std::uint64_t seed) {
    RunSetup s;
    s.problem = problems::make_problem(problems::Family::sphere, 6, 77);
    s.mc.d = 6;
    s.mc.d_a = 8;
    s.mc.heads = 2;
    s.mc.d_m = 8;
    s.mc.layers = 1;
    s.mc.p_c = 0.95;
    s.mc.p_m = 0.95;
    s.tc.lr = 1e-3;
    s.tc.weight_decay = 1e-5;
    s.tc.selftune_steps_per_gen = 1;
    s.ec.pop_size = 8;
    s.ec.generations = 12;
    s.ec.seed = seed;
    return s;
}

} // namespace

TEST_CASE("run: identity model with no self-tuning keeps the LHS best") {
    RunSetup s = small_setup(5);
    s.ec.generations = 1;
    s.ec.fresh_output_scale = 0.0;  // exact identity model
    s.tc.selftune_steps_per_gen = 0;
    RunResult r = run(s.problem, s.mc, s.tc, s.ec);

    Tensor2 init = lhs_init(s.ec.pop_size, 6, mix_keys({s.ec.seed, 0x1417u}));
    Rng eval_rng(mix_keys({s.ec.seed, 0xE7A1u}));
    Tensor2 f = problems::evaluate(s.problem, init, eval_rng);
    double best = f(0, 0);
    for (idx i = 1; i < s.ec.pop_size; ++i) best = std::min(best, f(i, 0));
    CHECK(r.best_fitness == best);
    CHECK(r.log.size() == 1);
    CHECK(r.log[0].evals == s.ec.pop_size * 2);
}

TEST_CASE("run: monotone best, exact budget, reproducible, in bounds") {
    RunSetup s = small_setup(31);
    RunResult r = run(s.problem, s.mc, s.tc, s.ec);
    REQUIRE(r.log.size() == static_cast<std::size_t>(s.ec.generations));
    for (std::size_t t = 0; t + 1 < r.log.size(); ++t)
        CHECK(r.log[t + 1].best <= r.log[t].best);
    CHECK(r.log.back().evals == s.ec.pop_size * (s.ec.generations + 1));
    for (idx j = 0; j < 6; ++j) {
        CHECK(r.best_unit(0, j) >= 0.0);
        CHECK(r.best_unit(0, j) <= 1.0);
    }
    CHECK(r.best_fitness == r.log.back().best);

    RunResult r2 = run(s.problem, s.mc, s.tc, s.ec);
    REQUIRE(r2.log.size() == r.log.size());
    for (std::size_t t = 0; t < r.log.size(); ++t) {
        CHECK(r2.log[t].best == r.log[t].best);
        CHECK(r2.log[t].mean == r.log[t].mean);
    }

    RunSetup other = small_setup(32);
    RunResult r3 = run(other.problem, other.mc, other.tc, other.ec);
    bool differs = false;
    for (std::size_t t = 0; t < r.log.size(); ++t)
        differs = differs || r3.log[t].best != r.log[t].best;
    CHECK(differs);
}

TEST_CASE("run: self-tuning improves over the frozen model on sphere") {
    // with a few more generations, the adaptive run should do no worse
    RunSetup tuned = small_setup(41);
    tuned.ec.generations = 40;
    RunSetup frozen = small_setup(41);
    frozen.ec.generations = 40;
    frozen.tc.selftune_steps_per_gen = 0;
    RunResult a = run(tuned.problem, tuned.mc, tuned.tc, tuned.ec);
    RunResult b = run(frozen.problem, frozen.mc, frozen.tc, frozen.ec);
    CHECK(a.best_fitness <= b.best_fitness);
}

TEST_CASE("run: trace request fires at the chosen generations") {
    RunSetup s = small_setup(51);
    s.ec.generations = 5;
    std::vector<int> seen;
    TraceRequest req;
    req.generations = {1, 5};
    req.sink = [&](int gen, const model::InspectionTrace& trace) {
        seen.push_back(gen);
        REQUIRE(trace.layers.size() == 1);
        CHECK(trace.layers[0].selection_head_avg.rows() == s.ec.pop_size);
        CHECK(trace.layers[0].mutation_mean.rows() == 6);
    };
    run(s.problem, s.mc, s.tc, s.ec, nullptr, {}, &req);
    CHECK(seen == std::vector<int>{1, 5});
}

TEST_CASE("run: dimension mismatch rejected") {
    RunSetup s = small_setup(61);
    s.mc.d = 7;
    CHECK_THROWS_AS(run(s.problem, s.mc, s.tc, s.ec), shape_error);
}
