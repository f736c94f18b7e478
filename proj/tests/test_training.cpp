#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "okaem/evolution.hpp"
#include "okaem/model.hpp"
#include "okaem/rng.hpp"
#include "okaem/training.hpp"

using namespace okaem;
using model::ModelConfig;
using model::ModelParams;

namespace {

Tensor2 random_tensor(idx r, idx c, Rng& rng, double lo = 0.0, double hi = 1.0) {
    Tensor2 t(r, c);
    for (std::size_t i = 0; i < t.size(); ++i)
        t.data()[i] = rng.uniform(lo, hi);
    return t;
}

ModelConfig tiny_cfg() {
    ModelConfig cfg;
    cfg.d = 4;
    cfg.d_a = 6;
    cfg.heads = 2;
    cfg.d_m = 5;
    cfg.layers = 1;
    cfg.p_c = 1.0;
    cfg.p_m = 1.0;
    return cfg;
}

// Archive whose populations drift toward a corner, so consecutive pairs carry
// a learnable direction. Entries are sorted by their fitness.
KnowledgeArchive drift_archive(std::uint32_t k_tasks, std::uint32_t gens, idx n, idx d,
                               std::uint64_t seed, bool fixed_point = false) {
    KnowledgeArchive a;
    a.source_tasks = k_tasks;
    a.generations = gens;
    a.pop_size = static_cast<std::uint32_t>(n);
    a.dim = static_cast<std::uint32_t>(d);
    a.provenance = "synthetic";
    Rng rng(seed);
    for (std::uint32_t k = 0; k < k_tasks; ++k) {
        Tensor2 pop = random_tensor(n, d, rng, 0.2, 0.9);
        for (std::uint32_t t = 0; t < gens; ++t) {
            Tensor2 fit(n, 1);
            for (idx i = 0; i < n; ++i) {
                double s = 0.0;
                for (idx j = 0; j < d; ++j) s += pop(i, j) * pop(i, j);
                fit(i, 0) = s;
            }
            auto order = evolution::fitness_order(fit);
            Tensor2 ps(n, d);
            Tensor2 fs(n, 1);
            for (idx r = 0; r < n; ++r) {
                const idx src = order[static_cast<std::size_t>(r)];
                std::copy(pop.row(src), pop.row(src) + d, ps.row(r));
                fs(r, 0) = fit(src, 0);
            }
            a.entries.push_back({ps, fs});
            if (!fixed_point)
                for (std::size_t i = 0; i < pop.size(); ++i)
                    pop.data()[i] = std::max(0.0, pop.data()[i] * 0.9);
        }
    }
    return a;
}

} // namespace

TEST_CASE("adamw: zero gradient with zero decay is the identity") {
    Rng rng(1);
    Tensor2 w = random_tensor(3, 4, rng);
    Tensor2 w0 = w;
    std::vector<Tensor2*> params{&w};
    std::vector<Tensor2> grads{Tensor2(3, 4)};
    training::AdamWState st;
    st.lr = 1e-2;
    st.weight_decay = 0.0;
    training::adamw_step(st, params, grads);
    for (std::size_t i = 0; i < w.size(); ++i)
        CHECK(w.data()[i] == w0.data()[i]);
}

TEST_CASE("adamw: first step moves by ~lr*sign(g), decay-only shrinks") {
    Rng rng(2);
    Tensor2 w = random_tensor(2, 3, rng);
    Tensor2 w0 = w;
    Tensor2 g(2, 3);
    for (std::size_t i = 0; i < g.size(); ++i)
        g.data()[i] = (i % 2 == 0) ? 4.0 : -2.5;  // |g| >> eps
    std::vector<Tensor2*> params{&w};
    std::vector<Tensor2> grads{g};
    training::AdamWState st;
    st.lr = 1e-3;
    st.weight_decay = 0.0;
    training::adamw_step(st, params, grads);
    for (std::size_t i = 0; i < w.size(); ++i) {
        const double delta = w.data()[i] - w0.data()[i];
        const double want = -st.lr * (g.data()[i] > 0 ? 1.0 : -1.0);
        CHECK(std::fabs(delta - want) < 1e-6 * st.lr);
    }

    Tensor2 v = random_tensor(2, 2, rng, 0.5, 1.5);
    Tensor2 v0 = v;
    std::vector<Tensor2*> p2{&v};
    std::vector<Tensor2> g2{Tensor2(2, 2)};
    training::AdamWState st2;
    st2.lr = 1e-2;
    st2.weight_decay = 0.1;
    training::adamw_step(st2, p2, g2);
    for (std::size_t i = 0; i < v.size(); ++i)
        CHECK(v.data()[i] ==
              doctest::Approx(v0.data()[i] * (1.0 - st2.lr * st2.weight_decay)).epsilon(1e-12));

    std::vector<Tensor2> bad{Tensor2(1, 1), Tensor2(1, 1)};
    CHECK_THROWS_AS(training::adamw_step(st2, p2, bad), usage_error);
}

TEST_CASE("pretrain_loss: zero at a fixed point with the identity model") {
    ModelConfig cfg = tiny_cfg();
    cfg.p_c = 0.5;  // dropout active; identity model still exact
    cfg.p_m = 0.5;
    ModelParams p = model::init_params(cfg, 3);
    KnowledgeArchive a = drift_archive(2, 3, 5, cfg.d, 11, /*fixed_point=*/true);
    std::vector<training::PretrainSample> batch;
    for (std::uint32_t k = 0; k < a.source_tasks; ++k)
        for (std::uint32_t t = 0; t + 1 < a.generations; ++t)
            batch.push_back({&a.at(k, t).population, &a.at(k, t).fitness,
                             &a.at(k, t + 1).population});
    CHECK(training::pretrain_loss(p, batch, 99) == 0.0);
}

TEST_CASE("pretrain_loss: matches a hand-computed single pair and is nonnegative") {
    ModelConfig cfg = tiny_cfg();
    ModelParams p = model::init_params(cfg, 4);  // identity model
    Rng rng(5);
    Tensor2 pop = random_tensor(3, cfg.d, rng);
    Tensor2 fit = random_tensor(3, 1, rng);
    Tensor2 next = random_tensor(3, cfg.d, rng);
    std::vector<training::PretrainSample> batch{{&pop, &fit, &next}};
    // identity model => loss is exactly ||next - pop||^2
    double want = 0.0;
    for (std::size_t i = 0; i < pop.size(); ++i) {
        const double d = next.data()[i] - pop.data()[i];
        want += d * d;
    }
    const double got = training::pretrain_loss(p, batch, 1);
    CHECK(got == doctest::Approx(want).epsilon(1e-12));
    CHECK(got >= 0.0);
}

TEST_CASE("selftune_loss: zero at equality, delta^2, gradient passes fd") {
    ModelConfig cfg = tiny_cfg();
    ModelParams p = model::init_params(cfg, 6);  // identity
    Rng rng(7);
    Tensor2 pop = random_tensor(4, cfg.d, rng);
    Tensor2 fz = evolution::normalize_fitness(random_tensor(4, 1, rng));
    std::vector<idx> order{0, 1, 2, 3};

    model::ForwardRun run = model::forward(pop, fz, p, 2);
    CHECK(training::selftune_loss(run, order, pop) == 0.0);

    Tensor2 target = pop;
    target(2, 1) += 0.75;
    model::ForwardRun run2 = model::forward(pop, fz, p, 2);
    CHECK(training::selftune_loss(run2, order, target) ==
          doctest::Approx(0.75 * 0.75).epsilon(1e-12));

    // gradient of the loss wrt every weight vs central differences
    ModelConfig gcfg = tiny_cfg();
    gcfg.p_c = 0.9;
    gcfg.p_m = 0.9;
    ModelParams q = model::init_params(gcfg, 8, 1.0);
    Tensor2 elites = random_tensor(4, gcfg.d, rng);
    std::vector<idx> ord{2, 0, 3, 1};
    auto eval = [&](std::vector<Tensor2>* grads) {
        model::ForwardRun r = model::forward(pop, fz, q, 31);
        ValueId sorted = r.tape.gather_rows(r.output, ord);
        ValueId tgt = r.tape.constant(elites);
        ValueId loss = r.tape.squared_distance(tgt, sorted);
        if (grads) {
            r.tape.backward(loss);
            grads->clear();
            for (ValueId id : r.param_ids)
                grads->push_back(r.tape.grad(id));
        }
        return r.tape.value(loss)(0, 0);
    };
    std::vector<Tensor2> grads;
    eval(&grads);
    auto theta = model::param_tensors(q);
    const double err = fd_check([&] { return eval(nullptr); }, theta, grads, 1e-6);
    CHECK(err < 1e-5);
}

TEST_CASE("pretrain: epochs=0, T=1 error, loss decreases, reproducible") {
    ModelConfig cfg = tiny_cfg();
    training::TrainConfig tc;
    tc.epochs = 0;
    tc.batch_size = 8;
    tc.lr = 1e-3;
    tc.weight_decay = 0.0;

    KnowledgeArchive a = drift_archive(2, 6, 6, cfg.d, 21);
    auto r0 = training::pretrain(a, tc, cfg, 5);
    ModelParams fresh = model::init_params(cfg, mix_keys({5, 0x1717}));
    auto t0 = model::param_tensors(r0.params);
    auto t1 = model::param_tensors(fresh);
    for (std::size_t i = 0; i < t0.size(); ++i)
        for (std::size_t j = 0; j < t0[i]->size(); ++j)
            CHECK(t0[i]->data()[j] == t1[i]->data()[j]);

    KnowledgeArchive single = drift_archive(2, 1, 6, cfg.d, 22);
    tc.epochs = 2;
    CHECK_THROWS_AS(training::pretrain(single, tc, cfg, 5), usage_error);

    tc.epochs = 8;
    auto r1 = training::pretrain(a, tc, cfg, 6);
    REQUIRE(r1.epoch_loss.size() == 8);
    CHECK(r1.epoch_loss.back() <= r1.epoch_loss.front());

    auto r2 = training::pretrain(a, tc, cfg, 6);
    auto p1 = model::param_tensors(r1.params);
    auto p2 = model::param_tensors(r2.params);
    for (std::size_t i = 0; i < p1.size(); ++i)
        for (std::size_t j = 0; j < p1[i]->size(); ++j)
            CHECK(p1[i]->data()[j] == p2[i]->data()[j]);

    // threaded accumulation is deterministic as well
    tc.threads = 2;
    auto r3 = training::pretrain(a, tc, cfg, 6);
    auto r4 = training::pretrain(a, tc, cfg, 6);
    auto p3 = model::param_tensors(r3.params);
    auto p4 = model::param_tensors(r4.params);
    for (std::size_t i = 0; i < p3.size(); ++i)
        for (std::size_t j = 0; j < p3[i]->size(); ++j)
            CHECK(p3[i]->data()[j] == p4[i]->data()[j]);

    // dimension mismatch is rejected
    ModelConfig wrong = cfg;
    wrong.d = cfg.d + 1;
    CHECK_THROWS_AS(training::pretrain(a, tc, wrong, 5), shape_error);
}

TEST_CASE("self_tune: zero steps is a no-op; one small-lr step descends") {
    ModelConfig cfg = tiny_cfg();
    cfg.p_c = 0.9;
    cfg.p_m = 0.9;
    ModelParams p = model::init_params(cfg, 9, 1.0);
    Rng rng(10);
    Tensor2 pop = random_tensor(5, cfg.d, rng);
    Tensor2 fz = evolution::normalize_fitness(random_tensor(5, 1, rng));
    Tensor2 elites = random_tensor(5, cfg.d, rng);
    std::vector<idx> order{0, 1, 2, 3, 4};

    training::TrainConfig tc;
    tc.selftune_steps_per_gen = 0;
    training::AdamWState opt;
    ModelParams before = p;
    double loss = training::self_tune(p, opt, pop, fz, order, elites, tc, {}, 77);
    CHECK(std::isnan(loss));
    auto tb = model::param_tensors(before);
    auto ta = model::param_tensors(p);
    for (std::size_t i = 0; i < ta.size(); ++i)
        for (std::size_t j = 0; j < ta[i]->size(); ++j)
            CHECK(ta[i]->data()[j] == tb[i]->data()[j]);

    // frozen-mask descent: evaluate loss with the same mask before and after
    const std::uint64_t mask = mix_keys({77, 0});  // the key self_tune uses for step 0
    auto loss_at = [&](const ModelParams& params) {
        model::ForwardRun r = model::forward(pop, fz, params, mask);
        ValueId sorted = r.tape.gather_rows(r.output, order);
        ValueId tgt = r.tape.constant(elites);
        return r.tape.value(r.tape.squared_distance(tgt, sorted))(0, 0);
    };
    const double before_loss = loss_at(p);
    tc.selftune_steps_per_gen = 1;
    tc.lr = 1e-4;
    tc.weight_decay = 0.0;
    training::AdamWState opt2;
    opt2.lr = tc.lr;
    training::self_tune(p, opt2, pop, fz, order, elites, tc, {}, 77);
    const double after_loss = loss_at(p);
    CHECK(after_loss < before_loss);
}
