#include "okaem/evolution.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>

#include "okaem/errors.hpp"

namespace okaem::evolution {

void EvoConfig::validate() const {
    if (pop_size < 2)
        throw param_error("EvoConfig: population size must be >= 2");
    if (generations < 1)
        throw param_error("EvoConfig: generations must be >= 1");
    if (fresh_output_scale < 0.0)
        throw param_error("EvoConfig: fresh_output_scale must be >= 0");
}

Tensor2 lhs_init(idx n, idx d, std::uint64_t seed) {
    if (n < 1 || d < 1)
        throw param_error("lhs_init: n and d must be >= 1");
    Rng rng(mix_keys({seed, 0x1f5u}));
    Tensor2 x(n, d);
    std::vector<idx> strata(static_cast<std::size_t>(n));
    const double inv_n = 1.0 / static_cast<double>(n);
    for (idx j = 0; j < d; ++j) {
        std::iota(strata.begin(), strata.end(), idx{0});
        rng.shuffle(strata);
        for (idx i = 0; i < n; ++i)
            x(i, j) = (static_cast<double>(strata[static_cast<std::size_t>(i)]) +
                       rng.uniform()) * inv_n;
    }
    return x;
}

Tensor2 normalize_fitness(const Tensor2& fitness) {
    if (fitness.cols() != 1)
        throw shape_error("normalize_fitness: expected an Nx1 column");
    const idx n = fitness.rows();
    double mean = 0.0;
    for (idx i = 0; i < n; ++i) mean += fitness(i, 0);
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (idx i = 0; i < n; ++i) {
        const double dlt = fitness(i, 0) - mean;
        var += dlt * dlt;
    }
    var /= static_cast<double>(n);
    Tensor2 out(n, 1);
    if (var <= 0.0)
        return out;  // constant fitness -> all zeros
    const double inv_sd = 1.0 / std::sqrt(var);
    for (idx i = 0; i < n; ++i)
        out(i, 0) = (fitness(i, 0) - mean) * inv_sd;
    return out;
}

std::vector<idx> fitness_order(const Tensor2& fitness) {
    std::vector<idx> order(static_cast<std::size_t>(fitness.rows()));
    std::iota(order.begin(), order.end(), idx{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](idx a, idx b) { return fitness(a, 0) < fitness(b, 0); });
    return order;
}

std::pair<Tensor2, Tensor2> elitism(const Tensor2& parents, const Tensor2& parents_fitness,
                                    const Tensor2& offspring, const Tensor2& offspring_fitness,
                                    idx keep) {
    if (parents.rows() != parents_fitness.rows() ||
        offspring.rows() != offspring_fitness.rows() ||
        parents.cols() != offspring.cols())
        throw shape_error("elitism: inconsistent shapes");
    const idx total = parents.rows() + offspring.rows();
    if (total < keep)
        throw usage_error("elitism: union smaller than N");

    // Parents first, so a stable sort breaks ties parent-before-offspring
    // and then by original row index.
    std::vector<idx> order(static_cast<std::size_t>(total));
    std::iota(order.begin(), order.end(), idx{0});
    auto fit = [&](idx i) {
        return i < parents.rows() ? parents_fitness(i, 0)
                                  : offspring_fitness(i - parents.rows(), 0);
    };
    std::stable_sort(order.begin(), order.end(),
                     [&](idx a, idx b) { return fit(a) < fit(b); });

    Tensor2 pop(keep, parents.cols());
    Tensor2 f(keep, 1);
    for (idx r = 0; r < keep; ++r) {
        const idx src = order[static_cast<std::size_t>(r)];
        const double* row = src < parents.rows() ? parents.row(src)
                                                 : offspring.row(src - parents.rows());
        std::copy(row, row + parents.cols(), pop.row(r));
        f(r, 0) = fit(src);
    }
    return {std::move(pop), std::move(f)};
}

namespace {

void clip_unit(Tensor2& x) {
    for (std::size_t i = 0; i < x.size(); ++i)
        x.data()[i] = std::clamp(x.data()[i], 0.0, 1.0);
}

} // namespace

RunResult run(const problems::Problem& problem, const model::ModelConfig& model_cfg,
              const training::TrainConfig& train_cfg, const EvoConfig& evo_cfg,
              const model::ModelParams* pretrained, const model::ForwardOptions& variant,
              const TraceRequest* trace_request) {
    evo_cfg.validate();
    train_cfg.validate();
    model_cfg.validate();
    problem.validate();
    if (problem.dim != model_cfg.d)
        throw shape_error("run: problem dim " + std::to_string(problem.dim) +
                          " != model d " + std::to_string(model_cfg.d));

    const idx n = evo_cfg.pop_size;
    const std::uint64_t seed = evo_cfg.seed;

    model::ModelParams params =
        pretrained ? *pretrained
                   : model::init_params(model_cfg, mix_keys({seed, 0xA11u}),
                                        evo_cfg.fresh_output_scale);
    training::AdamWState opt;
    opt.lr = train_cfg.lr;
    opt.weight_decay = train_cfg.weight_decay;

    Rng eval_rng(mix_keys({seed, 0xE7A1u}));
    long evals = 0;
    auto eval = [&](const Tensor2& x) {
        Tensor2 f = problems::evaluate(problem, x, eval_rng);
        evals += x.rows();
        return f;
    };

    Tensor2 pop = lhs_init(n, problem.dim, mix_keys({seed, 0x1417u}));
    Tensor2 fit = eval(pop);
    {
        const auto order = fitness_order(fit);
        Tensor2 p_sorted(n, pop.cols());
        Tensor2 f_sorted(n, 1);
        for (idx r = 0; r < n; ++r) {
            const idx src = order[static_cast<std::size_t>(r)];
            std::copy(pop.row(src), pop.row(src) + pop.cols(), p_sorted.row(r));
            f_sorted(r, 0) = fit(src, 0);
        }
        pop = std::move(p_sorted);
        fit = std::move(f_sorted);
    }

    RunResult result;
    result.log.reserve(static_cast<std::size_t>(evo_cfg.generations));

    model::ForwardOptions repro_opts = variant;
    for (int t = 1; t <= evo_cfg.generations; ++t) {
        const auto t0 = std::chrono::steady_clock::now();
        const Tensor2 fz = normalize_fitness(fit);

        bool want_trace = false;
        if (trace_request)
            want_trace = std::find(trace_request->generations.begin(),
                                   trace_request->generations.end(),
                                   t) != trace_request->generations.end();
        repro_opts.want_trace = want_trace;

        model::ForwardRun repro =
            model::forward(pop, fz, params,
                           mix_keys({seed, 0xF0u, static_cast<std::uint64_t>(t), 0}),
                           repro_opts);
        if (want_trace)
            trace_request->sink(t, repro.trace);

        Tensor2 offspring = repro.offspring();
        clip_unit(offspring);
        Tensor2 offspring_fit;
        try {
            offspring_fit = eval(offspring);
        } catch (const eval_error& e) {
            throw eval_error("generation " + std::to_string(t) + ": " + e.what());
        }

        auto [elite_pop, elite_fit] = elitism(pop, fit, offspring, offspring_fit, n);

        double l2 = std::numeric_limits<double>::quiet_NaN();
        if (train_cfg.selftune_steps_per_gen > 0) {
            model::ForwardOptions tune_opts = variant;
            tune_opts.want_trace = false;
            l2 = training::self_tune(
                params, opt, pop, fz, fitness_order(offspring_fit), elite_pop,
                train_cfg, tune_opts,
                mix_keys({seed, 0xF0u, static_cast<std::uint64_t>(t), 1}));
        }

        pop = std::move(elite_pop);
        fit = std::move(elite_fit);

        const auto t1 = std::chrono::steady_clock::now();
        RunLogRow row;
        row.gen = t;
        row.best = fit(0, 0);
        double mean = 0.0;
        for (idx i = 0; i < n; ++i) mean += fit(i, 0);
        row.mean = mean / static_cast<double>(n);
        row.l2_loss = l2;
        row.evals = evals;
        row.ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
        result.log.push_back(row);
    }

    result.best_unit = Tensor2(1, pop.cols());
    std::copy(pop.row(0), pop.row(0) + pop.cols(), result.best_unit.data());
    result.best_fitness = fit(0, 0);
    return result;
}

} // namespace okaem::evolution
