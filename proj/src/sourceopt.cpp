#include "okaem/sourceopt.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "okaem/errors.hpp"
#include "okaem/evolution.hpp"

namespace okaem::sourceopt {

void GaConfig::validate() const {
    if (p_c < 0.0 || p_c > 1.0)
        throw param_error("GaConfig: p_c must be in [0,1]");
    if (p_m > 1.0)
        throw param_error("GaConfig: p_m must be in [0,1] (or <0 for 1/d)");
    if (eta_c <= 0.0 || eta_m <= 0.0)
        throw param_error("GaConfig: distribution indices must be positive");
    if (pop_size < 2 || generations < 1)
        throw param_error("GaConfig: pop_size >= 2 and generations >= 1 required");
}

void PsoConfig::validate() const {
    if (inertia < 0.0 || inertia >= 1.0)
        throw param_error("PsoConfig: inertia must be in [0,1)");
    if (cognitive < 0.0 || social < 0.0)
        throw param_error("PsoConfig: acceleration coefficients must be >= 0");
    if (velocity_clamp <= 0.0)
        throw param_error("PsoConfig: velocity clamp must be positive");
    if (pop_size < 2 || generations < 1)
        throw param_error("PsoConfig: pop_size >= 2 and generations >= 1 required");
}

double sbx_spread(double u, double eta_c) {
    if (u <= 0.5)
        return std::pow(2.0 * u, 1.0 / (eta_c + 1.0));
    return std::pow(1.0 / (2.0 * (1.0 - u)), 1.0 / (eta_c + 1.0));
}

double polynomial_delta(double u, double x, double eta_m) {
    // Bounded formulation on [0,1]: the perturbation shrinks near the
    // violated bound so the result stays inside.
    if (u < 0.5) {
        const double dl = x;  // distance to lower bound
        const double val = 2.0 * u + (1.0 - 2.0 * u) * std::pow(1.0 - dl, eta_m + 1.0);
        return std::pow(val, 1.0 / (eta_m + 1.0)) - 1.0;
    }
    const double du = 1.0 - x;  // distance to upper bound
    const double val = 2.0 * (1.0 - u) + 2.0 * (u - 0.5) * std::pow(1.0 - du, eta_m + 1.0);
    return 1.0 - std::pow(val, 1.0 / (eta_m + 1.0));
}

std::pair<std::vector<double>, std::vector<double>> sbx_crossover(
    const std::vector<double>& p1, const std::vector<double>& p2, double eta_c,
    double p_c, Rng& rng) {
    if (p1.size() != p2.size())
        throw shape_error("sbx_crossover: parent length mismatch");
    std::vector<double> c1 = p1;
    std::vector<double> c2 = p2;
    for (std::size_t g = 0; g < p1.size(); ++g) {
        if (rng.uniform() >= p_c)
            continue;
        const double beta = sbx_spread(rng.uniform(), eta_c);
        const double a = 0.5 * ((1.0 + beta) * p1[g] + (1.0 - beta) * p2[g]);
        const double b = 0.5 * ((1.0 - beta) * p1[g] + (1.0 + beta) * p2[g]);
        c1[g] = std::clamp(a, 0.0, 1.0);
        c2[g] = std::clamp(b, 0.0, 1.0);
    }
    return {std::move(c1), std::move(c2)};
}

std::vector<double> polynomial_mutation(const std::vector<double>& p, double eta_m,
                                        double p_m, Rng& rng) {
    std::vector<double> out = p;
    for (double& x : out) {
        if (rng.uniform() >= p_m)
            continue;
        x = std::clamp(x + polynomial_delta(rng.uniform(), x, eta_m), 0.0, 1.0);
    }
    return out;
}

namespace {

void sort_by_fitness(Tensor2& pop, Tensor2& fit) {
    const auto order = evolution::fitness_order(fit);
    Tensor2 p(pop.rows(), pop.cols());
    Tensor2 f(fit.rows(), 1);
    for (idx r = 0; r < pop.rows(); ++r) {
        const idx src = order[static_cast<std::size_t>(r)];
        std::copy(pop.row(src), pop.row(src) + pop.cols(), p.row(r));
        f(r, 0) = fit(src, 0);
    }
    pop = std::move(p);
    fit = std::move(f);
}

} // namespace

void ga_generation(Tensor2& population, Tensor2& fitness, const GaConfig& cfg,
                   const problems::Problem& problem, Rng& eval_rng, Rng& op_rng) {
    const idx n = population.rows();
    if (n % 2 != 0)
        throw usage_error("ga_generation: population size must be even");
    const idx d = population.cols();
    const double pm = cfg.mutation_prob(d);

    // 1/2 truncation: duplicate the surviving half to fill N mating slots.
    const auto order = evolution::fitness_order(fitness);
    std::vector<idx> pool;
    pool.reserve(static_cast<std::size_t>(n));
    for (idx r = 0; r < n / 2; ++r) {
        pool.push_back(order[static_cast<std::size_t>(r)]);
        pool.push_back(order[static_cast<std::size_t>(r)]);
    }
    op_rng.shuffle(pool);

    Tensor2 offspring(n, d);
    for (idx pair = 0; pair < n / 2; ++pair) {
        const idx ia = pool[static_cast<std::size_t>(2 * pair)];
        const idx ib = pool[static_cast<std::size_t>(2 * pair + 1)];
        std::vector<double> pa(population.row(ia), population.row(ia) + d);
        std::vector<double> pb(population.row(ib), population.row(ib) + d);
        auto [ca, cb] = sbx_crossover(pa, pb, cfg.eta_c, cfg.p_c, op_rng);
        ca = polynomial_mutation(ca, cfg.eta_m, pm, op_rng);
        cb = polynomial_mutation(cb, cfg.eta_m, pm, op_rng);
        std::copy(ca.begin(), ca.end(), offspring.row(2 * pair));
        std::copy(cb.begin(), cb.end(), offspring.row(2 * pair + 1));
    }

    Tensor2 offspring_fit = problems::evaluate(problem, offspring, eval_rng);
    auto [next_pop, next_fit] =
        evolution::elitism(population, fitness, offspring, offspring_fit, n);
    population = std::move(next_pop);
    fitness = std::move(next_fit);
}

PsoState pso_init(const problems::Problem& problem, const PsoConfig& cfg,
                  std::uint64_t seed, Rng& eval_rng) {
    PsoState s;
    s.positions = evolution::lhs_init(cfg.pop_size, problem.dim, seed);
    s.velocities = Tensor2(cfg.pop_size, problem.dim);
    s.personal_best = s.positions;
    s.personal_best_fitness = problems::evaluate(problem, s.positions, eval_rng);
    s.global_best = 0;
    for (idx i = 1; i < cfg.pop_size; ++i)
        if (s.personal_best_fitness(i, 0) < s.personal_best_fitness(s.global_best, 0))
            s.global_best = i;
    return s;
}

Tensor2 pso_step(PsoState& swarm, const PsoConfig& cfg, const problems::Problem& problem,
                 Rng& eval_rng, Rng& op_rng) {
    const idx n = swarm.positions.rows();
    const idx d = swarm.positions.cols();
    const double vmax = cfg.velocity_clamp;
    const double* gbest = swarm.personal_best.row(swarm.global_best);
    for (idx i = 0; i < n; ++i) {
        double* x = swarm.positions.row(i);
        double* v = swarm.velocities.row(i);
        const double* pb = swarm.personal_best.row(i);
        for (idx j = 0; j < d; ++j) {
            const double r1 = op_rng.uniform();
            const double r2 = op_rng.uniform();
            double vj = cfg.inertia * v[j] + cfg.cognitive * r1 * (pb[j] - x[j]) +
                        cfg.social * r2 * (gbest[j] - x[j]);
            v[j] = std::clamp(vj, -vmax, vmax);
            x[j] = std::clamp(x[j] + v[j], 0.0, 1.0);
        }
    }
    Tensor2 fit = problems::evaluate(problem, swarm.positions, eval_rng);
    for (idx i = 0; i < n; ++i) {
        if (fit(i, 0) < swarm.personal_best_fitness(i, 0)) {
            swarm.personal_best_fitness(i, 0) = fit(i, 0);
            std::copy(swarm.positions.row(i), swarm.positions.row(i) + d,
                      swarm.personal_best.row(i));
            if (fit(i, 0) < swarm.personal_best_fitness(swarm.global_best, 0))
                swarm.global_best = i;
        }
    }
    return fit;
}

SourceRun run_ga(const problems::Problem& problem, const GaConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    Rng eval_rng(mix_keys({seed, 0xE1u}));
    Rng op_rng(mix_keys({seed, 0x0Cu}));
    Tensor2 pop = evolution::lhs_init(cfg.pop_size, problem.dim, mix_keys({seed, 0x11u}));
    Tensor2 fit = problems::evaluate(problem, pop, eval_rng);
    sort_by_fitness(pop, fit);
    SourceRun out;
    for (int t = 0; t < cfg.generations; ++t) {
        ga_generation(pop, fit, cfg, problem, eval_rng, op_rng);
        out.best_per_generation.push_back(fit(0, 0));
    }
    out.best_unit = Tensor2(1, pop.cols());
    std::copy(pop.row(0), pop.row(0) + pop.cols(), out.best_unit.data());
    out.best_fitness = fit(0, 0);
    return out;
}

KnowledgeArchive generate_archive(const problems::StopInstance& instance,
                                  const std::string& optimizer_id, idx pop_size,
                                  int generations, std::uint64_t seed) {
    instance.validate();
    if (optimizer_id != "ga" && optimizer_id != "pso")
        throw param_error("generate_archive: optimizer must be 'ga' or 'pso'");

    KnowledgeArchive archive;
    archive.source_tasks = static_cast<std::uint32_t>(instance.sources.size());
    archive.generations = static_cast<std::uint32_t>(generations);
    archive.pop_size = static_cast<std::uint32_t>(pop_size);
    archive.dim = static_cast<std::uint32_t>(instance.target.dim);
    archive.entries.reserve(static_cast<std::size_t>(archive.source_tasks) *
                            archive.generations);

    for (std::size_t k = 0; k < instance.sources.size(); ++k) {
        const problems::Problem& task = instance.sources[k].problem;
        const std::uint64_t task_seed = mix_keys({seed, 0xA3c4u, static_cast<std::uint64_t>(k)});
        try {
            if (optimizer_id == "ga") {
                GaConfig cfg;
                cfg.pop_size = pop_size;
                cfg.generations = generations;
                Rng eval_rng(mix_keys({task_seed, 0xE1u}));
                Rng op_rng(mix_keys({task_seed, 0x0Cu}));
                Tensor2 pop = evolution::lhs_init(pop_size, task.dim,
                                                  mix_keys({task_seed, 0x11u}));
                Tensor2 fit = problems::evaluate(task, pop, eval_rng);
                sort_by_fitness(pop, fit);
                for (int t = 0; t < generations; ++t) {
                    ga_generation(pop, fit, cfg, task, eval_rng, op_rng);
                    archive.entries.push_back({pop, fit});
                }
            } else {
                PsoConfig cfg;
                cfg.pop_size = pop_size;
                cfg.generations = generations;
                Rng eval_rng(mix_keys({task_seed, 0xE1u}));
                Rng op_rng(mix_keys({task_seed, 0x0Cu}));
                PsoState swarm = pso_init(task, cfg, mix_keys({task_seed, 0x11u}), eval_rng);
                for (int t = 0; t < generations; ++t) {
                    Tensor2 fit = pso_step(swarm, cfg, task, eval_rng, op_rng);
                    Tensor2 pop = swarm.positions;
                    sort_by_fitness(pop, fit);
                    archive.entries.push_back({std::move(pop), std::move(fit)});
                }
            }
        } catch (const std::exception& e) {
            throw eval_error("generate_archive: source task k=" + std::to_string(k) +
                             " failed: " + e.what());
        }
    }
    archive.validate();
    return archive;
}

} // namespace okaem::sourceopt
