#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "okaem/archive.hpp"
#include "okaem/problems.hpp"
#include "okaem/rng.hpp"
#include "okaem/tensor.hpp"

namespace okaem::sourceopt {

struct GaConfig {
    double p_c = 1.0;    // per-gene crossover probability
    double eta_c = 15.0; // SBX distribution index
    double p_m = -1.0;   // per-gene mutation probability; <0 means 1/d
    double eta_m = 15.0; // polynomial mutation index
    idx pop_size = 20;
    int generations = 250;

    void validate() const;
    double mutation_prob(idx d) const { return p_m < 0.0 ? 1.0 / static_cast<double>(d) : p_m; }
};

struct PsoConfig {
    double inertia = 0.729;
    double cognitive = 1.49445;
    double social = 1.49445;
    double velocity_clamp = 0.2;  // fraction of the unit range
    idx pop_size = 20;
    int generations = 250;

    void validate() const;
};

// SBX spread factor for a uniform draw u; u=0.5 gives beta=1 (children equal
// parents).
double sbx_spread(double u, double eta_c);

// Bounded polynomial-mutation step for a gene at x in [0,1]; u=0.5 gives 0,
// and the perturbation shrinks to zero at the violated bound.
double polynomial_delta(double u, double x, double eta_m);

// Simulated binary crossover of two parents in [0,1]^d; children clipped.
std::pair<std::vector<double>, std::vector<double>> sbx_crossover(
    const std::vector<double>& p1, const std::vector<double>& p2, double eta_c,
    double p_c, Rng& rng);

// Bounded polynomial mutation in [0,1]^d.
std::vector<double> polynomial_mutation(const std::vector<double>& p, double eta_m,
                                        double p_m, Rng& rng);

// One GA generation: 1/2 truncation parents, random pairing, SBX + polynomial
// mutation, elitist replacement over parents-union-offspring.
void ga_generation(Tensor2& population, Tensor2& fitness, const GaConfig& cfg,
                   const problems::Problem& problem, Rng& eval_rng, Rng& op_rng);

struct PsoState {
    Tensor2 positions;
    Tensor2 velocities;
    Tensor2 personal_best;
    Tensor2 personal_best_fitness;  // N x 1
    idx global_best = 0;
};

PsoState pso_init(const problems::Problem& problem, const PsoConfig& cfg,
                  std::uint64_t seed, Rng& eval_rng);

// Returns the fitness of the updated positions.
Tensor2 pso_step(PsoState& swarm, const PsoConfig& cfg, const problems::Problem& problem,
                 Rng& eval_rng, Rng& op_rng);

// Full GA run on one problem; returns the best fitness trajectory.
struct SourceRun {
    Tensor2 best_unit;
    double best_fitness = 0.0;
    std::vector<double> best_per_generation;
};
SourceRun run_ga(const problems::Problem& problem, const GaConfig& cfg, std::uint64_t seed);

// Runs the chosen optimizer on every source task of the instance, recording
// each generation's fitness-sorted population into a dense archive.
KnowledgeArchive generate_archive(const problems::StopInstance& instance,
                                  const std::string& optimizer_id, idx pop_size,
                                  int generations, std::uint64_t seed);

} // namespace okaem::sourceopt
