#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "okaem/model.hpp"
#include "okaem/problems.hpp"
#include "okaem/tensor.hpp"
#include "okaem/training.hpp"

namespace okaem::evolution {

struct EvoConfig {
    idx pop_size = 20;    // N
    int generations = 250;  // T reproduction generations; total budget N*(T+1)
    std::uint64_t seed = 0;
    // Output-projection scale for freshly initialized params. At zero the
    // initial operator is the exact identity, which leaves a from-scratch run
    // at a fixed point (offspring == parents, zero self-tuning gradient), so
    // adaptive runs without pre-trained params need a non-zero value.
    double fresh_output_scale = 0.4;

    void validate() const;
};

struct RunLogRow {
    int gen = 0;
    double best = 0.0;
    double mean = 0.0;
    double l2_loss = 0.0;  // NaN when self-tuning is disabled
    long evals = 0;        // cumulative objective calls
    double ms = 0.0;       // wall-clock for this generation
};

struct RunResult {
    Tensor2 best_unit;  // 1 x d, in [0,1]^d
    double best_fitness = 0.0;
    std::vector<RunLogRow> log;
};

// N x d in [0,1]^d; per dimension exactly one sample per stratum.
Tensor2 lhs_init(idx n, idx d, std::uint64_t seed);

// Z-score normalization; a constant column maps to all zeros.
Tensor2 normalize_fitness(const Tensor2& fitness);

// The N lowest-fitness rows of parents-then-offspring, sorted ascending.
// Ties resolve parent-before-offspring, then by original row index.
std::pair<Tensor2, Tensor2> elitism(const Tensor2& parents, const Tensor2& parents_fitness,
                                    const Tensor2& offspring, const Tensor2& offspring_fitness,
                                    idx keep);

// Ascending-fitness order of rows (stable).
std::vector<idx> fitness_order(const Tensor2& fitness);

// Trace capture callback: called with the inspection trace of the
// reproduction forward at the requested generations (1-based).
struct TraceRequest {
    std::vector<int> generations;
    std::function<void(int gen, const model::InspectionTrace&)> sink;
};

// The full adaptive-optimization loop: LHS init, evaluate, then per
// generation reproduce / evaluate / elitism / self-tune, carrying elites.
// Pretrained params are used when given; otherwise fresh params are drawn
// (see fresh_output_scale). Exactly N*(T+1) objective evaluations.
RunResult run(const problems::Problem& problem, const model::ModelConfig& model_cfg,
              const training::TrainConfig& train_cfg, const EvoConfig& evo_cfg,
              const model::ModelParams* pretrained = nullptr,
              const model::ForwardOptions& variant = {},
              const TraceRequest* trace_request = nullptr);

} // namespace okaem::evolution
