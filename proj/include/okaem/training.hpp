#pragma once

#include <cstdint>
#include <vector>

#include "okaem/archive.hpp"
#include "okaem/model.hpp"
#include "okaem/tensor.hpp"

namespace okaem::training {

struct TrainConfig {
    double lr = 1e-3;
    double weight_decay = 1e-2;
    std::size_t batch_size = 256;
    int epochs = 50;
    int selftune_steps_per_gen = 1;
    int threads = 1;  // batch-level parallel gradient accumulation

    void validate() const;
};

// Decoupled-weight-decay Adam. Moments are allocated lazily on the first
// step, shaped after the parameter traversal order.
struct AdamWState {
    double lr = 1e-3;
    double weight_decay = 0.0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    long step = 0;
    std::vector<Tensor2> m;
    std::vector<Tensor2> v;
};

// theta <- theta - lr * (mhat / (sqrt(vhat) + eps) + wd * theta)
void adamw_step(AdamWState& state, std::vector<Tensor2*>& params,
                const std::vector<Tensor2>& grads);

// One consecutive-generation training example.
struct PretrainSample {
    const Tensor2* population;  // P_k^t, sorted by its fitness
    const Tensor2* fitness;     // F_k^t
    const Tensor2* next;        // P_k^{t+1}, sorted by its fitness
};

// Sum over the batch of || P^{t+1} - OKAEM(P^t, F^t) ||^2. Fitness is
// z-normalized before it enters the operator.
double pretrain_loss(const model::ModelParams& params,
                     const std::vector<PretrainSample>& batch, std::uint64_t mask_seed);

// || P* - P_hat ||^2 with P_hat gathered into ascending-offspring-fitness
// order on the recorded tape. Returns the loss value; gradients are left on
// the tape for the caller.
double selftune_loss(model::ForwardRun& run, const std::vector<idx>& offspring_order,
                     const Tensor2& elites_sorted);

struct PretrainResult {
    model::ModelParams params;
    std::vector<double> epoch_loss;
};

// Epochs x shuffled minibatches over all consecutive-generation pairs of the
// archive. Deterministic for a fixed seed, including the threaded path.
PretrainResult pretrain(const KnowledgeArchive& archive, const TrainConfig& cfg,
                        const model::ModelConfig& model_cfg, std::uint64_t seed);

// selftune_steps_per_gen AdamW steps on the self-tuning loss. Each step
// replays the forward pass from (population, fitness_z) with fresh dropout
// masks. Returns the last step's loss (0 steps -> NaN).
double self_tune(model::ModelParams& params, AdamWState& opt,
                 const Tensor2& population, const Tensor2& fitness_z,
                 const std::vector<idx>& offspring_order, const Tensor2& elites_sorted,
                 const TrainConfig& cfg, const model::ForwardOptions& opts,
                 std::uint64_t mask_seed);

} // namespace okaem::training
