#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "okaem/tape.hpp"
#include "okaem/tensor.hpp"

namespace okaem::model {

struct ModelConfig {
    idx d = 0;        // problem dimension
    idx d_a = 0;      // embedding dimension (divisible by heads)
    idx heads = 1;    // attention heads in selection
    idx d_m = 64;     // MLP hidden dimension
    idx layers = 1;
    double p_c = 0.95;  // crossover keep probability
    double p_m = 0.95;  // mutation keep probability

    void validate() const;
};

// All learnable tensors of one stacked layer.
struct HeadParams {
    Tensor2 w_qp, w_kp;  // d x (d_a/heads)
    Tensor2 w_qf, w_kf;  // 1 x (d_a/heads)
    Tensor2 w_v;         // d x (d_a/heads)
};

struct LayerParams {
    std::vector<HeadParams> heads;
    Tensor2 w1, b1, w2, b2;       // crossover MLP: d_a x d_m, 1 x d_m, d_m x d, 1 x d
    Tensor2 w_qm, w_km, w_vm;     // mutation attention: 1 x d_a each
    Tensor2 w3, b3, w4, b4;       // mutation MLP: d_a x d_m, 1 x d_m, d_m x 1, 1 x 1
};

struct ModelParams {
    ModelConfig cfg;
    std::vector<LayerParams> layers;
};

// Xavier-uniform weights, zero biases. The output projections (w2/b2, w4/b4)
// are scaled by output_scale; at the default 0 the model is exactly the
// identity map (residual passthrough). From-scratch adaptive runs need a
// small non-zero scale to break out of the identity fixed point.
ModelParams init_params(const ModelConfig& cfg, std::uint64_t seed,
                        double output_scale = 0.0);

// Stable traversal order used by the optimizer, serialization and the tape.
std::vector<Tensor2*> param_tensors(ModelParams& p);
std::vector<const Tensor2*> param_tensors(const ModelParams& p);

// Per-layer inspection snapshot of one forward pass.
struct LayerTrace {
    Tensor2 selection_head_avg;  // N x N, mean over heads
    Tensor2 mutation_mean;       // d x d, mean over individuals
};

struct InspectionTrace {
    std::vector<LayerTrace> layers;
    std::vector<idx> fitness_order;  // original row index per ascending-fitness rank
};

struct ForwardOptions {
    bool use_crossover = true;  // ablation: mutation_only sets this false
    bool use_mutation = true;   // ablation: crossover_only sets this false
    bool want_trace = false;
};

// A recorded forward pass: the tape plus the ids needed to train through it.
struct ForwardRun {
    Tape tape;
    ValueId output = -1;
    std::vector<ValueId> param_ids;  // aligned with param_tensors order
    InspectionTrace trace;

    const Tensor2& offspring() const { return tape.value(output); }
};

// One H-head selection pass: row-stochastic N x N matrices. fitness_z is the
// normalized fitness column (see evolution::normalize_fitness).
std::vector<Tensor2> selection_matrices(const Tensor2& population, const Tensor2& fitness_z,
                                        const LayerParams& layer);

// Selection + crossover of a single layer.
Tensor2 crossover(const Tensor2& population, const Tensor2& fitness_z,
                  const LayerParams& layer, double keep_prob, std::uint64_t mask_seed);

// Gene-attention mutation of a single layer, applied row by row.
Tensor2 mutate(const Tensor2& population, const LayerParams& layer, double keep_prob,
               std::uint64_t mask_seed);

// Full stacked operator on the tape. The population flows through the layers;
// fitness_z is reused unchanged between layers.
ForwardRun forward(const Tensor2& population, const Tensor2& fitness_z,
                   const ModelParams& params, std::uint64_t mask_seed,
                   const ForwardOptions& opts = {});

// Convenience: forward value only.
Tensor2 forward_population(const Tensor2& population, const Tensor2& fitness_z,
                           const ModelParams& params, std::uint64_t mask_seed,
                           const ForwardOptions& opts = {});

// Numeric table with its header line, ready for the text dump format.
struct MatrixRecord {
    std::string header;
    Tensor2 values;
};

// Fig-3 style export: selection matrices with rows/cols reordered by fitness
// rank (0 = best) plus the mean mutation matrix, one record per layer each.
std::vector<MatrixRecord> export_matrices(const InspectionTrace& trace, int generation);

void write_matrix_records(const std::vector<MatrixRecord>& records, std::ostream& out);

} // namespace okaem::model
