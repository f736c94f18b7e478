#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "okaem/rng.hpp"
#include "okaem/tensor.hpp"

namespace okaem {

// Binary keep/drop mask plus its keep probability. Stored on the tape so the
// backward pass reuses the exact mask the forward pass sampled.
struct DropoutMask {
    Tensor2 mask;  // entries in {0, 1}
    double keep = 1.0;
};

// Inverted dropout: survivors are scaled by 1/keep at sample time, so the
// output is unbiased and there is no separate eval mode.
std::pair<Tensor2, DropoutMask> dropout_apply(const Tensor2& x, double keep_prob,
                                              KeyedStream& stream);

// Sum of squared entry differences (squared Frobenius distance).
double squared_distance(const Tensor2& a, const Tensor2& b);

using ValueId = std::int32_t;

// Record-and-replay reverse-mode tape for the fixed operator graph. Nodes are
// appended in evaluation order, so the tape is topologically ordered by
// construction and backward() is a single reverse sweep.
class Tape {
public:
    ValueId constant(Tensor2 v);
    ValueId param(Tensor2 v);

    ValueId matmul(ValueId a, ValueId b);     // A * B
    ValueId matmul_nt(ValueId a, ValueId b);  // A * B^T
    ValueId add(ValueId a, ValueId b);
    ValueId add_rowvec(ValueId a, ValueId b);  // broadcast 1 x n over rows of a
    ValueId scale(ValueId a, double c);
    ValueId tanh_map(ValueId a);
    ValueId row_softmax(ValueId a);
    ValueId dropout(ValueId a, double keep_prob, KeyedStream& stream);
    ValueId dropout_with_mask(ValueId a, DropoutMask mask);
    ValueId concat_cols(std::span<const ValueId> parts);
    ValueId concat_rows(std::span<const ValueId> parts);
    ValueId slice_row(ValueId a, idx row);
    ValueId transpose(ValueId a);
    ValueId gather_rows(ValueId a, std::vector<idx> order);
    ValueId squared_distance(ValueId a, ValueId b);  // 1x1 output

    // matmul plus optional broadcast bias; the workhorse of every layer.
    ValueId affine(ValueId x, ValueId w, std::optional<ValueId> bias = std::nullopt);

    const Tensor2& value(ValueId id) const { return nodes_[static_cast<std::size_t>(id)].value; }
    std::size_t node_count() const { return nodes_.size(); }

    // Reverse sweep from a scalar loss node. Fills gradients for every node
    // reachable from the loss; unreachable parameters read back as zeros.
    void backward(ValueId loss);

    // Gradient of the last backward() with respect to a node. Zero tensor of
    // the node's shape when the node did not influence the loss.
    Tensor2 grad(ValueId id) const;

private:
    enum class Op : std::uint8_t {
        constant, param, matmul, matmul_nt, add, add_rowvec, scale_c,
        tanh_map, row_softmax, dropout, concat_cols, concat_rows,
        slice_row, transpose_t, gather_rows, sq_dist,
    };

    struct Node {
        Op op;
        Tensor2 value;
        ValueId in0 = -1;
        ValueId in1 = -1;
        std::vector<ValueId> in_list;  // concat only
        double scalar = 0.0;           // scale factor or keep prob
        idx index = 0;                 // slice_row
        std::vector<idx> order;        // gather_rows
        Tensor2 aux;                   // dropout mask
    };

    ValueId push(Node n);
    Tensor2& grad_buf(ValueId id);

    std::deque<Node> nodes_;  // deque: value() references stay valid as nodes are appended
    std::vector<Tensor2> grads_;
};

// Max over coordinates of |g_fd - g_an| / max(1, |g_fd|, |g_an|), where g_fd
// is the central finite difference of fn and g_an the supplied analytic
// gradient. fn must be deterministic (freeze any dropout mask seeds).
double fd_check(const std::function<double()>& fn,
                std::span<Tensor2* const> params,
                std::span<const Tensor2> analytic_grads,
                double step);

} // namespace okaem
