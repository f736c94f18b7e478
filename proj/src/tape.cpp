#include "okaem/tape.hpp"

#include <cmath>
#include <cstring>

#include "okaem/errors.hpp"
#include "okaem/kernels.hpp"

namespace okaem {

namespace {
const kernels::Ops& K() { return kernels::active(); }
} // namespace

std::pair<Tensor2, DropoutMask> dropout_apply(const Tensor2& x, double keep_prob,
                                              KeyedStream& stream) {
    if (!(keep_prob > 0.0) || keep_prob > 1.0)
        throw param_error("dropout_apply: keep_prob must be in (0,1]");
    Tensor2 mask(x.rows(), x.cols());
    Tensor2 out(x.rows(), x.cols());
    const double inv = 1.0 / keep_prob;
    for (std::size_t i = 0; i < x.size(); ++i) {
        double m = stream.uniform() < keep_prob ? 1.0 : 0.0;
        mask.data()[i] = m;
        out.data()[i] = x.data()[i] * m * inv;
    }
    return {std::move(out), DropoutMask{std::move(mask), keep_prob}};
}

double squared_distance(const Tensor2& a, const Tensor2& b) {
    require_same_shape(a, b, "squared_distance");
    return K().sumsq_diff(a.data(), b.data(), a.size());
}

ValueId Tape::push(Node n) {
    nodes_.push_back(std::move(n));
    return static_cast<ValueId>(nodes_.size() - 1);
}

ValueId Tape::constant(Tensor2 v) {
    Node n;
    n.op = Op::constant;
    n.value = std::move(v);
    return push(std::move(n));
}

ValueId Tape::param(Tensor2 v) {
    Node n;
    n.op = Op::param;
    n.value = std::move(v);
    return push(std::move(n));
}

ValueId Tape::matmul(ValueId a, ValueId b) {
    const Tensor2& av = value(a);
    const Tensor2& bv = value(b);
    if (av.cols() != bv.rows())
        throw shape_error("matmul: inner dims " + av.shape_str() + " * " + bv.shape_str());
    Node n;
    n.op = Op::matmul;
    n.in0 = a;
    n.in1 = b;
    n.value = Tensor2(av.rows(), bv.cols());
    K().gemm_nn(av.data(), bv.data(), n.value.data(),
                static_cast<std::size_t>(av.rows()), static_cast<std::size_t>(av.cols()),
                static_cast<std::size_t>(bv.cols()), false);
    return push(std::move(n));
}

ValueId Tape::matmul_nt(ValueId a, ValueId b) {
    const Tensor2& av = value(a);
    const Tensor2& bv = value(b);
    if (av.cols() != bv.cols())
        throw shape_error("matmul_nt: inner dims " + av.shape_str() + " * " + bv.shape_str() + "^T");
    Node n;
    n.op = Op::matmul_nt;
    n.in0 = a;
    n.in1 = b;
    n.value = Tensor2(av.rows(), bv.rows());
    K().gemm_nt(av.data(), bv.data(), n.value.data(),
                static_cast<std::size_t>(av.rows()), static_cast<std::size_t>(av.cols()),
                static_cast<std::size_t>(bv.rows()), false);
    return push(std::move(n));
}

ValueId Tape::add(ValueId a, ValueId b) {
    const Tensor2& av = value(a);
    const Tensor2& bv = value(b);
    require_same_shape(av, bv, "add");
    Node n;
    n.op = Op::add;
    n.in0 = a;
    n.in1 = b;
    n.value = Tensor2(av.rows(), av.cols());
    K().add(av.data(), bv.data(), n.value.data(), av.size());
    return push(std::move(n));
}

ValueId Tape::add_rowvec(ValueId a, ValueId b) {
    const Tensor2& av = value(a);
    const Tensor2& bv = value(b);
    if (bv.rows() != 1 || bv.cols() != av.cols())
        throw shape_error("add_rowvec: bias " + bv.shape_str() + " vs " + av.shape_str());
    Node n;
    n.op = Op::add_rowvec;
    n.in0 = a;
    n.in1 = b;
    n.value = Tensor2(av.rows(), av.cols());
    for (idx r = 0; r < av.rows(); ++r)
        K().add(av.row(r), bv.data(), n.value.row(r), static_cast<std::size_t>(av.cols()));
    return push(std::move(n));
}

ValueId Tape::scale(ValueId a, double c) {
    const Tensor2& av = value(a);
    Node n;
    n.op = Op::scale_c;
    n.in0 = a;
    n.scalar = c;
    n.value = Tensor2(av.rows(), av.cols());
    K().scale(c, av.data(), n.value.data(), av.size());
    return push(std::move(n));
}

ValueId Tape::tanh_map(ValueId a) {
    const Tensor2& av = value(a);
    Node n;
    n.op = Op::tanh_map;
    n.in0 = a;
    n.value = Tensor2(av.rows(), av.cols());
    for (std::size_t i = 0; i < av.size(); ++i)
        n.value.data()[i] = std::tanh(av.data()[i]);
    return push(std::move(n));
}

ValueId Tape::row_softmax(ValueId a) {
    const Tensor2& av = value(a);
    Node n;
    n.op = Op::row_softmax;
    n.in0 = a;
    n.value = Tensor2(av.rows(), av.cols());
    const idx c = av.cols();
    for (idx r = 0; r < av.rows(); ++r) {
        const double* in = av.row(r);
        double* out = n.value.row(r);
        double mx = in[0];
        for (idx j = 1; j < c; ++j) mx = std::max(mx, in[j]);
        double s = 0.0;
        for (idx j = 0; j < c; ++j) {
            out[j] = std::exp(in[j] - mx);
            s += out[j];
        }
        double inv = 1.0 / s;
        for (idx j = 0; j < c; ++j) out[j] *= inv;
    }
    return push(std::move(n));
}

ValueId Tape::dropout(ValueId a, double keep_prob, KeyedStream& stream) {
    auto [out, mask] = dropout_apply(value(a), keep_prob, stream);
    Node n;
    n.op = Op::dropout;
    n.in0 = a;
    n.scalar = keep_prob;
    n.value = std::move(out);
    n.aux = std::move(mask.mask);
    return push(std::move(n));
}

ValueId Tape::dropout_with_mask(ValueId a, DropoutMask mask) {
    const Tensor2& av = value(a);
    require_same_shape(av, mask.mask, "dropout_with_mask");
    Node n;
    n.op = Op::dropout;
    n.in0 = a;
    n.scalar = mask.keep;
    n.value = Tensor2(av.rows(), av.cols());
    const double inv = 1.0 / mask.keep;
    for (std::size_t i = 0; i < av.size(); ++i)
        n.value.data()[i] = av.data()[i] * mask.mask.data()[i] * inv;
    n.aux = std::move(mask.mask);
    return push(std::move(n));
}

ValueId Tape::concat_cols(std::span<const ValueId> parts) {
    if (parts.empty())
        throw usage_error("concat_cols: no inputs");
    idx rows = value(parts[0]).rows();
    idx cols = 0;
    for (ValueId p : parts) {
        if (value(p).rows() != rows)
            throw shape_error("concat_cols: row mismatch");
        cols += value(p).cols();
    }
    Node n;
    n.op = Op::concat_cols;
    n.in_list.assign(parts.begin(), parts.end());
    n.value = Tensor2(rows, cols);
    idx off = 0;
    for (ValueId p : parts) {
        const Tensor2& pv = value(p);
        for (idx r = 0; r < rows; ++r)
            std::memcpy(n.value.row(r) + off, pv.row(r),
                        static_cast<std::size_t>(pv.cols()) * sizeof(double));
        off += pv.cols();
    }
    return push(std::move(n));
}

ValueId Tape::concat_rows(std::span<const ValueId> parts) {
    if (parts.empty())
        throw usage_error("concat_rows: no inputs");
    idx cols = value(parts[0]).cols();
    idx rows = 0;
    for (ValueId p : parts) {
        if (value(p).cols() != cols)
            throw shape_error("concat_rows: col mismatch");
        rows += value(p).rows();
    }
    Node n;
    n.op = Op::concat_rows;
    n.in_list.assign(parts.begin(), parts.end());
    n.value = Tensor2(rows, cols);
    idx off = 0;
    for (ValueId p : parts) {
        const Tensor2& pv = value(p);
        std::memcpy(n.value.row(off), pv.data(), pv.size() * sizeof(double));
        off += pv.rows();
    }
    return push(std::move(n));
}

ValueId Tape::slice_row(ValueId a, idx row) {
    const Tensor2& av = value(a);
    if (row < 0 || row >= av.rows())
        throw shape_error("slice_row: row out of range");
    Node n;
    n.op = Op::slice_row;
    n.in0 = a;
    n.index = row;
    n.value = Tensor2(1, av.cols());
    std::memcpy(n.value.data(), av.row(row),
                static_cast<std::size_t>(av.cols()) * sizeof(double));
    return push(std::move(n));
}

ValueId Tape::transpose(ValueId a) {
    const Tensor2& av = value(a);
    Node n;
    n.op = Op::transpose_t;
    n.in0 = a;
    n.value = Tensor2(av.cols(), av.rows());
    for (idx r = 0; r < av.rows(); ++r)
        for (idx c = 0; c < av.cols(); ++c)
            n.value(c, r) = av(r, c);
    return push(std::move(n));
}

ValueId Tape::gather_rows(ValueId a, std::vector<idx> order) {
    const Tensor2& av = value(a);
    Node n;
    n.op = Op::gather_rows;
    n.in0 = a;
    n.value = Tensor2(static_cast<idx>(order.size()), av.cols());
    for (std::size_t r = 0; r < order.size(); ++r) {
        if (order[r] < 0 || order[r] >= av.rows())
            throw shape_error("gather_rows: index out of range");
        std::memcpy(n.value.row(static_cast<idx>(r)), av.row(order[r]),
                    static_cast<std::size_t>(av.cols()) * sizeof(double));
    }
    n.order = std::move(order);
    return push(std::move(n));
}

ValueId Tape::squared_distance(ValueId a, ValueId b) {
    const Tensor2& av = value(a);
    const Tensor2& bv = value(b);
    require_same_shape(av, bv, "squared_distance");
    Node n;
    n.op = Op::sq_dist;
    n.in0 = a;
    n.in1 = b;
    n.value = Tensor2(1, 1);
    n.value(0, 0) = K().sumsq_diff(av.data(), bv.data(), av.size());
    return push(std::move(n));
}

ValueId Tape::affine(ValueId x, ValueId w, std::optional<ValueId> bias) {
    ValueId y = matmul(x, w);
    if (bias)
        y = add_rowvec(y, *bias);
    return y;
}

Tensor2& Tape::grad_buf(ValueId id) {
    Tensor2& g = grads_[static_cast<std::size_t>(id)];
    if (g.empty() && value(id).size() > 0)
        g = Tensor2(value(id).rows(), value(id).cols());
    return g;
}

Tensor2 Tape::grad(ValueId id) const {
    const Tensor2& g = grads_[static_cast<std::size_t>(id)];
    if (g.empty())
        return Tensor2(value(id).rows(), value(id).cols());
    return g;
}

void Tape::backward(ValueId loss) {
    const Tensor2& lv = value(loss);
    if (lv.rows() != 1 || lv.cols() != 1)
        throw usage_error("backward: loss node must be 1x1, got " + lv.shape_str());
    grads_.assign(nodes_.size(), Tensor2());
    grad_buf(loss)(0, 0) = 1.0;

    for (std::size_t ni = nodes_.size(); ni-- > 0;) {
        const Node& n = nodes_[ni];
        const Tensor2& g = grads_[ni];
        if (g.empty())
            continue;  // node did not contribute to the loss
        switch (n.op) {
        case Op::constant:
        case Op::param:
            break;
        case Op::matmul: {
            const Tensor2& a = value(n.in0);
            const Tensor2& b = value(n.in1);
            // dA += G * B^T ; dB += A^T * G
            K().gemm_nt(g.data(), b.data(), grad_buf(n.in0).data(),
                        static_cast<std::size_t>(g.rows()), static_cast<std::size_t>(g.cols()),
                        static_cast<std::size_t>(b.rows()), true);
            K().gemm_tn(a.data(), g.data(), grad_buf(n.in1).data(),
                        static_cast<std::size_t>(b.rows()), static_cast<std::size_t>(a.rows()),
                        static_cast<std::size_t>(g.cols()), true);
            break;
        }
        case Op::matmul_nt: {
            const Tensor2& a = value(n.in0);
            const Tensor2& b = value(n.in1);
            // Y = A B^T: dA += G * B ; dB += G^T * A
            K().gemm_nn(g.data(), b.data(), grad_buf(n.in0).data(),
                        static_cast<std::size_t>(g.rows()), static_cast<std::size_t>(g.cols()),
                        static_cast<std::size_t>(b.cols()), true);
            K().gemm_tn(g.data(), a.data(), grad_buf(n.in1).data(),
                        static_cast<std::size_t>(g.cols()), static_cast<std::size_t>(g.rows()),
                        static_cast<std::size_t>(a.cols()), true);
            break;
        }
        case Op::add:
            K().axpy(1.0, g.data(), grad_buf(n.in0).data(), g.size());
            K().axpy(1.0, g.data(), grad_buf(n.in1).data(), g.size());
            break;
        case Op::add_rowvec: {
            K().axpy(1.0, g.data(), grad_buf(n.in0).data(), g.size());
            Tensor2& gb = grad_buf(n.in1);
            for (idx r = 0; r < g.rows(); ++r)
                K().axpy(1.0, g.row(r), gb.data(), static_cast<std::size_t>(g.cols()));
            break;
        }
        case Op::scale_c:
            K().axpy(n.scalar, g.data(), grad_buf(n.in0).data(), g.size());
            break;
        case Op::tanh_map: {
            Tensor2& ga = grad_buf(n.in0);
            const double* y = n.value.data();
            for (std::size_t i = 0; i < g.size(); ++i)
                ga.data()[i] += g.data()[i] * (1.0 - y[i] * y[i]);
            break;
        }
        case Op::row_softmax: {
            Tensor2& ga = grad_buf(n.in0);
            const idx c = g.cols();
            for (idx r = 0; r < g.rows(); ++r) {
                const double* s = n.value.row(r);
                const double* gr = g.row(r);
                double d = K().dot(gr, s, static_cast<std::size_t>(c));
                double* out = ga.row(r);
                for (idx j = 0; j < c; ++j)
                    out[j] += s[j] * (gr[j] - d);
            }
            break;
        }
        case Op::dropout: {
            Tensor2& ga = grad_buf(n.in0);
            const double inv = 1.0 / n.scalar;
            const double* m = n.aux.data();
            for (std::size_t i = 0; i < g.size(); ++i)
                ga.data()[i] += g.data()[i] * m[i] * inv;
            break;
        }
        case Op::concat_cols: {
            idx off = 0;
            for (ValueId p : n.in_list) {
                Tensor2& gp = grad_buf(p);
                const idx w = gp.cols();
                for (idx r = 0; r < g.rows(); ++r)
                    K().axpy(1.0, g.row(r) + off, gp.row(r), static_cast<std::size_t>(w));
                off += w;
            }
            break;
        }
        case Op::concat_rows: {
            idx off = 0;
            for (ValueId p : n.in_list) {
                Tensor2& gp = grad_buf(p);
                K().axpy(1.0, g.row(off), gp.data(), gp.size());
                off += gp.rows();
            }
            break;
        }
        case Op::slice_row:
            K().axpy(1.0, g.data(), grad_buf(n.in0).row(n.index),
                     static_cast<std::size_t>(g.cols()));
            break;
        case Op::transpose_t: {
            Tensor2& ga = grad_buf(n.in0);
            for (idx r = 0; r < g.rows(); ++r)
                for (idx c = 0; c < g.cols(); ++c)
                    ga(c, r) += g(r, c);
            break;
        }
        case Op::gather_rows: {
            Tensor2& ga = grad_buf(n.in0);
            for (std::size_t r = 0; r < n.order.size(); ++r)
                K().axpy(1.0, g.row(static_cast<idx>(r)), ga.row(n.order[r]),
                         static_cast<std::size_t>(g.cols()));
            break;
        }
        case Op::sq_dist: {
            const Tensor2& a = value(n.in0);
            const Tensor2& b = value(n.in1);
            const double go = 2.0 * g(0, 0);
            Tensor2& ga = grad_buf(n.in0);
            Tensor2& gb = grad_buf(n.in1);
            for (std::size_t i = 0; i < a.size(); ++i) {
                double d = go * (a.data()[i] - b.data()[i]);
                ga.data()[i] += d;
                gb.data()[i] -= d;
            }
            break;
        }
        }
    }
}

double fd_check(const std::function<double()>& fn,
                std::span<Tensor2* const> params,
                std::span<const Tensor2> analytic_grads,
                double step) {
    if (params.size() != analytic_grads.size())
        throw usage_error("fd_check: params/grads count mismatch");
    double worst = 0.0;
    for (std::size_t p = 0; p < params.size(); ++p) {
        Tensor2& t = *params[p];
        const Tensor2& ga = analytic_grads[p];
        require_same_shape(t, ga, "fd_check");
        for (std::size_t i = 0; i < t.size(); ++i) {
            const double saved = t.data()[i];
            t.data()[i] = saved + step;
            const double fp = fn();
            t.data()[i] = saved - step;
            const double fm = fn();
            t.data()[i] = saved;
            const double gfd = (fp - fm) / (2.0 * step);
            const double gan = ga.data()[i];
            const double denom = std::max({1.0, std::fabs(gfd), std::fabs(gan)});
            worst = std::max(worst, std::fabs(gfd - gan) / denom);
        }
    }
    return worst;
}

} // namespace okaem
