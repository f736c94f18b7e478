#include "okaem/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include "okaem/errors.hpp"
#include "okaem/kernels.hpp"
#include "okaem/textio.hpp"

namespace okaem::model {

void ModelConfig::validate() const {
    if (d <= 0 || d_a <= 0 || heads <= 0 || d_m <= 0 || layers <= 0)
        throw param_error("ModelConfig: dimensions must be positive");
    if (d_a % heads != 0)
        throw param_error("ModelConfig: d_a (" + std::to_string(d_a) +
                          ") not divisible by heads (" + std::to_string(heads) + ")");
    if (!(p_c > 0.0) || p_c > 1.0 || !(p_m > 0.0) || p_m > 1.0)
        throw param_error("ModelConfig: keep probabilities must be in (0,1]");
}

namespace {

Tensor2 xavier(idx rows, idx cols, Rng& rng, double scale = 1.0) {
    const double bound = scale * std::sqrt(6.0 / static_cast<double>(rows + cols));
    Tensor2 t(rows, cols);
    for (std::size_t i = 0; i < t.size(); ++i)
        t.data()[i] = rng.uniform(-bound, bound);
    return t;
}

} // namespace

ModelParams init_params(const ModelConfig& cfg, std::uint64_t seed, double output_scale) {
    cfg.validate();
    Rng rng(seed);
    const idx hd = cfg.d_a / cfg.heads;
    ModelParams p;
    p.cfg = cfg;
    p.layers.resize(static_cast<std::size_t>(cfg.layers));
    for (auto& layer : p.layers) {
        layer.heads.resize(static_cast<std::size_t>(cfg.heads));
        for (auto& h : layer.heads) {
            h.w_qp = xavier(cfg.d, hd, rng);
            h.w_kp = xavier(cfg.d, hd, rng);
            h.w_qf = xavier(1, hd, rng);
            h.w_kf = xavier(1, hd, rng);
            h.w_v = xavier(cfg.d, hd, rng);
        }
        layer.w1 = xavier(cfg.d_a, cfg.d_m, rng);
        layer.b1 = Tensor2(1, cfg.d_m);
        layer.w2 = output_scale == 0.0 ? Tensor2(cfg.d_m, cfg.d)
                                       : xavier(cfg.d_m, cfg.d, rng, output_scale);
        layer.b2 = Tensor2(1, cfg.d);
        layer.w_qm = xavier(1, cfg.d_a, rng);
        layer.w_km = xavier(1, cfg.d_a, rng);
        layer.w_vm = xavier(1, cfg.d_a, rng);
        layer.w3 = xavier(cfg.d_a, cfg.d_m, rng);
        layer.b3 = Tensor2(1, cfg.d_m);
        layer.w4 = output_scale == 0.0 ? Tensor2(cfg.d_m, 1)
                                       : xavier(cfg.d_m, 1, rng, output_scale);
        layer.b4 = Tensor2(1, 1);
    }
    return p;
}

namespace {

template <typename Params, typename Ptr>
std::vector<Ptr> collect(Params& p) {
    std::vector<Ptr> out;
    for (auto& layer : p.layers) {
        for (auto& h : layer.heads) {
            out.push_back(&h.w_qp);
            out.push_back(&h.w_kp);
            out.push_back(&h.w_qf);
            out.push_back(&h.w_kf);
            out.push_back(&h.w_v);
        }
        out.push_back(&layer.w1);
        out.push_back(&layer.b1);
        out.push_back(&layer.w2);
        out.push_back(&layer.b2);
        out.push_back(&layer.w_qm);
        out.push_back(&layer.w_km);
        out.push_back(&layer.w_vm);
        out.push_back(&layer.w3);
        out.push_back(&layer.b3);
        out.push_back(&layer.w4);
        out.push_back(&layer.b4);
    }
    return out;
}

} // namespace

std::vector<Tensor2*> param_tensors(ModelParams& p) {
    return collect<ModelParams, Tensor2*>(p);
}

std::vector<const Tensor2*> param_tensors(const ModelParams& p) {
    return collect<const ModelParams, const Tensor2*>(p);
}

namespace {

struct LayerIds {
    struct Head {
        ValueId qp, kp, qf, kf, v;
    };
    std::vector<Head> heads;
    ValueId w1, b1, w2, b2, wqm, wkm, wvm, w3, b3, w4, b4;
};

// Registers one layer's tensors on the tape in the canonical param order.
LayerIds register_layer(Tape& t, const LayerParams& lp, bool as_params,
                        std::vector<ValueId>* collect_ids) {
    auto reg = [&](const Tensor2& v) {
        ValueId id = as_params ? t.param(v) : t.constant(v);
        if (collect_ids)
            collect_ids->push_back(id);
        return id;
    };
    LayerIds ids;
    for (const auto& h : lp.heads)
        ids.heads.push_back({reg(h.w_qp), reg(h.w_kp), reg(h.w_qf), reg(h.w_kf), reg(h.w_v)});
    ids.w1 = reg(lp.w1);
    ids.b1 = reg(lp.b1);
    ids.w2 = reg(lp.w2);
    ids.b2 = reg(lp.b2);
    ids.wqm = reg(lp.w_qm);
    ids.wkm = reg(lp.w_km);
    ids.wvm = reg(lp.w_vm);
    ids.w3 = reg(lp.w3);
    ids.b3 = reg(lp.b3);
    ids.w4 = reg(lp.w4);
    ids.b4 = reg(lp.b4);
    return ids;
}

// Binary keep mask whose rows are independent keyed streams, so a row's mask
// depends only on (seed, layer, slot, row) and not on anything evaluated
// before it.
DropoutMask keyed_mask(idx rows, idx cols, double keep, std::uint64_t base) {
    Tensor2 m(rows, cols);
    for (idx r = 0; r < rows; ++r) {
        KeyedStream s(mix_keys({base, static_cast<std::uint64_t>(r)}));
        for (idx c = 0; c < cols; ++c)
            m(r, c) = s.uniform() < keep ? 1.0 : 0.0;
    }
    return DropoutMask{std::move(m), keep};
}

// Attention scores for one head.
ValueId head_selection(Tape& t, ValueId p, ValueId f, const LayerIds::Head& h, idx head_dim) {
    ValueId q = t.matmul(p, h.qp);
    ValueId k = t.matmul(p, h.kp);
    ValueId qf = t.matmul(f, h.qf);
    ValueId kf = t.matmul(f, h.kf);
    ValueId scores = t.add(t.matmul_nt(q, k), t.matmul_nt(qf, kf));
    scores = t.scale(scores, 1.0 / std::sqrt(static_cast<double>(head_dim)));
    return t.row_softmax(scores);
}

struct TraceSink {
    Tensor2* selection = nullptr;  // accumulated, divided by H afterwards
    Tensor2* mutation = nullptr;   // accumulated, divided by N afterwards
};

ValueId build_crossover(Tape& t, ValueId p, ValueId f, const LayerIds& ids,
                        const LayerParams& lp, double keep, std::uint64_t mask_base,
                        TraceSink sink) {
    const idx head_dim = lp.heads[0].w_qp.cols();
    std::vector<ValueId> head_outs;
    head_outs.reserve(ids.heads.size());
    for (const auto& h : ids.heads) {
        ValueId a = head_selection(t, p, f, h, head_dim);
        if (sink.selection) {
            const Tensor2& av = t.value(a);
            kernels::active().axpy(1.0, av.data(), sink.selection->data(), av.size());
        }
        head_outs.push_back(t.matmul(t.matmul(a, p), h.v));
    }
    ValueId oc = head_outs.size() == 1 ? head_outs[0]
                                       : t.concat_cols(std::span<const ValueId>(head_outs));
    ValueId hidden = t.tanh_map(t.affine(oc, ids.w1, ids.b1));
    if (keep < 1.0) {
        const Tensor2& hv = t.value(hidden);
        hidden = t.dropout_with_mask(hidden, keyed_mask(hv.rows(), hv.cols(), keep,
                                                        mix_keys({mask_base, 0})));
    }
    ValueId mlp = t.affine(hidden, ids.w2, ids.b2);
    return t.add(p, mlp);
}

// Mutation of one individual; prow is its 1 x d slice.
ValueId mutate_row(Tape& t, ValueId prow, const LayerIds& ids, const LayerParams& lp,
                   double keep, std::uint64_t mask_base, idx row, TraceSink sink) {
    const idx d_a = lp.w_qm.cols();
    ValueId pcol = t.transpose(prow);  // d x 1
    ValueId q = t.matmul(pcol, ids.wqm);
    ValueId k = t.matmul(pcol, ids.wkm);
    ValueId scores = t.scale(t.matmul_nt(q, k), 1.0 / std::sqrt(static_cast<double>(d_a)));
    ValueId m = t.row_softmax(scores);  // d x d
    if (sink.mutation) {
        const Tensor2& mv = t.value(m);
        kernels::active().axpy(1.0, mv.data(), sink.mutation->data(), mv.size());
    }
    ValueId om = t.matmul(t.matmul(m, pcol), ids.wvm);  // d x d_a
    ValueId hidden = t.tanh_map(t.affine(om, ids.w3, ids.b3));
    if (keep < 1.0) {
        const Tensor2& hv = t.value(hidden);
        KeyedStream s(mix_keys({mask_base, 1, static_cast<std::uint64_t>(row)}));
        Tensor2 maskv(hv.rows(), hv.cols());
        for (std::size_t i = 0; i < maskv.size(); ++i)
            maskv.data()[i] = s.uniform() < keep ? 1.0 : 0.0;
        hidden = t.dropout_with_mask(hidden, DropoutMask{std::move(maskv), keep});
    }
    ValueId out = t.affine(hidden, ids.w4, ids.b4);  // d x 1
    return t.transpose(t.add(pcol, out));            // back to 1 x d
}

ValueId build_mutation(Tape& t, ValueId p, const LayerIds& ids, const LayerParams& lp,
                       double keep, std::uint64_t mask_base, TraceSink sink) {
    const idx n = t.value(p).rows();
    std::vector<ValueId> rows;
    rows.reserve(static_cast<std::size_t>(n));
    for (idx i = 0; i < n; ++i)
        rows.push_back(mutate_row(t, t.slice_row(p, i), ids, lp, keep, mask_base, i, sink));
    return t.concat_rows(std::span<const ValueId>(rows));
}

void check_forward_inputs(const Tensor2& population, const Tensor2& fitness_z) {
    if (population.rows() < 1)
        throw shape_error("forward: empty population");
    if (fitness_z.rows() != population.rows() || fitness_z.cols() != 1)
        throw shape_error("forward: fitness must be " + std::to_string(population.rows()) +
                          "x1, got " + fitness_z.shape_str());
}

std::vector<idx> ascending_order(const Tensor2& fitness) {
    std::vector<idx> order(static_cast<std::size_t>(fitness.rows()));
    std::iota(order.begin(), order.end(), idx{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](idx a, idx b) { return fitness(a, 0) < fitness(b, 0); });
    return order;
}

} // namespace

std::vector<Tensor2> selection_matrices(const Tensor2& population, const Tensor2& fitness_z,
                                        const LayerParams& layer) {
    check_forward_inputs(population, fitness_z);
    Tape t;
    ValueId p = t.constant(population);
    ValueId f = t.constant(fitness_z);
    LayerIds ids = register_layer(t, layer, false, nullptr);
    const idx head_dim = layer.heads[0].w_qp.cols();
    std::vector<Tensor2> out;
    out.reserve(ids.heads.size());
    for (const auto& h : ids.heads)
        out.push_back(t.value(head_selection(t, p, f, h, head_dim)));
    return out;
}

Tensor2 crossover(const Tensor2& population, const Tensor2& fitness_z,
                  const LayerParams& layer, double keep_prob, std::uint64_t mask_seed) {
    check_forward_inputs(population, fitness_z);
    Tape t;
    ValueId p = t.constant(population);
    ValueId f = t.constant(fitness_z);
    LayerIds ids = register_layer(t, layer, false, nullptr);
    ValueId out = build_crossover(t, p, f, ids, layer, keep_prob,
                                  mix_keys({mask_seed, 0}), {});
    return t.value(out);
}

Tensor2 mutate(const Tensor2& population, const LayerParams& layer, double keep_prob,
               std::uint64_t mask_seed) {
    Tape t;
    ValueId p = t.constant(population);
    LayerIds ids = register_layer(t, layer, false, nullptr);
    ValueId out = build_mutation(t, p, ids, layer, keep_prob, mix_keys({mask_seed, 0}), {});
    return t.value(out);
}

ForwardRun forward(const Tensor2& population, const Tensor2& fitness_z,
                   const ModelParams& params, std::uint64_t mask_seed,
                   const ForwardOptions& opts) {
    params.cfg.validate();
    check_forward_inputs(population, fitness_z);
    if (population.cols() != params.cfg.d)
        throw shape_error("forward: population dim " + std::to_string(population.cols()) +
                          " != model d " + std::to_string(params.cfg.d));
    if (static_cast<idx>(params.layers.size()) != params.cfg.layers)
        throw shape_error("forward: layer count mismatch");

    ForwardRun run;
    Tape& t = run.tape;
    ValueId cur = t.constant(population);
    ValueId f = t.constant(fitness_z);

    std::vector<LayerIds> layer_ids;
    layer_ids.reserve(params.layers.size());
    for (const auto& lp : params.layers)
        layer_ids.push_back(register_layer(t, lp, true, &run.param_ids));

    const idx n = population.rows();
    const idx d = population.cols();
    if (opts.want_trace) {
        run.trace.layers.resize(params.layers.size());
        run.trace.fitness_order = ascending_order(fitness_z);
    }

    for (std::size_t li = 0; li < params.layers.size(); ++li) {
        const LayerParams& lp = params.layers[li];
        const std::uint64_t mask_base =
            mix_keys({mask_seed, static_cast<std::uint64_t>(li)});
        TraceSink sink;
        if (opts.want_trace) {
            if (opts.use_crossover) {
                run.trace.layers[li].selection_head_avg = Tensor2(n, n);
                sink.selection = &run.trace.layers[li].selection_head_avg;
            }
            if (opts.use_mutation) {
                run.trace.layers[li].mutation_mean = Tensor2(d, d);
                sink.mutation = &run.trace.layers[li].mutation_mean;
            }
        }
        if (opts.use_crossover)
            cur = build_crossover(t, cur, f, layer_ids[li], lp, params.cfg.p_c,
                                  mask_base, sink);
        if (opts.use_mutation)
            cur = build_mutation(t, cur, layer_ids[li], lp, params.cfg.p_m,
                                 mask_base, sink);
        if (opts.want_trace) {
            auto& lt = run.trace.layers[li];
            if (opts.use_crossover) {
                const double inv_h = 1.0 / static_cast<double>(params.cfg.heads);
                kernels::active().scale(inv_h, lt.selection_head_avg.data(),
                                        lt.selection_head_avg.data(),
                                        lt.selection_head_avg.size());
            }
            if (opts.use_mutation) {
                const double inv_n = 1.0 / static_cast<double>(n);
                kernels::active().scale(inv_n, lt.mutation_mean.data(),
                                        lt.mutation_mean.data(), lt.mutation_mean.size());
            }
        }
    }
    run.output = cur;
    return run;
}

Tensor2 forward_population(const Tensor2& population, const Tensor2& fitness_z,
                           const ModelParams& params, std::uint64_t mask_seed,
                           const ForwardOptions& opts) {
    return forward(population, fitness_z, params, mask_seed, opts).offspring();
}

std::vector<MatrixRecord> export_matrices(const InspectionTrace& trace, int generation) {
    std::vector<MatrixRecord> out;
    for (std::size_t li = 0; li < trace.layers.size(); ++li) {
        const LayerTrace& lt = trace.layers[li];
        if (!lt.selection_head_avg.empty()) {
            const auto& order = trace.fitness_order;
            const idx n = lt.selection_head_avg.rows();
            Tensor2 reordered(n, n);
            for (idx r = 0; r < n; ++r)
                for (idx c = 0; c < n; ++c)
                    reordered(r, c) = lt.selection_head_avg(order[static_cast<std::size_t>(r)],
                                                            order[static_cast<std::size_t>(c)]);
            out.push_back({"# selection N=" + std::to_string(n) +
                               " gen=" + std::to_string(generation) +
                               " layer=" + std::to_string(li + 1),
                           std::move(reordered)});
        }
        if (!lt.mutation_mean.empty())
            out.push_back({"# mutation d=" + std::to_string(lt.mutation_mean.rows()) +
                               " gen=" + std::to_string(generation) +
                               " layer=" + std::to_string(li + 1),
                           lt.mutation_mean});
    }
    return out;
}

void write_matrix_records(const std::vector<MatrixRecord>& records, std::ostream& out) {
    for (const auto& rec : records) {
        out << rec.header << "\n";
        for (idx r = 0; r < rec.values.rows(); ++r) {
            for (idx c = 0; c < rec.values.cols(); ++c) {
                if (c > 0)
                    out << ',';
                out << fmt_double(rec.values(r, c));
            }
            out << "\n";
        }
    }
}

} // namespace okaem::model
