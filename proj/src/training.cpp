#include "okaem/training.hpp"

#include <cmath>
#include <limits>
#include <thread>

#include "okaem/errors.hpp"
#include "okaem/evolution.hpp"
#include "okaem/kernels.hpp"

namespace okaem::training {

void TrainConfig::validate() const {
    if (!(lr > 0.0))
        throw param_error("TrainConfig: lr must be positive");
    if (weight_decay < 0.0)
        throw param_error("TrainConfig: weight_decay must be >= 0");
    if (batch_size < 1)
        throw param_error("TrainConfig: batch_size must be >= 1");
    if (epochs < 0)
        throw param_error("TrainConfig: epochs must be >= 0");
    if (selftune_steps_per_gen < 0)
        throw param_error("TrainConfig: selftune_steps_per_gen must be >= 0");
    if (threads < 1)
        throw param_error("TrainConfig: threads must be >= 1");
}

void adamw_step(AdamWState& state, std::vector<Tensor2*>& params,
                const std::vector<Tensor2>& grads) {
    if (grads.size() != params.size())
        throw usage_error("adamw_step: gradient table misaligned with params");
    if (state.m.empty()) {
        state.m.reserve(params.size());
        state.v.reserve(params.size());
        for (const Tensor2* p : params) {
            state.m.emplace_back(p->rows(), p->cols());
            state.v.emplace_back(p->rows(), p->cols());
        }
    }
    if (state.m.size() != params.size())
        throw usage_error("adamw_step: optimizer state does not match params");
    ++state.step;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    for (std::size_t p = 0; p < params.size(); ++p) {
        Tensor2& theta = *params[p];
        const Tensor2& g = grads[p];
        require_same_shape(theta, g, "adamw_step");
        double* m = state.m[p].data();
        double* v = state.v[p].data();
        for (std::size_t i = 0; i < theta.size(); ++i) {
            const double gi = g.data()[i];
            m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * gi;
            v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * gi * gi;
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            theta.data()[i] -= state.lr * (mhat / (std::sqrt(vhat) + state.eps) +
                                           state.weight_decay * theta.data()[i]);
        }
    }
}

namespace {

// Forward + loss for one archive pair; gradients accumulate into acc.
double pair_loss_and_grads(const model::ModelParams& params, const PretrainSample& s,
                           std::uint64_t mask_seed, std::vector<Tensor2>* acc) {
    Tensor2 fz = evolution::normalize_fitness(*s.fitness);
    model::ForwardRun run = model::forward(*s.population, fz, params, mask_seed);
    ValueId target = run.tape.constant(*s.next);
    ValueId loss = run.tape.squared_distance(target, run.output);
    const double value = run.tape.value(loss)(0, 0);
    if (acc) {
        run.tape.backward(loss);
        for (std::size_t p = 0; p < run.param_ids.size(); ++p) {
            Tensor2 g = run.tape.grad(run.param_ids[p]);
            kernels::active().axpy(1.0, g.data(), (*acc)[p].data(), g.size());
        }
    }
    return value;
}

void check_sample_shapes(const model::ModelConfig& cfg, const PretrainSample& s) {
    if (s.population->cols() != cfg.d)
        throw shape_error("pretrain: archive dim " + std::to_string(s.population->cols()) +
                          " != model d " + std::to_string(cfg.d));
    require_same_shape(*s.population, *s.next, "pretrain: pair");
    if (s.fitness->rows() != s.population->rows() || s.fitness->cols() != 1)
        throw shape_error("pretrain: fitness shape");
}

std::vector<Tensor2> zero_like(const std::vector<const Tensor2*>& params) {
    std::vector<Tensor2> out;
    out.reserve(params.size());
    for (const Tensor2* p : params)
        out.emplace_back(p->rows(), p->cols());
    return out;
}

} // namespace

double pretrain_loss(const model::ModelParams& params,
                     const std::vector<PretrainSample>& batch, std::uint64_t mask_seed) {
    double total = 0.0;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        check_sample_shapes(params.cfg, batch[i]);
        total += pair_loss_and_grads(params, batch[i],
                                     mix_keys({mask_seed, static_cast<std::uint64_t>(i)}),
                                     nullptr);
    }
    return total;
}

double selftune_loss(model::ForwardRun& run, const std::vector<idx>& offspring_order,
                     const Tensor2& elites_sorted) {
    const Tensor2& out = run.offspring();
    if (static_cast<idx>(offspring_order.size()) != out.rows())
        throw shape_error("selftune_loss: order length != offspring rows");
    require_same_shape(out, elites_sorted, "selftune_loss");
    ValueId sorted = run.tape.gather_rows(run.output, offspring_order);
    ValueId target = run.tape.constant(elites_sorted);
    ValueId loss = run.tape.squared_distance(target, sorted);
    run.tape.backward(loss);
    return run.tape.value(loss)(0, 0);
}

PretrainResult pretrain(const KnowledgeArchive& archive, const TrainConfig& cfg,
                        const model::ModelConfig& model_cfg, std::uint64_t seed) {
    cfg.validate();
    model_cfg.validate();
    archive.validate();
    if (archive.entries.empty())
        throw usage_error("pretrain: empty archive");
    if (static_cast<idx>(archive.dim) != model_cfg.d)
        throw shape_error("pretrain: archive d=" + std::to_string(archive.dim) +
                          " != model d=" + std::to_string(model_cfg.d));
    if (archive.generations < 2)
        throw usage_error("pretrain: archive has T=1, no consecutive pairs to train on");

    PretrainResult result;
    result.params = model::init_params(model_cfg, mix_keys({seed, 0x1717}));
    std::vector<Tensor2*> theta = model::param_tensors(result.params);
    std::vector<const Tensor2*> theta_c = model::param_tensors(
        const_cast<const model::ModelParams&>(result.params));

    AdamWState opt;
    opt.lr = cfg.lr;
    opt.weight_decay = cfg.weight_decay;

    Rng shuffle_rng(mix_keys({seed, 0x5u}));
    const int n_threads = std::max(1, cfg.threads);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        auto batches = make_pair_batches(archive, shuffle_rng, cfg.batch_size);
        double epoch_total = 0.0;
        for (std::size_t b = 0; b < batches.size(); ++b) {
            const auto& batch = batches[b];
            std::vector<PretrainSample> samples;
            samples.reserve(batch.size());
            for (const PairRef& pr : batch) {
                const ArchiveEntry& cur = archive.at(pr.k, pr.t);
                const ArchiveEntry& nxt = archive.at(pr.k, pr.t + 1);
                samples.push_back({&cur.population, &cur.fitness, &nxt.population});
                check_sample_shapes(model_cfg, samples.back());
            }
            const std::uint64_t batch_key =
                mix_keys({seed, 0xbeefu, static_cast<std::uint64_t>(epoch),
                          static_cast<std::uint64_t>(b)});

            // Per-pair work is independent; slices are merged in slice order
            // so the reduction is deterministic.
            const std::size_t per =
                (samples.size() + static_cast<std::size_t>(n_threads) - 1) /
                static_cast<std::size_t>(n_threads);
            std::vector<std::vector<Tensor2>> slice_grads;
            std::vector<double> slice_loss(static_cast<std::size_t>(n_threads), 0.0);
            std::vector<std::exception_ptr> slice_error(
                static_cast<std::size_t>(n_threads));
            for (int w = 0; w < n_threads; ++w)
                slice_grads.push_back(zero_like(theta_c));
            auto worker = [&](int w) {
                try {
                    const std::size_t lo = static_cast<std::size_t>(w) * per;
                    const std::size_t hi = std::min(samples.size(), lo + per);
                    for (std::size_t i = lo; i < hi; ++i)
                        slice_loss[static_cast<std::size_t>(w)] += pair_loss_and_grads(
                            result.params, samples[i],
                            mix_keys({batch_key, static_cast<std::uint64_t>(i)}),
                            &slice_grads[static_cast<std::size_t>(w)]);
                } catch (...) {
                    slice_error[static_cast<std::size_t>(w)] = std::current_exception();
                }
            };
            if (n_threads == 1) {
                worker(0);
            } else {
                std::vector<std::thread> pool;
                for (int w = 0; w < n_threads; ++w)
                    pool.emplace_back(worker, w);
                for (auto& th : pool)
                    th.join();
            }
            for (const auto& err : slice_error)
                if (err)
                    std::rethrow_exception(err);
            std::vector<Tensor2> grads = std::move(slice_grads[0]);
            for (int w = 1; w < n_threads; ++w)
                for (std::size_t p = 0; p < grads.size(); ++p)
                    kernels::active().axpy(1.0, slice_grads[static_cast<std::size_t>(w)][p].data(),
                                           grads[p].data(), grads[p].size());
            for (double l : slice_loss)
                epoch_total += l;
            adamw_step(opt, theta, grads);
        }
        result.epoch_loss.push_back(epoch_total);
    }
    return result;
}

double self_tune(model::ModelParams& params, AdamWState& opt,
                 const Tensor2& population, const Tensor2& fitness_z,
                 const std::vector<idx>& offspring_order, const Tensor2& elites_sorted,
                 const TrainConfig& cfg, const model::ForwardOptions& opts,
                 std::uint64_t mask_seed) {
    double last = std::numeric_limits<double>::quiet_NaN();
    std::vector<Tensor2*> theta = model::param_tensors(params);
    for (int s = 0; s < cfg.selftune_steps_per_gen; ++s) {
        model::ForwardRun run = model::forward(
            population, fitness_z, params,
            mix_keys({mask_seed, static_cast<std::uint64_t>(s)}), opts);
        last = selftune_loss(run, offspring_order, elites_sorted);
        std::vector<Tensor2> grads;
        grads.reserve(run.param_ids.size());
        for (ValueId id : run.param_ids)
            grads.push_back(run.tape.grad(id));
        adamw_step(opt, theta, grads);
    }
    return last;
}

} // namespace okaem::training
