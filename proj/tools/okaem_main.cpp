// okaem: generate knowledge archives, pre-train the operator, run adaptive
// optimization, ablate the operator modules, and inspect learned matrices.

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

#include "okaem/archive.hpp"
#include "okaem/errors.hpp"
#include "okaem/evolution.hpp"
#include "okaem/kernels.hpp"
#include "okaem/model.hpp"
#include "okaem/params_io.hpp"
#include "okaem/problems.hpp"
#include "okaem/sourceopt.hpp"
#include "okaem/textio.hpp"
#include "okaem/training.hpp"

namespace fs = std::filesystem;
using namespace okaem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;   // bad flags, missing paths
constexpr int kExitConfig = 3;  // dimension / config mismatch
constexpr int kExitRuntime = 4; // numeric or data failure

std::uint64_t fnv1a_text(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

// ---------------------------------------------------------------------------
// shared flag bundles
// ---------------------------------------------------------------------------

struct TargetFlags {
    std::string instance_path;
    std::string suite;
    std::string family;
    std::string scenario = "intra_family";
    std::string dist = "h1m";
    idx dim = 0;
    int sources = 10;

    void attach(CLI::App* cmd, bool need_sources) {
        cmd->add_option("--instance", instance_path, "instance descriptor file");
        cmd->add_option("--suite", suite, "benchmark suite id (STOP1..STOP12)");
        cmd->add_option("--family", family,
                        "task family (sphere|ellipsoid|schwefel22|quartic_noise|"
                        "ackley|rastrigin|griewank|levy)");
        cmd->add_option("--dim", dim, "problem dimension");
        if (need_sources) {
            cmd->add_option("--scenario", scenario, "intra_family|inter_family");
            cmd->add_option("--dist", dist, "similarity distribution id");
            cmd->add_option("--sources", sources, "number of source tasks K");
        }
    }

    // Full instance (sources included); used by generate.
    problems::StopInstance resolve_instance(std::uint64_t seed) const {
        if (!instance_path.empty())
            return problems::read_instance(instance_path);
        if (!suite.empty())
            return problems::make_stop_instance(suite, seed);
        if (family.empty() || dim <= 0)
            throw usage_error("target: give --instance, --suite, or --family with --dim");
        problems::StopSpec spec{problems::family_from_name(family),
                                problems::scenario_from_name(scenario),
                                problems::dist_from_name(dist), dim, sources};
        return problems::make_stop_instance(spec, seed);
    }

    // Target problem only; --family/--dim alone builds a plain shifted task.
    problems::Problem resolve_problem(std::uint64_t seed) const {
        if (!instance_path.empty())
            return problems::read_instance(instance_path).target;
        if (!suite.empty())
            return problems::make_stop_instance(suite, seed).target;
        if (family.empty() || dim <= 0)
            throw usage_error("target: give --instance, --suite, or --family with --dim");
        return problems::make_problem(problems::family_from_name(family), dim, seed);
    }

    std::string describe() const {
        if (!instance_path.empty())
            return "instance=" + instance_path;
        if (!suite.empty())
            return "suite=" + suite;
        return "family=" + family + " dim=" + std::to_string(dim);
    }
};

struct ModelFlags {
    idx layers = 1;
    idx heads = 4;
    idx embed_dim = 0;  // 0: smallest multiple of heads >= d
    idx hidden_dim = 64;
    double p_crossover = 0.95;
    double p_mutation = 0.95;

    void attach(CLI::App* cmd) {
        cmd->add_option("--layers", layers, "stacked operator layers L");
        cmd->add_option("--heads", heads, "selection attention heads H");
        cmd->add_option("--embed-dim", embed_dim, "embedding dim d_A (0 = match d)");
        cmd->add_option("--hidden-dim", hidden_dim, "MLP hidden dim d_M");
        cmd->add_option("--p-crossover", p_crossover, "crossover keep probability p_C");
        cmd->add_option("--p-mutation", p_mutation, "mutation keep probability p_M");
    }

    model::ModelConfig resolve(idx d) const {
        model::ModelConfig cfg;
        cfg.d = d;
        cfg.heads = heads;
        cfg.d_a = embed_dim > 0 ? embed_dim : ((d + heads - 1) / heads) * heads;
        cfg.d_m = hidden_dim;
        cfg.layers = layers;
        cfg.p_c = p_crossover;
        cfg.p_m = p_mutation;
        cfg.validate();
        return cfg;
    }
};

struct TrainFlags {
    double lr = 1e-3;
    double weight_decay = -1.0;  // <0: 1e-2 with pre-trained params, 1e-5 fresh
    int selftune_steps = 1;
    int threads = 0;  // 0: hardware concurrency (capped)

    void attach(CLI::App* cmd) {
        cmd->add_option("--lr", lr, "learning rate");
        cmd->add_option("--weight-decay", weight_decay,
                        "AdamW weight decay (<0: 1e-2 pretrained, 1e-5 fresh)");
        cmd->add_option("--selftune-steps", selftune_steps, "AdamW steps per generation");
        cmd->add_option("--threads", threads, "worker threads (0 = auto)");
    }

    training::TrainConfig resolve(bool pretrained) const {
        training::TrainConfig cfg;
        cfg.lr = lr;
        cfg.weight_decay = weight_decay >= 0.0 ? weight_decay
                                               : (pretrained ? 1e-2 : 1e-5);
        cfg.selftune_steps_per_gen = selftune_steps;
        cfg.threads = threads > 0
                          ? threads
                          : std::max(1, static_cast<int>(std::min(
                                            4u, std::thread::hardware_concurrency())));
        return cfg;
    }
};

void require_parent_dir(const std::string& path) {
    const fs::path parent = fs::path(path).parent_path();
    if (!parent.empty() && !fs::exists(parent))
        throw usage_error("output directory does not exist: " + parent.string());
}

std::ofstream open_out(const std::string& path) {
    require_parent_dir(path);
    std::ofstream out(path, std::ios::trunc);
    if (!out)
        throw usage_error("cannot write " + path);
    return out;
}

void write_runlog_csv(const std::string& path, const std::string& config_line,
                      const std::vector<evolution::RunLogRow>& log) {
    std::ofstream out = open_out(path);
    out << "# config: " << config_line << "\n";
    out << "gen,best,mean,l2_loss,evals,ms\n";
    for (const auto& row : log)
        out << row.gen << ',' << fmt_double(row.best) << ',' << fmt_double(row.mean)
            << ',' << fmt_double(row.l2_loss) << ',' << row.evals << ','
            << fmt_double(row.ms) << "\n";
}

double quantile(std::vector<double> v, double q) {
    std::sort(v.begin(), v.end());
    if (v.empty())
        return 0.0;
    const double pos = q * static_cast<double>(v.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return v[lo] * (1.0 - frac) + v[hi] * frac;
}

double median(std::vector<double> v) { return quantile(std::move(v), 0.5); }

// variant plumbing shared by optimize and ablate
struct Variant {
    std::string name = "full";
    model::ForwardOptions options() const {
        model::ForwardOptions o;
        if (name == "crossover_only")
            o.use_mutation = false;
        else if (name == "mutation_only")
            o.use_crossover = false;
        else if (name != "full" && name != "no_selftune")
            throw usage_error("unknown variant '" + name + "'");
        return o;
    }
    bool selftune_enabled() const { return name != "no_selftune"; }
};

struct RunBatchResult {
    std::vector<evolution::RunResult> runs;
};

// Executes `runs` independent seeded runs across a small worker pool. The
// first exception from any run is rethrown after all workers finish.
RunBatchResult run_many(const problems::Problem& problem, const model::ModelConfig& mc,
                        training::TrainConfig tc, evolution::EvoConfig ec,
                        const model::ModelParams* pretrained, const Variant& variant,
                        int runs, int threads) {
    if (!variant.selftune_enabled())
        tc.selftune_steps_per_gen = 0;
    RunBatchResult out;
    out.runs.resize(static_cast<std::size_t>(runs));
    std::atomic<int> next{0};
    std::mutex err_mutex;
    std::exception_ptr first_error;
    auto worker = [&] {
        while (true) {
            const int r = next.fetch_add(1);
            if (r >= runs)
                return;
            try {
                evolution::EvoConfig cfg = ec;
                cfg.seed = ec.seed + static_cast<std::uint64_t>(r);
                out.runs[static_cast<std::size_t>(r)] = evolution::run(
                    problem, mc, tc, cfg, pretrained, variant.options());
            } catch (...) {
                std::lock_guard<std::mutex> lock(err_mutex);
                if (!first_error)
                    first_error = std::current_exception();
                return;
            }
        }
    };
    const int workers = std::max(1, std::min(threads, runs));
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w)
            pool.emplace_back(worker);
        for (auto& th : pool)
            th.join();
    }
    if (first_error)
        std::rethrow_exception(first_error);
    return out;
}

void write_aggregate_csv(const std::string& path, const std::string& config_line,
                         const std::vector<evolution::RunResult>& runs) {
    std::ofstream out = open_out(path);
    out << "# config: " << config_line << "\n";
    out << "gen,best_median,best_q1,best_q3,evals\n";
    if (runs.empty())
        return;
    const std::size_t gens = runs[0].log.size();
    for (std::size_t g = 0; g < gens; ++g) {
        std::vector<double> best;
        best.reserve(runs.size());
        for (const auto& r : runs)
            best.push_back(r.log[g].best);
        out << runs[0].log[g].gen << ',' << fmt_double(median(best)) << ','
            << fmt_double(quantile(best, 0.25)) << ',' << fmt_double(quantile(best, 0.75))
            << ',' << runs[0].log[g].evals << "\n";
    }
}

void write_best_record(const std::string& path, const problems::Problem& problem,
                       const evolution::RunResult& r) {
    std::ofstream out = open_out(path);
    const problems::Bounds b = problems::family_bounds(problem.family);
    out << "best_fitness=" << fmt_double(r.best_fitness) << "\n";
    out << "x_unit=";
    for (idx i = 0; i < r.best_unit.cols(); ++i)
        out << (i ? "," : "") << fmt_double(r.best_unit(0, i));
    out << "\nx_native=";
    for (idx i = 0; i < r.best_unit.cols(); ++i)
        out << (i ? "," : "")
            << fmt_double(b.lo + r.best_unit(0, i) * (b.hi - b.lo));
    out << "\n";
}

// ---------------------------------------------------------------------------
// subcommands
// ---------------------------------------------------------------------------

int cmd_generate(const TargetFlags& target, const std::string& optimizer, idx pop,
                 int gens, std::uint64_t seed, const std::string& out_path) {
    problems::StopInstance inst = target.resolve_instance(seed);
    const std::string inst_text = problems::instance_text(inst);

    KnowledgeArchive archive =
        sourceopt::generate_archive(inst, optimizer, pop, gens, mix_keys({seed, 0xACu}));
    archive.provenance = "optimizer=" + optimizer + ";seed=" + std::to_string(seed) +
                         ";instance=" + hex64(fnv1a_text(inst_text));
    require_parent_dir(out_path);
    write_archive(archive, out_path);

    std::ofstream desc = open_out(out_path + ".instance.txt");
    desc << inst_text;
    std::cout << "wrote " << out_path << " (K=" << archive.source_tasks
              << " T=" << archive.generations << " N=" << archive.pop_size
              << " d=" << archive.dim << ") and " << out_path << ".instance.txt\n";
    return kExitOk;
}

int cmd_pretrain(const std::string& archive_path, const ModelFlags& mf,
                 const TrainFlags& tf, std::size_t batch_size, int epochs,
                 std::uint64_t seed, const std::string& out_path) {
    KnowledgeArchive archive = read_archive(archive_path);
    model::ModelConfig mc = mf.resolve(static_cast<idx>(archive.dim));
    training::TrainConfig tc = tf.resolve(true);
    tc.batch_size = batch_size;
    tc.epochs = epochs;
    if (tf.weight_decay < 0.0)
        tc.weight_decay = 1e-2;

    training::PretrainResult result = training::pretrain(archive, tc, mc, seed);
    require_parent_dir(out_path);
    model::write_params(result.params, out_path);

    std::ostringstream cfgline;
    cfgline << "cmd=pretrain archive=" << archive_path << " d=" << mc.d
            << " d_a=" << mc.d_a << " heads=" << mc.heads << " d_m=" << mc.d_m
            << " layers=" << mc.layers << " p_c=" << fmt_double(mc.p_c)
            << " p_m=" << fmt_double(mc.p_m) << " lr=" << fmt_double(tc.lr)
            << " weight_decay=" << fmt_double(tc.weight_decay)
            << " batch_size=" << tc.batch_size << " epochs=" << tc.epochs
            << " seed=" << seed;
    std::ofstream loss = open_out(out_path + ".loss.csv");
    loss << "# config: " << cfgline.str() << "\n";
    loss << "epoch,l1_loss\n";
    for (std::size_t e = 0; e < result.epoch_loss.size(); ++e)
        loss << (e + 1) << ',' << fmt_double(result.epoch_loss[e]) << "\n";
    std::cout << "wrote " << out_path << " and " << out_path << ".loss.csv\n";
    return kExitOk;
}

int cmd_optimize(const TargetFlags& target, const std::string& params_path,
                 const ModelFlags& mf, const TrainFlags& tf, idx pop, int gens,
                 double init_scale, const Variant& variant, int runs,
                 std::uint64_t seed, const std::string& out_prefix) {
    problems::Problem problem = target.resolve_problem(seed);

    std::optional<model::ModelParams> pretrained;
    model::ModelConfig mc;
    if (!params_path.empty()) {
        pretrained = model::read_params(params_path);
        mc = pretrained->cfg;
        if (mc.d != problem.dim)
            throw shape_error("params d=" + std::to_string(mc.d) + " but target d=" +
                              std::to_string(problem.dim));
    } else {
        mc = mf.resolve(problem.dim);
    }
    training::TrainConfig tc = tf.resolve(pretrained.has_value());
    evolution::EvoConfig ec;
    ec.pop_size = pop;
    ec.generations = gens;
    ec.seed = seed;
    ec.fresh_output_scale = init_scale;

    std::ostringstream cfgline;
    cfgline << "cmd=optimize " << target.describe() << " params="
            << (params_path.empty() ? "none" : params_path) << " variant=" << variant.name
            << " N=" << pop << " T=" << gens << " d=" << problem.dim << " d_a=" << mc.d_a
            << " heads=" << mc.heads << " d_m=" << mc.d_m << " layers=" << mc.layers
            << " p_c=" << fmt_double(mc.p_c) << " p_m=" << fmt_double(mc.p_m)
            << " lr=" << fmt_double(tc.lr) << " weight_decay=" << fmt_double(tc.weight_decay)
            << " selftune_steps=" << tc.selftune_steps_per_gen
            << " init_scale=" << fmt_double(init_scale) << " runs=" << runs
            << " seed=" << seed;

    RunBatchResult batch = run_many(problem, mc, tc, ec,
                                    pretrained ? &*pretrained : nullptr, variant, runs,
                                    tf.resolve(false).threads);
    for (int r = 0; r < runs; ++r) {
        const std::string base = out_prefix + "_run" + std::to_string(r);
        write_runlog_csv(base + ".csv", cfgline.str(),
                         batch.runs[static_cast<std::size_t>(r)].log);
        write_best_record(base + ".best.txt", problem,
                          batch.runs[static_cast<std::size_t>(r)]);
    }
    if (runs > 1)
        write_aggregate_csv(out_prefix + "_agg.csv", cfgline.str(), batch.runs);
    std::vector<double> finals;
    for (const auto& r : batch.runs)
        finals.push_back(r.best_fitness);
    std::cout << "optimize done: median final best = " << fmt_double(median(finals))
              << " over " << runs << " run(s)\n";
    return kExitOk;
}

int cmd_ablate(const TargetFlags& target, const std::string& params_path,
               const ModelFlags& mf, const TrainFlags& tf, idx pop, int gens,
               double init_scale, const std::vector<std::string>& variants, int runs,
               std::uint64_t seed, const std::string& out_prefix) {
    problems::Problem problem = target.resolve_problem(seed);
    std::optional<model::ModelParams> pretrained;
    model::ModelConfig mc;
    if (!params_path.empty()) {
        pretrained = model::read_params(params_path);
        mc = pretrained->cfg;
        if (mc.d != problem.dim)
            throw shape_error("params d=" + std::to_string(mc.d) + " but target d=" +
                              std::to_string(problem.dim));
    } else {
        mc = mf.resolve(problem.dim);
    }
    training::TrainConfig tc = tf.resolve(pretrained.has_value());

    std::ostringstream cfgline;
    cfgline << "cmd=ablate " << target.describe() << " params="
            << (params_path.empty() ? "none" : params_path) << " N=" << pop
            << " T=" << gens << " runs=" << runs << " seed=" << seed;

    std::ofstream runs_csv = open_out(out_prefix + "_runs.csv");
    runs_csv << "# config: " << cfgline.str() << "\n";
    runs_csv << "variant,run,final_best\n";
    std::ofstream summary_csv = open_out(out_prefix + "_summary.csv");
    summary_csv << "# config: " << cfgline.str() << "\n";
    summary_csv << "variant,median,q1,q3\n";

    for (const std::string& vname : variants) {
        Variant v{vname};
        evolution::EvoConfig ec;
        ec.pop_size = pop;
        ec.generations = gens;
        ec.seed = seed;
        ec.fresh_output_scale = init_scale;
        RunBatchResult batch = run_many(problem, mc, tc, ec,
                                        pretrained ? &*pretrained : nullptr, v, runs,
                                        tf.resolve(false).threads);
        std::vector<double> finals;
        for (int r = 0; r < runs; ++r) {
            finals.push_back(batch.runs[static_cast<std::size_t>(r)].best_fitness);
            runs_csv << vname << ',' << r << ','
                     << fmt_double(finals.back()) << "\n";
        }
        summary_csv << vname << ',' << fmt_double(median(finals)) << ','
                    << fmt_double(quantile(finals, 0.25)) << ','
                    << fmt_double(quantile(finals, 0.75)) << "\n";
    }
    std::cout << "wrote " << out_prefix << "_runs.csv and " << out_prefix
              << "_summary.csv\n";
    return kExitOk;
}

int cmd_inspect(const std::string& params_path, const std::string& archive_path,
                const TargetFlags& target, const TrainFlags& tf, idx pop, int gens,
                std::uint64_t seed, const std::string& out_dir) {
    if (!archive_path.empty()) {
        describe_archive(read_archive(archive_path), std::cout);
        return kExitOk;
    }
    model::ModelParams params = model::read_params(params_path);
    problems::Problem problem = target.resolve_problem(seed);
    if (params.cfg.d != problem.dim)
        throw shape_error("params d=" + std::to_string(params.cfg.d) + " but target d=" +
                          std::to_string(problem.dim));
    if (!fs::exists(out_dir))
        throw usage_error("output directory does not exist: " + out_dir);

    training::TrainConfig tc = tf.resolve(true);
    evolution::EvoConfig ec;
    ec.pop_size = pop;
    ec.generations = gens;
    ec.seed = seed;

    evolution::TraceRequest req;
    req.generations = {1, gens};
    req.sink = [&](int gen, const model::InspectionTrace& trace) {
        auto records = model::export_matrices(trace, gen);
        for (const auto& rec : records) {
            const bool selection = rec.header.find("# selection") == 0;
            const std::string layer = rec.header.substr(rec.header.rfind('=') + 1);
            const std::string path = out_dir + "/" +
                                     (selection ? "selection" : "mutation") + "_gen" +
                                     std::to_string(gen) + "_layer" + layer + ".csv";
            std::ofstream out = open_out(path);
            model::write_matrix_records({rec}, out);
        }
    };
    evolution::run(problem, params.cfg, tc, ec, &params, {}, &req);
    std::cout << "wrote matrix dumps for generations 1 and " << gens << " to "
              << out_dir << "\n";
    return kExitOk;
}

int cmd_report(const std::vector<std::string>& inputs, const std::string& out_path) {
    if (inputs.empty())
        throw usage_error("report: no input CSVs");
    // gen -> best values across files
    std::vector<int> gens;
    std::vector<long> evals;
    std::vector<std::vector<double>> best_per_gen;
    for (std::size_t f = 0; f < inputs.size(); ++f) {
        std::ifstream in(inputs[f]);
        if (!in)
            throw usage_error("report: cannot open " + inputs[f]);
        std::string line;
        std::size_t g = 0;
        while (std::getline(in, line)) {
            std::string_view sv = trim(line);
            if (sv.empty() || sv.front() == '#' || sv.substr(0, 4) == "gen,")
                continue;
            auto cols = split(sv, ',');
            if (cols.size() < 6)
                throw usage_error("report: malformed row in " + inputs[f]);
            if (f == 0) {
                gens.push_back(static_cast<int>(parse_double(cols[0])));
                evals.push_back(static_cast<long>(parse_double(cols[4])));
                best_per_gen.emplace_back();
            }
            if (g >= best_per_gen.size())
                throw usage_error("report: inconsistent row counts across inputs");
            best_per_gen[g].push_back(parse_double(cols[1]));
            ++g;
        }
        if (g != best_per_gen.size())
            throw usage_error("report: inconsistent row counts across inputs");
    }
    std::ostringstream cfgline;
    cfgline << "cmd=report inputs=" << inputs.size();
    std::ofstream out = open_out(out_path);
    out << "# config: " << cfgline.str() << "\n";
    out << "gen,best_median,best_q1,best_q3,evals\n";
    for (std::size_t g = 0; g < gens.size(); ++g)
        out << gens[g] << ',' << fmt_double(median(best_per_gen[g])) << ','
            << fmt_double(quantile(best_per_gen[g], 0.25)) << ','
            << fmt_double(quantile(best_per_gen[g], 0.75)) << ',' << evals[g] << "\n";
    std::cout << "wrote " << out_path << "\n";
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"attention-parameterized evolutionary optimizer"};
    app.require_subcommand(1);
    app.set_config("--config", "", "flat key=value config file; flags override");

    std::uint64_t seed = 0;
    std::string kernels_mode = "auto";
    app.add_option("--seed", seed, "master RNG seed")->capture_default_str();
    app.add_option("--kernels", kernels_mode, "kernel table: auto|scalar|avx2")
        ->capture_default_str();

    // generate ---------------------------------------------------------------
    auto* gen = app.add_subcommand("generate", "run source optimizers, write an archive");
    TargetFlags gen_target;
    gen_target.attach(gen, true);
    std::string gen_optimizer = "ga";
    idx gen_pop = 20;
    int gen_gens = 250;
    std::string gen_out;
    gen->add_option("--optimizer", gen_optimizer, "source optimizer: ga|pso");
    gen->add_option("--pop", gen_pop, "source population size");
    gen->add_option("--gens", gen_gens, "source generations per task");
    gen->add_option("-o,--out", gen_out, "output .okar path")->required();

    // pretrain ---------------------------------------------------------------
    auto* pre = app.add_subcommand("pretrain", "fit the operator to an archive");
    std::string pre_archive, pre_out;
    ModelFlags pre_model;
    TrainFlags pre_train;
    std::size_t pre_batch = 256;
    int pre_epochs = 50;
    pre->add_option("--archive", pre_archive, "input .okar archive")->required();
    pre->add_option("-o,--out", pre_out, "output .okp params path")->required();
    pre->add_option("--batch-size", pre_batch, "minibatch size");
    pre->add_option("--epochs", pre_epochs, "training epochs");
    pre_model.attach(pre);
    pre_train.attach(pre);

    // optimize ---------------------------------------------------------------
    auto* opt = app.add_subcommand("optimize", "adaptive optimization on a target task");
    TargetFlags opt_target;
    opt_target.attach(opt, false);
    std::string opt_params, opt_out, opt_variant = "full";
    ModelFlags opt_model;
    TrainFlags opt_train;
    idx opt_pop = 20;
    int opt_gens = 249;
    int opt_runs = 1;
    double opt_init_scale = 0.4;
    opt->add_option("--params", opt_params, "pre-trained .okp params (optional)");
    opt->add_option("--pop", opt_pop, "population size N");
    opt->add_option("--gens", opt_gens, "generations T (budget N*(T+1))");
    opt->add_option("--runs", opt_runs, "independent seeded runs");
    opt->add_option("--variant", opt_variant,
                    "full|crossover_only|mutation_only|no_selftune");
    opt->add_option("--init-scale", opt_init_scale,
                    "output-layer init scale for fresh params");
    opt->add_option("-o,--out", opt_out, "output prefix")->required();
    opt_model.attach(opt);
    opt_train.attach(opt);

    // ablate -----------------------------------------------------------------
    auto* abl = app.add_subcommand("ablate", "compare operator-module variants");
    TargetFlags abl_target;
    abl_target.attach(abl, false);
    std::string abl_params, abl_out;
    ModelFlags abl_model;
    TrainFlags abl_train;
    idx abl_pop = 20;
    int abl_gens = 249;
    int abl_runs = 10;
    double abl_init_scale = 0.4;
    std::vector<std::string> abl_variants{"full", "crossover_only", "mutation_only",
                                          "no_selftune"};
    abl->add_option("--params", abl_params, "pre-trained .okp params (optional)");
    abl->add_option("--pop", abl_pop, "population size N");
    abl->add_option("--gens", abl_gens, "generations T");
    abl->add_option("--runs", abl_runs, "runs per variant");
    abl->add_option("--variants", abl_variants, "variants to compare");
    abl->add_option("--init-scale", abl_init_scale,
                    "output-layer init scale for fresh params");
    abl->add_option("-o,--out", abl_out, "output prefix")->required();
    abl_model.attach(abl);
    abl_train.attach(abl);

    // inspect ----------------------------------------------------------------
    auto* ins = app.add_subcommand("inspect",
                                   "dump learned matrices, or describe an archive");
    TargetFlags ins_target;
    ins_target.attach(ins, false);
    std::string ins_params, ins_archive, ins_out = ".";
    TrainFlags ins_train;
    idx ins_pop = 20;
    int ins_gens = 50;
    ins->add_option("--params", ins_params, "pre-trained .okp params");
    ins->add_option("--archive", ins_archive, "describe this .okar instead");
    ins->add_option("--pop", ins_pop, "population size N");
    ins->add_option("--gens", ins_gens, "generations T");
    ins->add_option("-o,--out", ins_out, "output directory for matrix dumps");
    ins_train.attach(ins);

    // report -----------------------------------------------------------------
    auto* rep = app.add_subcommand("report", "aggregate run logs into median/IQR");
    std::vector<std::string> rep_inputs;
    std::string rep_out;
    rep->add_option("inputs", rep_inputs, "run-log CSV files");
    rep->add_option("-o,--out", rep_out, "output summary CSV")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (kernels_mode == "scalar")
            kernels::set_mode(kernels::Mode::scalar);
        else if (kernels_mode == "avx2")
            kernels::set_mode(kernels::Mode::avx2);
        else if (kernels_mode == "auto")
            kernels::set_mode(kernels::Mode::auto_detect);
        else
            throw usage_error("unknown --kernels value '" + kernels_mode + "'");

        if (gen->parsed())
            return cmd_generate(gen_target, gen_optimizer, gen_pop, gen_gens, seed,
                                gen_out);
        if (pre->parsed())
            return cmd_pretrain(pre_archive, pre_model, pre_train, pre_batch, pre_epochs,
                                seed, pre_out);
        if (opt->parsed())
            return cmd_optimize(opt_target, opt_params, opt_model, opt_train, opt_pop,
                                opt_gens, opt_init_scale, Variant{opt_variant}, opt_runs,
                                seed, opt_out);
        if (abl->parsed())
            return cmd_ablate(abl_target, abl_params, abl_model, abl_train, abl_pop,
                              abl_gens, abl_init_scale, abl_variants, abl_runs, seed,
                              abl_out);
        if (ins->parsed())
            return cmd_inspect(ins_params, ins_archive, ins_target, ins_train, ins_pop,
                               ins_gens, seed, ins_out);
        if (rep->parsed())
            return cmd_report(rep_inputs, rep_out);
        return kExitUsage;
    } catch (const usage_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const shape_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const param_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const archive_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.what_kind == archive_error::kind::io ? kExitUsage : kExitRuntime;
    } catch (const eval_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
}
