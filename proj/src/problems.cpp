#include "okaem/problems.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>

#include "okaem/errors.hpp"
#include "okaem/textio.hpp"

namespace okaem::problems {

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;
} // namespace

const char* family_name(Family f) {
    switch (f) {
    case Family::sphere: return "sphere";
    case Family::ellipsoid: return "ellipsoid";
    case Family::schwefel22: return "schwefel22";
    case Family::quartic_noise: return "quartic_noise";
    case Family::ackley: return "ackley";
    case Family::rastrigin: return "rastrigin";
    case Family::griewank: return "griewank";
    case Family::levy: return "levy";
    }
    return "?";
}

Family family_from_name(const std::string& name) {
    static const std::map<std::string, Family> table = {
        {"sphere", Family::sphere},       {"ellipsoid", Family::ellipsoid},
        {"schwefel22", Family::schwefel22}, {"quartic_noise", Family::quartic_noise},
        {"ackley", Family::ackley},       {"rastrigin", Family::rastrigin},
        {"griewank", Family::griewank},   {"levy", Family::levy},
    };
    auto it = table.find(name);
    if (it == table.end())
        throw param_error("unknown task family '" + name + "'");
    return it->second;
}

Bounds family_bounds(Family f) {
    switch (f) {
    case Family::sphere: return {-100.0, 100.0};
    case Family::ellipsoid: return {-50.0, 50.0};
    case Family::schwefel22: return {-30.0, 30.0};
    case Family::quartic_noise: return {-5.0, 5.0};
    case Family::ackley: return {-32.0, 32.0};
    case Family::rastrigin: return {-10.0, 10.0};
    case Family::griewank: return {-200.0, 200.0};
    case Family::levy: return {-20.0, 20.0};
    }
    return {0.0, 0.0};
}

void Problem::validate() const {
    if (dim < 1)
        throw param_error("Problem: dim must be >= 1");
    if (optimum.rows() != 1 || optimum.cols() != dim)
        throw shape_error("Problem: optimum must be 1x" + std::to_string(dim));
    const Bounds b = family_bounds(family);
    for (idx i = 0; i < dim; ++i)
        if (optimum(0, i) < b.lo || optimum(0, i) > b.hi)
            throw param_error("Problem: optimum outside native bounds");
}

Tensor2 Problem::optimum_unit() const {
    const Bounds b = family_bounds(family);
    Tensor2 u(1, dim);
    for (idx i = 0; i < dim; ++i)
        u(0, i) = (optimum(0, i) - b.lo) / (b.hi - b.lo);
    return u;
}

Problem make_problem(Family family, idx dim, std::uint64_t seed) {
    if (dim < 1)
        throw param_error("make_problem: dim must be >= 1");
    Rng rng(mix_keys({seed, 0x70b1u, static_cast<std::uint64_t>(family)}));
    const Bounds b = family_bounds(family);
    Problem p;
    p.family = family;
    p.dim = dim;
    p.optimum = Tensor2(1, dim);
    for (idx i = 0; i < dim; ++i)
        p.optimum(0, i) = rng.uniform(b.lo, b.hi);
    return p;
}

namespace {

double eval_row(Family family, const double* z, idx d, Rng& rng) {
    switch (family) {
    case Family::sphere: {
        double s = 0.0;
        for (idx i = 0; i < d; ++i) s += z[i] * z[i];
        return s;
    }
    case Family::ellipsoid: {
        double s = 0.0;
        for (idx i = 0; i < d; ++i)
            s += static_cast<double>(d - i) * z[i] * z[i];
        return s;
    }
    case Family::schwefel22: {
        double s = 0.0, p = 1.0;
        for (idx i = 0; i < d; ++i) {
            const double a = std::fabs(z[i]);
            s += a;
            p *= a;
        }
        return s + p;
    }
    case Family::quartic_noise: {
        double s = rng.uniform();
        for (idx i = 0; i < d; ++i) {
            const double q = z[i] * z[i];
            s += static_cast<double>(i + 1) * q * q;
        }
        return s;
    }
    case Family::ackley: {
        double sq = 0.0, co = 0.0;
        for (idx i = 0; i < d; ++i) {
            sq += z[i] * z[i];
            co += std::cos(kTwoPi * z[i]);
        }
        const double inv_d = 1.0 / static_cast<double>(d);
        return -20.0 * std::exp(-0.2 * std::sqrt(sq * inv_d)) - std::exp(co * inv_d) +
               20.0 + std::numbers::e;
    }
    case Family::rastrigin: {
        double s = 0.0;
        for (idx i = 0; i < d; ++i)
            s += z[i] * z[i] - 10.0 * std::cos(kTwoPi * z[i]);
        return s + 10.0 * static_cast<double>(d);
    }
    case Family::griewank: {
        double s = 0.0, p = 1.0;
        for (idx i = 0; i < d; ++i) {
            s += z[i] * z[i];
            p *= std::cos(z[i] / std::sqrt(static_cast<double>(i + 1)));
        }
        return 1.0 + s / 4000.0 - p;
    }
    case Family::levy: {
        auto w = [&](idx i) { return 1.0 + z[i] / 4.0; };
        const double w0 = w(0);
        double s = std::sin(std::numbers::pi * w0) * std::sin(std::numbers::pi * w0);
        for (idx i = 0; i + 1 < d; ++i) {
            const double wi = w(i);
            const double sp = std::sin(std::numbers::pi * wi + 1.0);
            s += (wi - 1.0) * (wi - 1.0) * (1.0 + 10.0 * sp * sp);
        }
        const double wd = w(d - 1);
        const double st = std::sin(kTwoPi * wd);
        s += (wd - 1.0) * (wd - 1.0) * (1.0 + st * st);
        return s;
    }
    }
    return 0.0;
}

} // namespace

Tensor2 evaluate(const Problem& problem, const Tensor2& x_unit, Rng& rng) {
    problem.validate();
    if (x_unit.cols() != problem.dim)
        throw shape_error("evaluate: X dim " + std::to_string(x_unit.cols()) +
                          " != problem dim " + std::to_string(problem.dim));
    const Bounds b = family_bounds(problem.family);
    const double range = b.hi - b.lo;
    Tensor2 f(x_unit.rows(), 1);
    std::vector<double> z(static_cast<std::size_t>(problem.dim));
    for (idx r = 0; r < x_unit.rows(); ++r) {
        const double* xr = x_unit.row(r);
        for (idx i = 0; i < problem.dim; ++i) {
            const double u = xr[i];
            if (u < -1e-12 || u > 1.0 + 1e-12)
                throw param_error("evaluate: coordinate outside [0,1] at row " +
                                  std::to_string(r));
            z[static_cast<std::size_t>(i)] = b.lo + u * range - problem.optimum(0, i);
        }
        const double v = eval_row(problem.family, z.data(), problem.dim, rng);
        if (!std::isfinite(v))
            throw eval_error("evaluate: non-finite objective at row " + std::to_string(r));
        f(r, 0) = v;
    }
    return f;
}

const char* scenario_name(Scenario s) {
    return s == Scenario::intra_family ? "intra_family" : "inter_family";
}

Scenario scenario_from_name(const std::string& name) {
    if (name == "intra_family") return Scenario::intra_family;
    if (name == "inter_family") return Scenario::inter_family;
    throw param_error("unknown transfer scenario '" + name + "'");
}

const char* dist_name(SimilarityDist d) {
    switch (d) {
    case SimilarityDist::h1h: return "h1h";
    case SimilarityDist::h2h: return "h2h";
    case SimilarityDist::h1m: return "h1m";
    case SimilarityDist::h2m: return "h2m";
    case SimilarityDist::h3m: return "h3m";
    case SimilarityDist::h4m: return "h4m";
    case SimilarityDist::h1l: return "h1l";
    case SimilarityDist::h2l: return "h2l";
    }
    return "?";
}

SimilarityDist dist_from_name(const std::string& name) {
    static const std::map<std::string, SimilarityDist> table = {
        {"h1h", SimilarityDist::h1h}, {"h2h", SimilarityDist::h2h},
        {"h1m", SimilarityDist::h1m}, {"h2m", SimilarityDist::h2m},
        {"h3m", SimilarityDist::h3m}, {"h4m", SimilarityDist::h4m},
        {"h1l", SimilarityDist::h1l}, {"h2l", SimilarityDist::h2l},
    };
    auto it = table.find(name);
    if (it == table.end())
        throw param_error("unknown similarity distribution '" + name + "'");
    return it->second;
}

double sample_similarity(SimilarityDist dist, Rng& rng) {
    switch (dist) {
    case SimilarityDist::h1h:
        return 1.0;
    case SimilarityDist::h1l:
        return 0.0;
    case SimilarityDist::h1m:
        return rng.uniform();
    case SimilarityDist::h2m:
        return std::sqrt(rng.uniform());
    case SimilarityDist::h3m:
        return 1.0 - std::sqrt(1.0 - rng.uniform());
    case SimilarityDist::h4m: {
        const double u = rng.uniform();
        return u <= 0.5 ? std::sqrt(u / 2.0) : 1.0 - std::sqrt((1.0 - u) / 2.0);
    }
    case SimilarityDist::h2h:
        // ReLU(8s-4) integrates to 1 on [1/2, 1]; CDF is (2s-1)^2.
        return 0.5 + 0.5 * std::sqrt(rng.uniform());
    case SimilarityDist::h2l:
        return 0.5 - 0.5 * std::sqrt(rng.uniform());
    }
    throw param_error("sample_similarity: bad distribution id");
}

Tensor2 source_optimum_unit(double similarity, const Tensor2& target_unit,
                            const Tensor2& random_unit) {
    require_same_shape(target_unit, random_unit, "source_optimum_unit");
    Tensor2 out(1, target_unit.cols());
    for (idx i = 0; i < target_unit.cols(); ++i)
        out(0, i) = similarity * target_unit(0, i) + (1.0 - similarity) * random_unit(0, i);
    return out;
}

void StopInstance::validate() const {
    target.validate();
    if (sources.empty())
        throw param_error("StopInstance: needs at least one source task");
    if (target.dim < 25 || target.dim > 50)
        throw param_error("StopInstance: dimension must be in [25, 50]");
    for (const auto& s : sources) {
        s.problem.validate();
        if (s.problem.dim != target.dim)
            throw shape_error("StopInstance: source dim mismatch");
        if (s.similarity < 0.0 || s.similarity > 1.0)
            throw param_error("StopInstance: similarity outside [0,1]");
        if (scenario == Scenario::intra_family && s.problem.family != target.family)
            throw param_error("StopInstance: intra-family source of a different family");
    }
}

StopSpec suite_spec(const std::string& suite_id) {
    static const std::map<std::string, StopSpec> table = {
        {"STOP1", {Family::sphere, Scenario::intra_family, SimilarityDist::h1h, 50, 10}},
        {"STOP2", {Family::ellipsoid, Scenario::inter_family, SimilarityDist::h2h, 25, 10}},
        {"STOP3", {Family::schwefel22, Scenario::intra_family, SimilarityDist::h2h, 30, 10}},
        {"STOP4", {Family::quartic_noise, Scenario::inter_family, SimilarityDist::h1h, 50, 10}},
        {"STOP5", {Family::ackley, Scenario::intra_family, SimilarityDist::h1m, 25, 10}},
        {"STOP6", {Family::rastrigin, Scenario::inter_family, SimilarityDist::h2m, 50, 10}},
        {"STOP7", {Family::griewank, Scenario::intra_family, SimilarityDist::h3m, 25, 10}},
        {"STOP8", {Family::levy, Scenario::inter_family, SimilarityDist::h4m, 30, 10}},
        {"STOP9", {Family::sphere, Scenario::intra_family, SimilarityDist::h1l, 25, 10}},
        {"STOP10", {Family::rastrigin, Scenario::inter_family, SimilarityDist::h2l, 30, 10}},
        {"STOP11", {Family::ackley, Scenario::intra_family, SimilarityDist::h2l, 50, 10}},
        {"STOP12", {Family::ellipsoid, Scenario::inter_family, SimilarityDist::h1l, 50, 10}},
    };
    auto it = table.find(suite_id);
    if (it == table.end())
        throw param_error("unknown suite id '" + suite_id + "'");
    return it->second;
}

StopInstance make_stop_instance(const StopSpec& spec, std::uint64_t seed,
                                const std::string& suite_id) {
    if (spec.dim < 25 || spec.dim > 50)
        throw param_error("make_stop_instance: dimension must be in [25, 50]");
    if (spec.sources < 1)
        throw param_error("make_stop_instance: needs K >= 1 source tasks");

    Rng rng(mix_keys({seed, 0x5709u}));
    StopInstance inst;
    inst.suite = suite_id;
    inst.scenario = spec.scenario;
    inst.dist = spec.dist;
    inst.seed = seed;

    inst.target.family = spec.family;
    inst.target.dim = spec.dim;
    const Bounds tb = family_bounds(spec.family);
    inst.target.optimum = Tensor2(1, spec.dim);
    for (idx i = 0; i < spec.dim; ++i)
        inst.target.optimum(0, i) = rng.uniform(tb.lo, tb.hi);
    const Tensor2 target_unit = inst.target.optimum_unit();

    for (int k = 0; k < spec.sources; ++k) {
        SourceTask src;
        if (spec.scenario == Scenario::intra_family) {
            src.problem.family = spec.family;
        } else {
            // Uniform over the other seven families.
            int pick = static_cast<int>(rng.uniform_index(7));
            int fam = pick >= static_cast<int>(spec.family) ? pick + 1 : pick;
            src.problem.family = static_cast<Family>(fam);
        }
        src.similarity = sample_similarity(spec.dist, rng);
        Tensor2 u(1, spec.dim);
        for (idx i = 0; i < spec.dim; ++i)
            u(0, i) = rng.uniform();
        const Tensor2 unit = source_optimum_unit(src.similarity, target_unit, u);
        const Bounds sb = family_bounds(src.problem.family);
        src.problem.dim = spec.dim;
        src.problem.optimum = Tensor2(1, spec.dim);
        for (idx i = 0; i < spec.dim; ++i)
            src.problem.optimum(0, i) = sb.lo + unit(0, i) * (sb.hi - sb.lo);
        inst.sources.push_back(std::move(src));
    }
    inst.validate();
    return inst;
}

StopInstance make_stop_instance(const std::string& suite_id, std::uint64_t seed) {
    return make_stop_instance(suite_spec(suite_id), seed, suite_id);
}

namespace {

std::string vector_csv(const Tensor2& row) {
    std::string out;
    for (idx i = 0; i < row.cols(); ++i) {
        if (i > 0)
            out += ',';
        out += fmt_double(row(0, i));
    }
    return out;
}

Tensor2 parse_vector(std::string_view text, idx dim) {
    auto parts = split(text, ',');
    if (static_cast<idx>(parts.size()) != dim)
        throw param_error("instance: optimum vector length mismatch");
    Tensor2 out(1, dim);
    for (idx i = 0; i < dim; ++i)
        out(0, i) = parse_double(trim(parts[static_cast<std::size_t>(i)]));
    return out;
}

} // namespace

std::string instance_text(const StopInstance& inst) {
    std::ostringstream out;
    out << "# okaem stop instance\n";
    if (!inst.suite.empty())
        out << "suite=" << inst.suite << "\n";
    out << "family=" << family_name(inst.target.family) << "\n";
    out << "scenario=" << scenario_name(inst.scenario) << "\n";
    out << "dist=" << dist_name(inst.dist) << "\n";
    out << "d=" << inst.target.dim << "\n";
    out << "K=" << inst.sources.size() << "\n";
    out << "seed=" << inst.seed << "\n";
    out << "target_optimum=" << vector_csv(inst.target.optimum) << "\n";
    for (std::size_t k = 0; k < inst.sources.size(); ++k) {
        const auto& s = inst.sources[k];
        out << "source" << k << "_family=" << family_name(s.problem.family) << "\n";
        out << "source" << k << "_similarity=" << fmt_double(s.similarity) << "\n";
        out << "source" << k << "_optimum=" << vector_csv(s.problem.optimum) << "\n";
    }
    return out.str();
}

void write_instance(const StopInstance& inst, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out)
        throw usage_error("instance: cannot write " + path);
    out << instance_text(inst);
}

StopInstance read_instance(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw usage_error("instance: cannot open " + path);
    std::map<std::string, std::string> kv;
    std::string line;
    while (std::getline(in, line)) {
        std::string_view sv = trim(line);
        if (sv.empty() || sv.front() == '#')
            continue;
        auto pos = sv.find('=');
        if (pos == std::string_view::npos)
            throw usage_error("instance: bad line '" + line + "'");
        kv[std::string(trim(sv.substr(0, pos)))] = std::string(trim(sv.substr(pos + 1)));
    }
    auto need = [&](const std::string& key) -> const std::string& {
        auto it = kv.find(key);
        if (it == kv.end())
            throw usage_error("instance: missing key '" + key + "'");
        return it->second;
    };

    StopInstance inst;
    if (auto it = kv.find("suite"); it != kv.end())
        inst.suite = it->second;
    inst.scenario = scenario_from_name(need("scenario"));
    inst.dist = dist_from_name(need("dist"));
    inst.seed = static_cast<std::uint64_t>(std::stoull(need("seed")));
    const idx dim = static_cast<idx>(std::stoll(need("d")));
    const std::size_t k_count = static_cast<std::size_t>(std::stoull(need("K")));
    inst.target.family = family_from_name(need("family"));
    inst.target.dim = dim;
    inst.target.optimum = parse_vector(need("target_optimum"), dim);
    for (std::size_t k = 0; k < k_count; ++k) {
        const std::string prefix = "source" + std::to_string(k) + "_";
        SourceTask s;
        s.problem.family = family_from_name(need(prefix + "family"));
        s.problem.dim = dim;
        s.similarity = parse_double(need(prefix + "similarity"));
        s.problem.optimum = parse_vector(need(prefix + "optimum"), dim);
        inst.sources.push_back(std::move(s));
    }
    inst.validate();
    return inst;
}

} // namespace okaem::problems
