#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "okaem/rng.hpp"
#include "okaem/tensor.hpp"

namespace okaem::problems {

enum class Family {
    sphere,
    ellipsoid,
    schwefel22,
    quartic_noise,
    ackley,
    rastrigin,
    griewank,
    levy,
};

const char* family_name(Family f);
Family family_from_name(const std::string& name);

// Native box bounds of a family (symmetric, same for every coordinate).
struct Bounds {
    double lo;
    double hi;
};
Bounds family_bounds(Family f);

// A shifted benchmark task. The optimum is stored in native coordinates;
// callers work in the common space [0,1]^d and evaluate() maps affinely.
struct Problem {
    Family family = Family::sphere;
    idx dim = 0;
    Tensor2 optimum;  // 1 x d, native coordinates, inside the native bounds
    bool noisy() const { return family == Family::quartic_noise; }

    void validate() const;
    // Optimum expressed in the common space [0,1]^d.
    Tensor2 optimum_unit() const;
};

// Random problem with optimum uniform in the native bounds.
Problem make_problem(Family family, idx dim, std::uint64_t seed);

// Evaluate rows of X (in [0,1]^d) on the problem; rng feeds the noisy family.
Tensor2 evaluate(const Problem& problem, const Tensor2& x_unit, Rng& rng);

enum class Scenario { intra_family, inter_family };
const char* scenario_name(Scenario s);
Scenario scenario_from_name(const std::string& name);

// Similarity densities over s in [0,1].
enum class SimilarityDist { h1h, h2h, h1m, h2m, h3m, h4m, h1l, h2l };
const char* dist_name(SimilarityDist d);
SimilarityDist dist_from_name(const std::string& name);

// Inverse-CDF draw from the named density.
double sample_similarity(SimilarityDist dist, Rng& rng);

// Source optimum in the common space: convex interpolation between the
// target optimum and an independent uniform point, with exact endpoints at
// s=0 and s=1.
Tensor2 source_optimum_unit(double similarity, const Tensor2& target_unit,
                            const Tensor2& random_unit);

struct SourceTask {
    Problem problem;
    double similarity = 0.0;
};

// A target task plus K source tasks with controlled similarity.
struct StopInstance {
    std::string suite;  // "STOP1".."STOP12", empty for custom instances
    Scenario scenario = Scenario::intra_family;
    SimilarityDist dist = SimilarityDist::h1m;
    std::uint64_t seed = 0;
    Problem target;
    std::vector<SourceTask> sources;

    void validate() const;
};

struct StopSpec {
    Family family;
    Scenario scenario;
    SimilarityDist dist;
    idx dim;
    int sources;
};

// The Problem Configuration tuple of a benchmark suite entry.
StopSpec suite_spec(const std::string& suite_id);  // "STOP1".."STOP12"

StopInstance make_stop_instance(const StopSpec& spec, std::uint64_t seed,
                                const std::string& suite_id = "");
StopInstance make_stop_instance(const std::string& suite_id, std::uint64_t seed);

// Text key-value descriptor so instances are reproducible and portable.
void write_instance(const StopInstance& inst, const std::string& path);
StopInstance read_instance(const std::string& path);
std::string instance_text(const StopInstance& inst);

} // namespace okaem::problems
