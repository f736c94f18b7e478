#pragma once

#include <stdexcept>
#include <string>

namespace okaem {

// Dimension mismatch between tensors or between a tensor and a config.
struct shape_error : std::runtime_error {
    explicit shape_error(const std::string& what) : std::runtime_error(what) {}
};

// Invalid configuration value (non-positive sizes, probabilities out of range, ...).
struct param_error : std::runtime_error {
    explicit param_error(const std::string& what) : std::runtime_error(what) {}
};

// API misuse: a precondition the caller is responsible for was violated.
struct usage_error : std::runtime_error {
    explicit usage_error(const std::string& what) : std::runtime_error(what) {}
};

// Objective evaluation produced a non-finite value or failed mid-run.
struct eval_error : std::runtime_error {
    explicit eval_error(const std::string& what) : std::runtime_error(what) {}
};

// Archive / params file problems. The kind distinguishes the failure modes
// so callers (and tests) can tell a stale version from a corrupt payload.
struct archive_error : std::runtime_error {
    enum class kind { bad_magic, version_mismatch, truncated, checksum_mismatch, io };
    kind what_kind;
    archive_error(kind k, const std::string& what) : std::runtime_error(what), what_kind(k) {}
};

} // namespace okaem
