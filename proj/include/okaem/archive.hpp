#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "okaem/rng.hpp"
#include "okaem/tensor.hpp"

namespace okaem {

// One recorded source-task generation: the post-elitism population sorted by
// ascending fitness, plus its fitness column.
struct ArchiveEntry {
    Tensor2 population;  // N x d, coordinates in [0,1]
    Tensor2 fitness;     // N x 1
};

// The prior-knowledge set: a dense K x T grid of (population, fitness)
// records collected from source-task runs.
struct KnowledgeArchive {
    std::uint32_t source_tasks = 0;  // K
    std::uint32_t generations = 0;   // T
    std::uint32_t pop_size = 0;      // N
    std::uint32_t dim = 0;           // d
    std::string provenance;          // optimizer id, seed, instance hash
    std::vector<ArchiveEntry> entries;  // k-major, t-minor; size K*T

    const ArchiveEntry& at(std::uint32_t k, std::uint32_t t) const {
        return entries[static_cast<std::size_t>(k) * generations + t];
    }
    ArchiveEntry& at(std::uint32_t k, std::uint32_t t) {
        return entries[static_cast<std::size_t>(k) * generations + t];
    }

    void validate() const;
};

// ----------------------------------------------------------------------------
// .okar file format (all integers little-endian):
//   magic "OKAR" | u16 version | u32 K,T,N,d | u32 prov_len | prov bytes |
//   payload: K*T entries of N*d population f64 then N fitness f64 |
//   u64 FNV-1a checksum of the payload bytes.
// The grid is dense, so every offset is computable from the header.
// ----------------------------------------------------------------------------

void write_archive(const KnowledgeArchive& archive, const std::string& path);
KnowledgeArchive read_archive(const std::string& path);

// Human-readable dump: header plus per-(k,t) best fitness.
void describe_archive(const KnowledgeArchive& archive, std::ostream& out);

// Consecutive-generation training pair (P_k^t, F_k^t) -> P_k^{t+1}.
struct PairRef {
    std::uint32_t k;
    std::uint32_t t;  // the earlier generation of the pair
};

// All K*(T-1) pairs exactly once, shuffled, grouped into batches of at most
// batch_size. Requires T >= 2.
std::vector<std::vector<PairRef>> make_pair_batches(const KnowledgeArchive& archive,
                                                    Rng& rng, std::size_t batch_size);

} // namespace okaem
