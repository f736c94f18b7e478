#include "okaem/archive.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <ostream>

#include "okaem/errors.hpp"
#include "okaem/textio.hpp"

namespace okaem {

namespace {

constexpr char kMagic[4] = {'O', 'K', 'A', 'R'};
constexpr std::uint16_t kVersion = 1;

constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

std::uint64_t fnv1a(const unsigned char* data, std::size_t n,
                    std::uint64_t h = kFnvOffset) {
    for (std::size_t i = 0; i < n; ++i) {
        h ^= data[i];
        h *= kFnvPrime;
    }
    return h;
}

void put_u16(std::string& out, std::uint16_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
}

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i)
        out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i)
        out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& out, double v) {
    put_u64(out, std::bit_cast<std::uint64_t>(v));
}

struct Reader {
    const unsigned char* p;
    std::size_t left;
    std::uint16_t u16() {
        need(2);
        std::uint16_t v = static_cast<std::uint16_t>(p[0] | (p[1] << 8));
        p += 2;
        left -= 2;
        return v;
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i)
            v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
        p += 4;
        left -= 4;
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i)
            v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
        p += 8;
        left -= 8;
        return v;
    }
    double f64() { return std::bit_cast<double>(u64()); }
    void need(std::size_t n) const {
        if (left < n)
            throw archive_error(archive_error::kind::truncated, "archive: truncated file");
    }
};

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw archive_error(archive_error::kind::io, "archive: cannot open " + path);
    std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return data;
}

} // namespace

void KnowledgeArchive::validate() const {
    if (entries.size() != static_cast<std::size_t>(source_tasks) * generations)
        throw usage_error("archive: entry grid is not dense K*T");
    for (const auto& e : entries) {
        if (e.population.rows() != static_cast<idx>(pop_size) ||
            e.population.cols() != static_cast<idx>(dim) ||
            e.fitness.rows() != static_cast<idx>(pop_size) || e.fitness.cols() != 1)
            throw shape_error("archive: entry shape mismatch");
        for (idx r = 0; r + 1 < e.fitness.rows(); ++r)
            if (e.fitness(r, 0) > e.fitness(r + 1, 0))
                throw usage_error("archive: entry not sorted by ascending fitness");
    }
}

void write_archive(const KnowledgeArchive& archive, const std::string& path) {
    archive.validate();
    std::string header;
    header.append(kMagic, 4);
    put_u16(header, kVersion);
    put_u32(header, archive.source_tasks);
    put_u32(header, archive.generations);
    put_u32(header, archive.pop_size);
    put_u32(header, archive.dim);
    put_u32(header, static_cast<std::uint32_t>(archive.provenance.size()));
    header += archive.provenance;

    std::string payload;
    payload.reserve(archive.entries.size() *
                    (static_cast<std::size_t>(archive.pop_size) * archive.dim +
                     archive.pop_size) * 8);
    for (const auto& e : archive.entries) {
        for (std::size_t i = 0; i < e.population.size(); ++i)
            put_f64(payload, e.population.data()[i]);
        for (std::size_t i = 0; i < e.fitness.size(); ++i)
            put_f64(payload, e.fitness.data()[i]);
    }

    std::string tail;
    put_u64(tail, fnv1a(reinterpret_cast<const unsigned char*>(payload.data()),
                        payload.size()));

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw archive_error(archive_error::kind::io, "archive: cannot write " + path);
    out << header << payload << tail;
    if (!out)
        throw archive_error(archive_error::kind::io, "archive: write failed for " + path);
}

KnowledgeArchive read_archive(const std::string& path) {
    const std::string data = slurp(path);
    Reader r{reinterpret_cast<const unsigned char*>(data.data()), data.size()};
    r.need(4);
    if (std::memcmp(r.p, kMagic, 4) != 0)
        throw archive_error(archive_error::kind::bad_magic, "archive: bad magic in " + path);
    r.p += 4;
    r.left -= 4;
    const std::uint16_t version = r.u16();
    if (version != kVersion)
        throw archive_error(archive_error::kind::version_mismatch,
                            "archive: unsupported version " + std::to_string(version));
    KnowledgeArchive a;
    a.source_tasks = r.u32();
    a.generations = r.u32();
    a.pop_size = r.u32();
    a.dim = r.u32();
    const std::uint32_t prov_len = r.u32();
    r.need(prov_len);
    a.provenance.assign(reinterpret_cast<const char*>(r.p), prov_len);
    r.p += prov_len;
    r.left -= prov_len;

    const std::size_t entry_doubles =
        static_cast<std::size_t>(a.pop_size) * a.dim + a.pop_size;
    const std::size_t n_entries = static_cast<std::size_t>(a.source_tasks) * a.generations;
    const std::size_t payload_bytes = n_entries * entry_doubles * 8;
    if (r.left != payload_bytes + 8)
        throw archive_error(archive_error::kind::truncated,
                            "archive: payload size mismatch in " + path);

    const std::uint64_t expect =
        fnv1a(r.p, payload_bytes);
    a.entries.reserve(n_entries);
    for (std::size_t e = 0; e < n_entries; ++e) {
        ArchiveEntry entry;
        entry.population = Tensor2(static_cast<idx>(a.pop_size), static_cast<idx>(a.dim));
        entry.fitness = Tensor2(static_cast<idx>(a.pop_size), 1);
        for (std::size_t i = 0; i < entry.population.size(); ++i)
            entry.population.data()[i] = r.f64();
        for (std::size_t i = 0; i < entry.fitness.size(); ++i)
            entry.fitness.data()[i] = r.f64();
        a.entries.push_back(std::move(entry));
    }
    const std::uint64_t stored = r.u64();
    if (stored != expect)
        throw archive_error(archive_error::kind::checksum_mismatch,
                            "archive: checksum mismatch in " + path);
    return a;
}

void describe_archive(const KnowledgeArchive& archive, std::ostream& out) {
    out << "okar archive: K=" << archive.source_tasks << " T=" << archive.generations
        << " N=" << archive.pop_size << " d=" << archive.dim << "\n";
    out << "provenance: " << archive.provenance << "\n";
    for (std::uint32_t k = 0; k < archive.source_tasks; ++k)
        for (std::uint32_t t = 0; t < archive.generations; ++t)
            out << "k=" << k << " t=" << t
                << " best=" << fmt_double(archive.at(k, t).fitness(0, 0)) << "\n";
}

std::vector<std::vector<PairRef>> make_pair_batches(const KnowledgeArchive& archive,
                                                    Rng& rng, std::size_t batch_size) {
    if (archive.generations < 2)
        throw usage_error("pair_iterator: archive needs T >= 2 to form pairs");
    if (batch_size < 1)
        throw param_error("pair_iterator: batch_size must be >= 1");
    std::vector<PairRef> pairs;
    pairs.reserve(static_cast<std::size_t>(archive.source_tasks) * (archive.generations - 1));
    for (std::uint32_t k = 0; k < archive.source_tasks; ++k)
        for (std::uint32_t t = 0; t + 1 < archive.generations; ++t)
            pairs.push_back({k, t});
    rng.shuffle(pairs);
    std::vector<std::vector<PairRef>> batches;
    for (std::size_t i = 0; i < pairs.size(); i += batch_size) {
        std::size_t end = std::min(i + batch_size, pairs.size());
        batches.emplace_back(pairs.begin() + static_cast<std::ptrdiff_t>(i),
                             pairs.begin() + static_cast<std::ptrdiff_t>(end));
    }
    return batches;
}

} // namespace okaem
