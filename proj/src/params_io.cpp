#include "okaem/params_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "okaem/errors.hpp"

namespace okaem::model {

namespace {

constexpr char kMagic[4] = {'O', 'K', 'A', 'P'};
constexpr std::uint16_t kVersion = 1;

std::uint64_t fnv1a(const unsigned char* data, std::size_t n) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (std::size_t i = 0; i < n; ++i) {
        h ^= data[i];
        h *= 0x100000001b3ULL;
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

} // namespace

void write_params(const ModelParams& params, const std::string& path) {
    params.cfg.validate();
    std::string header;
    header.append(kMagic, 4);
    put_u16(header, kVersion);
    put_u32(header, static_cast<std::uint32_t>(params.cfg.d));
    put_u32(header, static_cast<std::uint32_t>(params.cfg.d_a));
    put_u32(header, static_cast<std::uint32_t>(params.cfg.heads));
    put_u32(header, static_cast<std::uint32_t>(params.cfg.d_m));
    put_u32(header, static_cast<std::uint32_t>(params.cfg.layers));
    put_u64(header, std::bit_cast<std::uint64_t>(params.cfg.p_c));
    put_u64(header, std::bit_cast<std::uint64_t>(params.cfg.p_m));

    std::string payload;
    for (const Tensor2* t : param_tensors(params))
        for (std::size_t i = 0; i < t->size(); ++i)
            put_u64(payload, std::bit_cast<std::uint64_t>(t->data()[i]));

    std::string tail;
    put_u64(tail, fnv1a(reinterpret_cast<const unsigned char*>(payload.data()),
                        payload.size()));

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw archive_error(archive_error::kind::io, "params: cannot write " + path);
    out << header << payload << tail;
    if (!out)
        throw archive_error(archive_error::kind::io, "params: write failed for " + path);
}

ModelParams read_params(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw archive_error(archive_error::kind::io, "params: cannot open " + path);
    std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    const unsigned char* p = reinterpret_cast<const unsigned char*>(data.data());
    std::size_t left = data.size();
    auto need = [&](std::size_t n) {
        if (left < n)
            throw archive_error(archive_error::kind::truncated, "params: truncated " + path);
    };
    auto u16 = [&]() {
        need(2);
        std::uint16_t v = static_cast<std::uint16_t>(p[0] | (p[1] << 8));
        p += 2;
        left -= 2;
        return v;
    };
    auto u32 = [&]() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i)
            v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
        p += 4;
        left -= 4;
        return v;
    };
    auto u64 = [&]() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i)
            v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
        p += 8;
        left -= 8;
        return v;
    };

    need(4);
    if (std::memcmp(p, kMagic, 4) != 0)
        throw archive_error(archive_error::kind::bad_magic, "params: bad magic in " + path);
    p += 4;
    left -= 4;
    const std::uint16_t version = u16();
    if (version != kVersion)
        throw archive_error(archive_error::kind::version_mismatch,
                            "params: unsupported version " + std::to_string(version));

    ModelConfig cfg;
    cfg.d = static_cast<idx>(u32());
    cfg.d_a = static_cast<idx>(u32());
    cfg.heads = static_cast<idx>(u32());
    cfg.d_m = static_cast<idx>(u32());
    cfg.layers = static_cast<idx>(u32());
    cfg.p_c = std::bit_cast<double>(u64());
    cfg.p_m = std::bit_cast<double>(u64());
    cfg.validate();

    // Shape skeleton, then fill tensors in canonical order.
    ModelParams params = init_params(cfg, 0);
    auto tensors = param_tensors(params);
    std::size_t payload_doubles = 0;
    for (const Tensor2* t : tensors)
        payload_doubles += t->size();
    if (left != payload_doubles * 8 + 8)
        throw archive_error(archive_error::kind::truncated,
                            "params: payload size mismatch in " + path);
    const std::uint64_t expect = fnv1a(p, payload_doubles * 8);
    for (Tensor2* t : tensors)
        for (std::size_t i = 0; i < t->size(); ++i)
            t->data()[i] = std::bit_cast<double>(u64());
    if (u64() != expect)
        throw archive_error(archive_error::kind::checksum_mismatch,
                            "params: checksum mismatch in " + path);
    return params;
}

} // namespace okaem::model
