#include "okaem/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <cstring>

#include "okaem/errors.hpp"

namespace okaem::kernels {
namespace {

bool cpu_has_avx2_fma() {
#if (defined(__x86_64__) || defined(_M_X64)) && (defined(__GNUC__) || defined(__clang__))
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

std::atomic<const Ops*> g_active{nullptr};

const Ops* pick_auto() {
    if (avx2_supported())
        return avx2_ops();
    return &scalar_ops();
}

const Ops* pick_from_env() {
    const char* env = std::getenv("OKAEM_KERNELS");
    if (env != nullptr) {
        if (std::strcmp(env, "scalar") == 0)
            return &scalar_ops();
        if (std::strcmp(env, "avx2") == 0 && avx2_supported())
            return avx2_ops();
    }
    return pick_auto();
}

} // namespace

bool avx2_supported() {
    static const bool ok = avx2_ops() != nullptr && cpu_has_avx2_fma();
    return ok;
}

void set_mode(Mode mode) {
    switch (mode) {
    case Mode::auto_detect:
        g_active.store(pick_auto(), std::memory_order_relaxed);
        break;
    case Mode::scalar:
        g_active.store(&scalar_ops(), std::memory_order_relaxed);
        break;
    case Mode::avx2:
        if (!avx2_supported())
            throw param_error("kernels: avx2 requested but not supported on this CPU/build");
        g_active.store(avx2_ops(), std::memory_order_relaxed);
        break;
    }
}

const Ops& active() {
    const Ops* ops = g_active.load(std::memory_order_relaxed);
    if (ops == nullptr) {
        ops = pick_from_env();
        g_active.store(ops, std::memory_order_relaxed);
    }
    return *ops;
}

} // namespace okaem::kernels
