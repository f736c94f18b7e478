#pragma once

#include <cstddef>

namespace okaem::kernels {

// ============================================================================
// Kernel table
// ============================================================================
//
// Every arithmetic inner loop of the library goes through this table. The
// scalar entries are the reference semantics; the AVX2 entries must agree
// with them to floating-point reassociation tolerance (see test_kernels).
//
// GEMM conventions (all row-major):
//   gemm_nn: C[m x n]  = A[m x k] * B[k x n]
//   gemm_nt: C[m x n]  = A[m x k] * B[n x k]^T
//   gemm_tn: C[m x n]  = A[k x m]^T * B[k x n]
// With acc=true the product is added to C instead of overwriting it.

struct Ops {
    const char* name;
    void (*gemm_nn)(const double* a, const double* b, double* c,
                    std::size_t m, std::size_t k, std::size_t n, bool acc);
    void (*gemm_nt)(const double* a, const double* b, double* c,
                    std::size_t m, std::size_t k, std::size_t n, bool acc);
    void (*gemm_tn)(const double* a, const double* b, double* c,
                    std::size_t m, std::size_t k, std::size_t n, bool acc);
    void (*add)(const double* x, const double* y, double* z, std::size_t n);  // z = x + y
    void (*sub)(const double* x, const double* y, double* z, std::size_t n);  // z = x - y
    void (*mul)(const double* x, const double* y, double* z, std::size_t n);  // z = x .* y
    void (*axpy)(double a, const double* x, double* y, std::size_t n);        // y += a * x
    void (*scale)(double a, const double* x, double* y, std::size_t n);       // y = a * x
    double (*sum)(const double* x, std::size_t n);
    double (*dot)(const double* x, const double* y, std::size_t n);
    double (*sumsq_diff)(const double* x, const double* y, std::size_t n);    // sum (x-y)^2
};

enum class Mode { auto_detect, scalar, avx2 };

const Ops& scalar_ops();

// Null when the binary was built without AVX2 support for this target.
const Ops* avx2_ops();

// True when the AVX2+FMA path is both compiled in and supported by this CPU.
bool avx2_supported();

// Select the active table. auto_detect picks the widest supported variant.
// Honours the OKAEM_KERNELS environment variable ("scalar"/"avx2") on first
// use. Not thread-safe; call before spawning workers.
void set_mode(Mode mode);

const Ops& active();

} // namespace okaem::kernels
