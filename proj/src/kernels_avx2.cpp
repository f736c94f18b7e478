#include "okaem/kernels.hpp"

// AVX2+FMA variants of the kernel table. This translation unit is compiled
// with -mavx2 -mfma on x86-64; the dispatcher only hands these out after a
// runtime CPU check. Reductions use multiple accumulators, so their rounding
// differs from the scalar reference by reassociation only.

#if defined(__x86_64__) || defined(_M_X64)

#include <cstring>
#include <immintrin.h>

namespace okaem::kernels {
namespace {

inline double hsum(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d swapped = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, swapped));
}

void gemm_nn_avx2(const double* a, const double* b, double* c,
                  std::size_t m, std::size_t k, std::size_t n, bool acc) {
    if (!acc)
        std::memset(c, 0, m * n * sizeof(double));
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        double* crow = c + i * n;
        for (std::size_t l = 0; l < k; ++l) {
            __m256d av = _mm256_set1_pd(arow[l]);
            const double* brow = b + l * n;
            std::size_t j = 0;
            for (; j + 8 <= n; j += 8) {
                __m256d c0 = _mm256_loadu_pd(crow + j);
                __m256d c1 = _mm256_loadu_pd(crow + j + 4);
                c0 = _mm256_fmadd_pd(av, _mm256_loadu_pd(brow + j), c0);
                c1 = _mm256_fmadd_pd(av, _mm256_loadu_pd(brow + j + 4), c1);
                _mm256_storeu_pd(crow + j, c0);
                _mm256_storeu_pd(crow + j + 4, c1);
            }
            for (; j + 4 <= n; j += 4) {
                __m256d c0 = _mm256_loadu_pd(crow + j);
                c0 = _mm256_fmadd_pd(av, _mm256_loadu_pd(brow + j), c0);
                _mm256_storeu_pd(crow + j, c0);
            }
            double avs = arow[l];
            for (; j < n; ++j)
                crow[j] += avs * brow[j];
        }
    }
}

void gemm_nt_avx2(const double* a, const double* b, double* c,
                  std::size_t m, std::size_t k, std::size_t n, bool acc) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        double* crow = c + i * n;
        for (std::size_t j = 0; j < n; ++j) {
            const double* brow = b + j * k;
            __m256d s0 = _mm256_setzero_pd();
            __m256d s1 = _mm256_setzero_pd();
            std::size_t l = 0;
            for (; l + 8 <= k; l += 8) {
                s0 = _mm256_fmadd_pd(_mm256_loadu_pd(arow + l),
                                     _mm256_loadu_pd(brow + l), s0);
                s1 = _mm256_fmadd_pd(_mm256_loadu_pd(arow + l + 4),
                                     _mm256_loadu_pd(brow + l + 4), s1);
            }
            for (; l + 4 <= k; l += 4)
                s0 = _mm256_fmadd_pd(_mm256_loadu_pd(arow + l),
                                     _mm256_loadu_pd(brow + l), s0);
            double s = hsum(_mm256_add_pd(s0, s1));
            for (; l < k; ++l)
                s += arow[l] * brow[l];
            crow[j] = acc ? crow[j] + s : s;
        }
    }
}

void gemm_tn_avx2(const double* a, const double* b, double* c,
                  std::size_t m, std::size_t k, std::size_t n, bool acc) {
    if (!acc)
        std::memset(c, 0, m * n * sizeof(double));
    for (std::size_t l = 0; l < k; ++l) {
        const double* arow = a + l * m;
        const double* brow = b + l * n;
        for (std::size_t i = 0; i < m; ++i) {
            __m256d av = _mm256_set1_pd(arow[i]);
            double* crow = c + i * n;
            std::size_t j = 0;
            for (; j + 4 <= n; j += 4) {
                __m256d c0 = _mm256_loadu_pd(crow + j);
                c0 = _mm256_fmadd_pd(av, _mm256_loadu_pd(brow + j), c0);
                _mm256_storeu_pd(crow + j, c0);
            }
            double avs = arow[i];
            for (; j < n; ++j)
                crow[j] += avs * brow[j];
        }
    }
}

void add_avx2(const double* x, const double* y, double* z, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(z + i, _mm256_add_pd(_mm256_loadu_pd(x + i),
                                              _mm256_loadu_pd(y + i)));
    for (; i < n; ++i) z[i] = x[i] + y[i];
}

void sub_avx2(const double* x, const double* y, double* z, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(z + i, _mm256_sub_pd(_mm256_loadu_pd(x + i),
                                              _mm256_loadu_pd(y + i)));
    for (; i < n; ++i) z[i] = x[i] - y[i];
}

void mul_avx2(const double* x, const double* y, double* z, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(z + i, _mm256_mul_pd(_mm256_loadu_pd(x + i),
                                              _mm256_loadu_pd(y + i)));
    for (; i < n; ++i) z[i] = x[i] * y[i];
}

void axpy_avx2(double a, const double* x, double* y, std::size_t n) {
    __m256d av = _mm256_set1_pd(a);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d yv = _mm256_loadu_pd(y + i);
        _mm256_storeu_pd(y + i, _mm256_fmadd_pd(av, _mm256_loadu_pd(x + i), yv));
    }
    for (; i < n; ++i) y[i] += a * x[i];
}

void scale_avx2(double a, const double* x, double* y, std::size_t n) {
    __m256d av = _mm256_set1_pd(a);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(y + i, _mm256_mul_pd(av, _mm256_loadu_pd(x + i)));
    for (; i < n; ++i) y[i] = a * x[i];
}

double sum_avx2(const double* x, std::size_t n) {
    __m256d s0 = _mm256_setzero_pd();
    __m256d s1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        s0 = _mm256_add_pd(s0, _mm256_loadu_pd(x + i));
        s1 = _mm256_add_pd(s1, _mm256_loadu_pd(x + i + 4));
    }
    for (; i + 4 <= n; i += 4)
        s0 = _mm256_add_pd(s0, _mm256_loadu_pd(x + i));
    double s = hsum(_mm256_add_pd(s0, s1));
    for (; i < n; ++i) s += x[i];
    return s;
}

double dot_avx2(const double* x, const double* y, std::size_t n) {
    __m256d s0 = _mm256_setzero_pd();
    __m256d s1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        s0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), s0);
        s1 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4), s1);
    }
    for (; i + 4 <= n; i += 4)
        s0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), s0);
    double s = hsum(_mm256_add_pd(s0, s1));
    for (; i < n; ++i) s += x[i] * y[i];
    return s;
}

double sumsq_diff_avx2(const double* x, const double* y, std::size_t n) {
    __m256d s0 = _mm256_setzero_pd();
    __m256d s1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        __m256d d0 = _mm256_sub_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i));
        __m256d d1 = _mm256_sub_pd(_mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4));
        s0 = _mm256_fmadd_pd(d0, d0, s0);
        s1 = _mm256_fmadd_pd(d1, d1, s1);
    }
    for (; i + 4 <= n; i += 4) {
        __m256d d0 = _mm256_sub_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i));
        s0 = _mm256_fmadd_pd(d0, d0, s0);
    }
    double s = hsum(_mm256_add_pd(s0, s1));
    for (; i < n; ++i) {
        double d = x[i] - y[i];
        s += d * d;
    }
    return s;
}

} // namespace

const Ops* avx2_ops() {
    static const Ops ops = {
        "avx2",
        gemm_nn_avx2, gemm_nt_avx2, gemm_tn_avx2,
        add_avx2, sub_avx2, mul_avx2,
        axpy_avx2, scale_avx2,
        sum_avx2, dot_avx2, sumsq_diff_avx2,
    };
    return &ops;
}

} // namespace okaem::kernels

#else // non-x86 targets fall back to the scalar table

namespace okaem::kernels {
const Ops* avx2_ops() { return nullptr; }
} // namespace okaem::kernels

#endif
