#include "okaem/kernels.hpp"

#include <cstring>

// Reference kernels. Plain loops, no tricks: these define the semantics the
// vectorized variants are tested against.

namespace okaem::kernels {
namespace {

void gemm_nn_scalar(const double* a, const double* b, double* c,
                    std::size_t m, std::size_t k, std::size_t n, bool acc) {
    if (!acc)
        std::memset(c, 0, m * n * sizeof(double));
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        double* crow = c + i * n;
        for (std::size_t l = 0; l < k; ++l) {
            double av = arow[l];
            const double* brow = b + l * n;
            for (std::size_t j = 0; j < n; ++j)
                crow[j] += av * brow[j];
        }
    }
}

void gemm_nt_scalar(const double* a, const double* b, double* c,
                    std::size_t m, std::size_t k, std::size_t n, bool acc) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        double* crow = c + i * n;
        for (std::size_t j = 0; j < n; ++j) {
            const double* brow = b + j * k;
            double s = 0.0;
            for (std::size_t l = 0; l < k; ++l)
                s += arow[l] * brow[l];
            crow[j] = acc ? crow[j] + s : s;
        }
    }
}

void gemm_tn_scalar(const double* a, const double* b, double* c,
                    std::size_t m, std::size_t k, std::size_t n, bool acc) {
    if (!acc)
        std::memset(c, 0, m * n * sizeof(double));
    for (std::size_t l = 0; l < k; ++l) {
        const double* arow = a + l * m;
        const double* brow = b + l * n;
        for (std::size_t i = 0; i < m; ++i) {
            double av = arow[i];
            double* crow = c + i * n;
            for (std::size_t j = 0; j < n; ++j)
                crow[j] += av * brow[j];
        }
    }
}

void add_scalar(const double* x, const double* y, double* z, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) z[i] = x[i] + y[i];
}

void sub_scalar(const double* x, const double* y, double* z, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) z[i] = x[i] - y[i];
}

void mul_scalar(const double* x, const double* y, double* z, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) z[i] = x[i] * y[i];
}

void axpy_scalar(double a, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void scale_scalar(double a, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] = a * x[i];
}

double sum_scalar(const double* x, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += x[i];
    return s;
}

double dot_scalar(const double* x, const double* y, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += x[i] * y[i];
    return s;
}

double sumsq_diff_scalar(const double* x, const double* y, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double d = x[i] - y[i];
        s += d * d;
    }
    return s;
}

} // namespace

const Ops& scalar_ops() {
    static const Ops ops = {
        "scalar",
        gemm_nn_scalar, gemm_nt_scalar, gemm_tn_scalar,
        add_scalar, sub_scalar, mul_scalar,
        axpy_scalar, scale_scalar,
        sum_scalar, dot_scalar, sumsq_diff_scalar,
    };
    return ops;
}

} // namespace okaem::kernels
