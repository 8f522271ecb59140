#include "kernels_internal.hpp"

#include <cmath>

namespace tabcal::kernels::detail {

namespace {

inline double reduce(const double acc[4]) { return (acc[0] + acc[1]) + (acc[2] + acc[3]); }

double dot_scalar(const double* a, const double* b, std::size_t n) {
    double acc[4] = {0.0, 0.0, 0.0, 0.0};
    for (std::size_t i = 0; i < n; ++i) acc[i & 3] = std::fma(a[i], b[i], acc[i & 3]);
    return reduce(acc);
}

double dot3_scalar(const double* a, const double* b, const double* c, std::size_t n) {
    double acc[4] = {0.0, 0.0, 0.0, 0.0};
    for (std::size_t i = 0; i < n; ++i) acc[i & 3] = std::fma(a[i] * b[i], c[i], acc[i & 3]);
    return reduce(acc);
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] = std::fma(alpha, x[i], y[i]);
}

double sum_sq_diff_scalar(const double* a, const double* b, std::size_t n) {
    double acc[4] = {0.0, 0.0, 0.0, 0.0};
    for (std::size_t i = 0; i < n; ++i) {
        const double d = a[i] - b[i];
        acc[i & 3] = std::fma(d, d, acc[i & 3]);
    }
    return reduce(acc);
}

double shifted_dot3_scalar(const double* a, const double* g1, const double* g2, const double* g3,
                           std::size_t n) {
    double acc[4] = {0.0, 0.0, 0.0, 0.0};
    for (std::size_t i = 0; i < n; ++i) {
        acc[i & 3] = std::fma(a[i], (g1[i] + g2[i]) + g3[i], acc[i & 3]);
    }
    return reduce(acc);
}

}  // namespace

const KernelTable kScalarTable = {"scalar", dot_scalar, dot3_scalar, axpy_scalar,
                                  sum_sq_diff_scalar, shifted_dot3_scalar};

}  // namespace tabcal::kernels::detail
