#pragma once

// Data-parallel inner loops shared by the metric and fitting code.
//
// Every kernel has a scalar reference and, on x86-64, an AVX2+FMA variant
// picked at runtime. Both variants accumulate in four interleaved lanes
// combined as (l0 + l1) + (l2 + l3) and use fused multiply-add, so they
// return bit-identical results. Set TABCAL_KERNELS=scalar to force the
// reference path.

#include <cassert>
#include <cstddef>
#include <span>

namespace tabcal::kernels {

struct KernelTable {
    const char* name;
    /// sum a[i] * b[i]
    double (*dot)(const double* a, const double* b, std::size_t n);
    /// sum (a[i] * b[i]) * c[i]
    double (*dot3)(const double* a, const double* b, const double* c, std::size_t n);
    /// y[i] += alpha * x[i]
    void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
    /// sum (a[i] - b[i])^2
    double (*sum_sq_diff)(const double* a, const double* b, std::size_t n);
    /// sum a[i] * ((g1[i] + g2[i]) + g3[i])
    double (*shifted_dot3)(const double* a, const double* g1, const double* g2, const double* g3,
                           std::size_t n);
};

const KernelTable& scalar_table() noexcept;

/// nullptr when the build or the CPU lacks AVX2+FMA.
const KernelTable* avx2_table() noexcept;

/// The table used by the library; chosen once on first use.
const KernelTable& active() noexcept;

inline double dot(std::span<const double> a, std::span<const double> b) {
    assert(a.size() == b.size());
    return active().dot(a.data(), b.data(), a.size());
}

inline double dot3(std::span<const double> a, std::span<const double> b,
                   std::span<const double> c) {
    assert(a.size() == b.size() && b.size() == c.size());
    return active().dot3(a.data(), b.data(), c.data(), a.size());
}

inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
    assert(x.size() == y.size());
    active().axpy(alpha, x.data(), y.data(), x.size());
}

inline double sum_sq_diff(std::span<const double> a, std::span<const double> b) {
    assert(a.size() == b.size());
    return active().sum_sq_diff(a.data(), b.data(), a.size());
}

}  // namespace tabcal::kernels
