#include "kernels_internal.hpp"

#if TABCAL_HAVE_AVX2_KERNELS

#include <immintrin.h>

// Functions carry a target attribute instead of compiling the file with
// -mavx2, so no AVX encoding can leak into inline functions shared with
// other translation units.
#define TABCAL_AVX2 __attribute__((target("avx2,fma")))

namespace tabcal::kernels::detail {

namespace {

TABCAL_AVX2 inline double finish(__m256d v, std::size_t i, std::size_t n, const double* a,
                                 const double* b) {
    alignas(32) double acc[4];
    _mm256_store_pd(acc, v);
    for (; i < n; ++i) acc[i & 3] = __builtin_fma(a[i], b[i], acc[i & 3]);
    return (acc[0] + acc[1]) + (acc[2] + acc[3]);
}

TABCAL_AVX2 double dot_avx2(const double* a, const double* b, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        acc = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc);
    }
    return finish(acc, i, n, a, b);
}

TABCAL_AVX2 double dot3_avx2(const double* a, const double* b, const double* c, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d ab = _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
        acc = _mm256_fmadd_pd(ab, _mm256_loadu_pd(c + i), acc);
    }
    alignas(32) double lanes[4];
    _mm256_store_pd(lanes, acc);
    for (; i < n; ++i) lanes[i & 3] = __builtin_fma(a[i] * b[i], c[i], lanes[i & 3]);
    return (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
}

TABCAL_AVX2 void axpy_avx2(double alpha, const double* x, double* y, std::size_t n) {
    const __m256d va = _mm256_set1_pd(alpha);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
    }
    for (; i < n; ++i) y[i] = __builtin_fma(alpha, x[i], y[i]);
}

TABCAL_AVX2 double sum_sq_diff_avx2(const double* a, const double* b, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
        acc = _mm256_fmadd_pd(d, d, acc);
    }
    alignas(32) double lanes[4];
    _mm256_store_pd(lanes, acc);
    for (; i < n; ++i) {
        const double d = a[i] - b[i];
        lanes[i & 3] = __builtin_fma(d, d, lanes[i & 3]);
    }
    return (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
}

TABCAL_AVX2 double shifted_dot3_avx2(const double* a, const double* g1, const double* g2,
                                     const double* g3, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d g = _mm256_add_pd(
            _mm256_add_pd(_mm256_loadu_pd(g1 + i), _mm256_loadu_pd(g2 + i)), _mm256_loadu_pd(g3 + i));
        acc = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), g, acc);
    }
    alignas(32) double lanes[4];
    _mm256_store_pd(lanes, acc);
    for (; i < n; ++i) lanes[i & 3] = __builtin_fma(a[i], (g1[i] + g2[i]) + g3[i], lanes[i & 3]);
    return (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
}

}  // namespace

const KernelTable kAvx2Table = {"avx2", dot_avx2, dot3_avx2, axpy_avx2, sum_sq_diff_avx2,
                                shifted_dot3_avx2};

}  // namespace tabcal::kernels::detail

#endif
