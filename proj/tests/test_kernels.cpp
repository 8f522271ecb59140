#include "tabcal/kernels.hpp"
#include "tabcal/rng.hpp"

#include <doctest.h>

#include <cstring>
#include <vector>

using namespace tabcal;

namespace {

bool same_bits(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }

std::vector<double> random_vec(Rng& rng, std::size_t n) {
    std::vector<double> v(n);
    for (auto& x : v) x = rng.uniform(-3.0, 3.0) * (rng.bernoulli(0.1) ? 1e6 : 1.0);
    return v;
}

}  // namespace

TEST_CASE("scalar kernels against naive loops") {
    const auto& s = kernels::scalar_table();
    const std::vector<double> a = {1, 2, 3, 4, 5};
    const std::vector<double> b = {2, 0.5, -1, 0, 2};
    CHECK(s.dot(a.data(), b.data(), 5) == 2 + 1 - 3 + 0 + 10);
    CHECK(s.sum_sq_diff(a.data(), b.data(), 5) == 1 + 2.25 + 16 + 16 + 9);
    CHECK(s.dot3(a.data(), b.data(), a.data(), 5) == 2 + 2 - 9 + 0 + 50);
    std::vector<double> y = b;
    s.axpy(2.0, a.data(), y.data(), 5);
    CHECK(y == std::vector<double>{4, 4.5, 5, 8, 12});
    CHECK(s.shifted_dot3(a.data(), a.data(), b.data(), a.data(), 5) ==
          1 * 4 + 2 * 4.5 + 3 * 5 + 4 * 8 + 5 * 12);
    CHECK(s.dot(a.data(), b.data(), 0) == 0.0);
}

TEST_CASE("AVX2 kernels are bit-identical to the scalar reference") {
    const kernels::KernelTable* v = kernels::avx2_table();
    if (v == nullptr) {
        MESSAGE("AVX2 not available; equivalence test skipped");
        return;
    }
    const auto& s = kernels::scalar_table();
    Rng rng(99);
    for (std::size_t n = 0; n < 70; ++n) {
        for (int rep = 0; rep < 5; ++rep) {
            const auto a = random_vec(rng, n);
            const auto b = random_vec(rng, n);
            const auto c = random_vec(rng, n);
            const auto d = random_vec(rng, n);
            CHECK(same_bits(s.dot(a.data(), b.data(), n), v->dot(a.data(), b.data(), n)));
            CHECK(same_bits(s.dot3(a.data(), b.data(), c.data(), n),
                            v->dot3(a.data(), b.data(), c.data(), n)));
            CHECK(same_bits(s.sum_sq_diff(a.data(), b.data(), n),
                            v->sum_sq_diff(a.data(), b.data(), n)));
            CHECK(same_bits(s.shifted_dot3(a.data(), b.data(), c.data(), d.data(), n),
                            v->shifted_dot3(a.data(), b.data(), c.data(), d.data(), n)));
            auto y1 = d;
            auto y2 = d;
            s.axpy(0.37, a.data(), y1.data(), n);
            v->axpy(0.37, a.data(), y2.data(), n);
            for (std::size_t i = 0; i < n; ++i) CHECK(same_bits(y1[i], y2[i]));
        }
    }
}

TEST_CASE("dispatch picks a table") {
    const auto& t = kernels::active();
    CHECK(std::strlen(t.name) > 0);
}
