#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "test_support.hpp"
#include "trajpred/mdn.hpp"
#include "trajpred/simd/kernels.hpp"

using namespace trajpred;

namespace {

std::vector<double> random_vec(std::mt19937_64& rng, std::size_t n) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<double> v(n);
    for (double& x : v) x = u(rng);
    return v;
}

double max_rel_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double scale = std::max({std::abs(a[i]), std::abs(b[i]), 1e-300});
        worst = std::max(worst, std::abs(a[i] - b[i]) / scale);
    }
    return worst;
}

const simd::KernelTable* vector_table() {
    const simd::KernelTable* t = simd::avx2_kernels();
    if (!t) MESSAGE("AVX2 unavailable; equivalence checks skipped");
    return t;
}

}  // namespace

TEST_CASE("scalar reference gemm matches a naive triple loop") {
    std::mt19937_64 rng(1);
    const std::size_t m = 5, n = 7, k = 3;
    const auto a = random_vec(rng, m * k);
    const auto b = random_vec(rng, n * k);
    std::vector<double> c(m * n, 0.5);
    simd::scalar_kernels().gemm_nt(a.data(), b.data(), c.data(), m, n, k);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double want = 0.5;
            for (std::size_t p = 0; p < k; ++p) want += a[i * k + p] * b[j * k + p];
            CHECK(c[i * n + j] == doctest::Approx(want).epsilon(1e-14));
        }
}

TEST_CASE("gemm variants agree between scalar and AVX2 across tail shapes") {
    const simd::KernelTable* vec = vector_table();
    if (!vec) return;
    const simd::KernelTable& ref = simd::scalar_kernels();
    std::mt19937_64 rng(7);
    for (std::size_t m : {1u, 3u, 8u, 17u})
        for (std::size_t n : {1u, 4u, 5u, 16u, 21u, 128u})
            for (std::size_t k : {1u, 4u, 6u, 32u}) {
                CAPTURE(m);
                CAPTURE(n);
                CAPTURE(k);
                const auto init = random_vec(rng, m * n);
                {
                    const auto a = random_vec(rng, m * k);
                    const auto b = random_vec(rng, n * k);
                    auto c1 = init, c2 = init;
                    ref.gemm_nt(a.data(), b.data(), c1.data(), m, n, k);
                    vec->gemm_nt(a.data(), b.data(), c2.data(), m, n, k);
                    CHECK(max_rel_diff(c1, c2) < 1e-11);
                }
                {
                    const auto a = random_vec(rng, m * k);
                    const auto b = random_vec(rng, k * n);
                    auto c1 = init, c2 = init;
                    ref.gemm_nn(a.data(), b.data(), c1.data(), m, n, k);
                    vec->gemm_nn(a.data(), b.data(), c2.data(), m, n, k);
                    CHECK(max_rel_diff(c1, c2) < 1e-11);
                }
                {
                    const auto a = random_vec(rng, k * m);
                    const auto b = random_vec(rng, k * n);
                    auto c1 = init, c2 = init;
                    ref.gemm_tn(a.data(), b.data(), c1.data(), m, n, k);
                    vec->gemm_tn(a.data(), b.data(), c2.data(), m, n, k);
                    CHECK(max_rel_diff(c1, c2) < 1e-11);
                }
            }
}

TEST_CASE("mixture density agrees between scalar and AVX2") {
    const simd::KernelTable* vec = vector_table();
    if (!vec) return;
    std::mt19937_64 rng(11);
    std::normal_distribution<double> spread(0.0, 4.0);
    for (int trial = 0; trial < 20; ++trial) {
        const auto mix = testing_support::random_mixture(rng, 1 + trial % 4);
        const auto coeffs = to_coeffs(mix);
        const std::size_t n = 1001;
        std::vector<double> xs(n), ys(n);
        for (std::size_t i = 0; i < n; ++i) {
            xs[i] = spread(rng);
            ys[i] = spread(rng);
        }
        std::vector<double> d1(n), d2(n);
        simd::scalar_kernels().mixture_density(coeffs.data(), coeffs.size(), xs.data(), ys.data(), d1.data(), n);
        vec->mixture_density(coeffs.data(), coeffs.size(), xs.data(), ys.data(), d2.data(), n);
        for (std::size_t i = 0; i < n; ++i) {
            // the vector exp flushes to zero below e^-708 where libm returns subnormals
            if (d1[i] < 1e-290) {
                CHECK(d2[i] < 1e-290);
                continue;
            }
            CHECK(std::abs(d1[i] - d2[i]) <= 1e-13 * d1[i]);
        }
    }
}

TEST_CASE("mixture draws agree between scalar and AVX2") {
    const simd::KernelTable* vec = vector_table();
    if (!vec) return;
    std::mt19937_64 rng(5);
    const auto mix = testing_support::random_mixture(rng, 3);
    const auto coeffs = to_coeffs(mix);
    const NormalBank bank = make_normal_bank(1003, 99);
    std::vector<double> x1(bank.size()), y1(bank.size()), x2(bank.size()), y2(bank.size());
    simd::scalar_kernels().mixture_draw(coeffs.data(), coeffs.size(), bank.u.data(), bank.z1.data(), bank.z2.data(),
                                        x1.data(), y1.data(), bank.size());
    vec->mixture_draw(coeffs.data(), coeffs.size(), bank.u.data(), bank.z1.data(), bank.z2.data(), x2.data(), y2.data(),
                      bank.size());
    for (std::size_t i = 0; i < bank.size(); ++i) {
        CHECK(x1[i] == doctest::Approx(x2[i]).epsilon(1e-14));
        CHECK(y1[i] == doctest::Approx(y2[i]).epsilon(1e-14));
    }
}

TEST_CASE("vector exp is accurate over the reduced range and flushes underflow") {
    const simd::KernelTable* vec = vector_table();
    if (!vec) return;
    // single isotropic unit component: density = exp(-q/2) / (2 pi) with q = x^2
    const auto coeffs = to_coeffs(testing_support::isotropic(1.0));
    std::vector<double> xs, ys;
    for (double x = 0.0; x < 38.0; x += 0.173) {
        xs.push_back(x);
        ys.push_back(0.0);
    }
    std::vector<double> d(xs.size());
    vec->mixture_density(coeffs.data(), coeffs.size(), xs.data(), ys.data(), d.data(), d.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double want = std::exp(-0.5 * xs[i] * xs[i]) / (2.0 * 3.14159265358979323846);
        if (-0.5 * xs[i] * xs[i] < -708.0)
            CHECK(d[i] == 0.0);
        else if (want > 1e-290)
            CHECK(std::abs(d[i] - want) <= 1e-13 * want);
    }
}

TEST_CASE("lstm cell agrees between scalar and AVX2, including saturated inputs") {
    const simd::KernelTable* vec = vector_table();
    if (!vec) return;
    std::mt19937_64 rng(13);
    for (std::size_t hidden : {1u, 4u, 7u, 32u}) {
        const std::size_t rows = 5;
        auto z = random_vec(rng, rows * 4 * hidden);
        for (double& v : z) v *= 12.0;
        z[0] = 800.0;
        z[1 % z.size()] = -800.0;
        const auto c_prev = random_vec(rng, rows * hidden);
        std::vector<double> g1(z.size()), g2(z.size()), c1(c_prev.size()), c2(c_prev.size()), h1(c_prev.size()),
            h2(c_prev.size());
        simd::scalar_kernels().lstm_cell(z.data(), c_prev.data(), g1.data(), c1.data(), h1.data(), rows, hidden);
        vec->lstm_cell(z.data(), c_prev.data(), g2.data(), c2.data(), h2.data(), rows, hidden);
        for (std::size_t i = 0; i < g1.size(); ++i) CHECK(std::abs(g1[i] - g2[i]) < 1e-15);
        for (std::size_t i = 0; i < c1.size(); ++i) {
            CHECK(std::abs(c1[i] - c2[i]) < 1e-15);
            CHECK(std::abs(h1[i] - h2[i]) < 1e-15);
        }
    }
}

TEST_CASE("scalar lstm cell follows the gate equations") {
    const double z[4] = {0.3, -1.2, 0.7, 2.0};
    const double c_prev = 0.25;
    double gates[4], c, h;
    simd::scalar_kernels().lstm_cell(z, &c_prev, gates, &c, &h, 1, 1);
    const double i = 1.0 / (1.0 + std::exp(-0.3)), f = 1.0 / (1.0 + std::exp(1.2)), g = std::tanh(0.7),
                 o = 1.0 / (1.0 + std::exp(-2.0));
    CHECK(c == doctest::Approx(f * c_prev + i * g).epsilon(1e-15));
    CHECK(h == doctest::Approx(o * std::tanh(f * c_prev + i * g)).epsilon(1e-15));
}

TEST_CASE("bracket collection agrees between scalar and AVX2") {
    const simd::KernelTable* vec = vector_table();
    if (!vec) return;
    std::mt19937_64 rng(17);
    std::uniform_int_distribution<int> level(0, 9);
    const double inf = std::numeric_limits<double>::infinity();
    for (std::size_t n : {0u, 1u, 3u, 4u, 5u, 64u, 257u}) {
        // coarse values so the bounds hit exact ties
        std::vector<double> v(n);
        for (double& x : v) x = 0.5 * level(rng);
        for (auto [lo, hi] : {std::pair{1.0, 3.0}, std::pair{-inf, 2.5}, std::pair{2.0, inf}, std::pair{4.0, 1.0}}) {
            std::vector<double> b1(n), b2(n);
            std::size_t below1 = 99, below2 = 77;
            const std::size_t m1 = simd::scalar_kernels().bracket_collect(v.data(), n, lo, hi, b1.data(), &below1);
            const std::size_t m2 = vec->bracket_collect(v.data(), n, lo, hi, b2.data(), &below2);
            CAPTURE(n);
            CAPTURE(lo);
            REQUIRE(m1 == m2);
            CHECK(below1 == below2);
            for (std::size_t i = 0; i < m1; ++i) CHECK(b1[i] == b2[i]);
        }
    }
}

TEST_CASE("scalar bracket collection keeps order and counts strictly below") {
    const double v[7] = {3.0, 1.0, 2.0, 5.0, 2.0, 0.5, 4.0};
    double bucket[7];
    std::size_t below = 0;
    const std::size_t m = simd::scalar_kernels().bracket_collect(v, 7, 2.0, 4.0, bucket, &below);
    REQUIRE(m == 4);
    CHECK(below == 2);
    CHECK(bucket[0] == 3.0);
    CHECK(bucket[1] == 2.0);
    CHECK(bucket[2] == 2.0);
    CHECK(bucket[3] == 4.0);
}

TEST_CASE("forcing the scalar table is observable and reversible") {
    const simd::Isa before = simd::active().isa;
    simd::set_active(simd::Isa::scalar);
    CHECK(simd::active().isa == simd::Isa::scalar);
    if (simd::available(simd::Isa::avx2)) {
        simd::set_active(simd::Isa::avx2);
        CHECK(simd::active().isa == simd::Isa::avx2);
    } else {
        CHECK_THROWS(simd::set_active(simd::Isa::avx2));
    }
    simd::set_active(before);
}
