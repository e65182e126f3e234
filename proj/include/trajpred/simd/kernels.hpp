#pragma once

// Data-parallel inner loops. Each kernel has a scalar reference version and,
// on x86-64, an AVX2+FMA version; the active table is chosen once at startup
// from CPUID and can be forced with TRAJPRED_ISA=scalar|avx2.

#include <cassert>
#include <cstddef>
#include <span>
#include <string_view>

namespace trajpred::simd {

enum class Isa { scalar, avx2 };

std::string_view to_string(Isa isa);

/// Per-component constants of a weighted bivariate normal, precomputed once per
/// mixture so that the kernels are pure arithmetic.
struct GaussCoeffs {
    double mean_x = 0.0;
    double mean_y = 0.0;
    double inv_sx = 1.0;
    double inv_sy = 1.0;
    double rho = 0.0;
    double quad_scale = -0.5;  // -1 / (2 (1 - rho^2))
    double norm = 0.0;         // weight / (2 pi sx sy sqrt(1 - rho^2))
    // lower Cholesky factor of the covariance
    double l11 = 1.0;
    double l21 = 0.0;
    double l22 = 1.0;
    double cum_weight = 1.0;   // inclusive prefix sum of the mixture weights
};

struct KernelTable {
    Isa isa;
    // c[m x n] += a[m x k] * b[n x k]^T
    void (*gemm_nt)(const double* a, const double* b, double* c, std::size_t m, std::size_t n, std::size_t k);
    // c[m x n] += a[m x k] * b[k x n]
    void (*gemm_nn)(const double* a, const double* b, double* c, std::size_t m, std::size_t n, std::size_t k);
    // c[m x n] += a[k x m]^T * b[k x n]
    void (*gemm_tn)(const double* a, const double* b, double* c, std::size_t m, std::size_t n, std::size_t k);
    // out[i] = sum_c norm_c * exp(quad_scale_c * q_c(xs[i], ys[i]))
    void (*mixture_density)(const GaussCoeffs* comps, std::size_t n_comp, const double* xs, const double* ys,
                            double* out, std::size_t n);
    // Component chosen as the first c with u[i] < cum_weight_c (last one otherwise),
    // then (x, y) = mean + L * (z1[i], z2[i]).
    void (*mixture_draw)(const GaussCoeffs* comps, std::size_t n_comp, const double* u, const double* z1,
                         const double* z2, double* xs, double* ys, std::size_t n);
    // LSTM cell nonlinearity for `rows` independent rows of pre-activations
    // z[rows x 4h] in gate order (i, f, g, o): writes the activated gates, then
    // c = f * c_prev + i * g and h = o * tanh(c).
    void (*lstm_cell)(const double* z, const double* c_prev, double* gates, double* c_next, double* h_next,
                      std::size_t rows, std::size_t hidden);
    // Copies the values with lo <= v[i] <= hi to bucket in their original order
    // and counts the values below lo; returns the number copied. bucket needs
    // room for n values.
    std::size_t (*bracket_collect)(const double* v, std::size_t n, double lo, double hi, double* bucket,
                                   std::size_t* below);
};

const KernelTable& scalar_kernels();

/// nullptr when the build has no AVX2 path or the CPU lacks AVX2/FMA.
const KernelTable* avx2_kernels();

bool available(Isa isa);

/// Kernel table used by the library.
const KernelTable& active();

/// Forces an instruction set; throws Error(InvalidArgument) when unavailable.
/// Not synchronised with concurrent kernel calls.
void set_active(Isa isa);

inline void gemm_nt(std::span<const double> a, std::span<const double> b, std::span<double> c, std::size_t m,
                    std::size_t n, std::size_t k) {
    assert(a.size() >= m * k && b.size() >= n * k && c.size() >= m * n);
    active().gemm_nt(a.data(), b.data(), c.data(), m, n, k);
}

inline void gemm_nn(std::span<const double> a, std::span<const double> b, std::span<double> c, std::size_t m,
                    std::size_t n, std::size_t k) {
    assert(a.size() >= m * k && b.size() >= k * n && c.size() >= m * n);
    active().gemm_nn(a.data(), b.data(), c.data(), m, n, k);
}

inline void gemm_tn(std::span<const double> a, std::span<const double> b, std::span<double> c, std::size_t m,
                    std::size_t n, std::size_t k) {
    assert(a.size() >= k * m && b.size() >= k * n && c.size() >= m * n);
    active().gemm_tn(a.data(), b.data(), c.data(), m, n, k);
}

inline void mixture_density(std::span<const GaussCoeffs> comps, std::span<const double> xs,
                            std::span<const double> ys, std::span<double> out) {
    assert(xs.size() == ys.size() && out.size() == xs.size());
    active().mixture_density(comps.data(), comps.size(), xs.data(), ys.data(), out.data(), out.size());
}

inline void mixture_draw(std::span<const GaussCoeffs> comps, std::span<const double> u, std::span<const double> z1,
                         std::span<const double> z2, std::span<double> xs, std::span<double> ys) {
    assert(u.size() == z1.size() && z1.size() == z2.size() && xs.size() == u.size() && ys.size() == u.size());
    active().mixture_draw(comps.data(), comps.size(), u.data(), z1.data(), z2.data(), xs.data(), ys.data(), u.size());
}

// c_next may alias c_prev.
inline void lstm_cell(std::span<const double> z, std::span<const double> c_prev, std::span<double> gates,
                      std::span<double> c_next, std::span<double> h_next, std::size_t rows, std::size_t hidden) {
    assert(z.size() >= rows * 4 * hidden && gates.size() >= rows * 4 * hidden);
    assert(c_prev.size() >= rows * hidden && c_next.size() >= rows * hidden && h_next.size() >= rows * hidden);
    active().lstm_cell(z.data(), c_prev.data(), gates.data(), c_next.data(), h_next.data(), rows, hidden);
}

inline std::size_t bracket_collect(std::span<const double> v, double lo, double hi, std::span<double> bucket,
                                   std::size_t& below) {
    assert(bucket.size() >= v.size());
    return active().bracket_collect(v.data(), v.size(), lo, hi, bucket.data(), &below);
}

}  // namespace trajpred::simd
