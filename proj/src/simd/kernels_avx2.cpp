// Compiled with -mavx2 -mfma; only reached after a CPUID check.

#include <immintrin.h>

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "kernels_internal.hpp"

namespace trajpred::simd::detail {
namespace {

// exp for 4 doubles: x = n ln2 + r with |r| <= ln2/2 (ln2 split in two parts
// for exact reduction), e^r by its degree-12 Taylor polynomial evaluated in
// Estrin form (truncation below 2e-16 relative), then scaling by 2^n. Adding
// 1.5 * 2^52 rounds x log2(e) to the integer n and leaves n in the low mantissa
// bits. Requires -708 <= x <= 709.
inline __m256d exp_core(__m256d x) {
    const __m256d magic = _mm256_set1_pd(6755399441055744.0);
    const __m256d t = _mm256_fmadd_pd(x, _mm256_set1_pd(1.4426950408889634074), magic);
    const __m256d fn = _mm256_sub_pd(t, magic);
    __m256d r = _mm256_fnmadd_pd(fn, _mm256_set1_pd(6.93147180369123816490e-01), x);
    r = _mm256_fnmadd_pd(fn, _mm256_set1_pd(1.90821492927058770002e-10), r);

    const auto c = [](double v) { return _mm256_set1_pd(v); };
    const __m256d r2 = _mm256_mul_pd(r, r);
    const __m256d r4 = _mm256_mul_pd(r2, r2);
    const __m256d p01 = _mm256_fmadd_pd(c(1.0), r, c(1.0));
    const __m256d p23 = _mm256_fmadd_pd(c(1.0 / 6.0), r, c(0.5));
    const __m256d p45 = _mm256_fmadd_pd(c(1.0 / 120.0), r, c(1.0 / 24.0));
    const __m256d p67 = _mm256_fmadd_pd(c(1.0 / 5040.0), r, c(1.0 / 720.0));
    const __m256d p89 = _mm256_fmadd_pd(c(1.0 / 362880.0), r, c(1.0 / 40320.0));
    const __m256d p1011 = _mm256_fmadd_pd(c(1.0 / 39916800.0), r, c(1.0 / 3628800.0));
    const __m256d q03 = _mm256_fmadd_pd(p23, r2, p01);
    const __m256d q47 = _mm256_fmadd_pd(p67, r2, p45);
    const __m256d q812 = _mm256_fmadd_pd(c(1.0 / 479001600.0), r4, _mm256_fmadd_pd(p1011, r2, p89));
    const __m256d p = _mm256_fmadd_pd(q812, _mm256_mul_pd(r4, r4), _mm256_fmadd_pd(q47, r4, q03));

    const __m256i n = _mm256_sub_epi64(_mm256_castpd_si256(t), _mm256_castpd_si256(magic));
    const __m256i scale = _mm256_slli_epi64(_mm256_add_epi64(n, _mm256_set1_epi64x(1023)), 52);
    return _mm256_mul_pd(p, _mm256_castsi256_pd(scale));
}

inline __m256d exp_pd(__m256d x) {
    const __m256d hi = _mm256_set1_pd(709.0);
    const __m256d lo = _mm256_set1_pd(-708.0);
    const __m256d underflow = _mm256_cmp_pd(x, lo, _CMP_LT_OQ);
    return _mm256_andnot_pd(underflow, exp_core(_mm256_min_pd(_mm256_max_pd(x, lo), hi)));
}

// exp(-x) and exp(-2|x|) with the argument clamped to where the sigmoid and
// tanh have already rounded to their limits; keeps products of (1 + e) terms
// far from overflow.
inline __m256d exp_neg_clamped(__m256d x) {
    const __m256d lim = _mm256_set1_pd(40.0);
    return exp_core(_mm256_min_pd(_mm256_max_pd(_mm256_sub_pd(_mm256_setzero_pd(), x), _mm256_sub_pd(_mm256_setzero_pd(), lim)), lim));
}

inline __m256d exp_neg_two_abs(__m256d ax) {
    return exp_core(_mm256_mul_pd(_mm256_set1_pd(-2.0), _mm256_min_pd(ax, _mm256_set1_pd(20.0))));
}

// Single-row fallback of gemm_rows for columns [j0, n).
inline void gemm_row_tail(const double* a, std::size_t a_row, std::size_t a_col, const double* b, double* c,
                          std::size_t i, std::size_t j0, std::size_t n, std::size_t k) {
    double* ci = c + i * n;
    std::size_t j = j0;
    for (; j + 4 <= n; j += 4) {
        __m256d c0 = _mm256_loadu_pd(ci + j);
        for (std::size_t p = 0; p < k; ++p)
            c0 = _mm256_fmadd_pd(_mm256_set1_pd(a[i * a_row + p * a_col]), _mm256_loadu_pd(b + p * n + j), c0);
        _mm256_storeu_pd(ci + j, c0);
    }
    for (; j < n; ++j) {
        double acc = ci[j];
        for (std::size_t p = 0; p < k; ++p) acc += a[i * a_row + p * a_col] * b[p * n + j];
        ci[j] = acc;
    }
}

// Shared body of the products: c[i, :] += sum_p a(i, p) * b[p, :], where
// a(i, p) = a[i * a_row + p * a_col]. Blocks of 6 rows x 8 columns live in
// twelve accumulators so each loaded b vector feeds six FMAs.
inline void gemm_rows(const double* a, std::size_t a_row, std::size_t a_col, const double* b, double* c,
                      std::size_t m, std::size_t n, std::size_t k) {
    constexpr std::size_t R = 6;
    const std::size_t n8 = n & ~std::size_t{7};
    std::size_t i = 0;
    for (; i + R <= m; i += R) {
        for (std::size_t j = 0; j < n8; j += 8) {
            __m256d acc[R][2];
            for (std::size_t r = 0; r < R; ++r) {
                acc[r][0] = _mm256_loadu_pd(c + (i + r) * n + j);
                acc[r][1] = _mm256_loadu_pd(c + (i + r) * n + j + 4);
            }
            const double* ap = a + i * a_row;
            for (std::size_t p = 0; p < k; ++p) {
                const __m256d b0 = _mm256_loadu_pd(b + p * n + j);
                const __m256d b1 = _mm256_loadu_pd(b + p * n + j + 4);
                const double* apr = ap + p * a_col;
                for (std::size_t r = 0; r < R; ++r) {
                    const __m256d av = _mm256_broadcast_sd(apr + r * a_row);
                    acc[r][0] = _mm256_fmadd_pd(av, b0, acc[r][0]);
                    acc[r][1] = _mm256_fmadd_pd(av, b1, acc[r][1]);
                }
            }
            for (std::size_t r = 0; r < R; ++r) {
                _mm256_storeu_pd(c + (i + r) * n + j, acc[r][0]);
                _mm256_storeu_pd(c + (i + r) * n + j + 4, acc[r][1]);
            }
        }
        if (n8 < n)
            for (std::size_t r = 0; r < R; ++r) gemm_row_tail(a, a_row, a_col, b, c, i + r, n8, n, k);
    }
    for (; i < m; ++i) gemm_row_tail(a, a_row, a_col, b, c, i, 0, n, k);
}

void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t n, std::size_t k) {
    gemm_rows(a, k, 1, b, c, m, n, k);
}

void gemm_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t n, std::size_t k) {
    gemm_rows(a, 1, m, b, c, m, n, k);
}

// b[n x k] is packed transposed so the same row kernel applies.
void gemm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t n, std::size_t k) {
    thread_local std::vector<double> packed;
    packed.resize(n * k);
    for (std::size_t j = 0; j < n; ++j)
        for (std::size_t p = 0; p < k; ++p) packed[p * n + j] = b[j * k + p];
    gemm_rows(a, k, 1, packed.data(), c, m, n, k);
}

// exp for x <= 0 (the density exponent); below -708 the result is flushed to 0.
inline __m256d exp_nonpos_pd(__m256d x) {
    const __m256d lo = _mm256_set1_pd(-708.0);
    const __m256d underflow = _mm256_cmp_pd(x, lo, _CMP_LT_OQ);
    return _mm256_andnot_pd(underflow, exp_core(_mm256_max_pd(x, lo)));
}

struct DensityTerms {
    __m256d mx, my, isx, isy, m2rho, scale, norm;

    explicit DensityTerms(const GaussCoeffs& g)
        : mx(_mm256_set1_pd(g.mean_x)),
          my(_mm256_set1_pd(g.mean_y)),
          isx(_mm256_set1_pd(g.inv_sx)),
          isy(_mm256_set1_pd(g.inv_sy)),
          m2rho(_mm256_set1_pd(-2.0 * g.rho)),
          scale(_mm256_set1_pd(g.quad_scale)),
          norm(_mm256_set1_pd(g.norm)) {}

    // quad_scale * (dx^2 + dy^2 - 2 rho dx dy) in standardized coordinates
    __m256d exponent(__m256d x, __m256d y) const {
        const __m256d dx = _mm256_mul_pd(_mm256_sub_pd(x, mx), isx);
        const __m256d dy = _mm256_mul_pd(_mm256_sub_pd(y, my), isy);
        const __m256d q = _mm256_fmadd_pd(m2rho, _mm256_mul_pd(dx, dy), _mm256_fmadd_pd(dx, dx, _mm256_mul_pd(dy, dy)));
        return _mm256_mul_pd(scale, q);
    }
};

void mixture_density(const GaussCoeffs* comps, std::size_t n_comp, const double* xs, const double* ys, double* out,
                     std::size_t n) {
    // broadcast once per call; the point loop then reads the constants from memory
    thread_local std::vector<DensityTerms> terms;
    terms.clear();
    for (std::size_t c = 0; c < n_comp; ++c) terms.emplace_back(comps[c]);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d x = _mm256_loadu_pd(xs + i);
        const __m256d y = _mm256_loadu_pd(ys + i);
        __m256d acc = _mm256_setzero_pd();
        for (const DensityTerms& g : terms) acc = _mm256_fmadd_pd(g.norm, exp_nonpos_pd(g.exponent(x, y)), acc);
        _mm256_storeu_pd(out + i, acc);
    }
    for (; i < n; ++i) {
        double acc = 0.0;
        for (std::size_t c = 0; c < n_comp; ++c) {
            const GaussCoeffs& g = comps[c];
            const double dx = (xs[i] - g.mean_x) * g.inv_sx;
            const double dy = (ys[i] - g.mean_y) * g.inv_sy;
            const double q = dx * dx + dy * dy - 2.0 * g.rho * dx * dy;
            acc += g.norm * std::exp(g.quad_scale * q);
        }
        out[i] = acc;
    }
}

void mixture_draw(const GaussCoeffs* comps, std::size_t n_comp, const double* u, const double* z1, const double* z2,
                  double* xs, double* ys, std::size_t n) {
    std::size_t i = 0;
    const GaussCoeffs& last = comps[n_comp - 1];
    for (; i + 4 <= n; i += 4) {
        const __m256d uv = _mm256_loadu_pd(u + i);
        __m256d mx = _mm256_set1_pd(last.mean_x);
        __m256d my = _mm256_set1_pd(last.mean_y);
        __m256d l11 = _mm256_set1_pd(last.l11);
        __m256d l21 = _mm256_set1_pd(last.l21);
        __m256d l22 = _mm256_set1_pd(last.l22);
        // walk backwards so the earliest matching component wins
        for (std::size_t c = n_comp - 1; c-- > 0;) {
            const GaussCoeffs& g = comps[c];
            const __m256d hit = _mm256_cmp_pd(uv, _mm256_set1_pd(g.cum_weight), _CMP_LT_OQ);
            mx = _mm256_blendv_pd(mx, _mm256_set1_pd(g.mean_x), hit);
            my = _mm256_blendv_pd(my, _mm256_set1_pd(g.mean_y), hit);
            l11 = _mm256_blendv_pd(l11, _mm256_set1_pd(g.l11), hit);
            l21 = _mm256_blendv_pd(l21, _mm256_set1_pd(g.l21), hit);
            l22 = _mm256_blendv_pd(l22, _mm256_set1_pd(g.l22), hit);
        }
        const __m256d a = _mm256_loadu_pd(z1 + i);
        const __m256d b = _mm256_loadu_pd(z2 + i);
        _mm256_storeu_pd(xs + i, _mm256_fmadd_pd(l11, a, mx));
        _mm256_storeu_pd(ys + i, _mm256_fmadd_pd(l22, b, _mm256_fmadd_pd(l21, a, my)));
    }
    for (; i < n; ++i) {
        std::size_t c = 0;
        while (c + 1 < n_comp && !(u[i] < comps[c].cum_weight)) ++c;
        const GaussCoeffs& g = comps[c];
        xs[i] = g.mean_x + g.l11 * z1[i];
        ys[i] = g.mean_y + g.l21 * z1[i] + g.l22 * z2[i];
    }
}

void lstm_cell(const double* z, const double* c_prev, double* gates, double* c_next, double* h_next,
               std::size_t rows, std::size_t hidden) {
    const auto sigmoid = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
    for (std::size_t r = 0; r < rows; ++r) {
        const double* zr = z + r * 4 * hidden;
        double* gr = gates + r * 4 * hidden;
        const double* cp = c_prev + r * hidden;
        double* cn = c_next + r * hidden;
        double* hn = h_next + r * hidden;
        std::size_t j = 0;
        for (; j + 4 <= hidden; j += 4) {
            const __m256d one = _mm256_set1_pd(1.0);
            const __m256d sign_mask = _mm256_set1_pd(-0.0);
            const __m256d zg = _mm256_loadu_pd(zr + 2 * hidden + j);
            // sigmoid(v) = 1 / (1 + e^-v), tanh(v) = sign(v) (1 - e) / (1 + e) with
            // e = e^-2|v|; the four denominators share one division
            const __m256d ai = _mm256_add_pd(one, exp_neg_clamped(_mm256_loadu_pd(zr + j)));
            const __m256d af = _mm256_add_pd(one, exp_neg_clamped(_mm256_loadu_pd(zr + hidden + j)));
            const __m256d eg = exp_neg_two_abs(_mm256_andnot_pd(sign_mask, zg));
            const __m256d ag = _mm256_add_pd(one, eg);
            const __m256d ao = _mm256_add_pd(one, exp_neg_clamped(_mm256_loadu_pd(zr + 3 * hidden + j)));
            const __m256d p_if = _mm256_mul_pd(ai, af);
            const __m256d p_go = _mm256_mul_pd(ag, ao);
            const __m256d inv = _mm256_div_pd(one, _mm256_mul_pd(p_if, p_go));
            const __m256d ig = _mm256_mul_pd(_mm256_mul_pd(inv, af), p_go);
            const __m256d fg = _mm256_mul_pd(_mm256_mul_pd(inv, ai), p_go);
            const __m256d og = _mm256_mul_pd(_mm256_mul_pd(inv, p_if), ag);
            const __m256d gg = _mm256_or_pd(_mm256_mul_pd(_mm256_mul_pd(_mm256_sub_pd(one, eg), inv), _mm256_mul_pd(p_if, ao)),
                                            _mm256_and_pd(sign_mask, zg));
            _mm256_storeu_pd(gr + j, ig);
            _mm256_storeu_pd(gr + hidden + j, fg);
            _mm256_storeu_pd(gr + 2 * hidden + j, gg);
            _mm256_storeu_pd(gr + 3 * hidden + j, og);
            const __m256d c = _mm256_fmadd_pd(fg, _mm256_loadu_pd(cp + j), _mm256_mul_pd(ig, gg));
            _mm256_storeu_pd(cn + j, c);
            const __m256d ec = exp_neg_two_abs(_mm256_andnot_pd(sign_mask, c));
            const __m256d tc = _mm256_or_pd(_mm256_div_pd(_mm256_sub_pd(one, ec), _mm256_add_pd(one, ec)),
                                            _mm256_and_pd(sign_mask, c));
            _mm256_storeu_pd(hn + j, _mm256_mul_pd(og, tc));
        }
        for (; j < hidden; ++j) {
            const double ig = sigmoid(zr[j]);
            const double fg = sigmoid(zr[hidden + j]);
            const double gg = std::tanh(zr[2 * hidden + j]);
            const double og = sigmoid(zr[3 * hidden + j]);
            gr[j] = ig;
            gr[hidden + j] = fg;
            gr[2 * hidden + j] = gg;
            gr[3 * hidden + j] = og;
            const double c = fg * cp[j] + ig * gg;
            cn[j] = c;
            hn[j] = og * std::tanh(c);
        }
    }
}

// For each 4-bit lane mask, 32-bit lane indices that move the selected doubles
// to the front in order.
const std::array<std::array<int, 8>, 16> kLeftPack = [] {
    std::array<std::array<int, 8>, 16> t{};
    for (int mask = 0; mask < 16; ++mask) {
        int out = 0;
        for (int lane = 0; lane < 4; ++lane)
            if (mask & (1 << lane)) {
                t[mask][2 * out] = 2 * lane;
                t[mask][2 * out + 1] = 2 * lane + 1;
                ++out;
            }
    }
    return t;
}();

std::size_t bracket_collect(const double* v, std::size_t n, double lo, double hi, double* bucket, std::size_t* below) {
    const __m256d vlo = _mm256_set1_pd(lo);
    const __m256d vhi = _mm256_set1_pd(hi);
    __m256i count = _mm256_setzero_si256();
    std::size_t m = 0;
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d x = _mm256_loadu_pd(v + i);
        const __m256d lt = _mm256_cmp_pd(x, vlo, _CMP_LT_OQ);
        const __m256d in = _mm256_andnot_pd(lt, _mm256_cmp_pd(x, vhi, _CMP_LE_OQ));
        count = _mm256_sub_epi64(count, _mm256_castpd_si256(lt));
        const int mask = _mm256_movemask_pd(in);
        // full-width store; only the first popcount(mask) values are kept
        const __m256 packed = _mm256_permutevar8x32_ps(
            _mm256_castpd_ps(x), _mm256_loadu_si256(reinterpret_cast<const __m256i*>(kLeftPack[mask].data())));
        _mm256_storeu_pd(bucket + m, _mm256_castps_pd(packed));
        m += static_cast<std::size_t>(__builtin_popcount(mask));
    }
    alignas(32) std::int64_t lanes[4];
    _mm256_store_si256(reinterpret_cast<__m256i*>(lanes), count);
    std::size_t below_count = static_cast<std::size_t>(lanes[0] + lanes[1] + lanes[2] + lanes[3]);
    for (; i < n; ++i) {
        if (v[i] < lo)
            ++below_count;
        else if (v[i] <= hi)
            bucket[m++] = v[i];
    }
    *below = below_count;
    return m;
}

}  // namespace

const KernelTable& avx2_table() {
    static const KernelTable table{Isa::avx2,    gemm_nt,   gemm_nn,        gemm_tn, mixture_density,
                                   mixture_draw, lstm_cell, bracket_collect};
    return table;
}

}  // namespace trajpred::simd::detail
