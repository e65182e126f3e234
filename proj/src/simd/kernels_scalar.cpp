#include <cmath>

#include "kernels_internal.hpp"

namespace trajpred::simd::detail {
namespace {

void gemm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t n, std::size_t k) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* ai = a + i * k;
        for (std::size_t j = 0; j < n; ++j) {
            const double* bj = b + j * k;
            double acc = 0.0;
            for (std::size_t p = 0; p < k; ++p) acc += ai[p] * bj[p];
            c[i * n + j] += acc;
        }
    }
}

void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t n, std::size_t k) {
    for (std::size_t i = 0; i < m; ++i) {
        double* ci = c + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const double aip = a[i * k + p];
            const double* bp = b + p * n;
            for (std::size_t j = 0; j < n; ++j) ci[j] += aip * bp[j];
        }
    }
}

void gemm_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t n, std::size_t k) {
    for (std::size_t p = 0; p < k; ++p) {
        const double* ap = a + p * m;
        const double* bp = b + p * n;
        for (std::size_t i = 0; i < m; ++i) {
            const double api = ap[i];
            double* ci = c + i * n;
            for (std::size_t j = 0; j < n; ++j) ci[j] += api * bp[j];
        }
    }
}

void mixture_density(const GaussCoeffs* comps, std::size_t n_comp, const double* xs, const double* ys, double* out,
                     std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
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
    for (std::size_t i = 0; i < n; ++i) {
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
        for (std::size_t j = 0; j < hidden; ++j) {
            const double ig = sigmoid(zr[j]);
            const double fg = sigmoid(zr[hidden + j]);
            const double gg = std::tanh(zr[2 * hidden + j]);
            const double og = sigmoid(zr[3 * hidden + j]);
            gr[j] = ig;
            gr[hidden + j] = fg;
            gr[2 * hidden + j] = gg;
            gr[3 * hidden + j] = og;
            const double c = fg * c_prev[r * hidden + j] + ig * gg;
            c_next[r * hidden + j] = c;
            h_next[r * hidden + j] = og * std::tanh(c);
        }
    }
}

std::size_t bracket_collect(const double* v, std::size_t n, double lo, double hi, double* bucket, std::size_t* below) {
    std::size_t m = 0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (v[i] < lo)
            ++count;
        else if (v[i] <= hi)
            bucket[m++] = v[i];
    }
    *below = count;
    return m;
}

}  // namespace

const KernelTable& scalar_table() {
    static const KernelTable table{Isa::scalar,   gemm_nt,      gemm_nn,  gemm_tn, mixture_density,
                                   mixture_draw, lstm_cell,    bracket_collect};
    return table;
}

}  // namespace trajpred::simd::detail
