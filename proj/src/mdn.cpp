#include "trajpred/mdn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "trajpred/error.hpp"
#include "trajpred/rng.hpp"

namespace trajpred {
namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

double component_log_pdf(const GaussComponent& g, Vec2 p) {
    const double one_minus_r2 = 1.0 - g.rho * g.rho;
    const double dx = (p.x - g.mean.x) / g.sigma_x;
    const double dy = (p.y - g.mean.y) / g.sigma_y;
    const double q = dx * dx + dy * dy - 2.0 * g.rho * dx * dy;
    return -kLog2Pi - std::log(g.sigma_x) - std::log(g.sigma_y) - 0.5 * std::log(one_minus_r2) -
           0.5 * q / one_minus_r2;
}

void check_rho(const GaussComponent& g) {
    if (!(std::abs(g.rho) < 1.0)) fail(ErrorCode::DegenerateCovariance, "|rho| >= 1 (rho = " + std::to_string(g.rho) + ")");
    if (!(g.sigma_x > 0.0) || !(g.sigma_y > 0.0)) fail(ErrorCode::DegenerateCovariance, "non-positive sigma");
}

}  // namespace

HorizonMixture activate(std::span<const double> raw, const ActivationConfig& cfg) {
    if (raw.empty() || raw.size() % kParamsPerComponent != 0)
        fail(ErrorCode::ModelShapeError, "raw mixture parameters must be a non-empty multiple of 6");
    for (double v : raw)
        if (!std::isfinite(v)) fail(ErrorCode::InvalidLogits, "non-finite raw mixture parameter");

    const std::size_t n_comp = raw.size() / kParamsPerComponent;
    HorizonMixture out(n_comp);
    double max_logit = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < n_comp; ++c) max_logit = std::max(max_logit, raw[c * kParamsPerComponent + kWeightLogit]);
    double norm = 0.0;
    for (std::size_t c = 0; c < n_comp; ++c) {
        const double* r = raw.data() + c * kParamsPerComponent;
        GaussComponent& g = out[c];
        g.mean = {r[kMeanX], r[kMeanY]};
        g.sigma_x = std::exp(r[kSigmaX]) + cfg.sigma_offset + cfg.eps_sigma;
        g.sigma_y = std::exp(r[kSigmaY]) + cfg.sigma_offset + cfg.eps_sigma;
        g.rho = std::tanh(r[kRho]) * cfg.eps_rho;
        g.weight = std::exp(r[kWeightLogit] - max_logit);
        norm += g.weight;
    }
    for (GaussComponent& g : out) g.weight /= norm;
    return out;
}

void validate_mixture(const HorizonMixture& mixture) {
    if (mixture.empty()) fail(ErrorCode::InvalidArgument, "mixture has no components");
    double total = 0.0;
    for (const GaussComponent& g : mixture) {
        check_rho(g);
        if (!(g.weight >= 0.0) || !std::isfinite(g.mean.x) || !std::isfinite(g.mean.y) || !std::isfinite(g.sigma_x) ||
            !std::isfinite(g.sigma_y))
            fail(ErrorCode::InvalidArgument, "mixture component has invalid weight or non-finite parameters");
        total += g.weight;
    }
    if (std::abs(total - 1.0) > 1e-6) fail(ErrorCode::InvalidArgument, "mixture weights sum to " + std::to_string(total));
}

double density(const HorizonMixture& mixture, Vec2 p) {
    double acc = 0.0;
    for (const GaussComponent& g : mixture) {
        check_rho(g);
        acc += g.weight * std::exp(component_log_pdf(g, p));
    }
    return acc;
}

double log_density(const HorizonMixture& mixture, Vec2 p) {
    double terms[64];
    std::vector<double> spill;
    double* t = terms;
    if (mixture.size() > 64) {
        spill.resize(mixture.size());
        t = spill.data();
    }
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < mixture.size(); ++c) {
        check_rho(mixture[c]);
        t[c] = std::log(mixture[c].weight) + component_log_pdf(mixture[c], p);
        best = std::max(best, t[c]);
    }
    if (!std::isfinite(best)) return best;
    double sum = 0.0;
    for (std::size_t c = 0; c < mixture.size(); ++c) sum += std::exp(t[c] - best);
    return best + std::log(sum);
}

double nll(const MixtureForecast& forecast, std::span<const Vec2> gt) {
    if (gt.size() != forecast.horizons.size())
        fail(ErrorCode::HorizonMismatch, "forecast has " + std::to_string(forecast.horizons.size()) +
                                             " horizons but ground truth has " + std::to_string(gt.size()));
    double loss = 0.0;
    for (std::size_t h = 0; h < gt.size(); ++h) loss -= log_density(forecast.horizons[h], gt[h]);
    return loss;
}

double nll_raw_with_grad(std::span<const double> raw, const ActivationConfig& cfg, Vec2 gt,
                         std::span<double> grad_raw) {
    const std::size_t n_comp = raw.size() / kParamsPerComponent;
    // small fixed-size scratch; the head never has more than a handful of modes
    constexpr std::size_t kMaxComp = 32;
    if (n_comp == 0 || n_comp > kMaxComp || raw.size() % kParamsPerComponent != 0 || grad_raw.size() != raw.size())
        fail(ErrorCode::ModelShapeError, "unsupported raw mixture layout");

    double logit_max = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < n_comp; ++c) logit_max = std::max(logit_max, raw[c * kParamsPerComponent + kWeightLogit]);
    double logit_sum = 0.0;
    for (std::size_t c = 0; c < n_comp; ++c) logit_sum += std::exp(raw[c * kParamsPerComponent + kWeightLogit] - logit_max);
    const double log_norm = logit_max + std::log(logit_sum);

    double log_terms[kMaxComp];
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < n_comp; ++c) {
        const double* r = raw.data() + c * kParamsPerComponent;
        const double sx = std::exp(r[kSigmaX]) + cfg.sigma_offset + cfg.eps_sigma;
        const double sy = std::exp(r[kSigmaY]) + cfg.sigma_offset + cfg.eps_sigma;
        const double rho = std::tanh(r[kRho]) * cfg.eps_rho;
        const double omr = 1.0 - rho * rho;
        const double dx = (gt.x - r[kMeanX]) / sx;
        const double dy = (gt.y - r[kMeanY]) / sy;
        const double q = dx * dx + dy * dy - 2.0 * rho * dx * dy;
        const double log_pdf = -kLog2Pi - std::log(sx) - std::log(sy) - 0.5 * std::log(omr) - 0.5 * q / omr;
        log_terms[c] = (r[kWeightLogit] - log_norm) + log_pdf;
        best = std::max(best, log_terms[c]);
    }
    double sum = 0.0;
    for (std::size_t c = 0; c < n_comp; ++c) sum += std::exp(log_terms[c] - best);
    const double log_d = best + std::log(sum);

    for (std::size_t c = 0; c < n_comp; ++c) {
        const double* r = raw.data() + c * kParamsPerComponent;
        double* g = grad_raw.data() + c * kParamsPerComponent;
        const double posterior = std::exp(log_terms[c] - log_d);
        const double prior = std::exp(r[kWeightLogit] - log_norm);

        const double ex = std::exp(r[kSigmaX]);
        const double ey = std::exp(r[kSigmaY]);
        const double sx = ex + cfg.sigma_offset + cfg.eps_sigma;
        const double sy = ey + cfg.sigma_offset + cfg.eps_sigma;
        const double th = std::tanh(r[kRho]);
        const double rho = th * cfg.eps_rho;
        const double omr = 1.0 - rho * rho;
        const double dx = (gt.x - r[kMeanX]) / sx;
        const double dy = (gt.y - r[kMeanY]) / sy;
        const double q = dx * dx + dy * dy - 2.0 * rho * dx * dy;

        // d log N / d(param), then chain through the activations; loss = -log D
        const double d_mx = (dx - rho * dy) / (sx * omr);
        const double d_my = (dy - rho * dx) / (sy * omr);
        const double d_sx = -1.0 / sx + dx * (dx - rho * dy) / (sx * omr);
        const double d_sy = -1.0 / sy + dy * (dy - rho * dx) / (sy * omr);
        const double d_rho = rho / omr + dx * dy / omr - rho * q / (omr * omr);

        g[kMeanX] = -posterior * d_mx;
        g[kMeanY] = -posterior * d_my;
        g[kSigmaX] = -posterior * d_sx * ex;
        g[kSigmaY] = -posterior * d_sy * ey;
        g[kRho] = -posterior * d_rho * cfg.eps_rho * (1.0 - th * th);
        g[kWeightLogit] = prior - posterior;
    }
    return -log_d;
}

std::vector<simd::GaussCoeffs> to_coeffs(const HorizonMixture& mixture) {
    std::vector<simd::GaussCoeffs> out(mixture.size());
    double cum = 0.0;
    for (std::size_t c = 0; c < mixture.size(); ++c) {
        const GaussComponent& g = mixture[c];
        check_rho(g);
        const double omr = 1.0 - g.rho * g.rho;
        const double root = std::sqrt(omr);
        simd::GaussCoeffs& k = out[c];
        k.mean_x = g.mean.x;
        k.mean_y = g.mean.y;
        k.inv_sx = 1.0 / g.sigma_x;
        k.inv_sy = 1.0 / g.sigma_y;
        k.rho = g.rho;
        k.quad_scale = -0.5 / omr;
        k.norm = g.weight / (2.0 * std::numbers::pi * g.sigma_x * g.sigma_y * root);
        k.l11 = g.sigma_x;
        k.l21 = g.rho * g.sigma_y;
        k.l22 = g.sigma_y * root;
        cum += g.weight;
        k.cum_weight = cum;
    }
    if (!out.empty()) out.back().cum_weight = std::max(out.back().cum_weight, 1.0);
    return out;
}

std::vector<double> density_batch(const HorizonMixture& mixture, const PointCloud& points) {
    std::vector<double> out(points.size());
    const auto coeffs = to_coeffs(mixture);
    density_batch(coeffs, points, out);
    return out;
}

void density_batch(std::span<const simd::GaussCoeffs> coeffs, const PointCloud& points, std::span<double> out) {
    simd::mixture_density(coeffs, points.xs, points.ys, out);
}

NormalBank make_normal_bank(std::size_t n, std::uint64_t seed) {
    NormalBank bank;
    bank.u.resize(n);
    bank.z1.resize(n);
    bank.z2.resize(n);
    Engine engine = make_engine(seed);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (std::size_t i = 0; i < n; ++i) {
        bank.u[i] = uniform(engine);
        bank.z1[i] = normal(engine);
        bank.z2[i] = normal(engine);
    }
    return bank;
}

void sample(std::span<const simd::GaussCoeffs> coeffs, const NormalBank& bank, PointCloud& out) {
    out.xs.resize(bank.size());
    out.ys.resize(bank.size());
    simd::mixture_draw(coeffs, bank.u, bank.z1, bank.z2, out.xs, out.ys);
}

PointCloud sample(const HorizonMixture& mixture, const NormalBank& bank) {
    PointCloud out;
    const auto coeffs = to_coeffs(mixture);
    sample(coeffs, bank, out);
    return out;
}

PointCloud sample(const HorizonMixture& mixture, std::size_t n, std::uint64_t seed) {
    return sample(mixture, make_normal_bank(n, seed));
}

}  // namespace trajpred
