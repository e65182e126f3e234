#pragma once

// Bivariate Gaussian mixture math used by the forecaster head: activations,
// densities, the negative log-likelihood and sampling.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "trajpred/geometry.hpp"
#include "trajpred/simd/kernels.hpp"

namespace trajpred {

/// Raw head outputs per component, in this order.
inline constexpr std::size_t kParamsPerComponent = 6;
enum RawSlot : std::size_t { kMeanX = 0, kMeanY, kSigmaX, kSigmaY, kRho, kWeightLogit };

struct ActivationConfig {
    double eps_sigma = 1e-6;
    double eps_rho = 0.999;
    // Additive floor on every standard deviation: sigma = exp(o) + sigma_offset + eps_sigma.
    double sigma_offset = 1.0;
};

struct GaussComponent {
    double weight = 1.0;
    Vec2 mean;
    double sigma_x = 1.0;
    double sigma_y = 1.0;
    double rho = 0.0;
};

using HorizonMixture = std::vector<GaussComponent>;

/// One mixture per forecast step t + h * dt, h = 1..m.
struct MixtureForecast {
    double dt = 0.1;
    std::vector<HorizonMixture> horizons;

    std::size_t num_horizons() const { return horizons.size(); }
};

/// Structure-of-arrays point cloud.
struct PointCloud {
    std::vector<double> xs;
    std::vector<double> ys;

    std::size_t size() const { return xs.size(); }
    Vec2 operator[](std::size_t i) const { return {xs[i], ys[i]}; }
};

/// Turns 6M raw values into M components. Throws InvalidLogits on non-finite input.
HorizonMixture activate(std::span<const double> raw, const ActivationConfig& cfg);

/// Throws DegenerateCovariance for |rho| >= 1 or non-positive sigma, and
/// InvalidArgument for weights that are negative or do not sum to 1.
void validate_mixture(const HorizonMixture& mixture);

double density(const HorizonMixture& mixture, Vec2 p);

/// log D(p) via log-sum-exp over components.
double log_density(const HorizonMixture& mixture, Vec2 p);

/// -sum_h log D_h(gt_h). Throws HorizonMismatch when the lengths differ.
double nll(const MixtureForecast& forecast, std::span<const Vec2> gt);

/// -log D(gt) of the mixture produced by `raw`, and its gradient with respect
/// to `raw` written into `grad_raw` (same size as raw).
double nll_raw_with_grad(std::span<const double> raw, const ActivationConfig& cfg, Vec2 gt,
                         std::span<double> grad_raw);

std::vector<simd::GaussCoeffs> to_coeffs(const HorizonMixture& mixture);

/// Densities at many points through the active SIMD kernel.
std::vector<double> density_batch(const HorizonMixture& mixture, const PointCloud& points);
void density_batch(std::span<const simd::GaussCoeffs> coeffs, const PointCloud& points, std::span<double> out);

/// Pre-drawn randomness for mixture sampling: one uniform (component choice)
/// and two standard normals per draw, generated in that order per draw so the
/// first k draws of a bank of size n equal a bank of size k.
struct NormalBank {
    std::vector<double> u;
    std::vector<double> z1;
    std::vector<double> z2;

    std::size_t size() const { return u.size(); }
};

NormalBank make_normal_bank(std::size_t n, std::uint64_t seed);

/// Draws with a given bank (categorical component choice, then mean + L z).
PointCloud sample(const HorizonMixture& mixture, const NormalBank& bank);
void sample(std::span<const simd::GaussCoeffs> coeffs, const NormalBank& bank, PointCloud& out);

/// n draws, deterministic in the seed.
PointCloud sample(const HorizonMixture& mixture, std::size_t n, std::uint64_t seed);

}  // namespace trajpred
