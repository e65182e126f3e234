#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "trajpred/mdn.hpp"

namespace trajpred {

/// The 99-point grid {0.01, 0.02, ..., 0.99} of confidence levels 1 - alpha.
std::vector<double> default_level_grid();

/// Observed frequency f_o(1 - alpha) per horizon: the fraction of ground-truth
/// points whose estimated confidence level is <= 1 - alpha.
struct CalibrationCurve {
    double dt = 0.1;
    std::vector<double> levels;                 // ascending 1 - alpha grid
    std::vector<std::vector<double>> observed;  // [horizon][level]
    std::vector<std::size_t> counts;            // pairs per horizon

    std::size_t num_horizons() const { return observed.size(); }
    /// Count-weighted average over horizons.
    std::vector<double> pooled() const;
};

struct CalibrationOptions {
    std::size_t n_samples = 10'000;
    std::uint64_t seed = 0;
    std::vector<double> levels = default_level_grid();
    std::size_t min_pairs = 30;
};

/// Estimated confidence level of every ground-truth point, [horizon][pair].
/// Pair i, horizon h draws from substream derive_seed(derive_seed(seed, i), h).
std::vector<std::vector<double>> estimate_confidence_levels(std::span<const MixtureForecast> forecasts,
                                                            std::span<const std::vector<Vec2>> ground_truth,
                                                            std::size_t n_samples, std::uint64_t seed);

CalibrationCurve curve_from_confidence_levels(const std::vector<std::vector<double>>& confidence_levels,
                                              std::span<const double> levels, double dt);

/// Throws HorizonMismatch if any pair disagrees on the number of horizons and
/// InvalidArgument below opts.min_pairs pairs.
CalibrationCurve calibration_curve(std::span<const MixtureForecast> forecasts,
                                   std::span<const std::vector<Vec2>> ground_truth, const CalibrationOptions& opts);

struct ReliabilityScores {
    double r_avg = 0.0;
    double r_min = 0.0;
};

/// r_min = 1 - max |(1 - alpha) - f_o|, r_avg = 1 - mean |(1 - alpha) - f_o| over horizons and grid.
ReliabilityScores reliability_scores(const CalibrationCurve& curve);

enum class ComponentSharing {
    per_horizon,     // every horizon picks its own component
    per_hypothesis,  // one uniform per hypothesis drives the component choice at all horizons
};

/// k trajectory hypotheses [hypothesis][horizon], deterministic per seed; the
/// first j hypotheses do not depend on k.
std::vector<std::vector<Vec2>> sample_hypotheses(const MixtureForecast& forecast, std::size_t k, std::uint64_t seed,
                                                 ComponentSharing sharing = ComponentSharing::per_horizon);

struct DisplacementErrors {
    double min_ade = 0.0;
    double min_fde = 0.0;
};

DisplacementErrors min_ade_fde(std::span<const std::vector<Vec2>> hypotheses, std::span<const Vec2> ground_truth);
DisplacementErrors min_ade_fde(const MixtureForecast& forecast, std::span<const Vec2> ground_truth, std::size_t k,
                               std::uint64_t seed, ComponentSharing sharing = ComponentSharing::per_horizon);

/// Columns horizon_s,one_minus_alpha,f_o,count.
void write_calibration_csv(std::ostream& out, const CalibrationCurve& curve);

struct ScoreRow {
    double input_horizon_s = 0.0;
    ReliabilityScores reliability;
    double s68 = 0.0;
    double s95 = 0.0;
    DisplacementErrors displacement;
    std::size_t k = 20;
};

/// Columns r_avg,r_min,s68,s95,min_ade_k,min_fde_k,k; with_input_horizon
/// prepends input_horizon_s.
void write_scores_csv(std::ostream& out, std::span<const ScoreRow> rows, bool with_input_horizon = false);

}  // namespace trajpred
