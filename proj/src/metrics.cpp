#include "trajpred/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "trajpred/error.hpp"
#include "trajpred/rng.hpp"
#include "trajpred/trajectory_csv.hpp"
#include "trajpred/uncertainty.hpp"

namespace trajpred {

std::vector<double> default_level_grid() {
    std::vector<double> grid;
    for (int k = 1; k <= 99; ++k) grid.push_back(k / 100.0);
    return grid;
}

std::vector<double> CalibrationCurve::pooled() const {
    std::vector<double> out(levels.size(), 0.0);
    double total = 0.0;
    for (std::size_t h = 0; h < observed.size(); ++h) {
        const double w = static_cast<double>(counts[h]);
        total += w;
        for (std::size_t k = 0; k < levels.size(); ++k) out[k] += w * observed[h][k];
    }
    if (total > 0.0)
        for (double& v : out) v /= total;
    return out;
}

std::vector<std::vector<double>> estimate_confidence_levels(std::span<const MixtureForecast> forecasts,
                                                            std::span<const std::vector<Vec2>> ground_truth,
                                                            std::size_t n_samples, std::uint64_t seed) {
    if (forecasts.size() != ground_truth.size())
        fail(ErrorCode::InvalidArgument, "forecast and ground-truth counts differ");
    if (forecasts.empty()) return {};
    const std::size_t m = forecasts.front().num_horizons();
    std::vector<std::vector<double>> out(m, std::vector<double>(forecasts.size()));
    ThresholdWorkspace ws;
    for (std::size_t i = 0; i < forecasts.size(); ++i) {
        if (forecasts[i].num_horizons() != m || ground_truth[i].size() != m)
            fail(ErrorCode::HorizonMismatch, "pair " + std::to_string(i) + " does not have " + std::to_string(m) + " horizons");
        const std::uint64_t pair_seed = derive_seed(seed, i);
        for (std::size_t h = 0; h < m; ++h) {
            const NormalBank bank = make_normal_bank(n_samples, derive_seed(pair_seed, h));
            out[h][i] = confidence_level(forecasts[i].horizons[h], bank, ground_truth[i][h], ws);
        }
    }
    return out;
}

CalibrationCurve curve_from_confidence_levels(const std::vector<std::vector<double>>& confidence_levels,
                                              std::span<const double> levels, double dt) {
    CalibrationCurve curve;
    curve.dt = dt;
    curve.levels.assign(levels.begin(), levels.end());
    if (!std::is_sorted(curve.levels.begin(), curve.levels.end()))
        fail(ErrorCode::InvalidArgument, "level grid must be ascending");
    for (const std::vector<double>& cls : confidence_levels) {
        if (cls.empty()) fail(ErrorCode::InvalidArgument, "horizon without pairs");
        std::vector<double> sorted = cls;
        std::sort(sorted.begin(), sorted.end());
        std::vector<double> f(levels.size());
        for (std::size_t k = 0; k < levels.size(); ++k) {
            // CL values are multiples of 1/N; the slack absorbs rounding of the grid
            const auto inside = std::upper_bound(sorted.begin(), sorted.end(), levels[k] + 1e-12) - sorted.begin();
            f[k] = static_cast<double>(inside) / static_cast<double>(sorted.size());
        }
        curve.observed.push_back(std::move(f));
        curve.counts.push_back(sorted.size());
    }
    return curve;
}

CalibrationCurve calibration_curve(std::span<const MixtureForecast> forecasts,
                                   std::span<const std::vector<Vec2>> ground_truth, const CalibrationOptions& opts) {
    if (forecasts.size() < opts.min_pairs)
        fail(ErrorCode::InvalidArgument, "calibration needs at least " + std::to_string(opts.min_pairs) + " pairs, got " +
                                             std::to_string(forecasts.size()));
    const auto cls = estimate_confidence_levels(forecasts, ground_truth, opts.n_samples, opts.seed);
    return curve_from_confidence_levels(cls, opts.levels, forecasts.front().dt);
}

ReliabilityScores reliability_scores(const CalibrationCurve& curve) {
    double worst = 0.0;
    double sum = 0.0;
    std::size_t n = 0;
    for (const std::vector<double>& f : curve.observed)
        for (std::size_t k = 0; k < curve.levels.size(); ++k) {
            const double dev = std::abs(curve.levels[k] - f[k]);
            worst = std::max(worst, dev);
            sum += dev;
            ++n;
        }
    if (n == 0) fail(ErrorCode::InvalidArgument, "empty calibration curve");
    return {1.0 - sum / static_cast<double>(n), 1.0 - worst};
}

std::vector<std::vector<Vec2>> sample_hypotheses(const MixtureForecast& forecast, std::size_t k, std::uint64_t seed,
                                                 ComponentSharing sharing) {
    if (k < 1) fail(ErrorCode::InvalidArgument, "k must be >= 1");
    const std::size_t m = forecast.num_horizons();
    std::vector<std::vector<Vec2>> hyps(k, std::vector<Vec2>(m));
    NormalBank shared;
    if (sharing == ComponentSharing::per_hypothesis) shared = make_normal_bank(k, derive_seed(seed, "shared-component"));
    for (std::size_t h = 0; h < m; ++h) {
        NormalBank bank = make_normal_bank(k, derive_seed(seed, h));
        if (sharing == ComponentSharing::per_hypothesis) bank.u = shared.u;
        const PointCloud pts = sample(forecast.horizons[h], bank);
        for (std::size_t j = 0; j < k; ++j) hyps[j][h] = pts[j];
    }
    return hyps;
}

DisplacementErrors min_ade_fde(std::span<const std::vector<Vec2>> hypotheses, std::span<const Vec2> ground_truth) {
    if (hypotheses.empty()) fail(ErrorCode::InvalidArgument, "no hypotheses");
    if (ground_truth.empty()) fail(ErrorCode::InvalidArgument, "empty ground truth");
    DisplacementErrors best{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
    for (const std::vector<Vec2>& hyp : hypotheses) {
        if (hyp.size() != ground_truth.size()) fail(ErrorCode::HorizonMismatch, "hypothesis length differs from ground truth");
        double sum = 0.0;
        for (std::size_t h = 0; h < hyp.size(); ++h)
            sum += std::hypot(hyp[h].x - ground_truth[h].x, hyp[h].y - ground_truth[h].y);
        const double fde = std::hypot(hyp.back().x - ground_truth.back().x, hyp.back().y - ground_truth.back().y);
        best.min_ade = std::min(best.min_ade, sum / static_cast<double>(hyp.size()));
        best.min_fde = std::min(best.min_fde, fde);
    }
    return best;
}

DisplacementErrors min_ade_fde(const MixtureForecast& forecast, std::span<const Vec2> ground_truth, std::size_t k,
                               std::uint64_t seed, ComponentSharing sharing) {
    if (ground_truth.size() != forecast.num_horizons())
        fail(ErrorCode::HorizonMismatch, "ground truth length differs from forecast horizons");
    const auto hyps = sample_hypotheses(forecast, k, seed, sharing);
    return min_ade_fde(hyps, ground_truth);
}

void write_calibration_csv(std::ostream& out, const CalibrationCurve& curve) {
    out << "horizon_s,one_minus_alpha,f_o,count\n";
    for (std::size_t h = 0; h < curve.observed.size(); ++h)
        for (std::size_t k = 0; k < curve.levels.size(); ++k)
            out << format_double(std::round(static_cast<double>(h + 1) * curve.dt * 1e9) / 1e9) << ',' << format_double(curve.levels[k]) << ','
                << format_double(curve.observed[h][k]) << ',' << curve.counts[h] << '\n';
}

void write_scores_csv(std::ostream& out, std::span<const ScoreRow> rows, bool with_input_horizon) {
    if (with_input_horizon) out << "input_horizon_s,";
    out << "r_avg,r_min,s68,s95,min_ade_k,min_fde_k,k\n";
    for (const ScoreRow& r : rows) {
        if (with_input_horizon) out << format_double(r.input_horizon_s) << ',';
        out << format_double(r.reliability.r_avg) << ',' << format_double(r.reliability.r_min) << ','
            << format_double(r.s68) << ',' << format_double(r.s95) << ',' << format_double(r.displacement.min_ade) << ','
            << format_double(r.displacement.min_fde) << ',' << r.k << '\n';
    }
}

}  // namespace trajpred
