#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>
#include <sstream>

#include "oracles/oracles.hpp"
#include "test_support.hpp"
#include "trajpred/error.hpp"
#include "trajpred/metrics.hpp"

using namespace trajpred;
using testing_support::isotropic;

namespace {

struct Pairs {
    std::vector<MixtureForecast> forecasts;
    std::vector<std::vector<Vec2>> gt;
};

// Forecasts of random mixtures with ground truth drawn from those same mixtures.
Pairs self_consistent_pairs(std::size_t n_pairs, std::size_t horizons, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    Pairs out;
    for (std::size_t i = 0; i < n_pairs; ++i) {
        MixtureForecast f;
        std::vector<Vec2> gt;
        for (std::size_t h = 0; h < horizons; ++h) {
            f.horizons.push_back(testing_support::random_mixture(rng, 3));
            gt.push_back(sample(f.horizons.back(), 1, rng())[0]);
        }
        out.forecasts.push_back(std::move(f));
        out.gt.push_back(std::move(gt));
    }
    return out;
}

CalibrationCurve synthetic_curve(std::vector<std::vector<double>> observed) {
    CalibrationCurve c;
    c.levels = default_level_grid();
    c.observed = std::move(observed);
    c.counts.assign(c.observed.size(), 100);
    return c;
}

}  // namespace

TEST_CASE("default grid") {
    const auto grid = default_level_grid();
    REQUIRE(grid.size() == 99);
    CHECK(grid.front() == doctest::Approx(0.01));
    CHECK(grid[49] == doctest::Approx(0.5));
    CHECK(grid.back() == doctest::Approx(0.99));
}

TEST_CASE("self-consistent data is calibrated") {
    const Pairs pairs = self_consistent_pairs(1000, 6, 42);
    CalibrationOptions opts;
    opts.seed = 7;
    const CalibrationCurve curve = calibration_curve(pairs.forecasts, pairs.gt, opts);
    REQUIRE(curve.num_horizons() == 6);
    const auto pooled = curve.pooled();
    double worst_pooled = 0.0, worst_horizon = 0.0;
    for (std::size_t k = 0; k < curve.levels.size(); ++k) {
        worst_pooled = std::max(worst_pooled, std::abs(pooled[k] - curve.levels[k]));
        for (const auto& row : curve.observed) worst_horizon = std::max(worst_horizon, std::abs(row[k] - curve.levels[k]));
    }
    MESSAGE("max deviation pooled " << worst_pooled << ", single horizon " << worst_horizon);
    CHECK(worst_pooled <= 0.03);
    // a single horizon of 1000 pairs is an empirical CDF: 99% Kolmogorov band
    CHECK(worst_horizon <= 1.63 / std::sqrt(1000.0));
    const ReliabilityScores s = reliability_scores(curve);
    CHECK(s.r_avg >= 0.97);
    CHECK(s.r_min >= 0.93);
    for (const auto& row : curve.observed)
        for (std::size_t k = 1; k < row.size(); ++k) CHECK(row[k] >= row[k - 1]);
}

TEST_CASE("inflated spread reads as underconfident") {
    Pairs pairs = self_consistent_pairs(300, 2, 5);
    for (auto& f : pairs.forecasts)
        for (auto& mix : f.horizons)
            for (auto& g : mix) {
                g.sigma_x *= 3.0;
                g.sigma_y *= 3.0;
            }
    CalibrationOptions opts;
    opts.n_samples = 2000;
    const CalibrationCurve curve = calibration_curve(pairs.forecasts, pairs.gt, opts);
    const auto pooled = curve.pooled();
    CHECK(pooled[49] > 0.5 + 0.1);
}

TEST_CASE("ground truth at the mode is always inside") {
    Pairs pairs;
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-5.0, 5.0);
    for (int i = 0; i < 40; ++i) {
        const Vec2 mean{u(rng), u(rng)};
        pairs.forecasts.push_back({0.1, {isotropic(1.3, mean)}});
        pairs.gt.push_back({mean});
    }
    CalibrationOptions opts;
    opts.n_samples = 1000;
    const CalibrationCurve curve = calibration_curve(pairs.forecasts, pairs.gt, opts);
    for (double f : curve.observed[0]) CHECK(f == 1.0);
}

TEST_CASE("calibration input validation") {
    Pairs pairs = self_consistent_pairs(30, 2, 1);
    pairs.gt[3].pop_back();
    CalibrationOptions opts;
    opts.n_samples = 200;
    try {
        calibration_curve(pairs.forecasts, pairs.gt, opts);
        FAIL("expected HorizonMismatch");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::HorizonMismatch);
    }
    const Pairs few = self_consistent_pairs(10, 2, 1);
    CHECK_THROWS_AS(calibration_curve(few.forecasts, few.gt, opts), Error);
}

TEST_CASE("reliability score constructions") {
    const auto grid = default_level_grid();
    const ReliabilityScores diag = reliability_scores(synthetic_curve({grid, grid}));
    CHECK(diag.r_avg == 1.0);
    CHECK(diag.r_min == 1.0);

    std::vector<double> shifted(grid.size());
    for (std::size_t k = 0; k < grid.size(); ++k) shifted[k] = std::min(1.0, grid[k] + 0.1);
    const ReliabilityScores off = reliability_scores(synthetic_curve({shifted}));
    CHECK(off.r_min == doctest::Approx(0.9).epsilon(1e-12));
    CHECK(off.r_avg > 0.9);

    std::vector<double> flat(grid.size(), 1.0);
    const ReliabilityScores worst = reliability_scores(synthetic_curve({flat}));
    CHECK(worst.r_min == doctest::Approx(0.01));
    CHECK(worst.r_avg >= 0.0);
}

TEST_CASE("published-scale scores round-trip through the scores CSV") {
    // one horizon: a single deviation of 0.121 and 98 of x give mean 0.037
    const auto grid = default_level_grid();
    const double x = (99.0 * 0.037 - 0.121) / 98.0;
    std::vector<double> f(grid.size());
    for (std::size_t k = 0; k < grid.size(); ++k) f[k] = grid[k] < 0.5 ? grid[k] + x : grid[k] - x;
    f[49] = grid[49] + 0.121;
    const ReliabilityScores s = reliability_scores(synthetic_curve({f}));
    CHECK(s.r_avg == doctest::Approx(0.963).epsilon(1e-12));
    CHECK(s.r_min == doctest::Approx(0.879).epsilon(1e-12));

    ScoreRow row;
    row.reliability = {0.963, 0.879};
    row.s68 = 1.25;
    row.s95 = 4.5;
    row.displacement = {0.31, 0.62};
    std::ostringstream out;
    const std::vector<ScoreRow> rows{row};
    write_scores_csv(out, rows);
    CHECK(out.str() == "r_avg,r_min,s68,s95,min_ade_k,min_fde_k,k\n0.963,0.879,1.25,4.5,0.31,0.62,20\n");
    row.input_horizon_s = 0.5;
    std::ostringstream with;
    const std::vector<ScoreRow> rows2{row};
    write_scores_csv(with, rows2, true);
    CHECK(with.str().starts_with("input_horizon_s,r_avg,"));
    CHECK(with.str().find("\n0.5,0.963,") != std::string::npos);
}

TEST_CASE("calibration csv layout") {
    CalibrationCurve c;
    c.dt = 0.1;
    c.levels = {0.25, 0.5};
    c.observed = {{0.2, 0.5}, {0.3, 0.6}};
    c.counts = {10, 12};
    std::ostringstream out;
    write_calibration_csv(out, c);
    CHECK(out.str() ==
          "horizon_s,one_minus_alpha,f_o,count\n0.1,0.25,0.2,10\n0.1,0.5,0.5,10\n0.2,0.25,0.3,12\n0.2,0.5,0.6,12\n");
}

TEST_CASE("min ADE/FDE of a floored Gaussian matches the Monte-Carlo oracle") {
    const double sigma = 1.0 + 1e-6;  // activation floor with the default offset
    const std::vector<double> oracle_min = oracle::min_radius_of_k(sigma, 20, 1'000'000, 123);
    double oracle_mean = 0.0;
    for (double v : oracle_min) oracle_mean += v;
    oracle_mean /= static_cast<double>(oracle_min.size());

    const Vec2 gt{1.5, -0.5};
    const MixtureForecast f{0.1, {isotropic(sigma, gt)}};
    const std::vector<Vec2> truth{gt};
    const int runs = 4000;
    double mean = 0.0, sq = 0.0;
    for (int s = 0; s < runs; ++s) {
        const DisplacementErrors e = min_ade_fde(f, truth, 20, static_cast<std::uint64_t>(s));
        CHECK(e.min_ade == e.min_fde);
        CHECK(e.min_fde <= oracle_min.back());
        mean += e.min_fde;
        sq += e.min_fde * e.min_fde;
    }
    mean /= runs;
    const double sd = std::sqrt(sq / runs - mean * mean);
    MESSAGE("library mean " << mean << ", oracle mean " << oracle_mean);
    CHECK(std::abs(mean - oracle_mean) < 4.0 * sd / std::sqrt(static_cast<double>(runs)));
}

TEST_CASE("displacement error properties") {
    std::mt19937_64 rng(2);
    MixtureForecast f;
    for (int h = 0; h < 5; ++h) f.horizons.push_back(testing_support::random_mixture(rng, 3));
    std::vector<Vec2> gt;
    for (int h = 0; h < 5; ++h) gt.push_back({0.3 * h, 0.1});

    auto hyps = sample_hypotheses(f, 20, 9);
    REQUIRE(hyps.size() == 20);
    REQUIRE(hyps[0].size() == 5);
    hyps.push_back(gt);
    const DisplacementErrors zero = min_ade_fde(hyps, gt);
    CHECK(zero.min_ade == 0.0);
    CHECK(zero.min_fde == 0.0);

    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const DisplacementErrors one = min_ade_fde(f, gt, 1, seed);
        const DisplacementErrors twenty = min_ade_fde(f, gt, 20, seed);
        CHECK(twenty.min_ade <= one.min_ade);
        CHECK(twenty.min_fde <= one.min_fde);
    }
    const auto a = sample_hypotheses(f, 20, 9);
    const auto b = sample_hypotheses(f, 5, 9);
    for (std::size_t j = 0; j < 5; ++j) CHECK(a[j] == b[j]);
}

TEST_CASE("per-hypothesis component sharing keeps one mode along a hypothesis") {
    HorizonMixture two = isotropic(0.1, {0.0, 100.0});
    two.push_back(isotropic(0.1, {0.0, -100.0})[0]);
    two[0].weight = two[1].weight = 0.5;
    const MixtureForecast f{0.1, std::vector<HorizonMixture>(6, two)};
    const auto shared = sample_hypotheses(f, 50, 4, ComponentSharing::per_hypothesis);
    for (const auto& hyp : shared)
        for (const Vec2& p : hyp) CHECK((p.y > 0) == (hyp[0].y > 0));
    const auto independent = sample_hypotheses(f, 50, 4, ComponentSharing::per_horizon);
    bool mixed = false;
    for (const auto& hyp : independent)
        for (const Vec2& p : hyp) mixed = mixed || ((p.y > 0) != (hyp[0].y > 0));
    CHECK(mixed);
}
