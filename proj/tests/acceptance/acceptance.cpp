// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits nonzero if any fails. Pass criterion numbers as arguments to run a
// subset, e.g. `acceptance 2 3`.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <numbers>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "oracles/gradcheck.hpp"
#include "oracles/oracles.hpp"
#include "test_support.hpp"
#include "trajpred/checkpoint.hpp"
#include "trajpred/cli/commands.hpp"
#include "trajpred/cli/report.hpp"
#include "trajpred/data.hpp"
#include "trajpred/geometry.hpp"
#include "trajpred/mdn.hpp"
#include "trajpred/metrics.hpp"
#include "trajpred/model.hpp"
#include "trajpred/rng.hpp"
#include "trajpred/simd/kernels.hpp"
#include "trajpred/train.hpp"
#include "trajpred/trajectory_csv.hpp"
#include "trajpred/uncertainty.hpp"

using namespace trajpred;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------------------
// 1. gradients

Outcome gradients() {
    const auto t0 = std::chrono::steady_clock::now();
    double worst = 0.0;
    std::string worst_name;
    for (const std::uint64_t seed : {1, 2, 3}) {
        const auto setup = oracle::tiny_gradcheck_setup(seed);
        for (const auto& e : oracle::gradient_check(setup.params, setup.batch))
            if (!(e.rel_error <= worst)) {
                worst = e.rel_error;
                worst_name = e.name;
            }
    }
    const double elapsed = seconds_since(t0);
    return {worst < 1e-4 && elapsed < 30.0,
            "worst tensor " + worst_name + " rel error " + fmt("%.2e", worst) + " (limit 1e-4), 3 seeds, " +
                fmt("%.1f", elapsed) + " s (limit 30 s)"};
}

// ---------------------------------------------------------------------------
// 2. confidence levels of an isotropic Gaussian

Outcome confidence_levels() {
    const auto t0 = std::chrono::steady_clock::now();
    double worst = 0.0;
    int n = 0;
    // unit and wider isotropic Gaussians, off-origin; radius is Mahalanobis
    for (const auto& [sigma, mean] : {std::pair{1.0, Vec2{0.0, 0.0}}, std::pair{2.5, Vec2{3.0, -1.0}}})
        for (const double r : {0.5, 1.0, 2.0, 3.0})
            for (int dir = 0; dir < 4; ++dir) {
                const double a = 0.3 + dir * std::numbers::pi / 2.0;
                const Vec2 p{mean.x + r * sigma * std::cos(a), mean.y + r * sigma * std::sin(a)};
                const double cl =
                    confidence_level(testing_support::isotropic(sigma, mean), p, 10'000, derive_seed(77, n++));
                worst = std::max(worst, std::abs(cl - oracle::isotropic_mass_within(r)));
            }
    const double elapsed = seconds_since(t0);
    return {worst <= 0.02 && elapsed < 5.0, "max |CL - (1 - exp(-r^2/2))| " + fmt("%.4f", worst) + " over " +
                                                std::to_string(n) + " points (limit 0.02), " +
                                                fmt("%.2f", elapsed) + " s (limit 5 s)"};
}

// ---------------------------------------------------------------------------
// 3. confidence-set areas

Outcome set_areas() {
    const auto t0 = std::chrono::steady_clock::now();
    std::string detail;
    bool ok = true;
    for (const double q : {0.68, 0.95}) {
        const ConfidenceSet set = confidence_set(testing_support::isotropic(1.0), q, 10'000, 0.05, derive_seed(5, q > 0.9));
        const double expected = oracle::isotropic_set_area(q, 1.0);
        const double rel = std::abs(set.area - expected) / expected;
        ok = ok && rel <= 0.05;
        detail += fmt("%.0f%%: ", q * 100) + fmt("%.3f", set.area) + " vs " + fmt("%.3f", expected) + " m^2 (" +
                  fmt("%.2f", rel * 100) + "%); ";
    }
    const double elapsed = seconds_since(t0);
    return {ok && elapsed < 10.0, detail + "limit 5%, " + fmt("%.2f", elapsed) + " s (limit 10 s)"};
}

// ---------------------------------------------------------------------------
// 4. calibration on ground truth drawn from the forecasts themselves

Outcome self_consistency() {
    const auto t0 = std::chrono::steady_clock::now();
    ModelConfig mc;
    mc.hidden_dim = 16;
    mc.num_layers = 2;
    mc.num_components = 3;
    mc.num_horizons = 12;
    mc.activation.sigma_offset = 0.05;
    const ModelParams params = ModelParams::xavier(mc, 404);
    std::mt19937_64 rng(405);
    std::vector<EgoSample> inputs;
    for (int i = 0; i < 1000; ++i) inputs.push_back(testing_support::random_sample(rng, 16, 0));
    std::vector<MixtureForecast> forecasts = forward(params, inputs);
    std::vector<std::vector<Vec2>> truth(forecasts.size());
    for (std::size_t i = 0; i < forecasts.size(); ++i)
        for (std::size_t h = 0; h < mc.num_horizons; ++h)
            truth[i].push_back(sample(forecasts[i].horizons[h], 1, derive_seed(derive_seed(406, i), h))[0]);

    CalibrationOptions co;
    co.n_samples = 10'000;
    co.seed = 407;
    const CalibrationCurve curve = calibration_curve(forecasts, truth, co);
    const ReliabilityScores rs = reliability_scores(curve);
    const std::vector<double> pooled = curve.pooled();
    double pooled_dev = 0.0;
    for (std::size_t j = 0; j < pooled.size(); ++j) pooled_dev = std::max(pooled_dev, std::abs(pooled[j] - curve.levels[j]));

    // three times wider forecasts around the same truth: every point looks too central
    for (auto& f : forecasts)
        for (auto& mix : f.horizons)
            for (auto& g : mix) {
                g.sigma_x *= 3.0;
                g.sigma_y *= 3.0;
            }
    const std::vector<double> wide = calibration_curve(forecasts, truth, co).pooled();
    double min_gap = 1.0;
    for (std::size_t j = 0; j < wide.size(); ++j) min_gap = std::min(min_gap, wide[j] - curve.levels[j]);

    const double elapsed = seconds_since(t0);
    const bool ok = rs.r_avg >= 0.97 && rs.r_min >= 0.93 && pooled_dev <= 0.03 && min_gap > 0.0 && elapsed < 120.0;
    return {ok, "r_avg " + fmt("%.4f", rs.r_avg) + " (>= 0.97), r_min " + fmt("%.4f", rs.r_min) +
                    " (>= 0.93), max pooled deviation " + fmt("%.4f", pooled_dev) +
                    " (<= 0.03); sigma x3 curve above diagonal by at least " + fmt("%.4f", min_gap) + ", " +
                    fmt("%.1f", elapsed) + " s (limit 120 s)"};
}

// ---------------------------------------------------------------------------
// 5-7. a model trained on synthetic motion

struct TrainedRun {
    ModelParams params;
    std::vector<EgoSample> train_windows;
    std::vector<EgoSample> test_windows;
    double train_seconds = 0.0;
};

constexpr std::size_t kInput = 32;
constexpr std::size_t kForecast = 48;

ModelConfig synthetic_model_config() {
    ModelConfig mc;
    mc.hidden_dim = 32;
    mc.num_layers = 4;
    mc.num_components = 3;
    mc.num_horizons = kForecast;
    mc.dt = 0.1;
    // a 1 m floor on every sigma cannot be calibrated at 0.1 s horizons
    mc.activation.sigma_offset = 0.0;
    return mc;
}

TrainedRun train_synthetic() {
    SynthConfig sc;
    sc.n_tracks = 600;
    sc.duration_s = 10.0;
    sc.mix = {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 0.0};  // constant velocity, turning, stop-and-go
    sc.noise_sigma = 0.05;
    sc.seed = 2024;
    const std::vector<Track> tracks = generate_synthetic(sc);
    std::vector<Track> train_tracks, eval_tracks, test_tracks;
    for (const Track& t : tracks) {
        const double u = split_hash(t.id);
        (u < 0.7 ? train_tracks : u < 0.8 ? eval_tracks : test_tracks).push_back(t);
    }
    constexpr std::size_t stride = 4;
    TrainedRun run;
    run.train_windows = build_samples(train_tracks, kInput, kForecast, stride);
    run.test_windows = build_samples(test_tracks, kInput, kForecast, stride);
    const std::vector<EgoSample> eval_windows = build_samples(eval_tracks, kInput, kForecast, stride);

    TrainConfig tc;
    tc.epochs = 500;
    tc.batch_size = 128;
    tc.lr_init = 1e-3;
    tc.lr_final = 1e-7;
    tc.input_lengths = {5, 8, 12, 16, 20, 24, 28, 32};
    tc.seed = 2025;
    const auto t0 = std::chrono::steady_clock::now();
    const auto progress = [&](const EpochLog& e) {
        if (e.epoch % 50 == 0 || e.epoch + 1 == tc.epochs)
            std::cerr << "  epoch " << e.epoch << " train " << fmt("%.4f", e.train_loss) << " eval "
                      << fmt("%.4f", e.eval_loss) << " (" << fmt("%.0f", seconds_since(t0)) << " s)\n";
    };
    run.params = train(ModelParams::xavier(synthetic_model_config(), 2026), run.train_windows, tc, eval_windows,
                       progress)
                     .params;
    run.train_seconds = seconds_since(t0);

    // kept for inspection after the run
    const std::filesystem::path keep = std::filesystem::temp_directory_path() / "trajpred_acceptance";
    std::filesystem::create_directories(keep);
    save_checkpoint(run.params, keep / "synthetic.ckpt");
    write_tracks_csv(keep / "test_tracks.csv", test_tracks);
    std::cerr << "  checkpoint and held-out tracks written to " << keep.string() << '\n';
    return run;
}

cli::EvaluationOptions evaluation_options(std::size_t input_length) {
    cli::EvaluationOptions opts;
    opts.n_samples = 10'000;
    opts.cell_size = 0.05;
    opts.k = 20;
    opts.sharpness_samples = 100;
    opts.input_length = input_length;
    opts.seed = 31;
    return opts;
}

// Constant velocity from the displacement over the last second of input.
std::vector<Vec2> constant_velocity(const EgoSample& s, std::size_t m) {
    const std::size_t back = std::min<std::size_t>(10, s.input.size() - 1);
    const InputPoint& a = s.input[s.input.size() - 1 - back];
    const InputPoint& b = s.input.back();
    const double span = static_cast<double>(back) * s.dt;
    const double vx = (b.x - a.x) / span, vy = (b.y - a.y) / span;
    std::vector<Vec2> out;
    for (std::size_t h = 1; h <= m; ++h) out.push_back({b.x + vx * h * s.dt, b.y + vy * h * s.dt});
    return out;
}

Outcome end_to_end(const TrainedRun& run, const cli::Evaluation& full) {
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<EgoSample> turning;
    for (const EgoSample& s : run.test_windows) {
        MotionKind kind;
        if (motion_kind_of(s.track_id, kind) && kind == MotionKind::turn) turning.push_back(s);
    }
    const std::vector<MixtureForecast> forecasts = forward(run.params, turning);
    double model_ade = 0.0, cv_ade = 0.0;
    for (std::size_t i = 0; i < turning.size(); ++i) {
        model_ade += min_ade_fde(forecasts[i], turning[i].future_gt, 20, derive_seed(41, i)).min_ade;
        const std::vector<Vec2> cv = constant_velocity(turning[i], kForecast);
        cv_ade += min_ade_fde(std::span<const std::vector<Vec2>>(&cv, 1), turning[i].future_gt).min_ade;
    }
    model_ade /= static_cast<double>(turning.size());
    cv_ade /= static_cast<double>(turning.size());

    const auto& area95 = full.mean_areas[1];
    std::size_t first_drop = 0;
    for (std::size_t h = 1; h < area95.size() && first_drop == 0; ++h)
        if (area95[h] < area95[h - 1]) first_drop = h + 1;

    const ScoreRow& s = full.scores;
    const double total = run.train_seconds + seconds_since(t0);
    const bool ok = run.train_windows.size() >= 2000 && s.reliability.r_avg >= 0.93 && s.reliability.r_min >= 0.80 &&
                    !turning.empty() && model_ade < cv_ade && s.s68 <= s.s95 && first_drop == 0 && total < 1800.0;
    return {ok, std::to_string(run.train_windows.size()) + " training windows; r_avg " +
                    fmt("%.4f", s.reliability.r_avg) + " (>= 0.93), r_min " + fmt("%.4f", s.reliability.r_min) +
                    " (>= 0.80) on " + std::to_string(run.test_windows.size()) + " held-out windows; turning minADE_20 " +
                    fmt("%.3f", model_ade) + " m vs constant velocity " + fmt("%.3f", cv_ade) + " m over " +
                    std::to_string(turning.size()) + " windows; S68 " + fmt("%.3f", s.s68) + " <= S95 " +
                    fmt("%.3f", s.s95) + " m^2/s; 95% areas " +
                    (first_drop == 0 ? std::string("non-decreasing") : "drop at h=" + std::to_string(first_drop)) +
                    " (" + fmt("%.3f", area95.front()) + " .. " + fmt("%.3f", area95.back()) + " m^2); " +
                    fmt("%.0f", total) + " s incl. training (limit 1800 s)"};
}

Outcome input_horizons(const cli::Evaluation& full, const cli::Evaluation& short_input) {
    const double r_full = full.scores.reliability.r_avg;
    const double r_short = short_input.scores.reliability.r_avg;
    const auto valid = [](const ScoreRow& s) {
        return s.reliability.r_avg >= 0.0 && s.reliability.r_avg <= 1.0 && s.reliability.r_min >= 0.0 &&
               std::isfinite(s.s68) && std::isfinite(s.s95) && std::isfinite(s.displacement.min_ade) &&
               std::isfinite(s.displacement.min_fde);
    };
    const double drop = r_full - r_short;
    return {valid(full.scores) && valid(short_input.scores) && drop <= 0.05,
            "r_avg " + fmt("%.4f", r_full) + " at 3.2 s, " + fmt("%.4f", r_short) + " at 0.5 s, degradation " +
                fmt("%.2f", drop * 100.0) + " points (limit 5)"};
}

Outcome throughput(const ModelParams& params, const std::vector<EgoSample>& windows) {
    std::vector<EgoSample> batch;
    for (std::size_t i = 0; i < 128; ++i) batch.push_back(windows[i % windows.size()]);
    cli::BenchOptions opts;
    opts.seed = 51;
    const cli::BenchResult r = cli::run_bench(params, batch, opts);

    // reference only: the default 64-wide, 8-deep network at the same batch
    cli::BenchOptions quick = opts;
    quick.repetitions = 20;
    quick.warmup = 3;
    const cli::BenchResult wide = cli::run_bench(ModelParams::xavier(ModelConfig{}, 52), batch, quick);

    const ModelConfig& mc = params.config();
    return {r.total.median_ms < 50.0,
            "hidden " + std::to_string(mc.hidden_dim) + ", depth " + std::to_string(mc.num_layers) +
                ", batch 128, " + std::to_string(r.repetitions) + " repetitions: forward " +
                fmt("%.2f", r.forward.median_ms) + " ms + post-processing " + fmt("%.2f", r.post_processing.median_ms) +
                " ms = median " + fmt("%.2f", r.total.median_ms) + " ms (p95 " + fmt("%.2f", r.total.p95_ms) +
                ", limit 50 ms); for reference hidden 64 depth 8 median " + fmt("%.1f", wide.total.median_ms) +
                " ms; isa " + std::string(simd::to_string(simd::active().isa))};
}

// ---------------------------------------------------------------------------
// 8. determinism

std::string pipeline_fingerprint() {
    SynthConfig sc;
    sc.n_tracks = 40;
    sc.duration_s = 9.0;
    sc.seed = 8;
    const std::vector<Track> tracks = generate_synthetic(sc);
    std::ostringstream track_csv;
    write_tracks_csv(track_csv, tracks);
    const std::vector<EgoSample> windows = build_samples(tracks, kInput, kForecast, 8);

    ModelConfig mc;
    mc.hidden_dim = 16;
    mc.num_layers = 2;
    mc.num_horizons = kForecast;
    mc.activation.sigma_offset = 0.0;
    TrainConfig tc;
    tc.epochs = 15;
    tc.batch_size = 64;
    tc.input_lengths = {8, 32};
    tc.seed = 9;
    const TrainResult trained =
        train(ModelParams::xavier(mc, 10), windows, tc, std::span<const EgoSample>(windows).first(20));
    std::ostringstream history;
    cli::write_history_csv(history, trained.history);

    const std::vector<EgoSample> probe(windows.begin(), windows.begin() + 30);
    const std::vector<MixtureForecast> forecasts = forward(trained.params, probe);
    std::vector<cli::PredictedWindow> predicted;
    for (std::size_t i = 0; i < probe.size(); ++i) predicted.push_back({probe[i].track_id, 0.0, probe[i].anchor, forecasts[i]});
    std::ostringstream mixtures;
    cli::write_mixtures_csv(mixtures, predicted);

    cli::EvaluationOptions opts;
    opts.n_samples = 2000;
    opts.sharpness_samples = 5;
    opts.seed = 11;
    const cli::Evaluation ev = cli::evaluate_samples(trained.params, probe, opts);
    std::ostringstream scores, calibration;
    write_scores_csv(scores, std::span<const ScoreRow>(&ev.scores, 1));
    write_calibration_csv(calibration, ev.calibration);
    return track_csv.str() + '\x1e' + history.str() + '\x1e' + encode_checkpoint(trained.params) + '\x1e' +
           mixtures.str() + '\x1e' + scores.str() + '\x1e' + calibration.str();
}

Outcome determinism() {
    const std::string a = pipeline_fingerprint();
    const std::string b = pipeline_fingerprint();
    return {a == b && !a.empty(), std::string(a == b ? "identical" : "different") +
                                      " tracks, training log, checkpoint, forecasts and metric CSVs across two runs (" +
                                      std::to_string(a.size()) + " bytes)"};
}

// ---------------------------------------------------------------------------
// 9. geometry

Outcome geometry() {
    std::mt19937_64 rng(909);
    std::uniform_real_distribution<double> pos(-1e3, 1e3);
    std::uniform_real_distribution<double> ang(-std::numbers::pi, std::numbers::pi);
    double roundtrip = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const AnchorPose anchor{{pos(rng), pos(rng)}, ang(rng)};
        const Vec2 p{pos(rng), pos(rng)};
        const Vec2 back = ego_to_world(world_to_ego(p, anchor), anchor);
        roundtrip = std::max(roundtrip, std::hypot(back.x - p.x, back.y - p.y));
    }

    // irregularly timed samples of cubic polynomials, resampled to 10 Hz
    double spline = 0.0;
    std::uniform_real_distribution<double> coef(-2.0, 2.0);
    std::uniform_real_distribution<double> gap(0.03, 0.25);
    for (int trial = 0; trial < 20; ++trial) {
        double cx[4], cy[4];
        for (int k = 0; k < 4; ++k) {
            cx[k] = coef(rng);
            cy[k] = coef(rng);
        }
        const auto px = [&](double t) { return ((cx[3] * t + cx[2]) * t + cx[1]) * t + cx[0]; };
        const auto py = [&](double t) { return ((cy[3] * t + cy[2]) * t + cy[1]) * t + cy[0]; };
        Track track{"poly", {}};
        for (double t = 0.0; t < 6.0; t += gap(rng)) track.samples.push_back({t, px(t), py(t)});
        for (const TrackPoint& s : resample_track(track, 10.0).samples)
            spline = std::max(spline, std::hypot(s.x - px(s.t), s.y - py(s.t)));
    }
    return {roundtrip <= 1e-9 && spline <= 1e-6, "world/ego roundtrip max error " + fmt("%.2e", roundtrip) +
                                                     " m over 1000 poses (limit 1e-9); cubic resampling max error " +
                                                     fmt("%.2e", spline) + " m over 20 tracks (limit 1e-6)"};
}

}  // namespace

int main(int argc, char** argv) {
    std::set<int> wanted;
    for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));
    const auto selected = [&](int c) { return wanted.empty() || wanted.contains(c); };

    int failures = 0;
    const auto report = [&](int c, const char* name, const std::function<Outcome()>& fn) {
        if (!selected(c)) return;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        failures += !o.pass;
        std::cout << "criterion " << c << " (" << name << "): " << (o.pass ? "PASS" : "FAIL") << " - " << o.detail
                  << " [" << fmt("%.1f", seconds_since(t0)) << " s]" << std::endl;
    };

    report(1, "gradient correctness", gradients);
    report(2, "confidence-level oracle", confidence_levels);
    report(3, "confidence-set areas", set_areas);
    report(4, "calibration self-consistency", self_consistency);

    if (selected(5) || selected(6) || selected(7)) {
        std::optional<TrainedRun> run;
        std::optional<cli::Evaluation> full, short_input;
        std::string setup_error;
        try {
            std::cerr << "training the synthetic model (hidden 32, depth 4, 500 epochs)\n";
            run = train_synthetic();
            full = cli::evaluate_samples(run->params, run->test_windows, evaluation_options(0));
            if (selected(6)) short_input = cli::evaluate_samples(run->params, run->test_windows, evaluation_options(5));
        } catch (const std::exception& e) {
            setup_error = std::string("training or evaluation threw: ") + e.what();
        }
        const auto guarded = [&](auto fn) {
            return [&, fn]() -> Outcome {
                if (!setup_error.empty()) return {false, setup_error};
                return fn();
            };
        };
        report(5, "end-to-end synthetic run", guarded([&] { return end_to_end(*run, *full); }));
        report(6, "input-horizon flexibility", guarded([&] { return input_horizons(*full, *short_input); }));
        report(7, "throughput", guarded([&] { return throughput(run->params, run->test_windows); }));
    }

    report(8, "determinism", determinism);
    report(9, "geometry and resampling", geometry);
    return failures == 0 ? 0 : 1;
}
