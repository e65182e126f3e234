#pragma once

// Subcommands of the trajpred tool plus the evaluation and timing routines
// behind them, usable without going through files.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

#include "trajpred/cli/config.hpp"
#include "trajpred/metrics.hpp"
#include "trajpred/model.hpp"

namespace trajpred::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitNumerical = 1;
inline constexpr int kExitUsage = 2;

/// Every setting any subcommand reads.
std::span<const std::string_view> known_settings();

struct EvaluationOptions {
    std::size_t n_samples = 10'000;  // Monte-Carlo draws per confidence-level query
    double cell_size = 0.05;
    std::size_t k = 20;
    ComponentSharing sharing = ComponentSharing::per_horizon;
    // Forecasts used for S68/S95, evenly spaced over the samples; 0 uses all.
    std::size_t sharpness_samples = 100;
    std::size_t min_pairs = 30;
    // Inputs are cut to their newest `input_length` points; 0 keeps them whole.
    std::size_t input_length = 0;
    std::uint64_t seed = 0;
};

struct Evaluation {
    ScoreRow scores;
    CalibrationCurve calibration;
    // Mean confidence-set area per horizon over the sharpness subset, [0] at
    // 68 % and [1] at 95 %.
    std::vector<std::vector<double>> mean_areas;
};

/// Reliability, sharpness and best-of-k displacement scores of the model on
/// samples with ground truth. Deterministic in opts.seed.
Evaluation evaluate_samples(const ModelParams& params, std::span<const EgoSample> samples,
                            const EvaluationOptions& opts);

struct BenchOptions {
    std::size_t repetitions = 100;
    std::size_t warmup = 10;
    std::size_t n_samples = 256;
    std::vector<double> levels{0.68, 0.95};
    std::uint64_t seed = 0;
};

struct TimingSummary {
    double median_ms = 0.0;
    double p95_ms = 0.0;
};

TimingSummary summarize(std::vector<double> times_ms);

struct BenchResult {
    std::size_t batch = 0;
    std::size_t repetitions = 0;
    TimingSummary forward;
    TimingSummary post_processing;
    TimingSummary total;  // per repetition, forward plus post-processing
};

/// Times the forward pass over `batch` and the confidence-level
/// post-processing of its forecasts: the density thresholds d_q of every
/// level at every horizon, from opts.n_samples draws of one shared bank.
BenchResult run_bench(const ModelParams& params, std::span<const EgoSample> batch, const BenchOptions& opts);

void cmd_synth(RunConfig& cfg, std::ostream& log);
/// On divergence writes the last good checkpoint and the partial history,
/// then rethrows.
void cmd_train(RunConfig& cfg, std::ostream& log);
void cmd_predict(RunConfig& cfg, std::ostream& log);
void cmd_evaluate(RunConfig& cfg, std::ostream& log);
void cmd_bench(RunConfig& cfg, std::ostream& log);

/// Runs one subcommand, reports failures on `err` and returns the exit code:
/// 0 success, 1 numerical failure, 2 usage or data error.
int run_command(std::string_view name, RunConfig& cfg, std::ostream& log, std::ostream& err);

}  // namespace trajpred::cli
