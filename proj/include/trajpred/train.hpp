#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "trajpred/error.hpp"
#include "trajpred/model.hpp"

namespace trajpred {

struct TrainConfig {
    double lr_init = 1e-3;
    double lr_final = 1e-7;
    std::size_t epochs = 2500;
    std::size_t batch_size = 1024;
    std::uint64_t seed = 0;
    double clip_norm = 5.0;  // global gradient norm; <= 0 disables clipping
    // Each batch is truncated to one length drawn from this list (empty: full inputs).
    std::vector<std::size_t> input_lengths;

    void validate() const;
};

/// Learning rate of an epoch: linear from lr_init (first) to lr_final (last).
double learning_rate(const TrainConfig& cfg, std::size_t epoch);

struct EpochLog {
    std::size_t epoch = 0;
    double lr = 0.0;
    double train_loss = 0.0;
    double eval_loss = 0.0;  // NaN without evaluation data
};

/// ADAM with beta1 = 0.9, beta2 = 0.999, eps = 1e-8.
class Adam {
public:
    explicit Adam(const ModelParams& like);

    void step(ModelParams& params, const ModelParams& grad, double lr);
    std::size_t steps() const { return t_; }

private:
    std::vector<double> m_;
    std::vector<double> v_;
    std::size_t t_ = 0;
};

/// Scales grad in place so its global L2 norm is at most max_norm; returns the norm before scaling.
double clip_global_norm(ModelParams& grad, double max_norm);

struct TrainResult {
    ModelParams params;
    std::vector<EpochLog> history;
};

/// Raised when a batch loss stops being finite. Carries the parameters after
/// the last completed epoch and the history so far.
class TrainingDiverged : public NumericalDivergence {
public:
    TrainingDiverged(const NumericalDivergence& cause, ModelParams last_good, std::vector<EpochLog> history);

    const ModelParams& last_good() const { return last_good_; }
    const std::vector<EpochLog>& history() const { return history_; }

private:
    ModelParams last_good_;
    std::vector<EpochLog> history_;
};

using EpochCallback = std::function<void(const EpochLog&)>;

/// Mini-batch training from `init`. The run is a pure function of the inputs
/// and cfg.seed.
TrainResult train(const ModelParams& init, std::span<const EgoSample> data, const TrainConfig& cfg,
                  std::span<const EgoSample> eval_data = {}, const EpochCallback& on_epoch = {});

}  // namespace trajpred
