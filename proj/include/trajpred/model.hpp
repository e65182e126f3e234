#pragma once

// Stacked LSTM encoder with a single affine mixture-density head. The head
// emits all forecast horizons at once from the top layer's final hidden state.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "trajpred/geometry.hpp"
#include "trajpred/mdn.hpp"

namespace trajpred {

struct ModelConfig {
    std::size_t input_dim = 4;  // x, y, vx, vy
    std::size_t hidden_dim = 64;
    std::size_t num_layers = 8;
    std::size_t num_components = 3;
    std::size_t num_horizons = 48;
    double dt = 0.1;
    ActivationConfig activation;

    std::size_t head_outputs() const { return num_horizons * num_components * kParamsPerComponent; }
    /// Throws ModelShapeError on zero sizes or non-finite constants.
    void validate() const;

    friend bool operator==(const ModelConfig& a, const ModelConfig& b) {
        return a.input_dim == b.input_dim && a.hidden_dim == b.hidden_dim && a.num_layers == b.num_layers &&
               a.num_components == b.num_components && a.num_horizons == b.num_horizons && a.dt == b.dt &&
               a.activation.eps_sigma == b.activation.eps_sigma && a.activation.eps_rho == b.activation.eps_rho &&
               a.activation.sigma_offset == b.activation.sigma_offset;
    }
};

struct TensorInfo {
    std::string name;
    std::vector<std::size_t> shape;
    std::size_t offset = 0;
    std::size_t size = 0;
};

/// All weights in one flat buffer with named tensor views. The same type holds
/// gradients and optimizer moments.
///
/// Tensors, for layer l in [0, num_layers):
///   lstm.<l>.w_ih  [4H, in_l]   gate rows ordered input, forget, cell, output
///   lstm.<l>.w_hh  [4H, H]
///   lstm.<l>.bias  [4H]
///   head.weight    [m*6M, H]
///   head.bias      [m*6M]
class ModelParams {
public:
    ModelParams() = default;

    static ModelParams zeros(const ModelConfig& config);
    /// Xavier-uniform weights, zero biases except a forget-gate bias of 1.
    static ModelParams xavier(const ModelConfig& config, std::uint64_t seed);

    const ModelConfig& config() const { return config_; }
    const std::vector<TensorInfo>& tensors() const { return tensors_; }

    std::span<double> values() { return values_; }
    std::span<const double> values() const { return values_; }

    std::span<double> tensor(std::string_view name);
    std::span<const double> tensor(std::string_view name) const;
    const TensorInfo& info(std::string_view name) const;

    /// True when both hold the same architecture and bit-identical weights.
    friend bool operator==(const ModelParams& a, const ModelParams& b);

private:
    explicit ModelParams(const ModelConfig& config);

    ModelConfig config_;
    std::vector<TensorInfo> tensors_;
    std::vector<double> values_;
};

/// Forecast for one input sequence (length >= 2, oldest first).
MixtureForecast forward(const ModelParams& params, std::span<const InputPoint> input);

/// Forecasts for many samples; samples are grouped by input length internally.
std::vector<MixtureForecast> forward(const ModelParams& params, std::span<const EgoSample> samples);

/// Raw head outputs [B x m*6M] for a batch whose inputs all have equal length.
std::vector<double> forward_raw(const ModelParams& params, std::span<const std::span<const InputPoint>> inputs);

struct LossAndGrad {
    double loss = 0.0;  // batch mean of per-sample horizon-summed NLL
    ModelParams grad;
};

/// Batch-mean NLL and its exact gradient by backpropagation through time.
/// Throws NumericalDivergence naming the first non-finite horizon.
LossAndGrad loss_and_grad(const ModelParams& params, std::span<const EgoSample> batch);

/// Batch-mean NLL without gradients.
double batch_loss(const ModelParams& params, std::span<const EgoSample> batch);

}  // namespace trajpred
