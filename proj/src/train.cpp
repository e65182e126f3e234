#include "trajpred/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "trajpred/rng.hpp"

namespace trajpred {

void TrainConfig::validate() const {
    if (!(lr_final > 0.0) || !(lr_init >= lr_final) || !std::isfinite(lr_init))
        fail(ErrorCode::InvalidArgument, "learning rates must satisfy lr_init >= lr_final > 0");
    if (epochs < 1) fail(ErrorCode::InvalidArgument, "epochs must be >= 1");
    if (batch_size < 1) fail(ErrorCode::InvalidArgument, "batch_size must be >= 1");
    for (std::size_t len : input_lengths)
        if (len < 2) fail(ErrorCode::InvalidArgument, "input lengths must be >= 2");
}

double learning_rate(const TrainConfig& cfg, std::size_t epoch) {
    if (cfg.epochs <= 1) return cfg.lr_init;
    if (epoch + 1 >= cfg.epochs) return cfg.lr_final;
    const double frac = static_cast<double>(epoch) / static_cast<double>(cfg.epochs - 1);
    return cfg.lr_init + (cfg.lr_final - cfg.lr_init) * frac;
}

Adam::Adam(const ModelParams& like) : m_(like.values().size(), 0.0), v_(like.values().size(), 0.0) {}

void Adam::step(ModelParams& params, const ModelParams& grad, double lr) {
    constexpr double beta1 = 0.9;
    constexpr double beta2 = 0.999;
    constexpr double eps = 1e-8;
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t_));
    std::span<double> w = params.values();
    std::span<const double> g = grad.values();
    for (std::size_t i = 0; i < w.size(); ++i) {
        m_[i] = beta1 * m_[i] + (1.0 - beta1) * g[i];
        v_[i] = beta2 * v_[i] + (1.0 - beta2) * g[i] * g[i];
        const double m_hat = m_[i] / bc1;
        const double v_hat = v_[i] / bc2;
        w[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
    }
}

double clip_global_norm(ModelParams& grad, double max_norm) {
    double sq = 0.0;
    for (double g : grad.values()) sq += g * g;
    const double norm = std::sqrt(sq);
    if (max_norm > 0.0 && norm > max_norm) {
        const double s = max_norm / norm;
        for (double& g : grad.values()) g *= s;
    }
    return norm;
}

TrainingDiverged::TrainingDiverged(const NumericalDivergence& cause, ModelParams last_good,
                                   std::vector<EpochLog> history)
    : NumericalDivergence(cause.horizon(), cause.detail()),
      last_good_(std::move(last_good)),
      history_(std::move(history)) {}

TrainResult train(const ModelParams& init, std::span<const EgoSample> data, const TrainConfig& cfg,
                  std::span<const EgoSample> eval_data, const EpochCallback& on_epoch) {
    cfg.validate();
    if (data.empty()) fail(ErrorCode::EmptyDataset, "no training samples");

    TrainResult result{init, {}};
    ModelParams& params = result.params;
    ModelParams last_good = init;
    Adam adam(params);
    Engine shuffle = make_engine(derive_seed(cfg.seed, "train/shuffle"));

    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<EgoSample> batch;

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double lr = learning_rate(cfg, epoch);
        std::shuffle(order.begin(), order.end(), shuffle);
        double loss_sum = 0.0;
        try {
            for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
                const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
                std::size_t length = 0;
                if (!cfg.input_lengths.empty()) length = cfg.input_lengths[shuffle() % cfg.input_lengths.size()];
                batch.clear();
                for (std::size_t i = start; i < stop; ++i) {
                    const EgoSample& s = data[order[i]];
                    batch.push_back(length ? truncate_input(s, length) : s);
                }
                LossAndGrad lg = loss_and_grad(params, batch);
                clip_global_norm(lg.grad, cfg.clip_norm);
                adam.step(params, lg.grad, lr);
                loss_sum += lg.loss * static_cast<double>(batch.size());
            }
            for (double w : params.values())
                if (!std::isfinite(w)) throw NumericalDivergence(-1, "non-finite weight after update");
        } catch (const NumericalDivergence& e) {
            throw TrainingDiverged(e, std::move(last_good), std::move(result.history));
        }

        EpochLog log{epoch, lr, loss_sum / static_cast<double>(data.size()),
                     std::numeric_limits<double>::quiet_NaN()};
        if (!eval_data.empty()) {
            try {
                log.eval_loss = batch_loss(params, eval_data);
            } catch (const NumericalDivergence& e) {
                throw TrainingDiverged(e, std::move(last_good), std::move(result.history));
            }
        }
        result.history.push_back(log);
        last_good = params;
        if (on_epoch) on_epoch(log);
    }
    return result;
}

}  // namespace trajpred
