#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "trajpred/geometry.hpp"
#include "trajpred/metrics.hpp"
#include "trajpred/train.hpp"

namespace trajpred::cli {

/// Reliability diagram: expected against observed frequency, the diagonal as
/// reference and one polyline per listed horizon (1-based). No timestamps or
/// other run-dependent metadata, so equal curves give equal files.
void write_reliability_svg(std::ostream& out, const CalibrationCurve& curve, std::span<const std::size_t> horizons);

/// Columns epoch,lr,train_loss,eval_loss; eval_loss is "nan" without evaluation data.
void write_history_csv(std::ostream& out, std::span<const EpochLog> history);

struct PredictedWindow {
    std::string track_id;
    double t = 0.0;  // timestamp of the anchor (newest input point)
    AnchorPose anchor;
    MixtureForecast forecast;
};

/// Columns window,track_id,t,anchor_x,anchor_y,heading.
void write_windows_csv(std::ostream& out, std::span<const PredictedWindow> windows);
/// Columns window,h,m,c,mu_x,mu_y,sigma_x,sigma_y,rho in the ego frame of each
/// window; h is 1-based, m 0-based.
void write_mixtures_csv(std::ostream& out, std::span<const PredictedWindow> windows);

struct ContourRing {
    std::size_t window = 0;
    std::size_t horizon = 0;  // 1-based
    double level = 0.0;
    std::vector<Vec2> points;  // world frame
};

/// Columns window,h,q,ring,vertex,x,y; rings are numbered per (window, h, q).
void write_contours_csv(std::ostream& out, std::span<const ContourRing> rings);

}  // namespace trajpred::cli
