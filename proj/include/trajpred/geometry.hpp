#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace trajpred {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const Vec2&, const Vec2&) = default;
};

struct TrackPoint {
    double t = 0.0;  // seconds
    double x = 0.0;  // meters, world frame
    double y = 0.0;

    Vec2 position() const { return {x, y}; }
    friend bool operator==(const TrackPoint&, const TrackPoint&) = default;
};

/// Timestamped world positions of one person.
struct Track {
    std::string id;
    std::vector<TrackPoint> samples;

    double duration() const { return samples.empty() ? 0.0 : samples.back().t - samples.front().t; }
};

/// Throws InvalidTrack unless timestamps strictly increase, there are at least
/// two samples and every value is finite.
void validate_track(const Track& track);

/// World position and movement direction of a person at the current time.
struct AnchorPose {
    Vec2 origin;
    double heading = 0.0;  // radians in [-pi, pi)
};

/// One observed input step in the ego frame.
struct InputPoint {
    double x = 0.0;
    double y = 0.0;
    double vx = 0.0;
    double vy = 0.0;
};

/// One training/inference window. The last input point is the anchor and sits
/// at the ego origin; +x is the movement direction at that time.
struct EgoSample {
    std::string track_id;
    AnchorPose anchor;
    double dt = 0.1;
    std::vector<InputPoint> input;  // oldest first
    std::vector<Vec2> future_gt;    // one per forecast step
};

/// Maps an angle to [-pi, pi).
double wrap_angle(double radians);

/// End condition of the interpolating cubic spline. not_a_knot reproduces any
/// cubic polynomial exactly; natural forces zero curvature at both ends.
enum class SplineEnd { not_a_knot, natural };

/// Cubic spline resampling of x(t) and y(t), each interpolated independently,
/// onto a uniform grid at 1/rate_hz spacing starting at the first timestamp.
Track resample_track(const Track& track, double rate_hz, SplineEnd end = SplineEnd::not_a_knot);

Vec2 world_to_ego(Vec2 world, const AnchorPose& anchor);
Vec2 ego_to_world(Vec2 ego, const AnchorPose& anchor);
std::vector<Vec2> world_to_ego(std::span<const Vec2> world, const AnchorPose& anchor);
std::vector<Vec2> ego_to_world(std::span<const Vec2> ego, const AnchorPose& anchor);

/// Heading from the final input-step displacement, falling back to the most
/// recent non-zero displacement and to 0 for a stationary window.
double estimate_heading(std::span<const Vec2> input_world);

/// Finite-difference velocities (central inside, one-sided at both ends)
/// attached to ego positions.
std::vector<InputPoint> with_velocities(std::span<const Vec2> ego_positions, double dt);

/// Sliding windows of n_in + m_fc samples over a uniformly resampled track.
/// Tracks shorter than one window yield an empty list.
std::vector<EgoSample> make_samples(const Track& track, std::size_t n_in, std::size_t m_fc, std::size_t stride = 1);

/// Input-only windows for prediction (future_gt left empty), stepping back
/// from the newest sample so the last window always ends at the track's end.
std::vector<EgoSample> make_input_windows(const Track& track, std::size_t n_in, std::size_t stride = 1);

/// Keeps the newest `length` input points and recomputes their velocities, as
/// if only that much history had been observed.
EgoSample truncate_input(const EgoSample& sample, std::size_t length);

}  // namespace trajpred
