#include "trajpred/geometry.hpp"

#include <cmath>
#include <numbers>

#include "trajpred/error.hpp"

namespace trajpred {
namespace {

// Solves the tridiagonal system lower[i] m[i-1] + diag[i] m[i] + upper[i] m[i+1] = rhs[i]
// in place (Thomas algorithm); rhs receives the solution.
void solve_tridiagonal(std::vector<double>& lower, std::vector<double>& diag, std::vector<double>& upper,
                       std::vector<double>& rhs) {
    const std::size_t n = diag.size();
    for (std::size_t i = 1; i < n; ++i) {
        const double w = lower[i] / diag[i - 1];
        diag[i] -= w * upper[i - 1];
        rhs[i] -= w * rhs[i - 1];
    }
    rhs[n - 1] /= diag[n - 1];
    for (std::size_t i = n - 1; i-- > 0;) rhs[i] = (rhs[i] - upper[i] * rhs[i + 1]) / diag[i];
}

// Second derivatives at the knots of the cubic spline through (t[i], v[i]).
std::vector<double> spline_second_derivatives(std::span<const double> t, std::span<const double> v, SplineEnd end) {
    const std::size_t n = t.size();
    std::vector<double> m(n, 0.0);
    if (n < 3) return m;
    if (n == 3 && end == SplineEnd::not_a_knot) {
        // not-a-knot on three points is the interpolating parabola
        const double curv = 2.0 * ((v[2] - v[1]) / (t[2] - t[1]) - (v[1] - v[0]) / (t[1] - t[0])) / (t[2] - t[0]);
        m.assign(3, curv);
        return m;
    }

    // interior unknowns m[1..n-2]
    const std::size_t k = n - 2;
    std::vector<double> lower(k, 0.0), diag(k), upper(k, 0.0), rhs(k);
    for (std::size_t i = 1; i + 1 < n; ++i) {
        const double h0 = t[i] - t[i - 1];
        const double h1 = t[i + 1] - t[i];
        lower[i - 1] = h0;
        diag[i - 1] = 2.0 * (h0 + h1);
        upper[i - 1] = h1;
        rhs[i - 1] = 6.0 * ((v[i + 1] - v[i]) / h1 - (v[i] - v[i - 1]) / h0);
    }
    lower[0] = 0.0;
    upper[k - 1] = 0.0;
    if (end == SplineEnd::not_a_knot) {
        // continuous third derivative at t[1] and t[n-2] eliminates m[0] and m[n-1]
        const double h0 = t[1] - t[0], h1 = t[2] - t[1];
        diag[0] += h0 * (h0 + h1) / h1;
        upper[0] -= h0 * h0 / h1;
        const double ha = t[n - 2] - t[n - 3], hb = t[n - 1] - t[n - 2];
        diag[k - 1] += hb * (ha + hb) / ha;
        lower[k - 1] -= hb * hb / ha;
    }
    solve_tridiagonal(lower, diag, upper, rhs);
    for (std::size_t i = 0; i < k; ++i) m[i + 1] = rhs[i];
    if (end == SplineEnd::not_a_knot) {
        const double h0 = t[1] - t[0], h1 = t[2] - t[1];
        m[0] = ((h0 + h1) * m[1] - h0 * m[2]) / h1;
        const double ha = t[n - 2] - t[n - 3], hb = t[n - 1] - t[n - 2];
        m[n - 1] = ((ha + hb) * m[n - 2] - hb * m[n - 3]) / ha;
    }
    return m;
}

double spline_eval(std::span<const double> t, std::span<const double> v, std::span<const double> m,
                   std::size_t seg, double at) {
    const double h = t[seg + 1] - t[seg];
    const double a = (t[seg + 1] - at) / h;
    const double b = (at - t[seg]) / h;
    return a * v[seg] + b * v[seg + 1] + ((a * a * a - a) * m[seg] + (b * b * b - b) * m[seg + 1]) * h * h / 6.0;
}

}  // namespace

void validate_track(const Track& track) {
    if (track.samples.size() < 2) fail(ErrorCode::InvalidTrack, "track '" + track.id + "' has fewer than 2 samples");
    for (std::size_t i = 0; i < track.samples.size(); ++i) {
        const TrackPoint& p = track.samples[i];
        if (!std::isfinite(p.t) || !std::isfinite(p.x) || !std::isfinite(p.y))
            fail(ErrorCode::InvalidTrack, "track '" + track.id + "' has a non-finite value at index " + std::to_string(i));
        if (i > 0 && !(p.t > track.samples[i - 1].t))
            fail(ErrorCode::InvalidTrack,
                 "track '" + track.id + "' timestamps not strictly increasing at index " + std::to_string(i));
    }
}

double wrap_angle(double radians) {
    constexpr double pi = std::numbers::pi;
    double w = std::fmod(radians + pi, 2.0 * pi);
    if (w < 0.0) w += 2.0 * pi;
    w -= pi;
    if (w >= pi) w -= 2.0 * pi;
    return w;
}

Track resample_track(const Track& track, double rate_hz, SplineEnd end) {
    if (!(rate_hz > 0.0) || !std::isfinite(rate_hz)) fail(ErrorCode::InvalidArgument, "rate_hz must be positive");
    validate_track(track);
    const double step = 1.0 / rate_hz;
    const double duration = track.duration();
    if (duration < 2.0 * step - 1e-12)
        fail(ErrorCode::TrackTooShort, "track '" + track.id + "' lasts " + std::to_string(duration) + " s, need " +
                                           std::to_string(2.0 * step) + " s");

    const std::size_t n = track.samples.size();
    std::vector<double> t(n), xs(n), ys(n);
    for (std::size_t i = 0; i < n; ++i) {
        t[i] = track.samples[i].t;
        xs[i] = track.samples[i].x;
        ys[i] = track.samples[i].y;
    }
    const std::vector<double> mx = spline_second_derivatives(t, xs, end);
    const std::vector<double> my = spline_second_derivatives(t, ys, end);

    const double t0 = t.front();
    const auto count = static_cast<std::size_t>(std::floor(duration * rate_hz + 1e-9)) + 1;
    Track out{track.id, {}};
    out.samples.reserve(count);
    std::size_t seg = 0;
    for (std::size_t k = 0; k < count; ++k) {
        const double at = t0 + static_cast<double>(k) * step;
        while (seg + 2 < n && at > t[seg + 1]) ++seg;
        out.samples.push_back({at, spline_eval(t, xs, mx, seg, at), spline_eval(t, ys, my, seg, at)});
    }
    return out;
}

Vec2 world_to_ego(Vec2 world, const AnchorPose& anchor) {
    const double c = std::cos(anchor.heading);
    const double s = std::sin(anchor.heading);
    const double dx = world.x - anchor.origin.x;
    const double dy = world.y - anchor.origin.y;
    return {c * dx + s * dy, -s * dx + c * dy};
}

Vec2 ego_to_world(Vec2 ego, const AnchorPose& anchor) {
    const double c = std::cos(anchor.heading);
    const double s = std::sin(anchor.heading);
    return {c * ego.x - s * ego.y + anchor.origin.x, s * ego.x + c * ego.y + anchor.origin.y};
}

std::vector<Vec2> world_to_ego(std::span<const Vec2> world, const AnchorPose& anchor) {
    std::vector<Vec2> out;
    out.reserve(world.size());
    for (const Vec2& p : world) out.push_back(world_to_ego(p, anchor));
    return out;
}

std::vector<Vec2> ego_to_world(std::span<const Vec2> ego, const AnchorPose& anchor) {
    std::vector<Vec2> out;
    out.reserve(ego.size());
    for (const Vec2& p : ego) out.push_back(ego_to_world(p, anchor));
    return out;
}

double estimate_heading(std::span<const Vec2> input_world) {
    constexpr double stationary = 1e-12;
    for (std::size_t i = input_world.size(); i-- > 1;) {
        const double dx = input_world[i].x - input_world[i - 1].x;
        const double dy = input_world[i].y - input_world[i - 1].y;
        if (std::hypot(dx, dy) > stationary) return wrap_angle(std::atan2(dy, dx));
    }
    return 0.0;
}

std::vector<InputPoint> with_velocities(std::span<const Vec2> ego_positions, double dt) {
    const std::size_t n = ego_positions.size();
    std::vector<InputPoint> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        out[i].x = ego_positions[i].x;
        out[i].y = ego_positions[i].y;
        if (n < 2) continue;
        std::size_t lo = i == 0 ? 0 : i - 1;
        std::size_t hi = i + 1 == n ? i : i + 1;
        const double span_t = static_cast<double>(hi - lo) * dt;
        out[i].vx = (ego_positions[hi].x - ego_positions[lo].x) / span_t;
        out[i].vy = (ego_positions[hi].y - ego_positions[lo].y) / span_t;
    }
    return out;
}

namespace {

EgoSample window_at(const Track& track, std::size_t start, std::size_t n_in, std::size_t m_fc, double dt) {
    std::vector<Vec2> input_world(n_in);
    std::vector<Vec2> future_world(m_fc);
    for (std::size_t i = 0; i < n_in; ++i) input_world[i] = track.samples[start + i].position();
    for (std::size_t i = 0; i < m_fc; ++i) future_world[i] = track.samples[start + n_in + i].position();

    EgoSample s;
    s.track_id = track.id;
    s.dt = dt;
    s.anchor.origin = input_world.back();
    s.anchor.heading = estimate_heading(input_world);
    std::vector<Vec2> input_ego = world_to_ego(input_world, s.anchor);
    input_ego.back() = {0.0, 0.0};
    s.input = with_velocities(input_ego, dt);
    s.future_gt = world_to_ego(future_world, s.anchor);
    return s;
}

}  // namespace

std::vector<EgoSample> make_samples(const Track& track, std::size_t n_in, std::size_t m_fc, std::size_t stride) {
    if (n_in < 2 || m_fc < 1 || stride < 1)
        fail(ErrorCode::InvalidArgument, "make_samples needs n_in >= 2, m_fc >= 1, stride >= 1");
    std::vector<EgoSample> out;
    const std::size_t window = n_in + m_fc;
    if (track.samples.size() < window) return out;
    const double dt = track.samples[1].t - track.samples[0].t;
    for (std::size_t start = 0; start + window <= track.samples.size(); start += stride)
        out.push_back(window_at(track, start, n_in, m_fc, dt));
    return out;
}

std::vector<EgoSample> make_input_windows(const Track& track, std::size_t n_in, std::size_t stride) {
    if (n_in < 2 || stride < 1) fail(ErrorCode::InvalidArgument, "make_input_windows needs n_in >= 2, stride >= 1");
    std::vector<EgoSample> out;
    if (track.samples.size() < n_in) return out;
    const double dt = track.samples[1].t - track.samples[0].t;
    std::vector<std::size_t> starts;
    for (std::size_t start = track.samples.size() - n_in;; start -= stride) {
        starts.push_back(start);
        if (start < stride) break;
    }
    for (auto it = starts.rbegin(); it != starts.rend(); ++it) out.push_back(window_at(track, *it, n_in, 0, dt));
    return out;
}

EgoSample truncate_input(const EgoSample& sample, std::size_t length) {
    if (length < 2) fail(ErrorCode::InvalidArgument, "input length must be >= 2");
    if (length >= sample.input.size()) return sample;
    EgoSample out = sample;
    std::vector<Vec2> positions;
    positions.reserve(length);
    for (std::size_t i = sample.input.size() - length; i < sample.input.size(); ++i)
        positions.push_back({sample.input[i].x, sample.input[i].y});
    out.input = with_velocities(positions, sample.dt);
    return out;
}

}  // namespace trajpred
