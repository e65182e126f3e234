#include "trajpred/uncertainty.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <ostream>
#include <string>

#include "trajpred/error.hpp"
#include "trajpred/rng.hpp"
#include "trajpred/trajectory_csv.hpp"

namespace trajpred {

DensityReference::DensityReference(const HorizonMixture& mixture, const NormalBank& bank)
    : mixture_(mixture), coeffs_(to_coeffs(mixture)) {
    validate_mixture(mixture_);
    if (bank.size() == 0) fail(ErrorCode::InvalidArgument, "need at least one Monte-Carlo draw");
    PointCloud draws;
    sample(coeffs_, bank, draws);
    sorted_.resize(draws.size());
    density_batch(coeffs_, draws, sorted_);
    std::sort(sorted_.begin(), sorted_.end());
}

DensityReference::DensityReference(const HorizonMixture& mixture, std::size_t n_samples, std::uint64_t seed)
    : DensityReference(mixture, make_normal_bank(n_samples, seed)) {}

double DensityReference::confidence_level_at_density(double d) const {
    const auto first = std::lower_bound(sorted_.begin(), sorted_.end(), d);
    return static_cast<double>(sorted_.end() - first) / static_cast<double>(sorted_.size());
}

double DensityReference::confidence_level(Vec2 p) const {
    double d = 0.0;
    const double xs[1] = {p.x};
    const double ys[1] = {p.y};
    simd::active().mixture_density(coeffs_.data(), coeffs_.size(), xs, ys, &d, 1);
    return confidence_level_at_density(d);
}

namespace {

// Position of d_q among n ascending densities: the top ceil(q n) draws lie at or above it.
std::size_t threshold_index(double q, std::size_t n) {
    if (!(q > 0.0 && q < 1.0)) fail(ErrorCode::InvalidArgument, "confidence level must lie in (0, 1)");
    auto k = static_cast<std::size_t>(std::ceil(q * static_cast<double>(n) - 1e-9));
    k = std::clamp<std::size_t>(k, 1, n);
    return n - k;
}

// Quickselect with a branchless Lomuto partition: afterwards a[k] holds the
// k-th smallest of a[0, n), everything before it is <= and everything after >=.
void select_kth(double* a, std::size_t n, std::size_t k) {
    std::size_t lo = 0;
    std::size_t hi = n;
    while (hi - lo > 16) {
        const std::size_t mid = lo + (hi - lo) / 2;
        // median of three ends up at hi - 1 as the pivot
        if (a[mid] < a[lo]) std::swap(a[mid], a[lo]);
        if (a[hi - 1] < a[lo]) std::swap(a[hi - 1], a[lo]);
        if (a[mid] < a[hi - 1]) std::swap(a[mid], a[hi - 1]);
        const double pivot = a[hi - 1];
        std::size_t store = lo;
        for (std::size_t i = lo; i + 1 < hi; ++i) {
            const double v = a[i];
            a[i] = a[store];
            a[store] = v;
            store += v < pivot ? 1 : 0;
        }
        std::swap(a[store], a[hi - 1]);
        if (k == store) return;
        if (k < store)
            hi = store;
        else
            lo = store + 1;
    }
    for (std::size_t i = lo + 1; i < hi; ++i) {
        const double v = a[i];
        std::size_t j = i;
        for (; j > lo && a[j - 1] > v; --j) a[j] = a[j - 1];
        a[j] = v;
    }
}

}  // namespace

double DensityReference::density_threshold(double q) const { return sorted_[threshold_index(q, sorted_.size())]; }

void density_thresholds(const HorizonMixture& mixture, const NormalBank& bank, std::span<const double> levels,
                        std::span<double> out, ThresholdWorkspace& ws) {
    if (out.size() != levels.size()) fail(ErrorCode::InvalidArgument, "one output slot per level");
    if (bank.size() == 0) fail(ErrorCode::InvalidArgument, "need at least one Monte-Carlo draw");
    validate_mixture(mixture);
    ws.coeffs = to_coeffs(mixture);
    sample(ws.coeffs, bank, ws.draws);
    ws.densities.resize(bank.size());
    density_batch(ws.coeffs, ws.draws, ws.densities);

    const std::size_t n = ws.densities.size();
    constexpr std::size_t kSample = 32;
    if (n < 4 * kSample) {
        // Largest index first, so each later selection only scans the prefix below it.
        ws.order.resize(levels.size());
        for (std::size_t i = 0; i < levels.size(); ++i) ws.order[i] = {threshold_index(levels[i], n), i};
        std::sort(ws.order.begin(), ws.order.end(), std::greater<>());
        std::size_t end = n;
        for (const auto& [index, slot] : ws.order) {
            if (index < end) {
                select_kth(ws.densities.data(), end, index);
                end = index;
            }
            out[slot] = ws.densities[index];
        }
        return;
    }

    // The draws are i.i.d., so evenly spaced entries form a random sample whose
    // order statistics bracket the wanted rank. One pass collects the values
    // inside the bracket and the exact selection runs on that bucket only.
    ws.sample.resize(kSample);
    for (std::size_t i = 0; i < kSample; ++i) ws.sample[i] = ws.densities[i * (n / kSample)];
    std::sort(ws.sample.begin(), ws.sample.end());
    ws.bucket.resize(n);
    for (std::size_t slot = 0; slot < levels.size(); ++slot) {
        const std::size_t k = threshold_index(levels[slot], n);
        const double at = static_cast<double>(k) / static_cast<double>(n - 1) * (kSample - 1);
        const auto j = static_cast<std::ptrdiff_t>(at);
        bool found = false;
        // a narrow bracket first; a miss retries wider before the full selection
        for (const std::ptrdiff_t margin : {3, 8}) {
            const double lo = j - margin < 0 ? -std::numeric_limits<double>::infinity() : ws.sample[j - margin];
            const double hi = j + 1 + margin >= static_cast<std::ptrdiff_t>(kSample)
                                  ? std::numeric_limits<double>::infinity()
                                  : ws.sample[j + 1 + margin];
            std::size_t below = 0;
            const std::size_t m = simd::bracket_collect(ws.densities, lo, hi, ws.bucket, below);
            if (k >= below && k < below + m) {
                select_kth(ws.bucket.data(), m, k - below);
                out[slot] = ws.bucket[k - below];
                found = true;
                break;
            }
        }
        if (!found) {
            std::copy(ws.densities.begin(), ws.densities.end(), ws.bucket.begin());
            select_kth(ws.bucket.data(), n, k);
            out[slot] = ws.bucket[k];
        }
    }
}

double confidence_level(const HorizonMixture& mixture, Vec2 p, std::size_t n_samples, std::uint64_t seed) {
    ThresholdWorkspace ws;
    return confidence_level(mixture, make_normal_bank(n_samples, seed), p, ws);
}

double confidence_level(const HorizonMixture& mixture, const NormalBank& bank, Vec2 p, ThresholdWorkspace& ws) {
    validate_mixture(mixture);
    if (bank.size() == 0) fail(ErrorCode::InvalidArgument, "need at least one Monte-Carlo draw");
    ws.coeffs = to_coeffs(mixture);
    sample(ws.coeffs, bank, ws.draws);
    ws.densities.resize(bank.size());
    density_batch(ws.coeffs, ws.draws, ws.densities);
    double d = 0.0;
    const double xs[1] = {p.x};
    const double ys[1] = {p.y};
    simd::active().mixture_density(ws.coeffs.data(), ws.coeffs.size(), xs, ys, &d, 1);
    std::size_t at_or_above = 0;
    for (const double v : ws.densities) at_or_above += v >= d;
    return static_cast<double>(at_or_above) / static_cast<double>(bank.size());
}

namespace {

struct GridBox {
    long long ix0, iy0;
    long long nx, ny;
};

GridBox bounding_grid(const HorizonMixture& mixture, double cell_size) {
    if (!(cell_size > 0.0) || !std::isfinite(cell_size)) fail(ErrorCode::InvalidArgument, "cell_size must be positive");
    double min_x = mixture.front().mean.x, max_x = min_x;
    double min_y = mixture.front().mean.y, max_y = min_y;
    double max_sigma = 0.0;
    for (const GaussComponent& g : mixture) {
        min_x = std::min(min_x, g.mean.x);
        max_x = std::max(max_x, g.mean.x);
        min_y = std::min(min_y, g.mean.y);
        max_y = std::max(max_y, g.mean.y);
        max_sigma = std::max({max_sigma, g.sigma_x, g.sigma_y});
    }
    const double pad = 8.0 * max_sigma;
    GridBox box{};
    box.ix0 = static_cast<long long>(std::floor((min_x - pad) / cell_size));
    box.iy0 = static_cast<long long>(std::floor((min_y - pad) / cell_size));
    box.nx = static_cast<long long>(std::floor((max_x + pad) / cell_size)) - box.ix0 + 1;
    box.ny = static_cast<long long>(std::floor((max_y + pad) / cell_size)) - box.iy0 + 1;
    const double cells = static_cast<double>(box.nx) * static_cast<double>(box.ny);
    if (cells > static_cast<double>(kMaxGridCells))
        fail(ErrorCode::GridBudgetExceeded, "confidence-set grid needs " + std::to_string(static_cast<long long>(cells)) +
                                                " cells at cell_size " + std::to_string(cell_size) + "; coarsen the grid");
    return box;
}

// Calls on_row(iy, ix0, densities) for every grid row of the mixture's box.
template <typename OnRow>
void scan_rows(const HorizonMixture& mixture, double cell_size, OnRow&& on_row) {
    const auto coeffs = to_coeffs(mixture);
    const GridBox box = bounding_grid(mixture, cell_size);
    PointCloud row;
    row.xs.resize(static_cast<std::size_t>(box.nx));
    row.ys.resize(static_cast<std::size_t>(box.nx));
    std::vector<double> dens(static_cast<std::size_t>(box.nx));
    for (long long i = 0; i < box.nx; ++i) row.xs[static_cast<std::size_t>(i)] = (static_cast<double>(box.ix0 + i) + 0.5) * cell_size;
    for (long long j = 0; j < box.ny; ++j) {
        const double y = (static_cast<double>(box.iy0 + j) + 0.5) * cell_size;
        std::fill(row.ys.begin(), row.ys.end(), y);
        density_batch(coeffs, row, dens);
        on_row(box.iy0 + j, box.ix0, std::span<const double>(dens));
    }
}

// Calls visit(ix, iy) for each grid cell whose center density reaches the threshold.
template <typename Visit>
void scan_grid(const DensityReference& ref, double threshold, double cell_size, Visit&& visit) {
    scan_rows(ref.mixture(), cell_size, [&](long long iy, long long ix0, std::span<const double> dens) {
        for (std::size_t i = 0; i < dens.size(); ++i)
            if (dens[i] >= threshold) visit(ix0 + static_cast<long long>(i), iy);
    });
}

void check_level(double q) {
    if (!(q > 0.0 && q < 1.0)) fail(ErrorCode::InvalidArgument, "confidence level must lie in (0, 1)");
}

}  // namespace

ConfidenceSet confidence_set(const DensityReference& reference, double q, double cell_size, std::size_t horizon) {
    check_level(q);
    ConfidenceSet set;
    set.level = q;
    set.horizon = horizon;
    set.cell_size = cell_size;
    set.density_threshold = reference.density_threshold(q);
    scan_grid(reference, set.density_threshold, cell_size, [&](long long ix, long long iy) { set.cells.push_back({ix, iy}); });
    set.area = static_cast<double>(set.cells.size()) * cell_size * cell_size;
    return set;
}

ConfidenceSet confidence_set(const HorizonMixture& mixture, double q, std::size_t n_samples, double cell_size,
                             std::uint64_t seed, std::size_t horizon) {
    check_level(q);
    return confidence_set(DensityReference(mixture, n_samples, seed), q, cell_size, horizon);
}

double confidence_set_area(const DensityReference& reference, double q, double cell_size) {
    check_level(q);
    std::size_t count = 0;
    scan_grid(reference, reference.density_threshold(q), cell_size, [&](long long, long long) { ++count; });
    return static_cast<double>(count) * cell_size * cell_size;
}

double aggregate_sharpness(std::span<const double> horizon_areas, double dt) {
    if (horizon_areas.empty()) fail(ErrorCode::InvalidArgument, "no horizons");
    if (!(dt > 0.0)) fail(ErrorCode::InvalidArgument, "dt must be positive");
    double acc = 0.0;
    for (std::size_t h = 0; h < horizon_areas.size(); ++h)
        acc += horizon_areas[h] / (static_cast<double>(h + 1) * dt);
    return acc / static_cast<double>(horizon_areas.size());
}

std::vector<double> confidence_set_areas(const DensityReference& reference, std::span<const double> levels,
                                         double cell_size) {
    std::vector<double> thresholds;
    for (double q : levels) {
        check_level(q);
        thresholds.push_back(reference.density_threshold(q));
    }
    std::vector<std::size_t> counts(levels.size(), 0);
    scan_rows(reference.mixture(), cell_size, [&](long long, long long, std::span<const double> dens) {
        for (double d : dens)
            for (std::size_t k = 0; k < thresholds.size(); ++k)
                if (d >= thresholds[k]) ++counts[k];
    });
    std::vector<double> areas;
    for (std::size_t c : counts) areas.push_back(static_cast<double>(c) * cell_size * cell_size);
    return areas;
}

SharpnessReport sharpness(const MixtureForecast& forecast, std::span<const double> levels, std::size_t n_samples,
                          double cell_size, std::uint64_t seed) {
    for (double q : levels) check_level(q);
    SharpnessReport report;
    report.levels.assign(levels.begin(), levels.end());
    report.areas.assign(levels.size(), std::vector<double>(forecast.num_horizons(), 0.0));
    for (std::size_t h = 0; h < forecast.num_horizons(); ++h) {
        const DensityReference ref(forecast.horizons[h], n_samples, derive_seed(seed, h));
        const std::vector<double> areas = confidence_set_areas(ref, levels, cell_size);
        for (std::size_t k = 0; k < levels.size(); ++k) report.areas[k][h] = areas[k];
    }
    for (const auto& areas : report.areas) report.aggregate.push_back(aggregate_sharpness(areas, forecast.dt));
    return report;
}

std::vector<std::vector<Vec2>> set_contours(const ConfidenceSet& set) {
    using Vertex = std::pair<long long, long long>;
    std::vector<GridCell> cells = set.cells;
    std::sort(cells.begin(), cells.end(), [](const GridCell& a, const GridCell& b) {
        return std::tie(a.iy, a.ix) < std::tie(b.iy, b.ix);
    });
    auto occupied = [&](long long ix, long long iy) {
        return std::binary_search(cells.begin(), cells.end(), GridCell{ix, iy}, [](const GridCell& a, const GridCell& b) {
            return std::tie(a.iy, a.ix) < std::tie(b.iy, b.ix);
        });
    };

    // directed boundary edges with the set on their left
    std::multimap<Vertex, Vertex> edges;
    for (const GridCell& c : cells) {
        const long long x = c.ix;
        const long long y = c.iy;
        if (!occupied(x, y - 1)) edges.insert({{x, y}, {x + 1, y}});
        if (!occupied(x + 1, y)) edges.insert({{x + 1, y}, {x + 1, y + 1}});
        if (!occupied(x, y + 1)) edges.insert({{x + 1, y + 1}, {x, y + 1}});
        if (!occupied(x - 1, y)) edges.insert({{x, y + 1}, {x, y}});
    }

    std::vector<std::vector<Vec2>> loops;
    while (!edges.empty()) {
        auto it = edges.begin();
        const Vertex start = it->first;
        std::vector<Vertex> loop{start};
        Vertex at = it->second;
        edges.erase(it);
        while (at != start) {
            loop.push_back(at);
            auto next = edges.find(at);
            if (next == edges.end()) break;
            at = next->second;
            edges.erase(next);
        }
        // drop vertices in the middle of straight runs
        std::vector<Vec2> poly;
        const std::size_t n = loop.size();
        for (std::size_t i = 0; i < n; ++i) {
            const Vertex& a = loop[(i + n - 1) % n];
            const Vertex& b = loop[i];
            const Vertex& c = loop[(i + 1) % n];
            const long long cross = (b.first - a.first) * (c.second - b.second) - (b.second - a.second) * (c.first - b.first);
            if (cross != 0)
                poly.push_back({static_cast<double>(b.first) * set.cell_size, static_cast<double>(b.second) * set.cell_size});
        }
        loops.push_back(std::move(poly));
    }
    return loops;
}

void write_confidence_cells_csv(std::ostream& out, std::span<const ConfidenceSet> sets) {
    out << "h,q,cell_x,cell_y\n";
    for (const ConfidenceSet& s : sets)
        for (const GridCell& c : s.cells) {
            const Vec2 p = s.cell_center(c);
            out << (s.horizon + 1) << ',' << format_double(s.level) << ',' << format_double(p.x) << ','
                << format_double(p.y) << '\n';
        }
}

}  // namespace trajpred
