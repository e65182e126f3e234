#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <utility>
#include <vector>

#include "trajpred/mdn.hpp"

namespace trajpred {

/// Densities D(z) of Monte-Carlo draws z ~ D, sorted ascending. Answers
/// confidence-level and threshold queries for one mixture.
class DensityReference {
public:
    DensityReference(const HorizonMixture& mixture, const NormalBank& bank);
    DensityReference(const HorizonMixture& mixture, std::size_t n_samples, std::uint64_t seed);

    /// Fraction of draws with D(z) >= density.
    double confidence_level_at_density(double density) const;
    /// Estimated confidence level 1 - alpha(p).
    double confidence_level(Vec2 p) const;
    /// Largest threshold d such that the fraction of draws with D(z) >= d is
    /// ceil(q N) / N.
    double density_threshold(double q) const;

    const HorizonMixture& mixture() const { return mixture_; }
    std::span<const double> sorted_densities() const { return sorted_; }

private:
    HorizonMixture mixture_;
    std::vector<simd::GaussCoeffs> coeffs_;
    std::vector<double> sorted_;
};

/// Reusable buffers for density_thresholds.
struct ThresholdWorkspace {
    std::vector<simd::GaussCoeffs> coeffs;
    PointCloud draws;
    std::vector<double> densities;
    std::vector<double> sample;
    std::vector<double> bucket;
    std::vector<std::pair<std::size_t, std::size_t>> order;
};

/// d_q for every level from the draws of one bank; equal to
/// DensityReference(mixture, bank).density_threshold(q) but found by selection
/// rather than a full sort.
void density_thresholds(const HorizonMixture& mixture, const NormalBank& bank, std::span<const double> levels,
                        std::span<double> out, ThresholdWorkspace& ws);

/// 1 - alpha(p) = (1/N) #{z : D(z) >= D(p)} with N draws from the mixture.
double confidence_level(const HorizonMixture& mixture, Vec2 p, std::size_t n_samples, std::uint64_t seed);
/// Same estimate from the draws of `bank`, counting instead of sorting.
double confidence_level(const HorizonMixture& mixture, const NormalBank& bank, Vec2 p, ThresholdWorkspace& ws);

struct GridCell {
    long long ix = 0;  // cell covers [ix, ix + 1) * cell_size
    long long iy = 0;

    friend auto operator<=>(const GridCell&, const GridCell&) = default;
};

inline constexpr std::size_t kMaxGridCells = 10'000'000;

/// Grid approximation of the superlevel set {p : D(p) >= d_q}.
struct ConfidenceSet {
    double level = 0.0;  // q = 1 - alpha
    std::size_t horizon = 0;
    double density_threshold = 0.0;
    double cell_size = 0.05;
    std::vector<GridCell> cells;  // row-major (iy, then ix) order
    double area = 0.0;            // cells.size() * cell_size^2

    Vec2 cell_center(const GridCell& c) const {
        return {(static_cast<double>(c.ix) + 0.5) * cell_size, (static_cast<double>(c.iy) + 0.5) * cell_size};
    }
};

/// Confidence set at level q. Cells are enumerated over the box spanned by all
/// component means padded by 8 max-sigma; GridBudgetExceeded above kMaxGridCells.
ConfidenceSet confidence_set(const HorizonMixture& mixture, double q, std::size_t n_samples, double cell_size,
                             std::uint64_t seed, std::size_t horizon = 0);
ConfidenceSet confidence_set(const DensityReference& reference, double q, double cell_size, std::size_t horizon = 0);

/// Area only, without materialising the cell list.
double confidence_set_area(const DensityReference& reference, double q, double cell_size);
/// Areas at several levels from a single pass over the grid.
std::vector<double> confidence_set_areas(const DensityReference& reference, std::span<const double> levels,
                                         double cell_size);

/// Mean area growth rate S = (1/m) sum_h area_h / (h dt), h = 1..m, in m^2/s.
double aggregate_sharpness(std::span<const double> horizon_areas, double dt);

struct SharpnessReport {
    std::vector<double> levels;
    std::vector<std::vector<double>> areas;  // [level][horizon], m^2
    std::vector<double> aggregate;           // [level], m^2/s
};

/// Confidence-set areas for every horizon and level. Horizon h uses the
/// substream derive_seed(seed, h) for its draws, shared by all levels.
SharpnessReport sharpness(const MixtureForecast& forecast, std::span<const double> levels, std::size_t n_samples,
                          double cell_size, std::uint64_t seed);

/// Closed boundary polylines of the occupied cells, counter-clockwise around
/// the set, in the same frame as the mixture.
std::vector<std::vector<Vec2>> set_contours(const ConfidenceSet& set);

/// CSV with columns h,q,cell_x,cell_y (cell centers).
void write_confidence_cells_csv(std::ostream& out, std::span<const ConfidenceSet> sets);

}  // namespace trajpred
