#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "trajpred/geometry.hpp"

namespace trajpred {

enum class MotionKind { constant_velocity, turn, stop_go, curve };

std::string_view to_string(MotionKind kind);

/// Synthetic track ids are "<kind>-<index>"; returns false for other ids.
bool motion_kind_of(std::string_view track_id, MotionKind& kind);

struct SynthConfig {
    std::size_t n_tracks = 500;
    double duration_s = 10.0;
    double rate_hz = 10.0;
    // weights over constant_velocity, turn, stop_go, curve
    std::array<double, 4> mix{0.25, 0.25, 0.25, 0.25};
    double speed_min = 0.8;  // m/s
    double speed_max = 1.8;
    double turn_rate_min = 0.15;  // rad/s, sign drawn uniformly
    double turn_rate_max = 0.6;
    double move_min_s = 1.5;  // stop-and-go phase durations
    double move_max_s = 4.0;
    double dwell_min_s = 0.5;
    double dwell_max_s = 2.0;
    double curve_reversion = 0.5;  // Ornstein-Uhlenbeck turn-rate mean reversion, 1/s
    double curve_volatility = 0.3;  // rad/s/sqrt(s)
    double start_extent = 50.0;    // start positions uniform in [-extent, extent]^2
    double noise_sigma = 0.05;     // i.i.d. position noise, m
    std::uint64_t seed = 0;

    void validate() const;
};

std::vector<Track> generate_synthetic(const SynthConfig& cfg);

struct DatasetSplit {
    std::string name;  // train | train_eval | test
    std::vector<Track> tracks;
};

struct SplitSpec {
    // Fractional assignment by a stable hash of the track id...
    double train = 0.7;
    double train_eval = 0.1;
    double test = 0.2;
    // ...unless every input file is given a split name here (same order as the paths).
    std::vector<std::string> file_splits;
};

struct FileDigest {
    std::string path;
    std::string sha256;
};

struct DatasetManifest {
    std::vector<FileDigest> files;
    double rate_hz = 10.0;
    std::size_t n_in = 32;
    std::size_t m_fc = 48;
    std::size_t stride = 1;
    SplitSpec split;
    std::array<std::size_t, 3> track_counts{};  // train, train_eval, test
};

struct Dataset {
    DatasetSplit train{"train", {}};
    DatasetSplit train_eval{"train_eval", {}};
    DatasetSplit test{"test", {}};
    DatasetManifest manifest;

    const DatasetSplit& split(std::string_view name) const;
};

/// Parses, resamples to rate_hz, drops tracks shorter than n_in + m_fc
/// samples and assigns splits. Throws ParseError for malformed rows,
/// InvalidTrack for a track id seen in more than one split and EmptyDataset
/// when nothing survives.
Dataset load_dataset(std::span<const std::filesystem::path> paths, double rate_hz, std::size_t n_in, std::size_t m_fc,
                     const SplitSpec& spec, std::size_t stride = 1);

/// Fraction in [0, 1) from a stable 32-bit hash of the id.
double split_hash(std::string_view track_id);

std::string sha256_file(const std::filesystem::path& path);

void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);
DatasetManifest read_manifest(const std::filesystem::path& path);

/// Recomputes file digests; throws ChecksumError on mismatch.
void verify_manifest(const DatasetManifest& manifest);

/// All windows of every track in the split.
std::vector<EgoSample> build_samples(std::span<const Track> tracks, std::size_t n_in, std::size_t m_fc,
                                     std::size_t stride = 1);

}  // namespace trajpred
