#include "trajpred/data.hpp"

#include <openssl/evp.h>
#include <zlib.h>

#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <random>

#include "json.hpp"
#include "trajpred/error.hpp"
#include "trajpred/rng.hpp"
#include "trajpred/trajectory_csv.hpp"

namespace trajpred {

std::string_view to_string(MotionKind kind) {
    switch (kind) {
        case MotionKind::constant_velocity: return "cv";
        case MotionKind::turn: return "turn";
        case MotionKind::stop_go: return "stopgo";
        case MotionKind::curve: return "curve";
    }
    return "unknown";
}

bool motion_kind_of(std::string_view track_id, MotionKind& kind) {
    const std::size_t dash = track_id.find('-');
    if (dash == std::string_view::npos) return false;
    const std::string_view prefix = track_id.substr(0, dash);
    for (MotionKind k : {MotionKind::constant_velocity, MotionKind::turn, MotionKind::stop_go, MotionKind::curve})
        if (prefix == to_string(k)) {
            kind = k;
            return true;
        }
    return false;
}

void SynthConfig::validate() const {
    double total = 0.0;
    for (double w : mix) {
        if (!(w >= 0.0)) fail(ErrorCode::InvalidArgument, "motion mix weights must be non-negative");
        total += w;
    }
    if (std::abs(total - 1.0) > 1e-9) fail(ErrorCode::InvalidArgument, "motion mix weights must sum to 1");
    if (!(rate_hz > 0.0) || !(duration_s > 0.0)) fail(ErrorCode::InvalidArgument, "rate and duration must be positive");
    if (!(speed_min > 0.0) || speed_max < speed_min) fail(ErrorCode::InvalidArgument, "invalid speed range");
    if (!(turn_rate_min > 0.0) || turn_rate_max < turn_rate_min) fail(ErrorCode::InvalidArgument, "invalid turn-rate range");
    if (!(move_min_s > 0.0) || move_max_s < move_min_s || !(dwell_min_s >= 0.0) || dwell_max_s < dwell_min_s)
        fail(ErrorCode::InvalidArgument, "invalid stop-and-go durations");
    if (!(noise_sigma >= 0.0) || !(curve_reversion >= 0.0) || !(curve_volatility >= 0.0) || !(start_extent >= 0.0))
        fail(ErrorCode::InvalidArgument, "negative noise or process parameter");
}

namespace {

double uniform(Engine& e, double lo, double hi) {
    if (hi <= lo) return lo;
    return std::uniform_real_distribution<double>(lo, hi)(e);
}

Track synth_track(const SynthConfig& cfg, MotionKind kind, std::size_t index, Engine& e) {
    char id[32];
    std::snprintf(id, sizeof(id), "%s-%05zu", std::string(to_string(kind)).c_str(), index);
    Track track{id, {}};

    const auto n = static_cast<std::size_t>(std::floor(cfg.duration_s * cfg.rate_hz + 1e-9)) + 1;
    const double dt = 1.0 / cfg.rate_hz;
    const double x0 = uniform(e, -cfg.start_extent, cfg.start_extent);
    const double y0 = uniform(e, -cfg.start_extent, cfg.start_extent);
    const double heading0 = uniform(e, -std::numbers::pi, std::numbers::pi);
    const double speed = uniform(e, cfg.speed_min, cfg.speed_max);
    track.samples.resize(n);
    for (std::size_t k = 0; k < n; ++k) track.samples[k].t = static_cast<double>(k) * dt;

    switch (kind) {
        case MotionKind::constant_velocity:
            for (TrackPoint& p : track.samples) {
                p.x = x0 + speed * std::cos(heading0) * p.t;
                p.y = y0 + speed * std::sin(heading0) * p.t;
            }
            break;
        case MotionKind::turn: {
            double omega = uniform(e, cfg.turn_rate_min, cfg.turn_rate_max);
            if (std::bernoulli_distribution(0.5)(e)) omega = -omega;
            const double r = speed / omega;
            for (TrackPoint& p : track.samples) {
                const double th = heading0 + omega * p.t;
                p.x = x0 + r * (std::sin(th) - std::sin(heading0));
                p.y = y0 - r * (std::cos(th) - std::cos(heading0));
            }
            break;
        }
        case MotionKind::stop_go:
        case MotionKind::curve: {
            constexpr int substeps = 10;
            const double h = dt / substeps;
            double x = x0, y = y0, heading = heading0, turn_rate = 0.0;
            bool moving = std::bernoulli_distribution(0.7)(e);
            double phase_left = moving ? uniform(e, cfg.move_min_s, cfg.move_max_s) : uniform(e, cfg.dwell_min_s, cfg.dwell_max_s);
            std::normal_distribution<double> normal(0.0, 1.0);
            for (std::size_t k = 0; k < n; ++k) {
                track.samples[k].x = x;
                track.samples[k].y = y;
                if (k + 1 == n) break;
                for (int s = 0; s < substeps; ++s) {
                    double v = speed;
                    if (kind == MotionKind::stop_go) {
                        if (phase_left <= 0.0) {
                            moving = !moving;
                            phase_left = moving ? uniform(e, cfg.move_min_s, cfg.move_max_s)
                                                : uniform(e, cfg.dwell_min_s, cfg.dwell_max_s);
                        }
                        phase_left -= h;
                        v = moving ? speed : 0.0;
                    } else {
                        turn_rate += -cfg.curve_reversion * turn_rate * h + cfg.curve_volatility * std::sqrt(h) * normal(e);
                        heading += turn_rate * h;
                    }
                    x += v * std::cos(heading) * h;
                    y += v * std::sin(heading) * h;
                }
            }
            break;
        }
    }
    if (cfg.noise_sigma > 0.0) {
        std::normal_distribution<double> noise(0.0, cfg.noise_sigma);
        for (TrackPoint& p : track.samples) {
            p.x += noise(e);
            p.y += noise(e);
        }
    }
    return track;
}

}  // namespace

std::vector<Track> generate_synthetic(const SynthConfig& cfg) {
    cfg.validate();
    Engine kinds = make_engine(derive_seed(cfg.seed, "synth/kind"));
    std::discrete_distribution<int> pick(cfg.mix.begin(), cfg.mix.end());
    std::vector<Track> tracks;
    tracks.reserve(cfg.n_tracks);
    for (std::size_t i = 0; i < cfg.n_tracks; ++i) {
        const auto kind = static_cast<MotionKind>(pick(kinds));
        Engine e = make_engine(derive_seed(derive_seed(cfg.seed, "synth/track"), i));
        tracks.push_back(synth_track(cfg, kind, i, e));
    }
    return tracks;
}

const DatasetSplit& Dataset::split(std::string_view name) const {
    if (name == "train") return train;
    if (name == "train_eval") return train_eval;
    if (name == "test") return test;
    fail(ErrorCode::InvalidArgument, "unknown split '" + std::string(name) + "'");
}

double split_hash(std::string_view track_id) {
    const uLong crc = crc32(crc32(0L, Z_NULL, 0), reinterpret_cast<const Bytef*>(track_id.data()),
                            static_cast<uInt>(track_id.size()));
    return static_cast<double>(static_cast<std::uint32_t>(crc)) / 4294967296.0;
}

std::string sha256_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::IoError, "cannot open " + path.string());
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
    char buf[1 << 16];
    while (in) {
        in.read(buf, sizeof(buf));
        EVP_DigestUpdate(ctx, buf, static_cast<std::size_t>(in.gcount()));
    }
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx, md, &len);
    EVP_MD_CTX_free(ctx);
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[md[i] >> 4]);
        out.push_back(hex[md[i] & 0xf]);
    }
    return out;
}

Dataset load_dataset(std::span<const std::filesystem::path> paths, double rate_hz, std::size_t n_in, std::size_t m_fc,
                     const SplitSpec& spec, std::size_t stride) {
    if (paths.empty()) fail(ErrorCode::EmptyDataset, "no input files");
    const bool by_file = !spec.file_splits.empty();
    if (by_file && spec.file_splits.size() != paths.size())
        fail(ErrorCode::InvalidArgument, "file_splits must name one split per input file");
    if (!by_file) {
        if (spec.train < 0.0 || spec.train_eval < 0.0 || spec.test < 0.0 ||
            std::abs(spec.train + spec.train_eval + spec.test - 1.0) > 1e-9)
            fail(ErrorCode::InvalidArgument, "split fractions must be non-negative and sum to 1");
    }

    Dataset ds;
    ds.manifest.rate_hz = rate_hz;
    ds.manifest.n_in = n_in;
    ds.manifest.m_fc = m_fc;
    ds.manifest.stride = stride;
    ds.manifest.split = spec;
    std::map<std::string, std::string> owner;  // track id -> split

    for (std::size_t f = 0; f < paths.size(); ++f) {
        ds.manifest.files.push_back({paths[f].string(), sha256_file(paths[f])});
        for (Track& raw : read_tracks_csv(paths[f])) {
            std::string split_name;
            if (by_file) {
                split_name = spec.file_splits[f];
            } else {
                const double u = split_hash(raw.id);
                split_name = u < spec.train ? "train" : (u < spec.train + spec.train_eval ? "train_eval" : "test");
            }
            const auto [it, inserted] = owner.emplace(raw.id, split_name);
            if (!inserted && it->second != split_name)
                fail(ErrorCode::InvalidTrack, "track '" + raw.id + "' appears in splits " + it->second + " and " + split_name);

            Track track;
            try {
                track = resample_track(raw, rate_hz);
            } catch (const Error& e) {
                if (e.code() == ErrorCode::TrackTooShort) continue;
                throw;
            }
            if (track.samples.size() < n_in + m_fc) continue;
            DatasetSplit* target = split_name == "train" ? &ds.train
                                   : split_name == "train_eval" ? &ds.train_eval
                                   : split_name == "test" ? &ds.test
                                                          : nullptr;
            if (!target) fail(ErrorCode::InvalidArgument, "unknown split '" + split_name + "'");
            target->tracks.push_back(std::move(track));
        }
    }
    ds.manifest.track_counts = {ds.train.tracks.size(), ds.train_eval.tracks.size(), ds.test.tracks.size()};
    if (ds.train.tracks.empty() && ds.train_eval.tracks.empty() && ds.test.tracks.empty())
        fail(ErrorCode::EmptyDataset, "no track is long enough for " + std::to_string(n_in + m_fc) + " samples");
    return ds;
}

void write_manifest(const std::filesystem::path& path, const DatasetManifest& m) {
    nlohmann::ordered_json j;
    j["files"] = nlohmann::ordered_json::array();
    for (const FileDigest& f : m.files) j["files"].push_back({{"path", f.path}, {"sha256", f.sha256}});
    j["rate_hz"] = m.rate_hz;
    j["window"] = {{"n_in", m.n_in}, {"m_fc", m.m_fc}, {"stride", m.stride}};
    j["split"] = {{"train", m.split.train},
                  {"train_eval", m.split.train_eval},
                  {"test", m.split.test},
                  {"file_splits", m.split.file_splits}};
    j["track_counts"] = {{"train", m.track_counts[0]}, {"train_eval", m.track_counts[1]}, {"test", m.track_counts[2]}};
    std::ofstream out(path);
    if (!out) fail(ErrorCode::IoError, "cannot write " + path.string());
    out << j.dump(2) << '\n';
}

DatasetManifest read_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::IoError, "cannot open " + path.string());
    DatasetManifest m;
    try {
        const nlohmann::json j = nlohmann::json::parse(in);
        for (const auto& f : j.at("files")) m.files.push_back({f.at("path"), f.at("sha256")});
        m.rate_hz = j.at("rate_hz");
        m.n_in = j.at("window").at("n_in");
        m.m_fc = j.at("window").at("m_fc");
        m.stride = j.at("window").at("stride");
        m.split.train = j.at("split").at("train");
        m.split.train_eval = j.at("split").at("train_eval");
        m.split.test = j.at("split").at("test");
        m.split.file_splits = j.at("split").at("file_splits").get<std::vector<std::string>>();
        m.track_counts = {j.at("track_counts").at("train"), j.at("track_counts").at("train_eval"),
                          j.at("track_counts").at("test")};
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::ParseError, path.string() + ": " + e.what());
    }
    return m;
}

void verify_manifest(const DatasetManifest& manifest) {
    for (const FileDigest& f : manifest.files)
        if (sha256_file(f.path) != f.sha256) fail(ErrorCode::ChecksumError, "digest mismatch for " + f.path);
}

std::vector<EgoSample> build_samples(std::span<const Track> tracks, std::size_t n_in, std::size_t m_fc,
                                     std::size_t stride) {
    std::vector<EgoSample> out;
    for (const Track& t : tracks) {
        auto s = make_samples(t, n_in, m_fc, stride);
        out.insert(out.end(), std::make_move_iterator(s.begin()), std::make_move_iterator(s.end()));
    }
    return out;
}

}  // namespace trajpred
