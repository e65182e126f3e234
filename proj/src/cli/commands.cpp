#include "trajpred/cli/commands.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <string>
#include <thread>

#include "trajpred/checkpoint.hpp"
#include "trajpred/cli/report.hpp"
#include "trajpred/data.hpp"
#include "trajpred/error.hpp"
#include "trajpred/rng.hpp"
#include "trajpred/simd/kernels.hpp"
#include "trajpred/train.hpp"
#include "trajpred/trajectory_csv.hpp"
#include "trajpred/uncertainty.hpp"

namespace trajpred::cli {
namespace fs = std::filesystem;

namespace {

constexpr std::string_view kKnownSettings[] = {
    // every command
    "seed", "out_dir", "isa",
    // data and windows
    "data", "rate_hz", "n_in", "m_fc", "stride", "split_train", "split_train_eval", "split_test", "file_splits",
    // synth
    "n_tracks", "duration_s", "mix", "speed_min", "speed_max", "turn_rate_min", "turn_rate_max", "move_min_s",
    "move_max_s", "dwell_min_s", "dwell_max_s", "curve_reversion", "curve_volatility", "start_extent", "noise_sigma",
    // model
    "hidden_dim", "num_layers", "num_components", "eps_sigma", "eps_rho", "sigma_offset",
    // train
    "epochs", "batch_size", "lr_init", "lr_final", "clip_norm", "input_lengths", "log_every",
    // predict, evaluate, bench
    "checkpoint", "input", "levels", "n_samples", "cell_size", "contour_horizons", "split", "max_samples", "k",
    "sharing", "sharpness_samples", "min_pairs", "input_horizon", "plot_horizons", "batch", "repetitions", "warmup",
    "bench_samples", "bench_tracks", "bench_duration_s"};

struct Common {
    std::uint64_t seed = 0;
    fs::path out_dir;
};

Common read_common(RunConfig& cfg) {
    Common c;
    c.seed = cfg.require_u64("seed");
    c.out_dir = cfg.require_string("out_dir");
    const std::string isa = cfg.get_string("isa", "auto");
    if (isa == "scalar")
        simd::set_active(simd::Isa::scalar);
    else if (isa == "avx2")
        simd::set_active(simd::Isa::avx2);
    else if (isa != "auto")
        fail(ErrorCode::InvalidArgument, "isa must be auto, scalar or avx2");
    std::error_code ec;
    fs::create_directories(c.out_dir, ec);
    if (ec || !fs::is_directory(c.out_dir))
        fail(ErrorCode::IoError, "cannot create output directory " + c.out_dir.string());
    return c;
}

std::ofstream open_out(const fs::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorCode::IoError, "cannot write " + path.string());
    return out;
}

std::vector<fs::path> data_paths(RunConfig& cfg) {
    std::vector<fs::path> paths;
    for (const std::string& p : cfg.get_strings("data", {})) paths.emplace_back(p);
    if (paths.empty()) fail(ErrorCode::InvalidArgument, "missing required setting 'data'");
    for (const fs::path& p : paths)
        if (!fs::exists(p)) fail(ErrorCode::IoError, "data file not found: " + p.string());
    return paths;
}

SplitSpec read_split(RunConfig& cfg) {
    SplitSpec spec;
    spec.train = cfg.get_double("split_train", spec.train);
    spec.train_eval = cfg.get_double("split_train_eval", spec.train_eval);
    spec.test = cfg.get_double("split_test", spec.test);
    spec.file_splits = cfg.get_strings("file_splits", {});
    return spec;
}

ModelParams load_model(RunConfig& cfg) {
    const fs::path path = cfg.require_string("checkpoint");
    if (!fs::exists(path)) fail(ErrorCode::IoError, "checkpoint not found: " + path.string());
    return load_checkpoint(path);
}

double rate_of(const ModelParams& params) { return 1.0 / params.config().dt; }

// `count` indices spread evenly over [0, n); all of them when count is 0 or >= n.
std::vector<std::size_t> evenly_spaced(std::size_t n, std::size_t count) {
    if (count == 0 || count > n) count = n;
    std::vector<std::size_t> idx(count);
    for (std::size_t j = 0; j < count; ++j) idx[j] = j * n / count;
    return idx;
}

// Horizons (1-based) that fall on whole seconds, plus the last one.
std::vector<std::size_t> whole_second_horizons(std::size_t m, double dt) {
    std::vector<std::size_t> out;
    for (std::size_t h = 1; h <= m; ++h) {
        const double t = static_cast<double>(h) * dt;
        if (std::abs(t - std::round(t)) < 1e-9) out.push_back(h);
    }
    if (out.empty() || out.back() != m) out.push_back(m);
    return out;
}

std::vector<MixtureForecast> forward_chunked(const ModelParams& params, std::span<const EgoSample> samples) {
    constexpr std::size_t kChunk = 256;
    std::vector<MixtureForecast> out;
    out.reserve(samples.size());
    for (std::size_t start = 0; start < samples.size(); start += kChunk) {
        auto part = forward(params, samples.subspan(start, std::min(kChunk, samples.size() - start)));
        std::move(part.begin(), part.end(), std::back_inserter(out));
    }
    return out;
}

double parse_seconds(const std::string& text) {
    double value = 0.0;
    const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || end != text.data() + text.size())
        fail(ErrorCode::InvalidArgument, "input_horizon expects seconds such as 0.5s, got '" + text + "'");
    return value;
}

std::string seconds_label(double s) {
    std::string t = format_double(s);
    return t + "s";
}

std::string compiler_name() {
#if defined(__clang__)
    return std::string("clang ") + __clang_version__;
#elif defined(__GNUC__)
    return std::string("gcc ") + __VERSION__;
#else
    return "unknown";
#endif
}

std::string machine_cpu() {
    std::ifstream in("/proc/cpuinfo");
    std::string line;
    while (std::getline(in, line))
        if (line.rfind("model name", 0) == 0) {
            const auto colon = line.find(':');
            if (colon != std::string::npos) return line.substr(line.find_first_not_of(' ', colon + 1));
        }
    return "unknown";
}

}  // namespace

std::span<const std::string_view> known_settings() { return kKnownSettings; }

Evaluation evaluate_samples(const ModelParams& params, std::span<const EgoSample> samples,
                            const EvaluationOptions& opts) {
    if (samples.empty()) fail(ErrorCode::EmptyDataset, "no samples to evaluate");
    std::vector<EgoSample> cut;
    if (opts.input_length > 0) {
        cut.reserve(samples.size());
        for (const EgoSample& s : samples) cut.push_back(truncate_input(s, opts.input_length));
        samples = cut;
    }
    const std::vector<MixtureForecast> forecasts = forward_chunked(params, samples);
    std::vector<std::vector<Vec2>> truth;
    truth.reserve(samples.size());
    for (const EgoSample& s : samples) truth.push_back(s.future_gt);

    Evaluation ev;
    CalibrationOptions co;
    co.n_samples = opts.n_samples;
    co.seed = derive_seed(opts.seed, "calibration");
    co.min_pairs = opts.min_pairs;
    ev.calibration = calibration_curve(forecasts, truth, co);
    ev.scores.reliability = reliability_scores(ev.calibration);
    ev.scores.input_horizon_s = static_cast<double>(samples.front().input.size()) * params.config().dt;
    ev.scores.k = opts.k;

    const std::array<double, 2> levels{0.68, 0.95};
    const std::size_t m = params.config().num_horizons;
    ev.mean_areas.assign(levels.size(), std::vector<double>(m, 0.0));
    const std::uint64_t sharp_seed = derive_seed(opts.seed, "sharpness");
    const std::vector<std::size_t> subset = evenly_spaced(forecasts.size(), opts.sharpness_samples);
    std::array<double, 2> aggregate{0.0, 0.0};
    for (const std::size_t i : subset) {
        const SharpnessReport rep = sharpness(forecasts[i], levels, opts.n_samples, opts.cell_size, derive_seed(sharp_seed, i));
        for (std::size_t l = 0; l < levels.size(); ++l) {
            aggregate[l] += rep.aggregate[l];
            for (std::size_t h = 0; h < m; ++h) ev.mean_areas[l][h] += rep.areas[l][h];
        }
    }
    const double inv = 1.0 / static_cast<double>(subset.size());
    ev.scores.s68 = aggregate[0] * inv;
    ev.scores.s95 = aggregate[1] * inv;
    for (auto& row : ev.mean_areas)
        for (double& a : row) a *= inv;

    const std::uint64_t hyp_seed = derive_seed(opts.seed, "hypotheses");
    double ade = 0.0;
    double fde = 0.0;
    for (std::size_t i = 0; i < forecasts.size(); ++i) {
        const DisplacementErrors d = min_ade_fde(forecasts[i], truth[i], opts.k, derive_seed(hyp_seed, i), opts.sharing);
        ade += d.min_ade;
        fde += d.min_fde;
    }
    ev.scores.displacement.min_ade = ade / static_cast<double>(forecasts.size());
    ev.scores.displacement.min_fde = fde / static_cast<double>(forecasts.size());
    return ev;
}

TimingSummary summarize(std::vector<double> times_ms) {
    if (times_ms.empty()) fail(ErrorCode::InvalidArgument, "no timings to summarize");
    std::sort(times_ms.begin(), times_ms.end());
    const auto at = [&](double p) {
        // nearest-rank percentile
        const auto rank = static_cast<std::size_t>(std::ceil(p * static_cast<double>(times_ms.size())));
        return times_ms[std::clamp<std::size_t>(rank, 1, times_ms.size()) - 1];
    };
    const std::size_t n = times_ms.size();
    const double median = n % 2 ? times_ms[n / 2] : 0.5 * (times_ms[n / 2 - 1] + times_ms[n / 2]);
    return {median, at(0.95)};
}

BenchResult run_bench(const ModelParams& params, std::span<const EgoSample> batch, const BenchOptions& opts) {
    if (batch.empty()) fail(ErrorCode::EmptyDataset, "empty benchmark batch");
    if (opts.repetitions == 0) fail(ErrorCode::InvalidArgument, "need at least one repetition");
    const NormalBank bank = make_normal_bank(opts.n_samples, derive_seed(opts.seed, "bench/draws"));
    ThresholdWorkspace ws;
    std::vector<double> thresholds(opts.levels.size());
    double sink = 0.0;

    std::vector<double> fwd;
    std::vector<double> post;
    std::vector<double> total;
    for (std::size_t rep = 0; rep < opts.warmup + opts.repetitions; ++rep) {
        const auto t0 = std::chrono::steady_clock::now();
        const std::vector<MixtureForecast> forecasts = forward(params, batch);
        const auto t1 = std::chrono::steady_clock::now();
        for (const MixtureForecast& f : forecasts)
            for (const HorizonMixture& mix : f.horizons) {
                density_thresholds(mix, bank, opts.levels, thresholds, ws);
                sink += thresholds[0];
            }
        const auto t2 = std::chrono::steady_clock::now();
        if (rep < opts.warmup) continue;
        const auto ms = [](auto d) { return std::chrono::duration<double, std::milli>(d).count(); };
        fwd.push_back(ms(t1 - t0));
        post.push_back(ms(t2 - t1));
        total.push_back(ms(t2 - t0));
    }
    if (!std::isfinite(sink)) throw NumericalDivergence(-1, "non-finite density threshold");
    return {batch.size(), opts.repetitions, summarize(fwd), summarize(post), summarize(total)};
}

void cmd_synth(RunConfig& cfg, std::ostream& log) {
    const Common common = read_common(cfg);
    SynthConfig sc;
    sc.n_tracks = cfg.get_size("n_tracks", sc.n_tracks);
    sc.duration_s = cfg.get_double("duration_s", sc.duration_s);
    sc.rate_hz = cfg.get_double("rate_hz", sc.rate_hz);
    const auto mix = cfg.get_doubles("mix", {sc.mix.begin(), sc.mix.end()});
    if (mix.size() != 4) fail(ErrorCode::InvalidArgument, "mix needs four weights (cv, turn, stop_go, curve)");
    std::copy(mix.begin(), mix.end(), sc.mix.begin());
    sc.speed_min = cfg.get_double("speed_min", sc.speed_min);
    sc.speed_max = cfg.get_double("speed_max", sc.speed_max);
    sc.turn_rate_min = cfg.get_double("turn_rate_min", sc.turn_rate_min);
    sc.turn_rate_max = cfg.get_double("turn_rate_max", sc.turn_rate_max);
    sc.move_min_s = cfg.get_double("move_min_s", sc.move_min_s);
    sc.move_max_s = cfg.get_double("move_max_s", sc.move_max_s);
    sc.dwell_min_s = cfg.get_double("dwell_min_s", sc.dwell_min_s);
    sc.dwell_max_s = cfg.get_double("dwell_max_s", sc.dwell_max_s);
    sc.curve_reversion = cfg.get_double("curve_reversion", sc.curve_reversion);
    sc.curve_volatility = cfg.get_double("curve_volatility", sc.curve_volatility);
    sc.start_extent = cfg.get_double("start_extent", sc.start_extent);
    sc.noise_sigma = cfg.get_double("noise_sigma", sc.noise_sigma);
    sc.seed = derive_seed(common.seed, "synth");
    const std::size_t n_in = cfg.get_size("n_in", 32);
    const std::size_t m_fc = cfg.get_size("m_fc", 48);
    const std::size_t stride = cfg.get_size("stride", 1);
    const SplitSpec spec = read_split(cfg);

    const std::vector<Track> tracks = generate_synthetic(sc);
    const fs::path csv = common.out_dir / "tracks.csv";
    write_tracks_csv(csv, tracks);
    const std::array<fs::path, 1> paths{csv};
    const Dataset ds = load_dataset(paths, sc.rate_hz, n_in, m_fc, spec, stride);
    write_manifest(common.out_dir / "dataset_manifest.json", ds.manifest);
    write_run_manifest(common.out_dir / "run_manifest.json", "synth", cfg);
    log << "wrote " << tracks.size() << " tracks (train " << ds.manifest.track_counts[0] << ", train_eval "
        << ds.manifest.track_counts[1] << ", test " << ds.manifest.track_counts[2] << ") to " << csv.string() << '\n';
}

void cmd_train(RunConfig& cfg, std::ostream& log) {
    const Common common = read_common(cfg);
    const std::vector<fs::path> paths = data_paths(cfg);
    const double rate = cfg.get_double("rate_hz", 10.0);
    const std::size_t n_in = cfg.get_size("n_in", 32);
    const std::size_t m_fc = cfg.get_size("m_fc", 48);
    const std::size_t stride = cfg.get_size("stride", 1);
    const SplitSpec spec = read_split(cfg);

    ModelConfig mc;
    mc.hidden_dim = cfg.get_size("hidden_dim", mc.hidden_dim);
    mc.num_layers = cfg.get_size("num_layers", mc.num_layers);
    mc.num_components = cfg.get_size("num_components", mc.num_components);
    mc.num_horizons = m_fc;
    mc.dt = 1.0 / rate;
    mc.activation.eps_sigma = cfg.get_double("eps_sigma", mc.activation.eps_sigma);
    mc.activation.eps_rho = cfg.get_double("eps_rho", mc.activation.eps_rho);
    mc.activation.sigma_offset = cfg.get_double("sigma_offset", mc.activation.sigma_offset);
    mc.validate();

    TrainConfig tc;
    tc.epochs = cfg.get_size("epochs", tc.epochs);
    tc.batch_size = cfg.get_size("batch_size", tc.batch_size);
    tc.lr_init = cfg.get_double("lr_init", tc.lr_init);
    tc.lr_final = cfg.get_double("lr_final", tc.lr_final);
    tc.clip_norm = cfg.get_double("clip_norm", tc.clip_norm);
    tc.input_lengths = cfg.get_sizes("input_lengths", {});
    tc.seed = derive_seed(common.seed, "train/shuffle");
    tc.validate();
    const std::size_t log_every = cfg.get_size("log_every", 0);

    const Dataset ds = load_dataset(paths, rate, n_in, m_fc, spec, stride);
    const std::vector<EgoSample> train_set = build_samples(ds.train.tracks, n_in, m_fc, stride);
    const std::vector<EgoSample> eval_set = build_samples(ds.train_eval.tracks, n_in, m_fc, stride);
    if (train_set.empty()) fail(ErrorCode::EmptyDataset, "the train split has no windows");
    write_manifest(common.out_dir / "dataset_manifest.json", ds.manifest);
    write_run_manifest(common.out_dir / "run_manifest.json", "train", cfg);

    const ModelParams init = ModelParams::xavier(mc, derive_seed(common.seed, "train/init"));
    const auto progress = [&](const EpochLog& e) {
        if (log_every > 0 && (e.epoch % log_every == 0 || e.epoch + 1 == tc.epochs))
            log << "epoch " << e.epoch << " lr " << format_double(e.lr) << " train " << format_double(e.train_loss)
                << " eval " << format_double(e.eval_loss) << '\n';
    };
    try {
        const TrainResult result = train(init, train_set, tc, eval_set, progress);
        save_checkpoint(result.params, common.out_dir / "checkpoint.ckpt");
        auto out = open_out(common.out_dir / "loss_history.csv");
        write_history_csv(out, result.history);
        log << "trained " << result.history.size() << " epochs on " << train_set.size() << " windows; final loss "
            << format_double(result.history.back().train_loss) << '\n';
    } catch (const TrainingDiverged& e) {
        save_checkpoint(e.last_good(), common.out_dir / "checkpoint_last_good.ckpt");
        auto out = open_out(common.out_dir / "loss_history.csv");
        write_history_csv(out, e.history());
        throw;
    }
}

void cmd_predict(RunConfig& cfg, std::ostream& log) {
    const Common common = read_common(cfg);
    const ModelParams params = load_model(cfg);
    const fs::path input = cfg.require_string("input");
    const std::size_t n_in = cfg.get_size("n_in", 32);
    const std::size_t stride = cfg.get_size("stride", 1);
    const std::vector<double> levels = cfg.get_doubles("levels", {0.68, 0.95});
    const std::size_t n_samples = cfg.get_size("n_samples", 10'000);
    const double cell_size = cfg.get_double("cell_size", 0.05);
    const std::size_t m = params.config().num_horizons;
    const std::vector<std::size_t> contour_h =
        cfg.get_sizes("contour_horizons", whole_second_horizons(m, params.config().dt));
    for (const std::size_t h : contour_h)
        if (h == 0 || h > m) fail(ErrorCode::InvalidArgument, "contour horizon out of range: " + std::to_string(h));

    std::vector<EgoSample> windows;
    std::vector<double> anchor_t;
    for (const Track& raw : read_tracks_csv(input)) {
        Track track;
        try {
            track = resample_track(raw, rate_of(params));
        } catch (const Error& e) {
            if (e.code() == ErrorCode::TrackTooShort) continue;
            throw;
        }
        const std::vector<EgoSample> w = make_input_windows(track, n_in, stride);
        // make_input_windows steps back from the end, so window i ends at this sample
        for (std::size_t i = 0; i < w.size(); ++i)
            anchor_t.push_back(track.samples[track.samples.size() - 1 - (w.size() - 1 - i) * stride].t);
        windows.insert(windows.end(), w.begin(), w.end());
    }
    if (windows.empty()) fail(ErrorCode::EmptyDataset, "no track in " + input.string() + " has " + std::to_string(n_in) + " samples");

    const std::vector<MixtureForecast> forecasts = forward_chunked(params, windows);
    std::vector<PredictedWindow> predicted(windows.size());
    std::vector<ContourRing> rings;
    const std::uint64_t seed = derive_seed(common.seed, "predict");
    for (std::size_t w = 0; w < windows.size(); ++w) {
        predicted[w] = {windows[w].track_id, anchor_t[w], windows[w].anchor, forecasts[w]};
        for (const std::size_t h : contour_h) {
            const DensityReference ref(forecasts[w].horizons[h - 1], n_samples, derive_seed(derive_seed(seed, w), h));
            for (const double q : levels) {
                const ConfidenceSet set = confidence_set(ref, q, cell_size, h);
                for (const auto& loop : set_contours(set)) rings.push_back({w, h, q, ego_to_world(loop, windows[w].anchor)});
            }
        }
    }
    auto win_out = open_out(common.out_dir / "windows.csv");
    write_windows_csv(win_out, predicted);
    auto mix_out = open_out(common.out_dir / "mixtures.csv");
    write_mixtures_csv(mix_out, predicted);
    auto contour_out = open_out(common.out_dir / "contours.csv");
    write_contours_csv(contour_out, rings);
    write_run_manifest(common.out_dir / "run_manifest.json", "predict", cfg);
    log << "predicted " << windows.size() << " windows\n";
}

void cmd_evaluate(RunConfig& cfg, std::ostream& log) {
    const Common common = read_common(cfg);
    const ModelParams params = load_model(cfg);
    const std::vector<fs::path> paths = data_paths(cfg);
    const std::string split = cfg.get_string("split", "test");
    const std::size_t n_in = cfg.get_size("n_in", 32);
    const std::size_t stride = cfg.get_size("stride", 1);
    const SplitSpec spec = read_split(cfg);
    const std::size_t max_samples = cfg.get_size("max_samples", 0);

    EvaluationOptions opts;
    opts.n_samples = cfg.get_size("n_samples", opts.n_samples);
    opts.cell_size = cfg.get_double("cell_size", opts.cell_size);
    opts.k = cfg.get_size("k", opts.k);
    const std::string sharing = cfg.get_string("sharing", "per_horizon");
    if (sharing == "per_hypothesis")
        opts.sharing = ComponentSharing::per_hypothesis;
    else if (sharing != "per_horizon")
        fail(ErrorCode::InvalidArgument, "sharing must be per_horizon or per_hypothesis");
    opts.sharpness_samples = cfg.get_size("sharpness_samples", opts.sharpness_samples);
    opts.min_pairs = cfg.get_size("min_pairs", opts.min_pairs);
    opts.seed = derive_seed(common.seed, "evaluate");
    const bool by_input_horizon = cfg.has("input_horizon");
    std::vector<double> input_horizons;
    for (std::string text : cfg.get_strings("input_horizon", {})) {
        if (!text.empty() && text.back() == 's') text.pop_back();
        input_horizons.push_back(parse_seconds(text));
    }
    const std::size_t m = params.config().num_horizons;
    const std::vector<std::size_t> plot_h = cfg.get_sizes("plot_horizons", whole_second_horizons(m, params.config().dt));

    const double rate = rate_of(params);
    const Dataset ds = load_dataset(paths, rate, n_in, m, spec, stride);
    const std::vector<EgoSample> all = build_samples(ds.split(split).tracks, n_in, m, stride);
    if (all.empty()) fail(ErrorCode::EmptyDataset, "split '" + split + "' has no windows");
    std::vector<EgoSample> samples;
    for (const std::size_t i : evenly_spaced(all.size(), max_samples)) samples.push_back(all[i]);

    // input lengths in points; 0 keeps the full n_in window
    std::vector<std::size_t> lengths;
    for (const double s : input_horizons) {
        const auto steps = static_cast<std::size_t>(std::lround(s * rate));
        if (!(s > 0.0) || steps < 2 || steps > n_in)
            fail(ErrorCode::InvalidArgument, "input horizon " + format_double(s) + " s gives " + std::to_string(steps) +
                                                 " points; need 2.." + std::to_string(n_in));
        lengths.push_back(steps);
    }
    if (lengths.empty()) lengths.push_back(0);

    std::vector<ScoreRow> rows;
    for (std::size_t i = 0; i < lengths.size(); ++i) {
        opts.input_length = lengths[i];
        const Evaluation ev = evaluate_samples(params, samples, opts);
        rows.push_back(ev.scores);
        const std::string suffix = by_input_horizon ? "_" + seconds_label(input_horizons[i]) : "";
        auto cal = open_out(common.out_dir / ("calibration" + suffix + ".csv"));
        write_calibration_csv(cal, ev.calibration);
        auto svg = open_out(common.out_dir / ("reliability" + suffix + ".svg"));
        write_reliability_svg(svg, ev.calibration, plot_h);
        log << "input " << format_double(ev.scores.input_horizon_s) << " s: r_avg "
            << format_double(ev.scores.reliability.r_avg) << " r_min " << format_double(ev.scores.reliability.r_min)
            << " s68 " << format_double(ev.scores.s68) << " s95 " << format_double(ev.scores.s95) << " min_ade_"
            << ev.scores.k << ' ' << format_double(ev.scores.displacement.min_ade) << " min_fde_" << ev.scores.k << ' '
            << format_double(ev.scores.displacement.min_fde) << '\n';
    }
    auto scores = open_out(common.out_dir / "scores.csv");
    write_scores_csv(scores, rows, by_input_horizon);
    write_run_manifest(common.out_dir / "run_manifest.json", "evaluate", cfg);
}

void cmd_bench(RunConfig& cfg, std::ostream& log) {
    const Common common = read_common(cfg);
    const ModelParams params = load_model(cfg);
    const std::size_t batch_size = cfg.get_size("batch", 128);
    const std::size_t n_in = cfg.get_size("n_in", 32);
    BenchOptions opts;
    opts.repetitions = cfg.get_size("repetitions", opts.repetitions);
    opts.warmup = cfg.get_size("warmup", opts.warmup);
    opts.n_samples = cfg.get_size("bench_samples", opts.n_samples);
    opts.levels = cfg.get_doubles("levels", opts.levels);
    opts.seed = derive_seed(common.seed, "bench");
    if (batch_size == 0) fail(ErrorCode::InvalidArgument, "batch must be positive");

    std::vector<Track> tracks;
    if (cfg.has("data")) {
        for (const fs::path& p : data_paths(cfg))
            for (const Track& raw : read_tracks_csv(p)) {
                try {
                    tracks.push_back(resample_track(raw, rate_of(params)));
                } catch (const Error& e) {
                    if (e.code() != ErrorCode::TrackTooShort) throw;
                }
            }
    } else {
        SynthConfig sc;
        sc.n_tracks = cfg.get_size("bench_tracks", 64);
        sc.duration_s = cfg.get_double("bench_duration_s", 10.0);
        sc.rate_hz = rate_of(params);
        sc.seed = derive_seed(common.seed, "bench/synth");
        tracks = generate_synthetic(sc);
    }
    std::vector<EgoSample> pool;
    for (const Track& t : tracks) {
        const auto w = make_input_windows(t, n_in, n_in);
        pool.insert(pool.end(), w.begin(), w.end());
    }
    if (pool.empty()) fail(ErrorCode::EmptyDataset, "no benchmark input has " + std::to_string(n_in) + " samples");
    std::vector<EgoSample> batch;
    for (std::size_t i = 0; i < batch_size; ++i) batch.push_back(pool[i % pool.size()]);

    const BenchResult r = run_bench(params, batch, opts);
    auto out = open_out(common.out_dir / "bench.csv");
    out << "stage,batch,repetitions,median_ms,p95_ms\n";
    const auto row = [&](const char* stage, const TimingSummary& t) {
        out << stage << ',' << r.batch << ',' << r.repetitions << ',' << format_double(t.median_ms) << ','
            << format_double(t.p95_ms) << '\n';
    };
    row("forward", r.forward);
    row("post_processing", r.post_processing);
    row("total", r.total);

    const ModelConfig& mc = params.config();
    write_run_manifest(common.out_dir / "run_manifest.json", "bench", cfg,
                       {{"machine_cpu", machine_cpu()},
                        {"machine_threads", std::to_string(std::thread::hardware_concurrency())},
                        {"machine_isa", std::string(simd::to_string(simd::active().isa))},
                        {"compiler", compiler_name()},
                        {"model", "hidden " + std::to_string(mc.hidden_dim) + ", layers " + std::to_string(mc.num_layers) +
                                      ", components " + std::to_string(mc.num_components) + ", horizons " +
                                      std::to_string(mc.num_horizons)}});
    log << "forward median " << format_double(r.forward.median_ms) << " ms, post-processing median "
        << format_double(r.post_processing.median_ms) << " ms, total median " << format_double(r.total.median_ms)
        << " ms (batch " << r.batch << ", " << r.repetitions << " repetitions)\n";
}

int run_command(std::string_view name, RunConfig& cfg, std::ostream& log, std::ostream& err) {
    try {
        cfg.reject_unknown(known_settings());
        if (name == "synth")
            cmd_synth(cfg, log);
        else if (name == "train")
            cmd_train(cfg, log);
        else if (name == "predict")
            cmd_predict(cfg, log);
        else if (name == "evaluate")
            cmd_evaluate(cfg, log);
        else if (name == "bench")
            cmd_bench(cfg, log);
        else
            fail(ErrorCode::InvalidArgument, "unknown subcommand '" + std::string(name) + "'");
        return kExitOk;
    } catch (const Error& e) {
        err << "trajpred " << name << ": " << e.what() << '\n';
        switch (e.code()) {
            case ErrorCode::NumericalDivergence:
            case ErrorCode::DegenerateCovariance:
            case ErrorCode::InvalidLogits:
            case ErrorCode::GridBudgetExceeded: return kExitNumerical;
            default: return kExitUsage;
        }
    } catch (const std::exception& e) {
        err << "trajpred " << name << ": " << e.what() << '\n';
        return kExitUsage;
    }
}

}  // namespace trajpred::cli
