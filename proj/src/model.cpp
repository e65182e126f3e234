#include "trajpred/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <map>
#include <random>

#include "trajpred/error.hpp"
#include "trajpred/rng.hpp"
#include "trajpred/simd/kernels.hpp"

namespace trajpred {

void ModelConfig::validate() const {
    if (input_dim != 4) fail(ErrorCode::ModelShapeError, "input_dim must be 4 (x, y, vx, vy)");
    if (hidden_dim == 0 || num_layers == 0 || num_components == 0 || num_horizons == 0)
        fail(ErrorCode::ModelShapeError, "model dimensions must be positive");
    if (!(dt > 0.0) || !std::isfinite(dt)) fail(ErrorCode::ModelShapeError, "dt must be positive");
    if (!(activation.eps_sigma > 0.0) || !(activation.eps_rho > 0.0) || !(activation.eps_rho < 1.0) ||
        !(activation.sigma_offset >= 0.0) || !std::isfinite(activation.sigma_offset))
        fail(ErrorCode::ModelShapeError, "activation constants out of range");
}

ModelParams::ModelParams(const ModelConfig& config) : config_(config) {
    config_.validate();
    const std::size_t h = config.hidden_dim;
    std::size_t offset = 0;
    auto add = [&](std::string name, std::vector<std::size_t> shape) {
        std::size_t size = 1;
        for (std::size_t d : shape) size *= d;
        tensors_.push_back({std::move(name), std::move(shape), offset, size});
        offset += size;
    };
    for (std::size_t l = 0; l < config.num_layers; ++l) {
        const std::size_t in = l == 0 ? config.input_dim : h;
        const std::string prefix = "lstm." + std::to_string(l) + ".";
        add(prefix + "w_ih", {4 * h, in});
        add(prefix + "w_hh", {4 * h, h});
        add(prefix + "bias", {4 * h});
    }
    add("head.weight", {config.head_outputs(), h});
    add("head.bias", {config.head_outputs()});
    values_.assign(offset, 0.0);
}

ModelParams ModelParams::zeros(const ModelConfig& config) { return ModelParams(config); }

ModelParams ModelParams::xavier(const ModelConfig& config, std::uint64_t seed) {
    ModelParams p(config);
    Engine engine = make_engine(derive_seed(seed, "init"));
    for (const TensorInfo& t : p.tensors_) {
        std::span<double> v = p.tensor(t.name);
        if (t.shape.size() == 2) {
            const double fan_out = static_cast<double>(t.shape[0]);
            const double fan_in = static_cast<double>(t.shape[1]);
            const double limit = std::sqrt(6.0 / (fan_in + fan_out));
            std::uniform_real_distribution<double> dist(-limit, limit);
            for (double& x : v) x = dist(engine);
        } else if (t.name.ends_with(".bias") && t.name.starts_with("lstm.")) {
            const std::size_t h = config.hidden_dim;
            std::fill(v.begin() + static_cast<std::ptrdiff_t>(h), v.begin() + static_cast<std::ptrdiff_t>(2 * h), 1.0);
        }
    }
    return p;
}

const TensorInfo& ModelParams::info(std::string_view name) const {
    for (const TensorInfo& t : tensors_)
        if (t.name == name) return t;
    fail(ErrorCode::ModelShapeError, "no tensor named '" + std::string(name) + "'");
}

std::span<double> ModelParams::tensor(std::string_view name) {
    const TensorInfo& t = info(name);
    return std::span<double>(values_).subspan(t.offset, t.size);
}

std::span<const double> ModelParams::tensor(std::string_view name) const {
    const TensorInfo& t = info(name);
    return std::span<const double>(values_).subspan(t.offset, t.size);
}

bool operator==(const ModelParams& a, const ModelParams& b) {
    if (!(a.config_ == b.config_) || a.values_.size() != b.values_.size()) return false;
    return std::equal(a.values_.begin(), a.values_.end(), b.values_.begin(),
                      [](double x, double y) { return std::bit_cast<std::uint64_t>(x) == std::bit_cast<std::uint64_t>(y); });
}

namespace {

struct LayerView {
    std::span<const double> w_ih;
    std::span<const double> w_hh;
    std::span<const double> bias;
};

LayerView layer(const ModelParams& p, std::size_t l) {
    const std::string prefix = "lstm." + std::to_string(l) + ".";
    return {p.tensor(prefix + "w_ih"), p.tensor(prefix + "w_hh"), p.tensor(prefix + "bias")};
}

struct LayerTrace {
    std::vector<double> h;      // (steps + 1) x B x H; slot 0 is the zero initial state
    std::vector<double> c;      // state slots x B x H
    std::vector<double> gates;  // gate slots x B x 4H, post-activation (i, f, g, o)
};

// Forward pass over one equal-length group. With keep_trace every time step is
// retained for backpropagation; otherwise only two rolling state slots.
struct Trace {
    std::size_t batch = 0;
    std::size_t steps = 0;
    bool keep = false;
    std::vector<double> features;  // steps x B x input_dim
    std::vector<LayerTrace> layers;
    std::vector<double> raw;  // B x head_outputs

    std::size_t state_slot(std::size_t t) const { return keep ? t : t % 2; }
    std::size_t gate_slot(std::size_t t) const { return keep ? t : 0; }
};

Trace run_forward(const ModelParams& params, std::span<const std::span<const InputPoint>> inputs, bool keep_trace) {
    const ModelConfig& cfg = params.config();
    Trace tr;
    tr.batch = inputs.size();
    tr.keep = keep_trace;
    if (tr.batch == 0) fail(ErrorCode::ModelShapeError, "empty batch");
    tr.steps = inputs[0].size();
    if (tr.steps < 2) fail(ErrorCode::ModelShapeError, "input sequences need at least 2 points");
    const std::size_t B = tr.batch;
    const std::size_t T = tr.steps;
    const std::size_t H = cfg.hidden_dim;
    const std::size_t in0 = cfg.input_dim;

    tr.features.resize(T * B * in0);
    for (std::size_t b = 0; b < B; ++b) {
        if (inputs[b].size() != T) fail(ErrorCode::ModelShapeError, "batch mixes input lengths");
        for (std::size_t t = 0; t < T; ++t) {
            const InputPoint& p = inputs[b][t];
            if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.vx) || !std::isfinite(p.vy))
                fail(ErrorCode::ModelShapeError, "non-finite input feature");
            double* f = tr.features.data() + (t * B + b) * in0;
            f[0] = p.x;
            f[1] = p.y;
            f[2] = p.vx;
            f[3] = p.vy;
        }
    }

    const std::size_t out = cfg.head_outputs();
    const std::span<const double> head_w = params.tensor("head.weight");
    const std::span<const double> head_b = params.tensor("head.bias");
    tr.raw.resize(B * out);
    for (std::size_t b = 0; b < B; ++b) std::copy(head_b.begin(), head_b.end(), tr.raw.begin() + static_cast<std::ptrdiff_t>(b * out));

    if (!keep_trace) {
        // Step-major: each time step climbs the whole stack, so only one B x H
        // state pair per layer and one gate buffer are live. The sums per gate
        // run in the same order as below, so the results are bitwise equal.
        thread_local std::vector<double> h, c, z, gates;
        h.assign(cfg.num_layers * B * H, 0.0);
        c.assign(cfg.num_layers * B * H, 0.0);
        z.resize(B * 4 * H);
        gates.resize(B * 4 * H);
        std::vector<LayerView> views;
        for (std::size_t l = 0; l < cfg.num_layers; ++l) views.push_back(layer(params, l));
        for (std::size_t t = 0; t < T; ++t)
            for (std::size_t l = 0; l < cfg.num_layers; ++l) {
                const LayerView& w = views[l];
                const std::size_t in = l == 0 ? in0 : H;
                const double* x = l == 0 ? tr.features.data() + t * B * in0 : h.data() + (l - 1) * B * H;
                for (std::size_t r = 0; r < B; ++r)
                    std::copy(w.bias.begin(), w.bias.end(), z.begin() + static_cast<std::ptrdiff_t>(r * 4 * H));
                simd::gemm_nt({x, B * in}, w.w_ih, z, B, 4 * H, in);
                const std::span<double> hl(h.data() + l * B * H, B * H);
                const std::span<double> cl(c.data() + l * B * H, B * H);
                simd::gemm_nt(hl, w.w_hh, z, B, 4 * H, H);
                // the cell reads c and z before writing c and h, element by element
                simd::lstm_cell(z, cl, gates, cl, hl, B, H);
            }
        simd::gemm_nt({h.data() + (cfg.num_layers - 1) * B * H, B * H}, head_w, tr.raw, B, out, H);
        return tr;
    }

    // h keeps every step since the next layer consumes it
    tr.layers.resize(cfg.num_layers);
    const std::size_t state_slots = T + 1;
    const std::size_t gate_slots = T;
    std::vector<double> z_in(T * B * 4 * H);
    for (std::size_t l = 0; l < cfg.num_layers; ++l) {
        LayerTrace& lt = tr.layers[l];
        lt.h.assign((T + 1) * B * H, 0.0);
        lt.c.assign(state_slots * B * H, 0.0);
        lt.gates.assign(gate_slots * B * 4 * H, 0.0);
        const LayerView w = layer(params, l);
        const std::size_t in = l == 0 ? in0 : H;

        // input projections of all steps in one product
        const double* x_all = l == 0 ? tr.features.data() : tr.layers[l - 1].h.data() + B * H;
        for (std::size_t r = 0; r < T * B; ++r)
            std::copy(w.bias.begin(), w.bias.end(), z_in.begin() + static_cast<std::ptrdiff_t>(r * 4 * H));
        simd::gemm_nt({x_all, T * B * in}, w.w_ih, z_in, T * B, 4 * H, in);

        for (std::size_t t = 0; t < T; ++t) {
            const double* h_prev = lt.h.data() + t * B * H;
            const double* c_prev = lt.c.data() + tr.state_slot(t) * B * H;
            double* h_next = lt.h.data() + (t + 1) * B * H;
            double* c_next = lt.c.data() + tr.state_slot(t + 1) * B * H;
            double* gates = lt.gates.data() + tr.gate_slot(t) * B * 4 * H;

            const std::span<double> z(z_in.data() + t * B * 4 * H, B * 4 * H);
            simd::gemm_nt({h_prev, B * H}, w.w_hh, z, B, 4 * H, H);
            simd::lstm_cell(z, {c_prev, B * H}, {gates, B * 4 * H}, {c_next, B * H}, {h_next, B * H}, B, H);
        }
    }

    const double* top = tr.layers.back().h.data() + T * B * H;
    simd::gemm_nt({top, B * H}, head_w, tr.raw, B, out, H);
    return tr;
}

MixtureForecast to_forecast(const ModelConfig& cfg, std::span<const double> raw_row) {
    MixtureForecast f;
    f.dt = cfg.dt;
    const std::size_t per_h = cfg.num_components * kParamsPerComponent;
    f.horizons.reserve(cfg.num_horizons);
    for (std::size_t h = 0; h < cfg.num_horizons; ++h)
        f.horizons.push_back(activate(raw_row.subspan(h * per_h, per_h), cfg.activation));
    return f;
}

std::map<std::size_t, std::vector<std::size_t>> group_by_length(std::span<const EgoSample> samples) {
    std::map<std::size_t, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < samples.size(); ++i) groups[samples[i].input.size()].push_back(i);
    return groups;
}

// Per-sample horizon-summed NLL; fills d_raw (scaled by `scale`) when given.
double head_loss(const ModelConfig& cfg, const Trace& tr, std::span<const EgoSample> samples,
                 std::span<const std::size_t> idx, double scale, std::vector<double>* d_raw) {
    const std::size_t out = cfg.head_outputs();
    const std::size_t per_h = cfg.num_components * kParamsPerComponent;
    if (d_raw) d_raw->assign(tr.batch * out, 0.0);
    std::vector<double> g(per_h);
    double total = 0.0;
    for (std::size_t b = 0; b < tr.batch; ++b) {
        const EgoSample& s = samples[idx[b]];
        if (s.future_gt.size() != cfg.num_horizons)
            fail(ErrorCode::HorizonMismatch, "sample has " + std::to_string(s.future_gt.size()) +
                                                 " future points, model predicts " + std::to_string(cfg.num_horizons));
        for (std::size_t h = 0; h < cfg.num_horizons; ++h) {
            const std::span<const double> raw(tr.raw.data() + b * out + h * per_h, per_h);
            for (double v : raw)
                if (!std::isfinite(v)) throw NumericalDivergence(static_cast<long>(h), "non-finite head output at horizon " + std::to_string(h));
            const double l = nll_raw_with_grad(raw, cfg.activation, s.future_gt[h], g);
            if (!std::isfinite(l)) throw NumericalDivergence(static_cast<long>(h), "non-finite NLL at horizon " + std::to_string(h));
            total += l;
            if (d_raw)
                for (std::size_t k = 0; k < per_h; ++k) (*d_raw)[b * out + h * per_h + k] = g[k] * scale;
        }
    }
    return total;
}

void backward(const ModelParams& params, const Trace& tr, std::span<const double> d_raw, ModelParams& grad) {
    const ModelConfig& cfg = params.config();
    const std::size_t B = tr.batch;
    const std::size_t T = tr.steps;
    const std::size_t H = cfg.hidden_dim;
    const std::size_t out = cfg.head_outputs();

    // head
    const double* top = tr.layers.back().h.data() + T * B * H;
    simd::gemm_tn(d_raw, {top, B * H}, grad.tensor("head.weight"), out, H, B);
    std::span<double> d_head_b = grad.tensor("head.bias");
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t k = 0; k < out; ++k) d_head_b[k] += d_raw[b * out + k];

    // dh_from_above[t] for state slots 1..T of the current layer
    std::vector<double> dh_above((T + 1) * B * H, 0.0);
    simd::gemm_nn(d_raw, params.tensor("head.weight"), std::span<double>(dh_above).subspan(T * B * H, B * H), B, H, out);

    std::vector<double> dh_below((T + 1) * B * H);
    std::vector<double> dz_all(T * B * 4 * H);
    std::vector<double> dh_rec(B * H);
    std::vector<double> dc(B * H);

    for (std::size_t l = cfg.num_layers; l-- > 0;) {
        const LayerTrace& lt = tr.layers[l];
        const LayerView w = layer(params, l);
        const std::string prefix = "lstm." + std::to_string(l) + ".";
        std::span<double> d_wih = grad.tensor(prefix + "w_ih");
        std::span<double> d_whh = grad.tensor(prefix + "w_hh");
        std::span<double> d_bias = grad.tensor(prefix + "bias");
        const std::size_t in = l == 0 ? cfg.input_dim : H;

        std::fill(dh_rec.begin(), dh_rec.end(), 0.0);
        std::fill(dc.begin(), dc.end(), 0.0);
        if (l > 0) std::fill(dh_below.begin(), dh_below.end(), 0.0);

        for (std::size_t t = T; t-- > 0;) {
            const double* gates = lt.gates.data() + t * B * 4 * H;
            const double* c_prev = lt.c.data() + t * B * H;
            const double* c_now = lt.c.data() + (t + 1) * B * H;
            const double* dh_up = dh_above.data() + (t + 1) * B * H;
            for (std::size_t b = 0; b < B; ++b) {
                const double* gb = gates + b * 4 * H;
                double* zb = dz_all.data() + (t * B + b) * 4 * H;
                for (std::size_t j = 0; j < H; ++j) {
                    const std::size_t s = b * H + j;
                    const double ig = gb[j];
                    const double fg = gb[H + j];
                    const double gg = gb[2 * H + j];
                    const double og = gb[3 * H + j];
                    const double dh = dh_up[s] + dh_rec[s];
                    const double tc = std::tanh(c_now[s]);
                    const double dc_total = dc[s] + dh * og * (1.0 - tc * tc);
                    zb[j] = dc_total * gg * ig * (1.0 - ig);
                    zb[H + j] = dc_total * c_prev[s] * fg * (1.0 - fg);
                    zb[2 * H + j] = dc_total * ig * (1.0 - gg * gg);
                    zb[3 * H + j] = dh * tc * og * (1.0 - og);
                    dc[s] = dc_total * fg;
                }
            }
            const std::span<const double> dz(dz_all.data() + t * B * 4 * H, B * 4 * H);
            std::fill(dh_rec.begin(), dh_rec.end(), 0.0);
            simd::gemm_nn(dz, w.w_hh, dh_rec, B, H, 4 * H);
        }

        // weight gradients and the input-side term of all steps at once
        const double* x_all = l == 0 ? tr.features.data() : tr.layers[l - 1].h.data() + B * H;
        simd::gemm_tn(dz_all, {x_all, T * B * in}, d_wih, 4 * H, in, T * B);
        simd::gemm_tn(dz_all, {lt.h.data(), T * B * H}, d_whh, 4 * H, H, T * B);
        for (std::size_t r = 0; r < T * B; ++r)
            for (std::size_t k = 0; k < 4 * H; ++k) d_bias[k] += dz_all[r * 4 * H + k];
        if (l > 0) simd::gemm_nn(dz_all, w.w_ih, std::span<double>(dh_below).subspan(B * H, T * B * H), T * B, H, 4 * H);
        if (l > 0) std::swap(dh_above, dh_below);
    }
}

std::vector<std::span<const InputPoint>> gather_inputs(std::span<const EgoSample> samples,
                                                      std::span<const std::size_t> idx) {
    std::vector<std::span<const InputPoint>> inputs;
    inputs.reserve(idx.size());
    for (std::size_t i : idx) inputs.emplace_back(samples[i].input);
    return inputs;
}

}  // namespace

MixtureForecast forward(const ModelParams& params, std::span<const InputPoint> input) {
    const std::span<const InputPoint> one[1] = {input};
    const Trace tr = run_forward(params, one, false);
    return to_forecast(params.config(), tr.raw);
}

std::vector<double> forward_raw(const ModelParams& params, std::span<const std::span<const InputPoint>> inputs) {
    return run_forward(params, inputs, false).raw;
}

std::vector<MixtureForecast> forward(const ModelParams& params, std::span<const EgoSample> samples) {
    std::vector<MixtureForecast> out(samples.size());
    const std::size_t width = params.config().head_outputs();
    for (const auto& [length, idx] : group_by_length(samples)) {
        const auto inputs = gather_inputs(samples, idx);
        const Trace tr = run_forward(params, inputs, false);
        for (std::size_t b = 0; b < idx.size(); ++b)
            out[idx[b]] = to_forecast(params.config(), std::span<const double>(tr.raw).subspan(b * width, width));
    }
    return out;
}

LossAndGrad loss_and_grad(const ModelParams& params, std::span<const EgoSample> batch) {
    if (batch.empty()) fail(ErrorCode::InvalidArgument, "empty batch");
    LossAndGrad result{0.0, ModelParams::zeros(params.config())};
    const double scale = 1.0 / static_cast<double>(batch.size());
    std::vector<double> d_raw;
    for (const auto& [length, idx] : group_by_length(batch)) {
        const auto inputs = gather_inputs(batch, idx);
        const Trace tr = run_forward(params, inputs, true);
        result.loss += head_loss(params.config(), tr, batch, idx, scale, &d_raw);
        backward(params, tr, d_raw, result.grad);
    }
    result.loss *= scale;
    return result;
}

double batch_loss(const ModelParams& params, std::span<const EgoSample> batch) {
    if (batch.empty()) fail(ErrorCode::InvalidArgument, "empty batch");
    double total = 0.0;
    for (const auto& [length, idx] : group_by_length(batch)) {
        const auto inputs = gather_inputs(batch, idx);
        const Trace tr = run_forward(params, inputs, false);
        total += head_loss(params.config(), tr, batch, idx, 1.0, nullptr);
    }
    return total / static_cast<double>(batch.size());
}

}  // namespace trajpred
