#include "trajpred/checkpoint.hpp"

#include <zlib.h>

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string_view>

#include "trajpred/error.hpp"

namespace trajpred {
namespace {

constexpr char kMagic[8] = {'T', 'P', 'M', 'D', 'N', 'C', 'K', 'P'};

std::uint32_t crc_of(std::string_view bytes) {
    uLong crc = crc32(0L, Z_NULL, 0);
    crc = crc32(crc, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size()));
    return static_cast<std::uint32_t>(crc);
}

class Writer {
public:
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
    }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void bytes(std::string_view s) { out_.append(s); }
    std::string& str() { return out_; }

private:
    std::string out_;
};

class Reader {
public:
    explicit Reader(std::string_view data) : data_(data) {}

    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
        pos_ += 4;
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
        pos_ += 8;
        return v;
    }
    double f64() { return std::bit_cast<double>(u64()); }
    std::string_view bytes(std::size_t n) {
        need(n);
        const std::string_view v = data_.substr(pos_, n);
        pos_ += n;
        return v;
    }
    bool done() const { return pos_ == data_.size(); }

private:
    void need(std::size_t n) const {
        if (data_.size() - pos_ < n) fail(ErrorCode::ChecksumError, "checkpoint truncated");
    }

    std::string_view data_;
    std::size_t pos_ = 0;
};

}  // namespace

std::string encode_checkpoint(const ModelParams& params) {
    const ModelConfig& cfg = params.config();
    Writer w;
    w.bytes(std::string_view(kMagic, sizeof(kMagic)));
    w.u32(kCheckpointVersion);
    w.u32(static_cast<std::uint32_t>(cfg.input_dim));
    w.u32(static_cast<std::uint32_t>(cfg.hidden_dim));
    w.u32(static_cast<std::uint32_t>(cfg.num_layers));
    w.u32(static_cast<std::uint32_t>(cfg.num_components));
    w.u32(static_cast<std::uint32_t>(cfg.num_horizons));
    w.f64(cfg.dt);
    w.f64(cfg.activation.eps_sigma);
    w.f64(cfg.activation.eps_rho);
    w.f64(cfg.activation.sigma_offset);
    w.u32(static_cast<std::uint32_t>(params.tensors().size()));
    for (const TensorInfo& t : params.tensors()) {
        w.u32(static_cast<std::uint32_t>(t.name.size()));
        w.bytes(t.name);
        w.u32(static_cast<std::uint32_t>(t.shape.size()));
        for (std::size_t d : t.shape) w.u64(d);
        for (double v : params.tensor(t.name)) w.f64(v);
    }
    w.u32(crc_of(w.str()));
    return std::move(w.str());
}

ModelParams decode_checkpoint(const std::string& bytes) {
    if (bytes.size() < sizeof(kMagic) + 8 || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0)
        fail(ErrorCode::ChecksumError, "not a checkpoint or truncated header");
    const std::string_view body(bytes.data(), bytes.size() - 4);
    Reader trailer(std::string_view(bytes).substr(bytes.size() - 4));
    if (trailer.u32() != crc_of(body)) fail(ErrorCode::ChecksumError, "checkpoint checksum mismatch");

    Reader r(body);
    r.bytes(sizeof(kMagic));
    const std::uint32_t version = r.u32();
    if (version != kCheckpointVersion)
        fail(ErrorCode::UnsupportedVersion, "checkpoint version " + std::to_string(version) + ", expected " +
                                                std::to_string(kCheckpointVersion));
    ModelConfig cfg;
    cfg.input_dim = r.u32();
    cfg.hidden_dim = r.u32();
    cfg.num_layers = r.u32();
    cfg.num_components = r.u32();
    cfg.num_horizons = r.u32();
    cfg.dt = r.f64();
    cfg.activation.eps_sigma = r.f64();
    cfg.activation.eps_rho = r.f64();
    cfg.activation.sigma_offset = r.f64();

    ModelParams params = ModelParams::zeros(cfg);
    const std::uint32_t count = r.u32();
    if (count != params.tensors().size()) fail(ErrorCode::ModelShapeError, "unexpected tensor count in checkpoint");
    for (const TensorInfo& t : params.tensors()) {
        const std::uint32_t name_len = r.u32();
        const std::string_view name = r.bytes(name_len);
        if (name != t.name) fail(ErrorCode::ModelShapeError, "expected tensor '" + t.name + "', found '" + std::string(name) + "'");
        const std::uint32_t rank = r.u32();
        if (rank != t.shape.size()) fail(ErrorCode::ModelShapeError, "rank mismatch for " + t.name);
        for (std::size_t d : t.shape)
            if (r.u64() != d) fail(ErrorCode::ModelShapeError, "shape mismatch for " + t.name);
        for (double& v : params.tensor(t.name)) {
            v = r.f64();
            if (!std::isfinite(v)) fail(ErrorCode::ModelShapeError, "non-finite weight in " + t.name);
        }
    }
    if (!r.done()) fail(ErrorCode::ChecksumError, "trailing bytes in checkpoint");
    return params;
}

void save_checkpoint(const ModelParams& params, const std::filesystem::path& path) {
    const std::string bytes = encode_checkpoint(params);
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorCode::IoError, "cannot write " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) fail(ErrorCode::IoError, "failed writing " + path.string());
}

ModelParams load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::IoError, "cannot open checkpoint " + path.string());
    const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_checkpoint(bytes);
}

}  // namespace trajpred
