#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <optional>
#include <string>
#include <vector>

#include "ctsg/autodiff.hpp"
#include "ctsg/dataio.hpp"
#include "ctsg/error.hpp"
#include "ctsg/rng.hpp"
#include "ctsg/schedule.hpp"
#include "ctsg/tensor.hpp"

namespace ctsg {

enum class Conditioning { None, Trend };

struct DenoiserSpec {
    std::size_t length = 24;
    std::size_t features = 1;
    std::size_t channels = 64;
    std::size_t hidden_layers = 3;
    std::size_t embedding_dim = 128;
    Conditioning conditioning = Conditioning::None;
    bool gated_skip = true;  // adds g(t)·x_t to the MLP output, g linear in embed(t)

    std::size_t series_size() const { return length * features; }
    std::size_t input_size() const {
        return series_size() * (conditioning == Conditioning::Trend ? 2 : 1) + embedding_dim;
    }
};

/// ε_θ(x_t, t | s): MLP over [x_t, s, embed(t)] with tanh hidden layers.
struct DenoiserModel {
    DenoiserSpec spec;
    NoiseSchedule schedule;
    std::uint64_t seed = 0;
    std::optional<Normalization> norm;  // data normalization the model was trained under
    std::vector<Tensor> params;         // W0, b0, W1, b1, ... (W: in×out, b: 1×out), then Wg, bg if gated

};

/// Sinusoidal step embedding: [sin(t f_0..f_{h-1}), cos(t f_0..f_{h-1})] with
/// f_i = 10^{4 i / (h - 1)}, h = dim / 2.
inline std::vector<double> embed_step(std::size_t t, std::size_t dim, std::size_t T) {
    if (t < 1 || t > T) throw UsageError("embed_step: t = " + std::to_string(t) + " outside [1, " + std::to_string(T) + "]");
    if (dim < 2 || dim % 2 != 0) throw UsageError("embed_step: dimension must be even and >= 2");
    const std::size_t half = dim / 2;
    std::vector<double> e(dim);
    for (std::size_t i = 0; i < half; ++i) {
        const double f = half > 1 ? std::pow(10.0, 4.0 * static_cast<double>(i) / static_cast<double>(half - 1)) : 1.0;
        e[i] = std::sin(static_cast<double>(t) * f);
        e[half + i] = std::cos(static_cast<double>(t) * f);
    }
    return e;
}

inline DenoiserModel init_denoiser(const DenoiserSpec& spec, const NoiseSchedule& schedule, std::uint64_t seed) {
    if (spec.length < 2 || spec.features == 0 || spec.channels == 0 || spec.hidden_layers == 0 ||
        spec.embedding_dim == 0) {
        throw ConfigError("denoiser dimensions must be positive (L >= 2)");
    }
    DenoiserModel m;
    m.spec = spec;
    m.schedule = schedule;
    m.seed = seed;
    Rng rng = Rng(seed).derive("init");
    std::size_t fan_in = spec.input_size();
    for (std::size_t layer = 0; layer <= spec.hidden_layers; ++layer) {
        const bool last = layer == spec.hidden_layers;
        const std::size_t out = last ? spec.series_size() : spec.channels;
        Tensor W = Tensor::zeros({fan_in, out});
        if (!last) {
            const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
            for (double& v : W.values()) v = rng.uniform(-bound, bound);
        }
        m.params.push_back(std::move(W));
        m.params.push_back(Tensor::zeros({1, out}));
        fan_in = out;
    }
    if (spec.gated_skip) {
        m.params.push_back(Tensor::zeros({spec.embedding_dim, 1}));
        m.params.push_back(Tensor::zeros({1, 1}));
    }
    return m;
}

/// Input matrix [x_t, s, embed(t_b)] for a batch; x and s are {B, L*K}.
inline Tensor denoiser_input(const DenoiserModel& m, const Tensor& x, const std::vector<std::size_t>& steps,
                             const Tensor* trend) {
    const auto& sp = m.spec;
    if (x.rank() != 2 || x.dim(1) != sp.series_size()) {
        throw DimensionError("denoiser input must be {B, " + std::to_string(sp.series_size()) + "}, got " +
                             shape_string(x.shape()));
    }
    const std::size_t B = x.dim(0);
    if (steps.size() != B) throw DimensionError("denoiser: one diffusion step per batch row expected");
    const bool cond = sp.conditioning == Conditioning::Trend;
    if (cond != (trend != nullptr)) {
        throw UsageError(cond ? "trend-conditioned model needs a trend" : "unconditional model given a trend");
    }
    if (trend && trend->shape() != x.shape()) throw DimensionError("trend batch shape differs from x");
    const std::size_t n = sp.input_size();
    Tensor in = Tensor::zeros({B, n});
    const std::size_t d = sp.series_size();
    for (std::size_t b = 0; b < B; ++b) {
        double* row = in.values().data() + b * n;
        for (std::size_t k = 0; k < d; ++k) row[k] = x[b * d + k];
        std::size_t off = d;
        if (trend) {
            for (std::size_t k = 0; k < d; ++k) row[off + k] = (*trend)[b * d + k];
            off += d;
        }
        const auto e = embed_step(steps[b], sp.embedding_dim, m.schedule.T);
        for (std::size_t k = 0; k < e.size(); ++k) row[off + k] = e[k];
    }
    return in;
}

/// Network forward on an assembled input; T is Tensor (untraced) or Var (traced).
///
/// With the gated skip, ε̂ = MLP(input) + g(t) x_t where g is a linear
/// function of the step embedding. At large t the optimal ε̂ is close to
/// x_t / √(1 − α̂_t), and x̂₀ divides ε̂ errors by √α̂_T, so the identity part
/// must be exact rather than approximated through tanh layers. Both parts
/// start at zero.
template <class T>
T denoiser_forward(const DenoiserSpec& spec, const std::vector<T>& params, const T& input) {
    T h = input;
    const std::size_t layers = spec.hidden_layers + 1;
    const std::size_t B = input.shape()[0];
    for (std::size_t l = 0; l < layers; ++l) {
        const T& W = params[2 * l];
        const T& b = params[2 * l + 1];
        const Shape out_shape{B, W.shape()[1]};
        h = add(matmul(h, W), broadcast(b, out_shape));
        if (l + 1 < layers) h = tanh(h);
    }
    if (spec.gated_skip) {
        const std::size_t d = spec.series_size();
        const std::size_t e0 = spec.input_size() - spec.embedding_dim;
        const T x = slice(input, 1, 0, d);
        const T emb = slice(input, 1, e0, e0 + spec.embedding_dim);
        const T gate = add(matmul(emb, params[2 * layers]), broadcast(params[2 * layers + 1], Shape{B, 1}));
        h = add(h, mul(x, broadcast(gate, Shape{B, d})));
    }
    return h;
}

/// ε̂ for a batch x ({B, L*K}) at per-row steps; untraced.
inline Tensor predict_batch(const DenoiserModel& m, const Tensor& x, const std::vector<std::size_t>& steps,
                            const Tensor* trend = nullptr) {
    return denoiser_forward(m.spec, m.params, denoiser_input(m, x, steps, trend));
}

/// ε̂ for a single L×K series.
inline TimeSeries predict(const DenoiserModel& m, const TimeSeries& x_t, std::size_t t,
                          const TimeSeries* s = nullptr) {
    const auto& sp = m.spec;
    if (x_t.rank() != 2 || x_t.dim(0) != sp.length || x_t.dim(1) != sp.features) {
        throw DimensionError("predict: series shape " + shape_string(x_t.shape()) + " does not match model [" +
                             std::to_string(sp.length) + "," + std::to_string(sp.features) + "]");
    }
    std::optional<Tensor> srow;
    if (s) {
        if (s->shape() != x_t.shape()) throw DimensionError("predict: trend shape differs from x_t");
        srow = s->reshaped({1, s->size()});
    }
    Tensor out = predict_batch(m, x_t.reshaped({1, x_t.size()}), {t}, srow ? &*srow : nullptr);
    return out.reshaped(x_t.shape());
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace detail {

constexpr std::uint32_t kCheckpointVersion = 1;

class ByteWriter {
public:
    void bytes(const void* p, std::size_t n) {
        const auto* c = static_cast<const unsigned char*>(p);
        buf_.insert(buf_.end(), c, c + n);
    }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<unsigned char>(v >> (8 * i)));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<unsigned char>(v >> (8 * i)));
    }
    void f64(double d) {
        std::uint64_t v;
        std::memcpy(&v, &d, sizeof v);
        u64(v);
    }
    const std::vector<unsigned char>& data() const { return buf_; }

private:
    std::vector<unsigned char> buf_;
};

class ByteReader {
public:
    ByteReader(const std::vector<unsigned char>& buf, std::size_t end) : buf_(buf), end_(end) {}
    void need(std::size_t n) const {
        if (pos_ + n > end_) throw CheckpointError("checkpoint truncated");
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(buf_[pos_++]) << (8 * i);
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf_[pos_++]) << (8 * i);
        return v;
    }
    double f64() {
        const std::uint64_t v = u64();
        double d;
        std::memcpy(&d, &v, sizeof d);
        return d;
    }
    std::size_t pos() const { return pos_; }

private:
    const std::vector<unsigned char>& buf_;
    std::size_t end_;
    std::size_t pos_ = 0;
};

inline std::uint64_t fnv1a_bytes(const unsigned char* p, std::size_t n) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001B3ULL;
    }
    return h;
}

}  // namespace detail

/// Layout (little endian): "CTSG", u32 version, u32 L, K, channels, layers,
/// embedding dim, flags (bit 0 trend conditioning, bit 1 gated skip); u32 schedule kind, u32 T, f64 β₁, f64 β_T,
/// u64 schedule hash; u64 seed; u32 normalization flag (+ K × {f64 min, f64
/// max, u32 constant}); u32 tensor count, each u32 rank, u32 dims, f64 values;
/// u64 FNV-1a checksum of all preceding bytes.
inline std::vector<unsigned char> serialize(const DenoiserModel& m) {
    detail::ByteWriter w;
    w.bytes("CTSG", 4);
    w.u32(detail::kCheckpointVersion);
    const auto& sp = m.spec;
    for (std::size_t v : {sp.length, sp.features, sp.channels, sp.hidden_layers, sp.embedding_dim}) {
        w.u32(static_cast<std::uint32_t>(v));
    }
    w.u32((sp.conditioning == Conditioning::Trend ? 1U : 0U) | (sp.gated_skip ? 2U : 0U));
    w.u32(static_cast<std::uint32_t>(m.schedule.kind));
    w.u32(static_cast<std::uint32_t>(m.schedule.T));
    w.f64(m.schedule.beta_1);
    w.f64(m.schedule.beta_T);
    w.u64(m.schedule.hash());
    w.u64(m.seed);
    w.u32(m.norm ? 1 : 0);
    if (m.norm) {
        for (std::size_t j = 0; j < m.norm->features(); ++j) {
            w.f64(m.norm->min[j]);
            w.f64(m.norm->max[j]);
            w.u32(m.norm->constant[j] ? 1 : 0);
        }
    }
    w.u32(static_cast<std::uint32_t>(m.params.size()));
    for (const auto& p : m.params) {
        w.u32(static_cast<std::uint32_t>(p.rank()));
        for (std::size_t d : p.shape()) w.u32(static_cast<std::uint32_t>(d));
        for (double v : p.values()) w.f64(v);
    }
    std::vector<unsigned char> out = w.data();
    const std::uint64_t sum = detail::fnv1a_bytes(out.data(), out.size());
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<unsigned char>(sum >> (8 * i)));
    return out;
}

inline DenoiserModel deserialize(const std::vector<unsigned char>& buf) {
    if (buf.size() < 16 || std::memcmp(buf.data(), "CTSG", 4) != 0) throw CheckpointError("not a checkpoint (bad magic)");
    const std::size_t body = buf.size() - 8;
    std::uint64_t stored = 0;
    for (int i = 0; i < 8; ++i) stored |= static_cast<std::uint64_t>(buf[body + static_cast<std::size_t>(i)]) << (8 * i);
    detail::ByteReader rd(buf, body);
    rd.u32();  // magic, checked above
    const std::uint32_t version = rd.u32();
    if (version != detail::kCheckpointVersion) {
        throw CheckpointError("checkpoint version " + std::to_string(version) + " is not supported (expected " +
                              std::to_string(detail::kCheckpointVersion) + ")");
    }
    if (detail::fnv1a_bytes(buf.data(), body) != stored) throw CheckpointError("checkpoint checksum mismatch");
    DenoiserModel m;
    m.spec.length = rd.u32();
    m.spec.features = rd.u32();
    m.spec.channels = rd.u32();
    m.spec.hidden_layers = rd.u32();
    m.spec.embedding_dim = rd.u32();
    const std::uint32_t flags = rd.u32();
    if (flags > 3) throw CheckpointError("checkpoint has unknown model flags");
    m.spec.conditioning = (flags & 1U) ? Conditioning::Trend : Conditioning::None;
    m.spec.gated_skip = (flags & 2U) != 0;
    const auto kind = static_cast<ScheduleKind>(rd.u32());
    const std::size_t T = rd.u32();
    const double b1 = rd.f64();
    const double bT = rd.f64();
    const std::uint64_t hash = rd.u64();
    try {
        m.schedule = make_schedule(kind, T, b1, bT);
    } catch (const ConfigError& e) {
        throw CheckpointError(std::string("checkpoint schedule invalid: ") + e.what());
    }
    if (m.schedule.hash() != hash) throw CheckpointError("checkpoint schedule hash mismatch");
    m.seed = rd.u64();
    if (rd.u32()) {
        Normalization n;
        for (std::size_t j = 0; j < m.spec.features; ++j) {
            n.min.push_back(rd.f64());
            n.max.push_back(rd.f64());
            n.constant.push_back(rd.u32() != 0);
        }
        m.norm = std::move(n);
    }
    const std::uint32_t count = rd.u32();
    DenoiserModel ref = init_denoiser(m.spec, m.schedule, 0);
    if (count != ref.params.size()) throw CheckpointError("checkpoint tensor count does not match its layer spec");
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::uint32_t rank = rd.u32();
        Shape shape;
        for (std::uint32_t d = 0; d < rank; ++d) shape.push_back(rd.u32());
        if (shape != ref.params[i].shape()) throw CheckpointError("checkpoint tensor shape does not match its layer spec");
        std::vector<double> values(shape_size(shape));
        for (double& v : values) v = rd.f64();
        m.params.emplace_back(std::move(shape), std::move(values));
    }
    if (rd.pos() != body) throw CheckpointError("checkpoint has trailing bytes");
    return m;
}

inline void save_denoiser(const DenoiserModel& m, const std::string& path) {
    const auto bytes = serialize(m);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed for " + path);
}

inline DenoiserModel load_denoiser(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return deserialize(bytes);
}

}  // namespace ctsg
