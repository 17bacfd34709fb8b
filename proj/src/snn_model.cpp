#include "evsr/snn_model.h"

#include "evsr/event_core.h"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <future>
#include <iterator>
#include <random>
#include <sstream>

namespace evsr {

int LayerConfig::out_height(int in_h) const {
    return kind == LayerKind::conv ? (in_h + 2 * padding - kernel_h) / stride + 1
                                   : (in_h - 1) * stride - 2 * padding + kernel_h;
}

int LayerConfig::out_width(int in_w) const {
    return kind == LayerKind::conv ? (in_w + 2 * padding - kernel_w) / stride + 1
                                   : (in_w - 1) * stride - 2 * padding + kernel_w;
}

void LayerConfig::validate() const {
    if (in_channels <= 0 || out_channels <= 0 || kernel_h <= 0 || kernel_w <= 0 || stride <= 0 ||
        padding < 0)
        throw std::invalid_argument("invalid layer configuration");
}

std::string to_string(Variant v) { return v == Variant::dual_layer ? "dual_layer" : "ultralight"; }

std::string to_string(ExecMode m) {
    switch (m) {
        case ExecMode::joint: return "joint";
        case ExecMode::dual_sequential: return "dual_sequential";
        case ExecMode::dual_concurrent: return "dual_concurrent";
    }
    return "?";
}

std::string to_string(LayerKind k) { return k == LayerKind::conv ? "conv" : "transposed_conv"; }

Variant parse_variant(const std::string& s) {
    if (s == "dual_layer") return Variant::dual_layer;
    if (s == "ultralight") return Variant::ultralight;
    throw std::invalid_argument("unknown variant '" + s + "'");
}

ExecMode parse_mode(const std::string& s) {
    if (s == "joint") return ExecMode::joint;
    if (s == "dual_sequential") return ExecMode::dual_sequential;
    if (s == "dual_concurrent") return ExecMode::dual_concurrent;
    throw std::invalid_argument("unknown mode '" + s + "'");
}

LayerKind parse_layer_kind(const std::string& s) {
    if (s == "conv") return LayerKind::conv;
    if (s == "transposed_conv") return LayerKind::transposed_conv;
    throw std::invalid_argument("unknown layer kind '" + s + "'");
}

NetworkSpec NetworkSpec::make(Variant v) {
    const int io = v == Variant::dual_layer ? 2 : 1;
    NetworkSpec spec;
    spec.variant = v;
    spec.layers = {
        LayerConfig{io, 8, 5, 5, 1, 2, LayerKind::conv},
        LayerConfig{8, io, 2, 2, 2, 0, LayerKind::transposed_conv},
    };
    spec.neurons = {
        NeuronConfig{30.0, 1.0, 1.0, 1.0, 1.0, 10.0},
        NeuronConfig{100.0, 4.0, 4.0, 1.0, 10.0, 100.0},
    };
    return spec;
}

std::size_t NetworkWeights::count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.values.size();
    return n;
}

NetworkWeights zero_weights(const NetworkSpec& spec) {
    NetworkWeights w;
    for (const auto& l : spec.layers) w.layers.emplace_back(l);
    return w;
}

NetworkWeights init_weights(const NetworkSpec& spec, std::uint64_t seed) {
    NetworkWeights w = zero_weights(spec);
    std::mt19937_64 rng(seed);
    for (std::size_t l = 0; l < spec.layers.size(); ++l) {
        const double b = spec.neurons[l].v_th / spec.layers[l].fan_in();
        std::uniform_real_distribution<double> dist(-b, b);
        for (auto& v : w.layers[l].values) v = dist(rng);
    }
    return w;
}

void validate_weights(const NetworkSpec& spec, const NetworkWeights& w) {
    if (w.layers.size() != spec.layers.size()) throw ShapeError("weight/layer count mismatch");
    for (std::size_t l = 0; l < w.layers.size(); ++l) {
        const auto& a = w.layers[l];
        const auto& c = spec.layers[l];
        if (a.out_ch != c.out_channels || a.in_ch != c.in_channels || a.kh != c.kernel_h ||
            a.kw != c.kernel_w || a.values.size() != static_cast<std::size_t>(c.out_channels) *
                                                         c.in_channels * c.kernel_h * c.kernel_w)
            throw ShapeError("weights of layer " + std::to_string(l) + " do not match its config");
        for (double v : a.values)
            if (!std::isfinite(v)) throw ShapeError("non-finite weight in layer " + std::to_string(l));
    }
}

// ---------------------------------------------------------------------------
// Spatial operators. Tensors keep time innermost, so every tap is an axpy over
// a contiguous time series.

namespace {

inline void axpy(double a, const double* x, double* y, int n) {
    for (int i = 0; i < n; ++i) y[i] += a * x[i];
}

inline double dot(const double* x, const double* y, int n) {
    double acc = 0.0;
    for (int i = 0; i < n; ++i) acc += x[i] * y[i];
    return acc;
}

// Calls fn(out_y, out_x, in_y, in_x, ky, kx) for every valid tap.
template <typename Fn>
void for_each_tap(const LayerConfig& cfg, int in_h, int in_w, Fn&& fn) {
    if (cfg.kind == LayerKind::conv) {
        const int oh = cfg.out_height(in_h), ow = cfg.out_width(in_w);
        for (int oy = 0; oy < oh; ++oy)
            for (int ox = 0; ox < ow; ++ox)
                for (int ky = 0; ky < cfg.kernel_h; ++ky) {
                    const int iy = oy * cfg.stride + ky - cfg.padding;
                    if (iy < 0 || iy >= in_h) continue;
                    for (int kx = 0; kx < cfg.kernel_w; ++kx) {
                        const int ix = ox * cfg.stride + kx - cfg.padding;
                        if (ix < 0 || ix >= in_w) continue;
                        fn(oy, ox, iy, ix, ky, kx);
                    }
                }
    } else {
        const int oh = cfg.out_height(in_h), ow = cfg.out_width(in_w);
        for (int iy = 0; iy < in_h; ++iy)
            for (int ix = 0; ix < in_w; ++ix)
                for (int ky = 0; ky < cfg.kernel_h; ++ky) {
                    const int oy = iy * cfg.stride + ky - cfg.padding;
                    if (oy < 0 || oy >= oh) continue;
                    for (int kx = 0; kx < cfg.kernel_w; ++kx) {
                        const int ox = ix * cfg.stride + kx - cfg.padding;
                        if (ox < 0 || ox >= ow) continue;
                        fn(oy, ox, iy, ix, ky, kx);
                    }
                }
    }
}

void check_input(const Tensor4& in, const WeightArray& w, const LayerConfig& cfg) {
    cfg.validate();
    if (in.channels() != cfg.in_channels || w.in_ch != cfg.in_channels || w.out_ch != cfg.out_channels ||
        w.kh != cfg.kernel_h || w.kw != cfg.kernel_w)
        throw ShapeError("layer input " + in.shape().str() + " does not match layer configuration");
    if (cfg.out_height(in.height()) <= 0 || cfg.out_width(in.width()) <= 0)
        throw ShapeError("input " + in.shape().str() + " too small for kernel");
}

}  // namespace

Tensor4 conv_drive(const Tensor4& in, const WeightArray& w, const LayerConfig& cfg) {
    check_input(in, w, cfg);
    const int T = in.steps();
    Tensor4 out(cfg.out_channels, cfg.out_height(in.height()), cfg.out_width(in.width()), T);
    for_each_tap(cfg, in.height(), in.width(), [&](int oy, int ox, int iy, int ix, int ky, int kx) {
        for (int o = 0; o < cfg.out_channels; ++o) {
            double* dst = out.series(o, oy, ox).data();
            for (int i = 0; i < cfg.in_channels; ++i)
                axpy(w.at(o, i, ky, kx), in.series(i, iy, ix).data(), dst, T);
        }
    });
    return out;
}

Tensor4 conv_input_adjoint(const Tensor4& grad, const WeightArray& w, const LayerConfig& cfg,
                           const Shape4& in_shape) {
    const int T = grad.steps();
    Tensor4 out(in_shape);
    for_each_tap(cfg, in_shape.h, in_shape.w, [&](int oy, int ox, int iy, int ix, int ky, int kx) {
        for (int o = 0; o < cfg.out_channels; ++o) {
            const double* g = grad.series(o, oy, ox).data();
            for (int i = 0; i < cfg.in_channels; ++i)
                axpy(w.at(o, i, ky, kx), g, out.series(i, iy, ix).data(), T);
        }
    });
    return out;
}

void conv_weight_grad(const Tensor4& grad, const Tensor4& in, const LayerConfig& cfg, WeightArray& dw) {
    const int T = grad.steps();
    for_each_tap(cfg, in.height(), in.width(), [&](int oy, int ox, int iy, int ix, int ky, int kx) {
        for (int o = 0; o < cfg.out_channels; ++o) {
            const double* g = grad.series(o, oy, ox).data();
            for (int i = 0; i < cfg.in_channels; ++i)
                dw.at(o, i, ky, kx) += dot(g, in.series(i, iy, ix).data(), T);
        }
    });
}

Tensor4 bilinear_upsample_2x(const Tensor4& in) {
    const Shape4& sh = in.shape();
    if (sh.h < 1 || sh.w < 1) throw ShapeError("bilinear_upsample_2x needs a non-empty plane");
    Tensor4 out(sh.c, 2 * sh.h, 2 * sh.w, sh.t);
    struct Tap {
        int lo, hi;
        double frac;
    };
    auto taps = [](int n_out, int n_in) {
        std::vector<Tap> v(n_out);
        for (int o = 0; o < n_out; ++o) {
            const double src = std::max(0.0, (o + 0.5) * 0.5 - 0.5);
            const int lo = std::min(static_cast<int>(std::floor(src)), n_in - 1);
            v[o] = {lo, std::min(lo + 1, n_in - 1), src - lo};
        }
        return v;
    };
    const auto ty = taps(2 * sh.h, sh.h);
    const auto tx = taps(2 * sh.w, sh.w);
    const int T = sh.t;
    for (int c = 0; c < sh.c; ++c)
        for (int oy = 0; oy < 2 * sh.h; ++oy)
            for (int ox = 0; ox < 2 * sh.w; ++ox) {
                double* dst = out.series(c, oy, ox).data();
                const double fy = ty[oy].frac, fx = tx[ox].frac;
                axpy((1 - fy) * (1 - fx), in.series(c, ty[oy].lo, tx[ox].lo).data(), dst, T);
                axpy((1 - fy) * fx, in.series(c, ty[oy].lo, tx[ox].hi).data(), dst, T);
                axpy(fy * (1 - fx), in.series(c, ty[oy].hi, tx[ox].lo).data(), dst, T);
                axpy(fy * fx, in.series(c, ty[oy].hi, tx[ox].hi).data(), dst, T);
            }
    return out;
}

// ---------------------------------------------------------------------------
// Spiking layers

namespace {

KernelSamples layer_psp_kernel(const NeuronConfig& n, double dt, int T) {
    return spike_kernel(n.tau_s, dt, kernel_length(n.tau_s, dt, T));
}

std::pair<SpikeTensor, LayerCache> finish_layer(Tensor4 psp_in, Tensor4 drive, const NeuronConfig& neuron,
                                                double dt, SpikeMode mode) {
    SpikeResult r = mode == SpikeMode::hard ? generate_spikes(drive, neuron, dt)
                                            : generate_soft_spikes(drive, neuron, dt);
    LayerCache cache{std::move(psp_in), std::move(drive), std::move(r.membrane), r.spikes};
    return {std::move(r.spikes), std::move(cache)};
}

}  // namespace

std::pair<SpikeTensor, LayerCache> spiking_conv_forward(const SpikeTensor& in, const WeightArray& w,
                                                        const LayerConfig& cfg,
                                                        const NeuronConfig& neuron, SpikeMode mode) {
    if (cfg.kind != LayerKind::conv) throw ShapeError("spiking_conv_forward needs a conv layer");
    Tensor4 psp = in.shape().t > 0 ? apply_psp(in.data, layer_psp_kernel(neuron, in.dt_ms, in.shape().t))
                                   : Tensor4(in.shape());
    Tensor4 drive = conv_drive(psp, w, cfg);
    return finish_layer(std::move(psp), std::move(drive), neuron, in.dt_ms, mode);
}

std::pair<SpikeTensor, LayerCache> spiking_upconv_forward(const SpikeTensor& in, const WeightArray& w,
                                                          const LayerConfig& cfg,
                                                          const NeuronConfig& neuron,
                                                          const Tensor4* bypass, SpikeMode mode) {
    if (cfg.kind != LayerKind::transposed_conv)
        throw ShapeError("spiking_upconv_forward needs a transposed_conv layer");
    Tensor4 psp = in.shape().t > 0 ? apply_psp(in.data, layer_psp_kernel(neuron, in.dt_ms, in.shape().t))
                                   : Tensor4(in.shape());
    Tensor4 drive = conv_drive(psp, w, cfg);
    if (bypass) {
        require_same_shape(drive, *bypass, "bypass");
        auto& d = drive.data();
        const auto& b = bypass->data();
        for (std::size_t i = 0; i < d.size(); ++i) d[i] += b[i];
    }
    return finish_layer(std::move(psp), std::move(drive), neuron, in.dt_ms, mode);
}

// ---------------------------------------------------------------------------
// Network assemblies

namespace {

void check_spec(const NetworkSpec& spec) {
    if (spec.layers.size() != 2 || spec.neurons.size() != 2 || spec.layers[0].kind != LayerKind::conv ||
        spec.layers[1].kind != LayerKind::transposed_conv)
        throw std::invalid_argument("network spec must be conv followed by transposed_conv");
    if (spec.scale != 2) throw std::invalid_argument("only 2x upsampling is supported");
    if (spec.layers[1].in_channels != spec.layers[0].out_channels ||
        spec.layers[1].out_channels != spec.layers[0].in_channels)
        throw std::invalid_argument("network spec channel counts are inconsistent");
    for (const auto& l : spec.layers) l.validate();
    for (const auto& n : spec.neurons) n.validate();
}

std::pair<SpikeTensor, PassCache> run_pass(const NetworkSpec& spec, const NetworkWeights& w,
                                           const SpikeTensor& in, int channel, SpikeMode mode) {
    PassCache pass;
    pass.channel = channel;
    auto [hidden, conv_cache] = spiking_conv_forward(in, w.layers[0], spec.layers[0], spec.neurons[0], mode);
    pass.conv = std::move(conv_cache);
    pass.bypass = bilinear_upsample_2x(pass.conv.psp_in);
    auto [out, up_cache] =
        spiking_upconv_forward(hidden, w.layers[1], spec.layers[1], spec.neurons[1], &pass.bypass, mode);
    pass.upconv = std::move(up_cache);
    if (out.shape().h != 2 * in.shape().h || out.shape().w != 2 * in.shape().w)
        throw ShapeError("network output is not 2x the input");
    return {std::move(out), std::move(pass)};
}

}  // namespace

ForwardResult forward(const NetworkSpec& spec, const NetworkWeights& w, const SpikeTensor& input,
                      const ForwardOptions& opts) {
    check_spec(spec);
    validate_weights(spec, w);
    if (input.shape().c != 2) throw ShapeError("network input must have 2 polarity channels");
    const bool dual = opts.mode != ExecMode::joint;
    if (spec.variant == Variant::dual_layer && dual)
        throw std::invalid_argument("dual_layer runs in joint mode only");
    if (spec.variant == Variant::ultralight && !dual)
        throw std::invalid_argument("ultralight requires dual_sequential or dual_concurrent mode");

    ForwardResult r;
    r.cache.spike_mode = opts.spike_mode;
    if (!dual) {
        auto [out, pass] = run_pass(spec, w, input, 0, opts.spike_mode);
        r.output = std::move(out);
        r.cache.passes.push_back(std::move(pass));
        return r;
    }

    auto [pos, neg] = split_polarity(input);
    std::pair<SpikeTensor, PassCache> pos_run, neg_run;
    if (opts.mode == ExecMode::dual_concurrent) {
        auto neg_future = std::async(std::launch::async,
                                     [&] { return run_pass(spec, w, neg, 1, opts.spike_mode); });
        pos_run = run_pass(spec, w, pos, 0, opts.spike_mode);
        neg_run = neg_future.get();
    } else {
        pos_run = run_pass(spec, w, pos, 0, opts.spike_mode);
        neg_run = run_pass(spec, w, neg, 1, opts.spike_mode);
    }
    r.output = merge_polarity(pos_run.first, neg_run.first);
    r.cache.passes.push_back(std::move(pos_run.second));
    r.cache.passes.push_back(std::move(neg_run.second));
    return r;
}

// ---------------------------------------------------------------------------
// Backward

namespace {

// dL/d(drive) from dL/d(spikes); the refractory self-loop is held constant.
Tensor4 spike_adjoint(const Tensor4& grad_spikes, const Tensor4& membrane, const NeuronConfig& n,
                      SpikeMode mode) {
    require_same_shape(grad_spikes, membrane, "spike adjoint");
    Tensor4 out(grad_spikes.shape());
    const auto& g = grad_spikes.data();
    const auto& u = membrane.data();
    auto& d = out.data();
    if (mode == SpikeMode::hard) {
        for (std::size_t i = 0; i < g.size(); ++i)
            if (g[i] != 0.0) d[i] = g[i] * surrogate_grad(u[i], n);
    } else {
        for (std::size_t i = 0; i < g.size(); ++i)
            if (g[i] != 0.0) d[i] = g[i] * soft_spike_grad(u[i], n);
    }
    return out;
}

void add_into(NetworkWeights& acc, const NetworkWeights& g) {
    for (std::size_t l = 0; l < acc.layers.size(); ++l) {
        auto& a = acc.layers[l].values;
        const auto& b = g.layers[l].values;
        for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
    }
}

}  // namespace

NetworkWeights backward_pass(const NetworkSpec& spec, const NetworkWeights& w, const PassCache& pass,
                             const Tensor4& grad_out, SpikeMode mode) {
    NetworkWeights grads = zero_weights(spec);
    const int T = grad_out.steps();
    const double dt = pass.conv.spikes.dt_ms;

    const Tensor4 d_drive2 = spike_adjoint(grad_out, pass.upconv.membrane, spec.neurons[1], mode);
    conv_weight_grad(d_drive2, pass.upconv.psp_in, spec.layers[1], grads.layers[1]);

    const Tensor4 d_psp1 = conv_input_adjoint(d_drive2, w.layers[1], spec.layers[1], pass.upconv.psp_in.shape());
    const Tensor4 d_hidden =
        T > 0 ? apply_psp_adjoint(d_psp1, layer_psp_kernel(spec.neurons[1], dt, T)) : d_psp1;

    const Tensor4 d_drive1 = spike_adjoint(d_hidden, pass.conv.membrane, spec.neurons[0], mode);
    conv_weight_grad(d_drive1, pass.conv.psp_in, spec.layers[0], grads.layers[0]);
    // The bypass depends only on the network input, so it carries no weight gradient.
    return grads;
}

NetworkWeights backward_network(const NetworkSpec& spec, const NetworkWeights& w,
                                const ForwardCache& cache, const Tensor4& grad_out) {
    NetworkWeights grads = zero_weights(spec);
    const int io = spec.io_channels();
    if (grad_out.channels() != io * static_cast<int>(cache.passes.size()))
        throw ShapeError("output gradient has " + std::to_string(grad_out.channels()) +
                         " channels; cache holds " + std::to_string(cache.passes.size()) + " passes");
    for (const auto& pass : cache.passes) {
        if (cache.passes.size() == 1) {
            add_into(grads, backward_pass(spec, w, pass, grad_out, cache.spike_mode));
            continue;
        }
        const Shape4& sh = grad_out.shape();
        Tensor4 slice(io, sh.h, sh.w, sh.t);
        for (int c = 0; c < io; ++c)
            std::ranges::copy(grad_out.channel(pass.channel + c), slice.channel(c).begin());
        add_into(grads, backward_pass(spec, w, pass, slice, cache.spike_mode));
    }
    return grads;
}

// ---------------------------------------------------------------------------
// Accounting

std::uint64_t count_params(const NetworkSpec& spec) {
    std::uint64_t n = 0;
    for (const auto& l : spec.layers)
        n += static_cast<std::uint64_t>(l.out_channels) * l.in_channels * l.kernel_h * l.kernel_w;
    return n;
}

std::uint64_t count_flops(const NetworkSpec& spec, int H, int W, int T) {
    if (H < 0 || W < 0 || T < 0) throw std::invalid_argument("count_flops: negative dimension");
    std::uint64_t total = 0;
    int h = H, w = W;
    for (const auto& l : spec.layers) {
        const int oh = l.out_height(h), ow = l.out_width(w);
        total += 2ull * l.kernel_h * l.kernel_w * l.in_channels * l.out_channels *
                 static_cast<std::uint64_t>(std::max(oh, 0)) * static_cast<std::uint64_t>(std::max(ow, 0)) *
                 static_cast<std::uint64_t>(T);
        h = oh;
        w = ow;
    }
    return spec.variant == Variant::ultralight ? 2 * total : total;
}

// ---------------------------------------------------------------------------
// Checkpoint: "EVSRW01\n", key=value header lines, a blank line, then raw
// little-endian f64 weights (layer order) followed by the three log-variances.

namespace {

std::string fmt_double(double v) {
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);  // shortest round-trip form
    return std::string(buf, p);
}

double parse_double(std::string_view s) {
    double v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size())
        throw std::runtime_error("checkpoint: bad number '" + std::string(s) + "'");
    return v;
}

std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(sep, start);
        out.emplace_back(s.substr(start, pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

void put_f64(std::string& out, double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
}

double get_f64(std::string_view b, std::size_t pos) {
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(b[pos + i])) << (8 * i);
    return std::bit_cast<double>(bits);
}

}  // namespace

std::string serialize_checkpoint(const Checkpoint& ck) {
    validate_weights(ck.spec, ck.weights);
    std::ostringstream h;
    h << kCheckpointMagic << '\n';
    h << "variant=" << to_string(ck.spec.variant) << '\n';
    h << "seed=" << ck.seed << '\n';
    h << "scale=" << ck.spec.scale << '\n';
    h << "layers=" << ck.spec.layers.size() << '\n';
    for (std::size_t l = 0; l < ck.spec.layers.size(); ++l) {
        const auto& c = ck.spec.layers[l];
        h << "layer" << l << '=' << to_string(c.kind) << ',' << c.in_channels << ',' << c.out_channels << ','
          << c.kernel_h << ',' << c.kernel_w << ',' << c.stride << ',' << c.padding << '\n';
    }
    for (std::size_t l = 0; l < ck.spec.neurons.size(); ++l) {
        const auto& n = ck.spec.neurons[l];
        h << "neuron" << l << '=' << fmt_double(n.v_th) << ',' << fmt_double(n.tau_s) << ','
          << fmt_double(n.tau_r) << ',' << fmt_double(n.lambda) << ',' << fmt_double(n.tau_rho) << ','
          << fmt_double(n.rho) << '\n';
    }
    h << '\n';
    std::string out = h.str();
    for (const auto& l : ck.weights.layers)
        for (double v : l.values) put_f64(out, v);
    for (double v : ck.log_var) put_f64(out, v);
    return out;
}

Checkpoint parse_checkpoint(std::string_view bytes) {
    const std::string magic_line = std::string(kCheckpointMagic) + "\n";
    if (bytes.substr(0, magic_line.size()) != magic_line)
        throw std::runtime_error("checkpoint: missing EVSRW01 magic");
    const auto header_end = bytes.find("\n\n", magic_line.size() - 1);
    if (header_end == std::string_view::npos) throw std::runtime_error("checkpoint: unterminated header");

    Checkpoint ck;
    std::size_t n_layers = 0;
    bool have_variant = false;
    const std::string_view header = bytes.substr(magic_line.size(), header_end + 1 - magic_line.size());
    for (const auto& line : split(header, '\n')) {
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw std::runtime_error("checkpoint: bad header line '" + line + "'");
        const std::string key = line.substr(0, eq), value = line.substr(eq + 1);
        if (key == "variant") {
            ck.spec.variant = parse_variant(value);
            have_variant = true;
        } else if (key == "seed") {
            ck.seed = std::stoull(value);
        } else if (key == "scale") {
            ck.spec.scale = std::stoi(value);
        } else if (key == "layers") {
            n_layers = std::stoul(value);
            ck.spec.layers.resize(n_layers);
            ck.spec.neurons.resize(n_layers);
        } else if (key.starts_with("layer")) {
            const auto idx = std::stoul(key.substr(5));
            const auto f = split(value, ',');
            if (idx >= n_layers || f.size() != 7) throw std::runtime_error("checkpoint: bad " + key);
            ck.spec.layers[idx] = LayerConfig{std::stoi(f[1]), std::stoi(f[2]), std::stoi(f[3]),
                                              std::stoi(f[4]), std::stoi(f[5]), std::stoi(f[6]),
                                              parse_layer_kind(f[0])};
        } else if (key.starts_with("neuron")) {
            const auto idx = std::stoul(key.substr(6));
            const auto f = split(value, ',');
            if (idx >= n_layers || f.size() != 6) throw std::runtime_error("checkpoint: bad " + key);
            ck.spec.neurons[idx] = NeuronConfig{parse_double(f[0]), parse_double(f[1]), parse_double(f[2]),
                                                parse_double(f[3]), parse_double(f[4]), parse_double(f[5])};
        } else {
            throw std::runtime_error("checkpoint: unknown header key '" + key + "'");
        }
    }
    if (!have_variant || n_layers == 0) throw std::runtime_error("checkpoint: incomplete header");

    ck.weights = zero_weights(ck.spec);
    std::size_t pos = header_end + 2;
    const std::size_t need = (ck.weights.count() + 3) * 8;
    if (bytes.size() - pos != need)
        throw std::runtime_error("checkpoint: expected " + std::to_string(need) + " payload bytes, found " +
                                 std::to_string(bytes.size() - pos));
    for (auto& l : ck.weights.layers)
        for (auto& v : l.values) {
            v = get_f64(bytes, pos);
            pos += 8;
        }
    for (auto& v : ck.log_var) {
        v = get_f64(bytes, pos);
        pos += 8;
    }
    validate_weights(ck.spec, ck.weights);
    return ck;
}

void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path) {
    const std::string bytes = serialize_checkpoint(ck);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    const std::string bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    return parse_checkpoint(bytes);
}

}  // namespace evsr
