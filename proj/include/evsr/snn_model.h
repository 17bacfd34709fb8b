#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "evsr/srm_kernels.h"
#include "evsr/tensor.h"

namespace evsr {

enum class LayerKind { conv, transposed_conv };

struct LayerConfig {
    int in_channels = 1;
    int out_channels = 1;
    int kernel_h = 1;
    int kernel_w = 1;
    int stride = 1;
    int padding = 0;
    LayerKind kind = LayerKind::conv;

    int out_height(int in_h) const;
    int out_width(int in_w) const;
    int fan_in() const { return in_channels * kernel_h * kernel_w; }
    void validate() const;
    bool operator==(const LayerConfig&) const = default;
};

enum class Variant { dual_layer, ultralight };
enum class ExecMode { joint, dual_sequential, dual_concurrent };

// Hard spikes with the surrogate derivative (production), or the smooth
// sigmoid twin used to certify gradients against finite differences.
enum class SpikeMode { hard, soft };

std::string to_string(Variant v);
std::string to_string(ExecMode m);
std::string to_string(LayerKind k);
Variant parse_variant(const std::string& s);
ExecMode parse_mode(const std::string& s);
LayerKind parse_layer_kind(const std::string& s);

struct NetworkSpec {
    Variant variant = Variant::dual_layer;
    std::vector<LayerConfig> layers;
    std::vector<NeuronConfig> neurons;
    int scale = 2;

    // The two published assemblies: a 5x5 spiking conv followed by a 2x2/stride-2
    // spiking transposed conv, with 2 (dual_layer) or 1 (ultralight) I/O channels.
    static NetworkSpec make(Variant v);

    int io_channels() const { return layers.front().in_channels; }
    bool operator==(const NetworkSpec&) const = default;
};

// Weight layout [out_ch, in_ch, kh, kw] for both layer kinds.
struct WeightArray {
    int out_ch = 0;
    int in_ch = 0;
    int kh = 0;
    int kw = 0;
    std::vector<double> values;

    WeightArray() = default;
    explicit WeightArray(const LayerConfig& cfg)
        : out_ch(cfg.out_channels), in_ch(cfg.in_channels), kh(cfg.kernel_h), kw(cfg.kernel_w),
          values(static_cast<std::size_t>(out_ch) * in_ch * kh * kw, 0.0) {}

    double& at(int o, int i, int y, int x) { return values[((o * in_ch + i) * kh + y) * kw + x]; }
    double at(int o, int i, int y, int x) const { return values[((o * in_ch + i) * kh + y) * kw + x]; }
    bool operator==(const WeightArray&) const = default;
};

struct NetworkWeights {
    std::vector<WeightArray> layers;

    std::size_t count() const;
    bool operator==(const NetworkWeights&) const = default;
};

NetworkWeights zero_weights(const NetworkSpec& spec);

// Uniform in [-b, b] with b = v_th / fan_in per layer.
NetworkWeights init_weights(const NetworkSpec& spec, std::uint64_t seed);

// Throws ShapeError unless every array matches its layer and all values are finite.
void validate_weights(const NetworkSpec& spec, const NetworkWeights& w);

struct LayerCache {
    Tensor4 psp_in;  // PSP of the layer input
    Tensor4 drive;   // synaptic drive (plus bypass for the output layer)
    Tensor4 membrane;
    SpikeTensor spikes;
};

struct PassCache {
    int channel = 0;  // first output channel this pass produced
    LayerCache conv;
    LayerCache upconv;
    Tensor4 bypass;
};

struct ForwardCache {
    SpikeMode spike_mode = SpikeMode::hard;
    std::vector<PassCache> passes;
};

struct ForwardOptions {
    ExecMode mode = ExecMode::joint;
    SpikeMode spike_mode = SpikeMode::hard;
};

struct ForwardResult {
    SpikeTensor output;
    ForwardCache cache;
};

// Per-time-step spatial (transposed) convolution with weights shared across time.
Tensor4 conv_drive(const Tensor4& in, const WeightArray& w, const LayerConfig& cfg);
Tensor4 conv_input_adjoint(const Tensor4& grad, const WeightArray& w, const LayerConfig& cfg,
                           const Shape4& in_shape);
void conv_weight_grad(const Tensor4& grad, const Tensor4& in, const LayerConfig& cfg, WeightArray& dw);

// Half-pixel-centre bilinear interpolation, applied to every time step.
Tensor4 bilinear_upsample_2x(const Tensor4& in);

std::pair<SpikeTensor, LayerCache> spiking_conv_forward(const SpikeTensor& in, const WeightArray& w,
                                                        const LayerConfig& cfg,
                                                        const NeuronConfig& neuron,
                                                        SpikeMode mode = SpikeMode::hard);

// Output drive = transposed conv of PSP(in) + bypass (when given).
std::pair<SpikeTensor, LayerCache> spiking_upconv_forward(const SpikeTensor& in, const WeightArray& w,
                                                          const LayerConfig& cfg,
                                                          const NeuronConfig& neuron,
                                                          const Tensor4* bypass = nullptr,
                                                          SpikeMode mode = SpikeMode::hard);

// joint: one pass over the 2-channel input (dual_layer only).
// dual_*: positive and negative channels run through the shared 1-channel
// network, one after the other or on two threads (ultralight only).
ForwardResult forward(const NetworkSpec& spec, const NetworkWeights& w, const SpikeTensor& input,
                      const ForwardOptions& opts);

// Weight gradient of one pass given dL/d(pass output).
NetworkWeights backward_pass(const NetworkSpec& spec, const NetworkWeights& w, const PassCache& pass,
                             const Tensor4& grad_out, SpikeMode mode);

// Weight gradient of the whole forward call; dual passes accumulate into the
// shared weights.
NetworkWeights backward_network(const NetworkSpec& spec, const NetworkWeights& w,
                                const ForwardCache& cache, const Tensor4& grad_out);

std::uint64_t count_params(const NetworkSpec& spec);
// sum over layers of 2*kh*kw*cin*cout*Hout*Wout*T; ultralight counts both passes.
std::uint64_t count_flops(const NetworkSpec& spec, int H, int W, int T);

struct Checkpoint {
    NetworkSpec spec;
    NetworkWeights weights;
    std::array<double, 3> log_var{0.0, 0.0, 0.0};
    std::uint64_t seed = 0;

    bool operator==(const Checkpoint&) const = default;
};

inline constexpr std::string_view kCheckpointMagic = "EVSRW01";

std::string serialize_checkpoint(const Checkpoint& ck);
Checkpoint parse_checkpoint(std::string_view bytes);
void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace evsr
