#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "evsr/event_core.h"
#include "evsr/snn_model.h"

namespace evsr {

struct TrainingError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Learnable log-variances of the temporal, spatial and polarity terms.
struct LossState {
    std::array<double, 3> log_var{0.0, 0.0, 0.0};
    double bin_width_ms = 50.0;

    std::array<double, 3> weights() const;  // exp(-log_var)
};

struct LossBreakdown {
    double temporal = 0;
    double spatial = 0;
    double polarity = 0;
    double total = 0;
};

// (1/T) * sum_t ||out[..., t] - gt[..., t]||^2
double loss_temporal(const SpikeTensor& out, const SpikeTensor& gt);
// sum over ceil(T*dt / bin_width) bins of ||bin sum(out) - bin sum(gt)||^2
double loss_spatial(const SpikeTensor& out, const SpikeTensor& gt, const LossState& state);
// ||out+ - gt+||^2 + ||out- - gt-||^2
double loss_polarity(const SpikeTensor& out, const SpikeTensor& gt);
// sum_i w_i * L_i + sum_i log_var_i
LossBreakdown loss_total(const SpikeTensor& out, const SpikeTensor& gt, const LossState& state);

struct LossGradient {
    LossBreakdown loss;
    Tensor4 d_out;
    std::array<double, 3> d_log_var{};  // 1 - w_i * L_i
};

LossGradient loss_gradient(const SpikeTensor& out, const SpikeTensor& gt, const LossState& state);

struct Gradients {
    NetworkWeights weights;
    std::array<double, 3> log_var{};
    LossBreakdown loss;
};

// Reverse pass through the loss, both spiking layers and (for dual modes) both
// polarity passes. `out` must be the output of the forward call that produced `cache`.
Gradients backward(const NetworkSpec& spec, const NetworkWeights& weights, const ForwardCache& cache,
                   const SpikeTensor& out, const SpikeTensor& gt, const LossState& state);

struct Parameters {
    NetworkWeights weights;
    std::array<double, 3> log_var{0.0, 0.0, 0.0};
};

struct OptimState {
    std::vector<double> m;
    std::vector<double> v;
    std::uint64_t step = 0;
    double lr = 0.1;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Bias-corrected Adam over all weights followed by the three log-variances.
void adam_step(Parameters& params, const Gradients& grads, OptimState& opt);

struct StreamPair {
    EventStream lr;
    EventStream hr;
    std::string name;
};

struct TrainConfig {
    int epochs = 30;
    int batch = 8;
    double lr = 0.1;
    std::uint64_t seed = 0;
    int T = 0;  // 0: derived from each ground-truth stream's span
    double dt_ms = 1.0;
    Variant variant = Variant::ultralight;
    ExecMode mode = ExecMode::dual_sequential;
    SpikeMode spike_mode = SpikeMode::hard;
    int val_count = 0;  // trailing pairs held out; 0 picks max(1, n / 10)
    int workers = 0;    // per-sample worker threads; 0 uses the hardware count
};

struct EpochRecord {
    int epoch = 0;
    double train_loss = 0;
    std::array<double, 3> w{};
    double val_rmse_st = 0;
};

struct TrainResult {
    Checkpoint checkpoint;
    double initial_val_rmse_st = 0;  // before the first update
    std::vector<EpochRecord> epochs;
    std::vector<double> final_val_rmse_per_pair;
    std::vector<std::string> val_names;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

TrainResult train(const TrainConfig& cfg, const std::vector<StreamPair>& dataset,
                  const EpochCallback& on_epoch = {});

// LR stream in, 2x stream out: voxelize from lr.t0, forward, and place output
// spikes at bin centres.
EventStream infer_stream(const NetworkSpec& spec, const NetworkWeights& weights, const EventStream& lr,
                         ExecMode mode, int T, double dt_ms = 1.0);

std::string report_csv(const std::vector<EpochRecord>& epochs);

}  // namespace evsr
