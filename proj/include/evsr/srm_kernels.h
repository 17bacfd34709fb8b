#pragma once

#include <vector>

#include "evsr/tensor.h"

namespace evsr {

struct NeuronConfig {
    double v_th = 30.0;    // membrane threshold
    double tau_s = 1.0;    // spike-response time constant, ms
    double tau_r = 1.0;    // refractory time constant, ms
    double lambda = 1.0;   // refractory suppression
    double tau_rho = 1.0;  // surrogate width, in units of v_th
    double rho = 10.0;     // surrogate scale

    void validate() const;
    bool operator==(const NeuronConfig&) const = default;
};

// Causal kernel sampled at k * dt for k = 0 .. length-1.
struct KernelSamples {
    std::vector<double> values;
    double dt_ms = 1.0;

    int length() const { return static_cast<int>(values.size()); }
};

// ceil(8 * tau / dt), clamped to [1, max_steps].
int kernel_length(double tau_ms, double dt_ms, int max_steps);

// (t / tau_s) * exp(1 - t / tau_s)
KernelSamples spike_kernel(double tau_s, double dt_ms, int length);
// -lambda * exp(-t / tau_r)
KernelSamples refractory_kernel(double tau_r, double lambda, double dt_ms, int length);

// Causal convolution along the time axis of every (channel, pixel) series.
Tensor4 apply_psp(const Tensor4& spikes, const KernelSamples& kernel);

// Adjoint of apply_psp: out[t] = sum_k kernel[k] * grad[t + k].
Tensor4 apply_psp_adjoint(const Tensor4& grad, const KernelSamples& kernel);

struct SpikeResult {
    SpikeTensor spikes;
    Tensor4 membrane;
};

// Iterates each neuron's membrane over time. A step whose potential reaches
// v_th emits one spike; the refractory kernel is then added to the following
// steps (no reset).
SpikeResult generate_spikes(const Tensor4& drive, const NeuronConfig& cfg, double dt_ms = 1.0);

// Differentiable twin of generate_spikes used for gradient certification:
// s = sigmoid((u - v_th) / (tau_rho * v_th)) with u = drive and no refractory feedback.
SpikeResult generate_soft_spikes(const Tensor4& drive, const NeuronConfig& cfg, double dt_ms = 1.0);

// (rho / (tau_rho * v_th)) * exp(-|u - v_th| / (tau_rho * v_th))
double surrogate_grad(double u, const NeuronConfig& cfg);

// d s / d u of the soft-spike nonlinearity.
double soft_spike_grad(double u, const NeuronConfig& cfg);

}  // namespace evsr
