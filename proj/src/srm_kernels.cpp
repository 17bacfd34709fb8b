#include "evsr/srm_kernels.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace evsr {

void NeuronConfig::validate() const {
    if (!(v_th > 0 && tau_s > 0 && tau_r > 0 && lambda >= 0 && tau_rho > 0 && rho > 0))
        throw std::invalid_argument("invalid neuron configuration");
}

int kernel_length(double tau_ms, double dt_ms, int max_steps) {
    const int n = static_cast<int>(std::ceil(8.0 * tau_ms / dt_ms - 1e-12));
    return std::clamp(n, 1, std::max(1, max_steps));
}

KernelSamples spike_kernel(double tau_s, double dt_ms, int length) {
    if (length < 1) throw std::invalid_argument("spike_kernel: length must be >= 1");
    KernelSamples k{std::vector<double>(length), dt_ms};
    for (int i = 0; i < length; ++i) {
        const double r = i * dt_ms / tau_s;
        k.values[i] = r * std::exp(1.0 - r);
    }
    return k;
}

KernelSamples refractory_kernel(double tau_r, double lambda, double dt_ms, int length) {
    if (length < 1) throw std::invalid_argument("refractory_kernel: length must be >= 1");
    KernelSamples k{std::vector<double>(length), dt_ms};
    for (int i = 0; i < length; ++i) k.values[i] = -lambda * std::exp(-i * dt_ms / tau_r);
    return k;
}

Tensor4 apply_psp(const Tensor4& spikes, const KernelSamples& kernel) {
    const Shape4& sh = spikes.shape();
    Tensor4 out(sh);
    const int T = sh.t;
    const int L = kernel.length();
    const double* kv = kernel.values.data();
    const std::size_t series = static_cast<std::size_t>(sh.c) * sh.h * sh.w;
    const double* in = spikes.data().data();
    double* dst = out.data().data();
    for (std::size_t n = 0; n < series; ++n) {
        const double* s = in + n * T;
        double* o = dst + n * T;
        // Scatter each nonzero input; spike trains are sparse.
        for (int t = 0; t < T; ++t) {
            const double v = s[t];
            if (v == 0.0) continue;
            const int kmax = std::min(L, T - t);
            for (int k = 0; k < kmax; ++k) o[t + k] += kv[k] * v;
        }
    }
    return out;
}

Tensor4 apply_psp_adjoint(const Tensor4& grad, const KernelSamples& kernel) {
    const Shape4& sh = grad.shape();
    Tensor4 out(sh);
    const int T = sh.t;
    const int L = kernel.length();
    const double* kv = kernel.values.data();
    const std::size_t series = static_cast<std::size_t>(sh.c) * sh.h * sh.w;
    const double* in = grad.data().data();
    double* dst = out.data().data();
    for (std::size_t n = 0; n < series; ++n) {
        const double* g = in + n * T;
        double* o = dst + n * T;
        for (int t = 0; t < T; ++t) {
            const int kmax = std::min(L, T - t);
            double acc = 0.0;
            for (int k = 0; k < kmax; ++k) acc += kv[k] * g[t + k];
            o[t] = acc;
        }
    }
    return out;
}

SpikeResult generate_spikes(const Tensor4& drive, const NeuronConfig& cfg, double dt_ms) {
    const Shape4& sh = drive.shape();
    const int T = sh.t;
    SpikeResult r{SpikeTensor(Tensor4(sh), dt_ms), Tensor4(sh)};
    if (T == 0) return r;
    const KernelSamples gamma =
        refractory_kernel(cfg.tau_r, cfg.lambda, dt_ms, kernel_length(cfg.tau_r, dt_ms, T));
    const int L = gamma.length();

    const std::size_t series = static_cast<std::size_t>(sh.c) * sh.h * sh.w;
    std::vector<double> refractory(T);
    for (std::size_t n = 0; n < series; ++n) {
        const double* a = drive.data().data() + n * T;
        double* u = r.membrane.data().data() + n * T;
        double* s = r.spikes.data.data().data() + n * T;
        std::fill(refractory.begin(), refractory.end(), 0.0);
        for (int t = 0; t < T; ++t) {
            u[t] = a[t] + refractory[t];
            if (u[t] >= cfg.v_th) {
                s[t] = 1.0;
                const int kmax = std::min(L, T - t);
                for (int k = 1; k < kmax; ++k) refractory[t + k] += gamma.values[k];
            }
        }
    }
    return r;
}

SpikeResult generate_soft_spikes(const Tensor4& drive, const NeuronConfig& cfg, double dt_ms) {
    SpikeResult r{SpikeTensor(Tensor4(drive.shape()), dt_ms), drive};
    const double width = cfg.tau_rho * cfg.v_th;
    auto& s = r.spikes.data.data();
    const auto& u = drive.data();
    for (std::size_t i = 0; i < u.size(); ++i) s[i] = 1.0 / (1.0 + std::exp(-(u[i] - cfg.v_th) / width));
    return r;
}

double surrogate_grad(double u, const NeuronConfig& cfg) {
    const double width = cfg.tau_rho * cfg.v_th;
    return cfg.rho / width * std::exp(-std::abs(u - cfg.v_th) / width);
}

double soft_spike_grad(double u, const NeuronConfig& cfg) {
    const double width = cfg.tau_rho * cfg.v_th;
    const double s = 1.0 / (1.0 + std::exp(-(u - cfg.v_th) / width));
    return s * (1.0 - s) / width;
}

}  // namespace evsr
