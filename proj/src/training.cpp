#include "evsr/training.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <future>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

#include "evsr/metrics.h"

namespace evsr {

std::array<double, 3> LossState::weights() const {
    return {std::exp(-log_var[0]), std::exp(-log_var[1]), std::exp(-log_var[2])};
}

namespace {

int bin_steps(const LossState& state, double dt_ms) {
    return std::max(1, static_cast<int>(std::lround(state.bin_width_ms / dt_ms)));
}

void require_polarity_pair(const SpikeTensor& t) {
    if (t.shape().c != 2) throw ShapeError("polarity loss needs 2 channels, got " + t.shape().str());
}

}  // namespace

double loss_temporal(const SpikeTensor& out, const SpikeTensor& gt) {
    require_same_shape(out.data, gt.data, "loss_temporal");
    const int T = gt.shape().t;
    if (T == 0) return 0.0;
    const auto& a = out.data.data();
    const auto& b = gt.data.data();
    double acc = 0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
    return acc / T;
}

double loss_spatial(const SpikeTensor& out, const SpikeTensor& gt, const LossState& state) {
    require_same_shape(out.data, gt.data, "loss_spatial");
    const Shape4& sh = gt.shape();
    const int block = bin_steps(state, gt.dt_ms);
    const std::size_t series = static_cast<std::size_t>(sh.c) * sh.h * sh.w;
    const double* a = out.data.data().data();
    const double* b = gt.data.data().data();
    double acc = 0;
    for (std::size_t n = 0; n < series; ++n)
        for (int start = 0; start < sh.t; start += block) {
            double d = 0;
            for (int t = start; t < std::min(sh.t, start + block); ++t) d += a[n * sh.t + t] - b[n * sh.t + t];
            acc += d * d;
        }
    return acc;
}

double loss_polarity(const SpikeTensor& out, const SpikeTensor& gt) {
    require_same_shape(out.data, gt.data, "loss_polarity");
    require_polarity_pair(gt);
    double acc = 0;
    for (int c = 0; c < 2; ++c) {
        const auto a = out.data.channel(c);
        const auto b = gt.data.channel(c);
        double ch = 0;
        for (std::size_t i = 0; i < a.size(); ++i) ch += (a[i] - b[i]) * (a[i] - b[i]);
        acc += ch;
    }
    return acc;
}

LossBreakdown loss_total(const SpikeTensor& out, const SpikeTensor& gt, const LossState& state) {
    LossBreakdown l;
    l.temporal = loss_temporal(out, gt);
    l.spatial = loss_spatial(out, gt, state);
    l.polarity = loss_polarity(out, gt);
    const auto w = state.weights();
    l.total = w[0] * l.temporal + w[1] * l.spatial + w[2] * l.polarity + state.log_var[0] +
              state.log_var[1] + state.log_var[2];
    return l;
}

LossGradient loss_gradient(const SpikeTensor& out, const SpikeTensor& gt, const LossState& state) {
    LossGradient g;
    g.loss = loss_total(out, gt, state);
    const auto w = state.weights();
    const Shape4& sh = gt.shape();
    g.d_out = Tensor4(sh);
    const int T = sh.t;
    const int block = bin_steps(state, gt.dt_ms);
    const std::size_t series = static_cast<std::size_t>(sh.c) * sh.h * sh.w;
    const double* a = out.data.data().data();
    const double* b = gt.data.data().data();
    double* d = g.d_out.data().data();
    const double pointwise = (T > 0 ? 2.0 * w[0] / T : 0.0) + 2.0 * w[2];
    for (std::size_t n = 0; n < series; ++n)
        for (int start = 0; start < T; start += block) {
            const int end = std::min(T, start + block);
            double bin_diff = 0;
            for (int t = start; t < end; ++t) bin_diff += a[n * T + t] - b[n * T + t];
            for (int t = start; t < end; ++t) {
                const std::size_t i = n * T + t;
                d[i] = pointwise * (a[i] - b[i]) + 2.0 * w[1] * bin_diff;
            }
        }
    g.d_log_var = {1.0 - w[0] * g.loss.temporal, 1.0 - w[1] * g.loss.spatial, 1.0 - w[2] * g.loss.polarity};
    return g;
}

Gradients backward(const NetworkSpec& spec, const NetworkWeights& weights, const ForwardCache& cache,
                   const SpikeTensor& out, const SpikeTensor& gt, const LossState& state) {
    LossGradient lg = loss_gradient(out, gt, state);
    Gradients g;
    g.weights = backward_network(spec, weights, cache, lg.d_out);
    g.log_var = lg.d_log_var;
    g.loss = lg.loss;
    return g;
}

void adam_step(Parameters& params, const Gradients& grads, OptimState& opt) {
    std::vector<double*> p;
    std::vector<double> g;
    for (std::size_t l = 0; l < params.weights.layers.size(); ++l) {
        auto& pv = params.weights.layers[l].values;
        const auto& gv = grads.weights.layers.at(l).values;
        if (pv.size() != gv.size()) throw ShapeError("adam_step: gradient shape mismatch");
        for (std::size_t i = 0; i < pv.size(); ++i) {
            p.push_back(&pv[i]);
            g.push_back(gv[i]);
        }
    }
    for (int i = 0; i < 3; ++i) {
        p.push_back(&params.log_var[i]);
        g.push_back(grads.log_var[i]);
    }
    for (std::size_t i = 0; i < g.size(); ++i)
        if (!std::isfinite(g[i]))
            throw TrainingError("non-finite gradient at parameter " + std::to_string(i) + " (step " +
                                std::to_string(opt.step + 1) + ")");
    if (opt.m.empty()) {
        opt.m.assign(g.size(), 0.0);
        opt.v.assign(g.size(), 0.0);
    }
    if (opt.m.size() != g.size()) throw ShapeError("adam_step: optimizer state shape mismatch");

    ++opt.step;
    const double c1 = 1.0 - std::pow(opt.beta1, static_cast<double>(opt.step));
    const double c2 = 1.0 - std::pow(opt.beta2, static_cast<double>(opt.step));
    for (std::size_t i = 0; i < g.size(); ++i) {
        opt.m[i] = opt.beta1 * opt.m[i] + (1.0 - opt.beta1) * g[i];
        opt.v[i] = opt.beta2 * opt.v[i] + (1.0 - opt.beta2) * g[i] * g[i];
        const double m_hat = opt.m[i] / c1;
        const double v_hat = opt.v[i] / c2;
        *p[i] -= opt.lr * m_hat / (std::sqrt(v_hat) + opt.eps);
    }
}

EventStream infer_stream(const NetworkSpec& spec, const NetworkWeights& weights, const EventStream& lr,
                         ExecMode mode, int T, double dt_ms) {
    const SpikeTensor input = to_voxel_grid(lr, T, dt_ms, lr.t0).tensor;
    const ForwardResult r = forward(spec, weights, input, {mode, SpikeMode::hard});
    return from_voxel_grid(r.output, lr.t0);
}

namespace {

struct Sample {
    SpikeTensor input;
    SpikeTensor target;
    int T = 0;
};

void add_scaled(Gradients& acc, const Gradients& g, double scale) {
    for (std::size_t l = 0; l < acc.weights.layers.size(); ++l) {
        auto& a = acc.weights.layers[l].values;
        const auto& b = g.weights.layers[l].values;
        for (std::size_t i = 0; i < a.size(); ++i) a[i] += scale * b[i];
    }
    for (int i = 0; i < 3; ++i) acc.log_var[i] += scale * g.log_var[i];
    acc.loss.temporal += scale * g.loss.temporal;
    acc.loss.spatial += scale * g.loss.spatial;
    acc.loss.polarity += scale * g.loss.polarity;
    acc.loss.total += scale * g.loss.total;
}

double validation_rmse(const NetworkSpec& spec, const NetworkWeights& w, const std::vector<const StreamPair*>& val,
                       const TrainConfig& cfg, std::vector<double>* per_pair) {
    double sum = 0;
    if (per_pair) per_pair->clear();
    for (const StreamPair* p : val) {
        const int T = cfg.T > 0 ? cfg.T : bins_for_span(p->hr, cfg.dt_ms);
        const EventStream pred = infer_stream(spec, w, p->lr, cfg.mode, T, cfg.dt_ms);
        const double r = rmse_st(pred, p->hr, T, cfg.dt_ms).rmse_st;
        if (per_pair) per_pair->push_back(r);
        sum += r;
    }
    return sum / static_cast<double>(val.size());
}

}  // namespace

TrainResult train(const TrainConfig& cfg, const std::vector<StreamPair>& dataset, const EpochCallback& on_epoch) {
    if (cfg.epochs < 1) throw std::invalid_argument("epochs must be >= 1");
    if (cfg.batch < 1) throw std::invalid_argument("batch must be >= 1");
    if (dataset.empty()) throw TrainingError("empty dataset");
    for (const auto& p : dataset) {
        if (p.hr.width != 2 * p.lr.width || p.hr.height != 2 * p.lr.height)
            throw TrainingError("pair '" + p.name + "': LR " + std::to_string(p.lr.width) + "x" +
                                std::to_string(p.lr.height) + " is not half of HR " + std::to_string(p.hr.width) +
                                "x" + std::to_string(p.hr.height));
    }

    const NetworkSpec spec = NetworkSpec::make(cfg.variant);
    if ((cfg.variant == Variant::dual_layer) != (cfg.mode == ExecMode::joint))
        throw std::invalid_argument("variant " + to_string(cfg.variant) + " cannot run in mode " +
                                    to_string(cfg.mode));

    const int n = static_cast<int>(dataset.size());
    const int val_n = std::clamp(cfg.val_count > 0 ? cfg.val_count : std::max(1, n / 10), 1, n);
    const int train_n = n - val_n > 0 ? n - val_n : n;
    std::vector<const StreamPair*> val;
    for (int i = n - val_n; i < n; ++i) val.push_back(&dataset[i]);

    std::vector<Sample> samples(train_n);
    for (int i = 0; i < train_n; ++i) {
        const auto& p = dataset[i];
        Sample& s = samples[i];
        s.T = cfg.T > 0 ? cfg.T : bins_for_span(p.hr, cfg.dt_ms);
        s.input = to_voxel_grid(p.lr, s.T, cfg.dt_ms, p.lr.t0).tensor;
        s.target = to_voxel_grid(p.hr, s.T, cfg.dt_ms, p.hr.t0).tensor;
    }

    Parameters params{init_weights(spec, cfg.seed), {0.0, 0.0, 0.0}};
    OptimState opt;
    opt.lr = cfg.lr;
    LossState loss_state;
    const ForwardOptions fwd{cfg.mode, cfg.spike_mode};

    TrainResult result;
    for (const StreamPair* p : val) result.val_names.push_back(p->name);
    result.initial_val_rmse_st = validation_rmse(spec, params.weights, val, cfg, nullptr);

    const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    const int workers = cfg.workers > 0 ? cfg.workers : static_cast<int>(hw);

    std::vector<int> order(train_n);
    std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ull);
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), 0);
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0;
        int step = 0;
        for (int start = 0; start < train_n; start += cfg.batch, ++step) {
            const int end = std::min(train_n, start + cfg.batch);
            const int bsz = end - start;
            loss_state.log_var = params.log_var;

            auto run_one = [&](int k) {
                const Sample& s = samples[order[k]];
                ForwardResult fr = forward(spec, params.weights, s.input, fwd);
                return backward(spec, params.weights, fr.cache, fr.output, s.target, loss_state);
            };
            std::vector<Gradients> per_sample(bsz);
            if (workers > 1 && bsz > 1) {
                for (int k0 = 0; k0 < bsz; k0 += workers) {
                    std::vector<std::future<Gradients>> jobs;
                    for (int k = k0; k < std::min(bsz, k0 + workers); ++k)
                        jobs.push_back(std::async(std::launch::async, run_one, start + k));
                    for (int k = k0; k < std::min(bsz, k0 + workers); ++k) per_sample[k] = jobs[k - k0].get();
                }
            } else {
                for (int k = 0; k < bsz; ++k) per_sample[k] = run_one(start + k);
            }

            // Fixed-order reduction keeps the result independent of scheduling.
            Gradients batch;
            batch.weights = zero_weights(spec);
            for (const auto& g : per_sample) add_scaled(batch, g, 1.0 / bsz);
            if (!std::isfinite(batch.loss.total))
                throw TrainingError("non-finite loss at epoch " + std::to_string(epoch) + ", step " +
                                    std::to_string(step));
            try {
                adam_step(params, batch, opt);
            } catch (const TrainingError& e) {
                throw TrainingError(std::string(e.what()) + " at epoch " + std::to_string(epoch) + ", step " +
                                    std::to_string(step));
            }
            epoch_loss += batch.loss.total * bsz;
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = epoch_loss / train_n;
        loss_state.log_var = params.log_var;
        rec.w = loss_state.weights();
        rec.val_rmse_st = validation_rmse(spec, params.weights, val, cfg,
                                          epoch == cfg.epochs ? &result.final_val_rmse_per_pair : nullptr);
        result.epochs.push_back(rec);
        if (on_epoch) on_epoch(rec);
    }

    result.checkpoint = Checkpoint{spec, params.weights, params.log_var, cfg.seed};
    return result;
}

std::string report_csv(const std::vector<EpochRecord>& epochs) {
    std::ostringstream os;
    os << "epoch,train_loss,w1,w2,w3,val_rmse_st\n";
    char buf[256];
    for (const auto& r : epochs) {
        std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.epoch, r.train_loss, r.w[0], r.w[1],
                      r.w[2], r.val_rmse_st);
        os << buf;
    }
    return os.str();
}

}  // namespace evsr
