// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any fail.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "cli.h"
#include "evsr/event_core.h"
#include "evsr/metrics.h"
#include "evsr/snn_model.h"
#include "evsr/srm_kernels.h"
#include "evsr/training.h"
#include "oracles.h"

using namespace evsr;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        if (!ok && pass) detail = what;
        pass = pass && ok;
    }
};

double rel_err(double a, double b, double floor) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

Outcome param_counts() {
    Outcome o;
    const auto d = count_params(NetworkSpec::make(Variant::dual_layer));
    const auto u = count_params(NetworkSpec::make(Variant::ultralight));
    o.require(d == 464, "dual_layer has " + std::to_string(d));
    o.require(u == 232, "ultralight has " + std::to_string(u));
    o.require(2 * u == d, "ultralight is not half of dual_layer");
    o.require(init_weights(NetworkSpec::make(Variant::dual_layer), 0).count() == 464, "weight storage size");
    if (o.pass) o.detail = "dual_layer=464 ultralight=232";
    return o;
}

Outcome flops() {
    Outcome o;
    const NetworkSpec d = NetworkSpec::make(Variant::dual_layer);
    const NetworkSpec u = NetworkSpec::make(Variant::ultralight);
    o.require(count_flops(d, 10, 10, 10) == 1312000, "dual_layer 10x10x10 = " + std::to_string(count_flops(d, 10, 10, 10)));
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<int> hw(1, 64), tt(1, 400);
    for (int i = 0; i < 20; ++i) {
        const int h = hw(rng), w = hw(rng), t = tt(rng);
        for (const auto* spec : {&d, &u})
            o.require(count_flops(*spec, h, w, t) == oracle::flops(*spec, h, w, t),
                      "mismatch at " + std::to_string(h) + "x" + std::to_string(w) + "x" + std::to_string(t));
    }
    if (o.pass) o.detail = "1312000 at 10x10x10; 20 random triples exact";
    return o;
}

Outcome kernels() {
    Outcome o;
    for (double tau : {1.0, 2.0, 4.0, 7.0}) {
        const KernelSamples k = spike_kernel(tau, 1.0, kernel_length(tau, 1.0, 1000));
        const auto peak = std::max_element(k.values.begin(), k.values.end()) - k.values.begin();
        o.require(peak == static_cast<long>(tau), "peak index for tau_s=" + std::to_string(tau));
        o.require(std::abs(k.values[static_cast<std::size_t>(tau)] - 1.0) <= 1e-9, "peak value for tau_s=" + std::to_string(tau));
    }
    for (double lambda : {1.0, 2.5, 10.0}) {
        const KernelSamples g = refractory_kernel(4.0, lambda, 1.0, 32);
        o.require(g.values[0] == -lambda, "refractory[0] for lambda=" + std::to_string(lambda));
    }
    if (o.pass) o.detail = "peak 1 at tau_s/dt; refractory[0] = -lambda";
    return o;
}

Outcome srm_hand_simulation() {
    Outcome o;
    const NeuronConfig cfg{30.0, 1.0, 1.0, 1.0, 1.0, 10.0};
    const int T = 16;
    const KernelSamples eps = spike_kernel(1.0, 1.0, T);
    Tensor4 drive(1, 1, 1, T);
    for (int t = 1; t < T; ++t) drive.at(0, 0, 0, t) = 40.0 * eps.values[t - 1];
    const SpikeResult r = generate_spikes(drive, cfg);

    // Recurrence oracle: u[t] = drive[t] + sum over earlier spikes s of gamma(t - s).
    std::vector<int> spikes;
    for (int t = 0; t < T; ++t) {
        double u = drive.at(0, 0, 0, t);
        for (int s : spikes) u += -cfg.lambda * std::exp(-(t - s) / cfg.tau_r);
        if (u >= cfg.v_th) spikes.push_back(t);
    }
    o.require(spikes == std::vector<int>{2}, "oracle spike train differs");
    int count = 0;
    for (int t = 0; t < T; ++t) {
        const double s = r.spikes.data.at(0, 0, 0, t);
        count += s > 0;
        o.require(s == (t == 2 ? 1.0 : 0.0), "unexpected spike state at t=" + std::to_string(t));
    }
    if (o.pass) o.detail = "single spike at t=2 (" + std::to_string(count) + " total)";
    return o;
}

Outcome metric_oracles() {
    Outcome o;
    std::mt19937_64 rng(77);
    std::uniform_int_distribution<int> dim(1, 16), n_ev(0, 300);
    std::uniform_int_distribution<std::uint64_t> dur(1000, 100000);
    for (int i = 0; i < 50; ++i) {
        const int w = dim(rng), h = dim(rng);
        const std::uint64_t span = dur(rng);
        const EventStream gt = oracle::random_stream(rng, w, h, span, std::max(1, n_ev(rng)));
        const EventStream out = oracle::random_stream(rng, w, h, span, n_ev(rng));
        const int T = bins_for_span(gt);
        const SpikeTensor gv = to_voxel_grid(gt, T, 1.0, gt.t0).tensor;
        const SpikeTensor ov = to_voxel_grid(out, T, 1.0, gt.t0).tensor;
        const std::string tag = " on stream " + std::to_string(i);
        o.require(mse_temporal(ov, gv) == oracle::mse_t(out, gt, T), "mse_temporal" + tag);
        o.require(mse_spatial(ov, gv) == oracle::mse_s(out, gt, T), "mse_spatial" + tag);
        const MetricsReport r = rmse_st(out, gt, T);
        o.require(rel_err(r.rmse_st, oracle::rmse(out, gt, T), 1e-300) <= 1e-9, "rmse_st" + tag);
        o.require(rel_err(polarity_accuracy(out, gt).percent, oracle::pa(out, gt), 1e-300) <= 1e-9, "polarity_accuracy" + tag);
    }
    for (int i = 0; i < 20; ++i) {
        const EventStream s = oracle::random_stream(rng, dim(rng), dim(rng), dur(rng), std::max(1, n_ev(rng)));
        const int T = bins_for_span(s);
        o.require(rmse_st(s, s, T).rmse_st == 0.0, "rmse_st(s, s) != 0");
        o.require(polarity_accuracy(s, s).percent == 100.0, "pa(s, s) != 100");
    }
    if (o.pass) o.detail = "50 random pairs match the event-loop oracles; 20 identity cases";
    return o;
}

// Central differences (h = 1e-3) against the analytic soft-mode gradient for
// every weight and log-variance.
Outcome gradient_check_one(Variant variant, ExecMode mode, std::uint64_t seed, double& worst_w, double& worst_lv) {
    Outcome o;
    const NetworkSpec spec = NetworkSpec::make(variant);
    std::mt19937_64 rng(seed);
    SpikeTensor in(2, 4, 4, 8, 1.0), gt(2, 8, 8, 8, 1.0);
    in.data = oracle::random_counts(in.shape(), rng, 2, 0.4);
    gt.data = oracle::random_counts(gt.shape(), rng, 1, 0.15);
    NetworkWeights w = init_weights(spec, seed);
    for (auto& v : w.layers[0].values) v *= 6.0;
    for (auto& v : w.layers[1].values) v *= 3.0;
    LossState st;
    st.log_var = {0.3, -0.2, 0.1};
    st.bin_width_ms = 4;

    const ForwardOptions fo{mode, SpikeMode::soft};
    const ForwardResult r = forward(spec, w, in, fo);
    const Gradients g = backward(spec, w, r.cache, r.output, gt, st);
    auto loss = [&](const NetworkWeights& ww, const LossState& s) {
        return loss_total(forward(spec, ww, in, fo).output, gt, s).total;
    };

    const double h = 1e-3;
    double scale = 0;
    for (const auto& l : g.weights.layers)
        for (double v : l.values) scale = std::max(scale, std::abs(v));
    for (std::size_t l = 0; l < w.layers.size(); ++l)
        for (std::size_t k = 0; k < w.layers[l].values.size(); ++k) {
            NetworkWeights p = w, m = w;
            p.layers[l].values[k] += h;
            m.layers[l].values[k] -= h;
            const double fd = (loss(p, st) - loss(m, st)) / (2 * h);
            // The tiny floor only guards taps whose gradient is exactly zero.
            const double e = rel_err(fd, g.weights.layers[l].values[k], 1e-12 * scale);
            worst_w = std::max(worst_w, e);
            o.require(e <= 1e-3, "weight gradient layer " + std::to_string(l) + " index " + std::to_string(k));
        }
    for (int i = 0; i < 3; ++i) {
        LossState p = st, m = st;
        p.log_var[i] += h;
        m.log_var[i] -= h;
        const double fd = (loss(w, p) - loss(w, m)) / (2 * h);
        const double e = rel_err(fd, g.log_var[i], 1e-12);
        worst_lv = std::max(worst_lv, e);
        o.require(e <= 1e-6, "log_var gradient " + std::to_string(i));
    }
    return o;
}

Outcome gradient_certification() {
    Outcome o;
    double worst_w = 0, worst_lv = 0;
    const Outcome a = gradient_check_one(Variant::dual_layer, ExecMode::joint, 101, worst_w, worst_lv);
    const Outcome b = gradient_check_one(Variant::ultralight, ExecMode::dual_sequential, 102, worst_w, worst_lv);
    o.require(a.pass, "dual_layer: " + a.detail);
    o.require(b.pass, "ultralight: " + b.detail);
    char buf[160];
    std::snprintf(buf, sizeof buf, "464 + 232 weights, 3+3 log-vars; worst rel err weights %.2e, log-vars %.2e",
                  worst_w, worst_lv);
    o.detail = o.pass ? buf : o.detail + "; " + buf;
    return o;
}

Outcome dual_forward_contracts() {
    Outcome o;
    const NetworkSpec spec = NetworkSpec::make(Variant::ultralight);
    std::mt19937_64 rng(303);
    double worst = 0;
    for (int i = 0; i < 10; ++i) {
        NetworkWeights w = init_weights(spec, 300 + i);
        for (auto& l : w.layers)
            for (auto& v : l.values) v *= 8;
        SpikeTensor in(2, 8, 8, 32, 1.0);
        in.data = oracle::random_counts(in.shape(), rng, 3, 0.3);
        const ForwardResult seq = forward(spec, w, in, {ExecMode::dual_sequential, SpikeMode::hard});
        const ForwardResult con = forward(spec, w, in, {ExecMode::dual_concurrent, SpikeMode::hard});
        o.require(seq.output.data == con.output.data, "sequential/concurrent outputs differ on input " + std::to_string(i));

        SpikeTensor gt(2, 16, 16, 32, 1.0);
        gt.data = oracle::random_counts(gt.shape(), rng, 1, 0.1);
        const Gradients full = backward(spec, w, seq.cache, seq.output, gt, LossState{});

        // Each polarity through the shared network on its own, then summed.
        const LossGradient lg = loss_gradient(seq.output, gt, LossState{});
        const auto [pos, neg] = split_polarity(in);
        NetworkWeights sum = zero_weights(spec);
        int channel = 0;
        for (const SpikeTensor* x : {&pos, &neg}) {
            PassCache pass;
            auto [s1, c1] = spiking_conv_forward(*x, w.layers[0], spec.layers[0], spec.neurons[0]);
            pass.bypass = bilinear_upsample_2x(c1.psp_in);
            auto [s2, c2] = spiking_upconv_forward(s1, w.layers[1], spec.layers[1], spec.neurons[1], &pass.bypass);
            pass.channel = channel;
            pass.conv = std::move(c1);
            pass.upconv = std::move(c2);
            Tensor4 slice(1, 16, 16, 32);
            std::ranges::copy(lg.d_out.channel(channel), slice.channel(0).begin());
            const NetworkWeights gp = backward_pass(spec, w, pass, slice, SpikeMode::hard);
            for (std::size_t l = 0; l < 2; ++l)
                for (std::size_t k = 0; k < gp.layers[l].values.size(); ++k) sum.layers[l].values[k] += gp.layers[l].values[k];
            ++channel;
        }
        for (std::size_t l = 0; l < 2; ++l)
            for (std::size_t k = 0; k < sum.layers[l].values.size(); ++k) {
                const double e = rel_err(full.weights.layers[l].values[k], sum.layers[l].values[k], 1e-300);
                if (full.weights.layers[l].values[k] == 0 && sum.layers[l].values[k] == 0) continue;
                worst = std::max(worst, e);
                o.require(e <= 1e-10, "shared-weight gradient differs on input " + std::to_string(i));
            }
    }
    char buf[128];
    std::snprintf(buf, sizeof buf, "10 inputs bit-identical; gradient sum worst rel err %.2e", worst);
    if (o.pass) o.detail = buf;
    return o;
}

Outcome training_smoke() {
    Outcome o;
    MovingBarParams base;  // 32x32 HR, 64 ms, 0.15 px/ms, 8 events per edge pixel
    base.width = 32;
    base.height = 32;
    base.duration_ms = 64;
    base.seed = 7;
    std::vector<StreamPair> data;
    int i = 0;
    for (auto& hr : synth_bar_corpus(200, base)) {
        EventStream lr = downsample_2x(hr);
        data.push_back({std::move(lr), std::move(hr), "bar_" + std::to_string(i++)});
    }
    TrainConfig cfg;
    cfg.epochs = 30;
    cfg.batch = 8;
    cfg.T = 64;
    cfg.seed = 1;
    cfg.val_count = 20;
    cfg.variant = Variant::ultralight;
    cfg.mode = ExecMode::dual_sequential;

    const auto start = std::chrono::steady_clock::now();
    bool weights_positive = true;
    const TrainResult r = train(cfg, data, [&](const EpochRecord& e) {
        for (double w : e.w) weights_positive = weights_positive && w > 0 && std::isfinite(w);
        std::fprintf(stderr, "  epoch %2d  loss %.4g  val_rmse_st %.6f\n", e.epoch, e.train_loss, e.val_rmse_st);
    });
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const double first = r.initial_val_rmse_st, last = r.epochs.back().val_rmse_st;
    const auto& lv = r.checkpoint.log_var;
    o.require(data[0].lr.width == 16 && data[0].lr.height == 16, "LR frames are not 16x16");
    o.require(last <= 0.9 * first, "validation RMSE_ST did not drop by 10%");
    o.require(weights_positive, "a loss weight left (0, inf)");
    o.require(lv[0] != 0 && lv[1] != 0 && lv[2] != 0, "log_var did not move from init");
    o.require(secs < 600, "took longer than 10 minutes");
    char buf[200];
    std::snprintf(buf, sizeof buf, "val RMSE_ST %.4f -> %.4f (ratio %.3f), log_var (%.3f, %.3f, %.3f), %.0f s", first,
                  last, last / first, lv[0], lv[1], lv[2], secs);
    o.detail = o.pass ? buf : o.detail + "; " + buf;
    return o;
}

struct CliRun {
    int code;
    std::string out;
};

CliRun cli_run(const std::vector<std::string>& args) {
    std::vector<std::string> storage{"evsr"};
    storage.insert(storage.end(), args.begin(), args.end());
    std::vector<const char*> argv;
    for (const auto& s : storage) argv.push_back(s.c_str());
    std::ostringstream out, err;
    const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str() + err.str()};
}

double value_after(const std::string& text, const std::string& key) {
    const auto pos = text.find(key);
    if (pos == std::string::npos) return std::nan("");
    return std::stod(text.substr(pos + key.size()));
}

Outcome pipeline_consistency() {
    Outcome o;
    const fs::path dir = fs::temp_directory_path() / "evsr_acceptance_pipeline";
    fs::remove_all(dir);
    const std::string corpus = (dir / "corpus").string();
    const std::string ck = (dir / "model.evsrw").string();
    const std::string pred = (dir / "pred.evbin").string();

    const CliRun s = cli_run({"synth", "--n", "20", "--size", "32x32", "--dur", "64", "--seed", "11", "--out", corpus});
    o.require(s.code == 0, "synth exit " + std::to_string(s.code));
    const CliRun d = cli_run({"downsample", corpus});
    o.require(d.code == 0, "downsample exit " + std::to_string(d.code));
    const CliRun t = cli_run({"train", "--manifest", corpus + "/manifest.txt", "--variant", "ultralight", "--mode",
                              "dual_sequential", "--epochs", "2", "--batch", "4", "--T", "64", "--val-count", "1",
                              "--seed", "3", "--checkpoint", ck});
    o.require(t.code == 0, "train exit " + std::to_string(t.code));
    const CliRun i = cli_run({"infer", "--checkpoint", ck, "--input", corpus + "/bar_0019.lr.evbin", "--output", pred,
                              "--T", "64"});
    o.require(i.code == 0, "infer exit " + std::to_string(i.code));
    const CliRun e = cli_run({"eval", "--pred", pred, "--gt", corpus + "/bar_0019.evbin", "--T", "64"});
    o.require(e.code == 0, "eval exit " + std::to_string(e.code));

    const double reported = value_after(t.out, "final_val_rmse_st=");
    const double per_pair = value_after(t.out, "val_rmse_st[bar_0019]=");
    const double evaluated = value_after(e.out, "rmse_st=");
    o.require(std::isfinite(reported) && std::isfinite(evaluated), "missing values in command output");
    o.require(std::abs(evaluated - reported) <= 1e-9, "eval differs from the training report");
    o.require(std::abs(evaluated - per_pair) <= 1e-9, "eval differs from the per-pair report");
    char buf[160];
    std::snprintf(buf, sizeof buf, "train reported %.17g, eval %.17g", reported, evaluated);
    o.detail = o.pass ? buf : o.detail + "; " + buf;
    fs::remove_all(dir);
    return o;
}

Outcome downsample_conservation() {
    Outcome o;
    std::mt19937_64 rng(1010);
    std::uniform_int_distribution<int> dim(1, 64), n_ev(0, 500);
    for (int i = 0; i < 100; ++i) {
        const EventStream s = oracle::random_stream(rng, dim(rng), dim(rng), 200000, n_ev(rng));
        const EventStream d = downsample_2x(s);
        o.require(d.events.size() == s.events.size(), "event count changed on stream " + std::to_string(i));
        o.require(d.width == (s.width + 1) / 2 && d.height == (s.height + 1) / 2, "geometry on stream " + std::to_string(i));
        std::vector<Event> expect;
        for (const auto& e : s.events) expect.push_back({e.t, e.x / 2, e.y / 2, e.p});
        auto key = [](const Event& a, const Event& b) {
            return std::tie(a.t, a.x, a.y, a.p) < std::tie(b.t, b.x, b.y, b.p);
        };
        std::vector<Event> got = d.events;
        std::sort(expect.begin(), expect.end(), key);
        std::sort(got.begin(), got.end(), key);
        o.require(got == expect, "coordinates not floor-halved on stream " + std::to_string(i));
    }
    if (o.pass) o.detail = "100 random streams: counts equal, coordinates floor-halved";
    return o;
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"parameter counts", param_counts},
        {"flops formula", flops},
        {"kernel identities", kernels},
        {"SRM hand simulation", srm_hand_simulation},
        {"metric oracle equivalence", metric_oracles},
        {"gradient certification", gradient_certification},
        {"dual-forward contracts", dual_forward_contracts},
        {"training smoke", training_smoke},
        {"pipeline consistency", pipeline_consistency},
        {"downsample conservation", downsample_conservation},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome r;
        try {
            r = criteria[i].second();
        } catch (const std::exception& e) {
            r.pass = false;
            r.detail = std::string("exception: ") + e.what();
        }
        failed += !r.pass;
        std::printf("criterion %zu (%s): %s - %s\n", i + 1, criteria[i].first.c_str(), r.pass ? "PASS" : "FAIL",
                    r.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%zu/%zu criteria passed\n", criteria.size() - failed, criteria.size());
    return failed ? 1 : 0;
}
