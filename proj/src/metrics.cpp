#include "evsr/metrics.h"

#include <cmath>
#include <cstdio>
#include <sstream>
#include <unordered_map>

namespace evsr {

double mse_temporal(const SpikeTensor& out, const SpikeTensor& gt) {
    require_same_shape(out.data, gt.data, "mse_temporal");
    const auto& a = out.data.data();
    const auto& b = gt.data.data();
    double acc = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        acc += d * d;
    }
    return acc;
}

double mse_spatial(const SpikeTensor& out, const SpikeTensor& gt, double block_ms) {
    require_same_shape(out.data, gt.data, "mse_spatial");
    const int block = std::max(1, static_cast<int>(std::lround(block_ms / gt.dt_ms)));
    const Shape4& sh = gt.shape();
    const std::size_t series = static_cast<std::size_t>(sh.c) * sh.h * sh.w;
    const double* a = out.data.data().data();
    const double* b = gt.data.data().data();
    double acc = 0;
    for (std::size_t n = 0; n < series; ++n)
        for (int start = 0; start < sh.t; start += block) {
            const int end = std::min(sh.t, start + block);
            double d = 0;
            for (int t = start; t < end; ++t) d += a[n * sh.t + t] - b[n * sh.t + t];
            acc += d * d;
        }
    return acc;
}

namespace {

void require_same_geometry(const EventStream& a, const EventStream& b) {
    if (a.width != b.width || a.height != b.height)
        throw ShapeError("stream geometry mismatch: " + std::to_string(a.width) + "x" +
                         std::to_string(a.height) + " vs " + std::to_string(b.width) + "x" +
                         std::to_string(b.height));
}

// Net polarity (ON - OFF) per occupied (x, y, 1 ms bin).
std::unordered_map<std::uint64_t, long> occupancy(const EventStream& s, std::uint64_t origin) {
    std::unordered_map<std::uint64_t, long> cells;
    cells.reserve(s.events.size());
    for (const auto& e : s.events) {
        // Events before the origin get negative bins; offset keeps keys unsigned.
        const auto rel = static_cast<std::int64_t>(e.t) - static_cast<std::int64_t>(origin);
        const std::int64_t bin = rel >= 0 ? rel / 1000 : -((-rel + 999) / 1000);
        const std::uint64_t key = (static_cast<std::uint64_t>(bin + (1ll << 40)) << 24) ^
                                  (static_cast<std::uint64_t>(e.y) << 12) ^ static_cast<std::uint64_t>(e.x);
        cells[key] += e.p;
    }
    return cells;
}

}  // namespace

PolarityAccuracy polarity_accuracy(const EventStream& out, const EventStream& gt) {
    require_same_geometry(out, gt);
    if (out.width > 4096 || out.height > 4096) throw ShapeError("polarity_accuracy supports up to 4096 px");
    const auto a = occupancy(out, gt.t0);
    const auto b = occupancy(gt, gt.t0);
    PolarityAccuracy r;
    for (const auto& [key, net_gt] : b) {
        if (net_gt == 0) continue;
        const auto it = a.find(key);
        if (it == a.end() || it->second == 0) continue;
        ++r.shared;
        if ((it->second > 0) == (net_gt > 0)) ++r.matches;
    }
    r.vacuous = r.shared == 0;
    r.percent = r.vacuous ? 100.0 : 100.0 * static_cast<double>(r.matches) / static_cast<double>(r.shared);
    return r;
}

MetricsReport rmse_st(const EventStream& out, const EventStream& gt, int T, double dt_ms, double block_ms) {
    require_same_geometry(out, gt);
    const SpikeTensor gv = to_voxel_grid(gt, T, dt_ms, gt.t0).tensor;
    const SpikeTensor ov = to_voxel_grid(out, T, dt_ms, gt.t0).tensor;

    MetricsReport r;
    for (int y = 0; y < gt.height; ++y)
        for (int x = 0; x < gt.width; ++x) {
            double n = 0;
            for (int c = 0; c < 2; ++c)
                for (double v : gv.data.series(c, y, x)) n += v;
            if (n > 0) ++r.n_p;
        }
    r.span_ms = T * dt_ms;
    if (r.n_p == 0) throw DegenerateInput("rmse_st: ground truth has no active pixels");
    if (r.span_ms <= 0) throw DegenerateInput("rmse_st: zero time span");

    r.mse_t_raw = mse_temporal(ov, gv);
    r.mse_s_raw = mse_spatial(ov, gv, block_ms);
    const double np = static_cast<double>(r.n_p);
    r.mse_t_norm = r.mse_t_raw / np;
    r.mse_s_norm = r.mse_s_raw / np;
    r.rmse_st = std::sqrt((r.mse_t_raw + r.mse_s_raw) / (r.span_ms * np));
    const PolarityAccuracy pa = polarity_accuracy(out, gt);
    r.pa_percent = pa.percent;
    r.pa_vacuous = pa.vacuous;
    return r;
}

namespace {
std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}
}  // namespace

std::string to_key_value(const MetricsReport& r) {
    std::ostringstream os;
    os << "rmse_st=" << num(r.rmse_st) << '\n'
       << "mse_t_raw=" << num(r.mse_t_raw) << '\n'
       << "mse_s_raw=" << num(r.mse_s_raw) << '\n'
       << "mse_t_norm=" << num(r.mse_t_norm) << '\n'
       << "mse_s_norm=" << num(r.mse_s_norm) << '\n'
       << "pa_percent=" << num(r.pa_percent) << '\n'
       << "pa_vacuous=" << (r.pa_vacuous ? 1 : 0) << '\n'
       << "n_p=" << r.n_p << '\n'
       << "span_ms=" << num(r.span_ms) << '\n';
    return os.str();
}

std::string csv_header() {
    return "pair,rmse_st,mse_t_raw,mse_s_raw,mse_t_norm,mse_s_norm,pa_percent,pa_vacuous,n_p,span_ms";
}

std::string to_csv_row(const std::string& label, const MetricsReport& r) {
    std::ostringstream os;
    os << label << ',' << num(r.rmse_st) << ',' << num(r.mse_t_raw) << ',' << num(r.mse_s_raw) << ','
       << num(r.mse_t_norm) << ',' << num(r.mse_s_norm) << ',' << num(r.pa_percent) << ','
       << (r.pa_vacuous ? 1 : 0) << ',' << r.n_p << ',' << num(r.span_ms);
    return os.str();
}

}  // namespace evsr
