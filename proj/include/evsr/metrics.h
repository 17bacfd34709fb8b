#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

#include "evsr/event_core.h"
#include "evsr/tensor.h"

namespace evsr {

struct DegenerateInput : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct MetricsReport {
    double mse_t_raw = 0;
    double mse_s_raw = 0;
    double mse_t_norm = 0;  // raw / n_p
    double mse_s_norm = 0;
    double rmse_st = 0;
    double pa_percent = 100;
    bool pa_vacuous = false;  // no shared coordinates; pa_percent is 100 by convention
    std::size_t n_p = 0;
    double span_ms = 0;
};

// Sum of squared voxel differences.
double mse_temporal(const SpikeTensor& out, const SpikeTensor& gt);

// Sum of squared differences of per-pixel, per-channel event counts over
// consecutive time blocks (the last block may be partial).
double mse_spatial(const SpikeTensor& out, const SpikeTensor& gt, double block_ms = 50.0);

struct PolarityAccuracy {
    double percent = 100;
    bool vacuous = true;
    std::size_t shared = 0;   // |Omega|
    std::size_t matches = 0;
};

// Omega holds the (x, y, 1 ms bin) cells occupied in both streams whose
// dominant polarity (sign of ON - OFF count) is decided in both. Bins are
// counted from gt.t0.
PolarityAccuracy polarity_accuracy(const EventStream& out, const EventStream& gt);

// Voxelizes both streams over T bins from gt.t0. n_p counts pixels with a
// ground-truth event in the window; the span is T * dt.
// rmse_st = sqrt((mse_t + mse_s) / (span_ms * n_p)).
MetricsReport rmse_st(const EventStream& out, const EventStream& gt, int T, double dt_ms = 1.0,
                      double block_ms = 50.0);

std::string to_key_value(const MetricsReport& r);
std::string csv_header();
std::string to_csv_row(const std::string& label, const MetricsReport& r);

}  // namespace evsr
