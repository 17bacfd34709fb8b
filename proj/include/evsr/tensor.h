#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace evsr {

struct ShapeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Shape4 {
    int c = 0;
    int h = 0;
    int w = 0;
    int t = 0;

    std::size_t size() const {
        return static_cast<std::size_t>(c) * h * w * t;
    }
    bool operator==(const Shape4&) const = default;
    std::string str() const;
};

// Dense real array laid out as [C, H, W, T] with time innermost, so every
// (channel, pixel) owns a contiguous time series.
class Tensor4 {
public:
    Tensor4() = default;
    explicit Tensor4(Shape4 shape, double fill = 0.0);
    Tensor4(int c, int h, int w, int t, double fill = 0.0)
        : Tensor4(Shape4{c, h, w, t}, fill) {}

    const Shape4& shape() const { return shape_; }
    int channels() const { return shape_.c; }
    int height() const { return shape_.h; }
    int width() const { return shape_.w; }
    int steps() const { return shape_.t; }
    std::size_t size() const { return data_.size(); }

    std::size_t index(int c, int y, int x, int t) const {
        return ((static_cast<std::size_t>(c) * shape_.h + y) * shape_.w + x) * shape_.t + t;
    }
    double& at(int c, int y, int x, int t) { return data_[index(c, y, x, t)]; }
    double at(int c, int y, int x, int t) const { return data_[index(c, y, x, t)]; }

    // Time series of one (channel, pixel).
    std::span<double> series(int c, int y, int x) {
        return {data_.data() + index(c, y, x, 0), static_cast<std::size_t>(shape_.t)};
    }
    std::span<const double> series(int c, int y, int x) const {
        return {data_.data() + index(c, y, x, 0), static_cast<std::size_t>(shape_.t)};
    }

    // Contiguous block holding one channel.
    std::span<double> channel(int c);
    std::span<const double> channel(int c) const;

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    double sum() const;
    void fill(double v);

    bool operator==(const Tensor4&) const = default;

private:
    Shape4 shape_{};
    std::vector<double> data_;
};

void require_same_shape(const Tensor4& a, const Tensor4& b, const char* what);

// Non-negative spike counts per (channel, pixel, bin), with the bin width in ms.
struct SpikeTensor {
    Tensor4 data;
    double dt_ms = 1.0;

    SpikeTensor() = default;
    explicit SpikeTensor(Tensor4 d, double dt = 1.0) : data(std::move(d)), dt_ms(dt) {}
    SpikeTensor(int c, int h, int w, int t, double dt = 1.0) : data(c, h, w, t), dt_ms(dt) {}

    const Shape4& shape() const { return data.shape(); }
    bool operator==(const SpikeTensor&) const = default;
};

}  // namespace evsr
