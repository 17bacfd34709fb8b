#include "evsr/tensor.h"

#include <algorithm>
#include <numeric>

namespace evsr {

std::string Shape4::str() const {
    return "[" + std::to_string(c) + "," + std::to_string(h) + "," + std::to_string(w) + "," +
           std::to_string(t) + "]";
}

Tensor4::Tensor4(Shape4 shape, double fill) : shape_(shape) {
    if (shape.c < 0 || shape.h < 0 || shape.w < 0 || shape.t < 0)
        throw ShapeError("negative tensor dimension " + shape.str());
    data_.assign(shape.size(), fill);
}

std::span<double> Tensor4::channel(int c) {
    const std::size_t n = static_cast<std::size_t>(shape_.h) * shape_.w * shape_.t;
    return {data_.data() + c * n, n};
}

std::span<const double> Tensor4::channel(int c) const {
    const std::size_t n = static_cast<std::size_t>(shape_.h) * shape_.w * shape_.t;
    return {data_.data() + c * n, n};
}

double Tensor4::sum() const { return std::accumulate(data_.begin(), data_.end(), 0.0); }

void Tensor4::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

void require_same_shape(const Tensor4& a, const Tensor4& b, const char* what) {
    if (!(a.shape() == b.shape()))
        throw ShapeError(std::string(what) + ": shape mismatch " + a.shape().str() + " vs " +
                         b.shape().str());
}

}  // namespace evsr
