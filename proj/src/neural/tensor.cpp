#include "glucast/neural/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "glucast/core.hpp"

namespace glucast::neural {

namespace {
std::size_t product(const std::vector<std::size_t>& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}
}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape, double fill) : shape_(std::move(shape)), data_(product(shape_), fill) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != product(shape_)) {
        throw DataError("tensor data length " + std::to_string(data_.size()) + " does not match shape " +
                        shape_string());
    }
    if (!all_finite()) throw DataError("tensor contains non-finite entries");
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

void Tensor::scale(double s) {
    for (double& v : data_) v *= s;
}

void Tensor::axpy(double s, const Tensor& other) {
    if (other.shape_ != shape_) {
        throw DataError("axpy shape mismatch " + shape_string() + " vs " + other.shape_string());
    }
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += s * other.data_[i];
}

bool Tensor::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

std::string Tensor::shape_string() const {
    std::string s = "[";
    for (std::size_t i = 0; i < shape_.size(); ++i) {
        if (i) s += "x";
        s += std::to_string(shape_[i]);
    }
    return s + "]";
}

}  // namespace glucast::neural
