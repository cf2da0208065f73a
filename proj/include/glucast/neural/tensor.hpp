#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace glucast::neural {

/// Dense row-major array of doubles with an explicit shape.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> shape, double fill = 0.0);
    /// Throws when data length differs from the shape product or any entry is non-finite.
    Tensor(std::vector<std::size_t> shape, std::vector<double> data);

    static Tensor vector(std::size_t n, double fill = 0.0) { return Tensor({n}, fill); }
    static Tensor matrix(std::size_t rows, std::size_t cols, double fill = 0.0) { return Tensor({rows, cols}, fill); }

    const std::vector<std::size_t>& shape() const noexcept { return shape_; }
    std::size_t size() const noexcept { return data_.size(); }
    std::size_t rows() const noexcept { return shape_.empty() ? 0 : shape_[0]; }
    std::size_t cols() const noexcept { return shape_.size() < 2 ? 1 : shape_[1]; }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }
    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols(), cols()}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols(), cols()}; }

    std::vector<double>& data() noexcept { return data_; }
    const std::vector<double>& data() const noexcept { return data_; }

    void fill(double v);
    void scale(double s);
    /// this += s * other (shapes must match).
    void axpy(double s, const Tensor& other);
    bool all_finite() const;
    std::string shape_string() const;

    bool operator==(const Tensor&) const = default;

private:
    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

}  // namespace glucast::neural
