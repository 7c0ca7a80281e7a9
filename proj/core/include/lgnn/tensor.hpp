#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace lgnn {

/// Dense row-major 2-D array of doubles. Plain value type; gradient tracking
/// lives in `Tape` (see autodiff.hpp), which stores Tensors by value.
class Tensor {
public:
    Tensor() = default;
    Tensor(std::size_t rows, std::size_t cols, double fill = 0.0);
    Tensor(std::size_t rows, std::size_t cols, std::vector<double> data);

    static Tensor from_rows(std::initializer_list<std::initializer_list<double>> rows);
    static Tensor identity(std::size_t n);
    static Tensor column(std::span<const double> values);
    static Tensor row_vector(std::span<const double> values);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }
    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    /// Value of a 1x1 tensor.
    double item() const;

    void fill(double value);
    bool same_shape(const Tensor& other) const noexcept {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }
    std::string shape_string() const;

    friend bool operator==(const Tensor&, const Tensor&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

Tensor matmul(const Tensor& a, const Tensor& b);
/// aᵀ·b without materialising the transpose.
Tensor matmul_tn(const Tensor& a, const Tensor& b);
/// a·bᵀ without materialising the transpose.
Tensor matmul_nt(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

/// In-place a += scale * b; shapes must agree.
void axpy(Tensor& a, const Tensor& b, double scale = 1.0);

double max_abs_diff(const Tensor& a, const Tensor& b);
bool all_finite(const Tensor& a) noexcept;

}  // namespace lgnn
