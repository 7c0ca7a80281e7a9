#include "lgnn/tensor.hpp"

#include <algorithm>
#include <cmath>

#include "lgnn/error.hpp"

namespace lgnn {

Tensor::Tensor(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Tensor::Tensor(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
        throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                         " does not match shape " + shape_string());
    }
}

Tensor Tensor::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r == 0 ? 0 : rows.begin()->size();
    std::vector<double> data;
    data.reserve(r * c);
    for (const auto& row : rows) {
        if (row.size() != c) throw ShapeError("ragged rows in Tensor::from_rows");
        data.insert(data.end(), row.begin(), row.end());
    }
    return Tensor(r, c, std::move(data));
}

Tensor Tensor::identity(std::size_t n) {
    Tensor t(n, n);
    for (std::size_t i = 0; i < n; ++i) t(i, i) = 1.0;
    return t;
}

Tensor Tensor::column(std::span<const double> values) {
    return Tensor(values.size(), 1, std::vector<double>(values.begin(), values.end()));
}

Tensor Tensor::row_vector(std::span<const double> values) {
    return Tensor(1, values.size(), std::vector<double>(values.begin(), values.end()));
}

double Tensor::item() const {
    if (rows_ != 1 || cols_ != 1) throw ShapeError("item() on non-scalar tensor " + shape_string());
    return data_[0];
}

void Tensor::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

std::string Tensor::shape_string() const {
    return "(" + std::to_string(rows_) + "x" + std::to_string(cols_) + ")";
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.cols() != b.rows()) {
        throw ShapeError("matmul shape mismatch: " + a.shape_string() + " x " + b.shape_string());
    }
    const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
    Tensor out(n, m);
    for (std::size_t i = 0; i < n; ++i) {
        double* o = out.row(i).data();
        for (std::size_t p = 0; p < k; ++p) {
            const double s = a(i, p);
            if (s == 0.0) continue;
            const double* br = b.row(p).data();
            for (std::size_t j = 0; j < m; ++j) o[j] += s * br[j];
        }
    }
    return out;
}

Tensor matmul_tn(const Tensor& a, const Tensor& b) {
    if (a.rows() != b.rows()) {
        throw ShapeError("matmul_tn shape mismatch: " + a.shape_string() + "^T x " + b.shape_string());
    }
    const std::size_t n = a.cols(), k = a.rows(), m = b.cols();
    Tensor out(n, m);
    for (std::size_t p = 0; p < k; ++p) {
        const double* ar = a.row(p).data();
        const double* br = b.row(p).data();
        for (std::size_t i = 0; i < n; ++i) {
            const double s = ar[i];
            if (s == 0.0) continue;
            double* o = out.row(i).data();
            for (std::size_t j = 0; j < m; ++j) o[j] += s * br[j];
        }
    }
    return out;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
    if (a.cols() != b.cols()) {
        throw ShapeError("matmul_nt shape mismatch: " + a.shape_string() + " x " + b.shape_string() + "^T");
    }
    const std::size_t n = a.rows(), k = a.cols(), m = b.rows();
    Tensor out(n, m);
    for (std::size_t i = 0; i < n; ++i) {
        const double* ar = a.row(i).data();
        for (std::size_t j = 0; j < m; ++j) {
            const double* br = b.row(j).data();
            double s = 0.0;
            for (std::size_t p = 0; p < k; ++p) s += ar[p] * br[p];
            out(i, j) = s;
        }
    }
    return out;
}

Tensor transpose(const Tensor& a) {
    Tensor out(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
    return out;
}

void axpy(Tensor& a, const Tensor& b, double scale) {
    if (!a.same_shape(b)) {
        throw ShapeError("axpy shape mismatch: " + a.shape_string() + " vs " + b.shape_string());
    }
    auto dst = a.data();
    auto src = b.data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += scale * src[i];
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) {
        throw ShapeError("max_abs_diff shape mismatch: " + a.shape_string() + " vs " + b.shape_string());
    }
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

bool all_finite(const Tensor& a) noexcept {
    return std::all_of(a.data().begin(), a.data().end(), [](double v) { return std::isfinite(v); });
}

}  // namespace lgnn
