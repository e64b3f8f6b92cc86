#pragma once

#include <cstddef>
#include <vector>

#include "reid/errors.hpp"

namespace reid {

// Minimal dense row-major matrix. Heavy linear algebra (eigensolves,
// inverses) is delegated to Eigen inside the metric module; this type is the
// plain storage used across module boundaries and in serialized models.
class Matrix {
public:
    Matrix() = default;
    Matrix(size_t rows, size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    static Matrix identity(size_t n) {
        Matrix m(n, n);
        for (size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    size_t rows() const { return rows_; }
    size_t cols() const { return cols_; }
    bool empty() const { return data_.empty(); }

    double& operator()(size_t r, size_t c) { return data_[r * cols_ + c]; }
    double operator()(size_t r, size_t c) const { return data_[r * cols_ + c]; }

    double* row(size_t r) { return data_.data() + r * cols_; }
    const double* row(size_t r) const { return data_.data() + r * cols_; }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    std::vector<double> row_vector(size_t r) const {
        return std::vector<double>(row(r), row(r) + cols_);
    }

    void set_row(size_t r, const std::vector<double>& values) {
        if (values.size() != cols_) {
            throw ShapeError("Matrix::set_row length mismatch");
        }
        for (size_t c = 0; c < cols_; ++c) (*this)(r, c) = values[c];
    }

    bool operator==(const Matrix& other) const {
        return rows_ == other.rows_ && cols_ == other.cols_ && data_ == other.data_;
    }

private:
    size_t rows_ = 0;
    size_t cols_ = 0;
    std::vector<double> data_;
};

}  // namespace reid
