#pragma once

#include <cstddef>
#include <vector>

namespace sedw {

// Dense row-major matrix of doubles. The whole pipeline runs in float64.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), v_(rows * cols, fill) {}

    static Matrix from_rows(const std::vector<std::vector<double>>& rows);

    double& operator()(std::size_t r, std::size_t c) { return v_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return v_[r * cols_ + c]; }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return v_.size(); }
    bool empty() const { return v_.empty(); }

    double* data() { return v_.data(); }
    const double* data() const { return v_.data(); }
    double* row(std::size_t r) { return v_.data() + r * cols_; }
    const double* row(std::size_t r) const { return v_.data() + r * cols_; }

    std::vector<double>& values() { return v_; }
    const std::vector<double>& values() const { return v_; }

    void fill(double x) { v_.assign(v_.size(), x); }

    bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> v_;
};

Matrix matmul(const Matrix& a, const Matrix& b);
// a^T * b without forming the transpose
Matrix matmul_at_b(const Matrix& a, const Matrix& b);
// a * b^T without forming the transpose
Matrix matmul_a_bt(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& m);

Matrix hadamard(const Matrix& a, const Matrix& b);
Matrix add(const Matrix& a, const Matrix& b);
Matrix sub(const Matrix& a, const Matrix& b);
Matrix scale(const Matrix& a, double s);
void add_inplace(Matrix& a, const Matrix& b);

double max_abs_diff(const Matrix& a, const Matrix& b);
double max_entry(const Matrix& m);
double min_entry(const Matrix& m);

} // namespace sedw
