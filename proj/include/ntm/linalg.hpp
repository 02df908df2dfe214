#pragma once

#include <cassert>
#include <cmath>
#include <cstddef>
#include <vector>

namespace ntm {

using Vec = std::vector<double>;

/// Dense row-major matrix of doubles. All model tensors use this type.
class Matrix {
public:
    Matrix() : rows_(0), cols_(0) {}
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& operator()(std::size_t i, std::size_t j) {
        assert(i < rows_ && j < cols_);
        return data_[i * cols_ + j];
    }
    double operator()(std::size_t i, std::size_t j) const {
        assert(i < rows_ && j < cols_);
        return data_[i * cols_ + j];
    }

    double* row(std::size_t i) { return data_.data() + i * cols_; }
    const double* row(std::size_t i) const { return data_.data() + i * cols_; }

    Vec& data() { return data_; }
    const Vec& data() const { return data_; }

    void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

    bool same_shape(const Matrix& o) const {
        return rows_ == o.rows_ && cols_ == o.cols_;
    }

private:
    std::size_t rows_, cols_;
    Vec data_;
};

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

/// y += M x  with M (r x c), x of length c, y of length r.
inline void gemv_add(const Matrix& m, const double* x, double* y) {
    for (std::size_t i = 0; i < m.rows(); ++i) {
        const double* row = m.row(i);
        double acc = 0.0;
        for (std::size_t j = 0; j < m.cols(); ++j) acc += row[j] * x[j];
        y[i] += acc;
    }
}

/// y += M^T x  with M (r x c), x of length r, y of length c.
inline void gemv_t_add(const Matrix& m, const double* x, double* y) {
    for (std::size_t i = 0; i < m.rows(); ++i) {
        const double* row = m.row(i);
        const double xi = x[i];
        for (std::size_t j = 0; j < m.cols(); ++j) y[j] += row[j] * xi;
    }
}

/// M += a * x y^T  (outer product accumulate), x length rows, y length cols.
inline void ger_add(Matrix& m, const double* x, const double* y, double a = 1.0) {
    for (std::size_t i = 0; i < m.rows(); ++i) {
        double* row = m.row(i);
        const double xi = a * x[i];
        for (std::size_t j = 0; j < m.cols(); ++j) row[j] += xi * y[j];
    }
}

inline double dot(const double* a, const double* b, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

inline void axpy(double a, const Vec& x, Vec& y) {
    assert(x.size() == y.size());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] += a * x[i];
}

inline bool all_finite(const Vec& v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

inline bool all_finite(const Matrix& m) { return all_finite(m.data()); }

}  // namespace ntm
