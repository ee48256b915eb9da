#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "fpi/vec.hpp"

namespace fpi {

// Dense row-major matrix.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), e_(rows * cols, fill) {}

    static Matrix identity(std::size_t n) {
        Matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    double& operator()(std::size_t i, std::size_t j) { return e_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return e_[i * cols_ + j]; }

    bool all_finite() const {
        for (double x : e_)
            if (!std::isfinite(x)) return false;
        return true;
    }

    Matrix transposed() const {
        Matrix t(cols_, rows_);
        for (std::size_t i = 0; i < rows_; ++i)
            for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
        return t;
    }

    Vec apply(const Vec& x) const {
        if (x.size() != cols_) throw std::invalid_argument("Matrix::apply: dimension mismatch");
        Vec y(rows_);
        for (std::size_t i = 0; i < rows_; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < cols_; ++j) s += (*this)(i, j) * x[j];
            y[i] = s;
        }
        return y;
    }

    // (A^T x), x of length rows()
    Vec apply_transposed(const Vec& x) const {
        if (x.size() != rows_) throw std::invalid_argument("Matrix::apply_transposed: dimension mismatch");
        Vec y(cols_);
        for (std::size_t i = 0; i < rows_; ++i)
            for (std::size_t j = 0; j < cols_; ++j) y[j] += (*this)(i, j) * x[i];
        return y;
    }

    Vec col(std::size_t j) const {
        Vec c(rows_);
        for (std::size_t i = 0; i < rows_; ++i) c[i] = (*this)(i, j);
        return c;
    }
    void set_col(std::size_t j, const Vec& c) {
        for (std::size_t i = 0; i < rows_; ++i) (*this)(i, j) = c[i];
    }

    friend Matrix operator*(const Matrix& a, const Matrix& b) {
        if (a.cols_ != b.rows_) throw std::invalid_argument("Matrix product: dimension mismatch");
        Matrix c(a.rows_, b.cols_);
        for (std::size_t i = 0; i < a.rows_; ++i)
            for (std::size_t k = 0; k < a.cols_; ++k) {
                double aik = a(i, k);
                if (aik == 0.0) continue;
                for (std::size_t j = 0; j < b.cols_; ++j) c(i, j) += aik * b(k, j);
            }
        return c;
    }

    friend Matrix operator-(Matrix a, const Matrix& b) {
        if (a.rows_ != b.rows_ || a.cols_ != b.cols_)
            throw std::invalid_argument("Matrix difference: dimension mismatch");
        for (std::size_t i = 0; i < a.e_.size(); ++i) a.e_[i] -= b.e_[i];
        return a;
    }

    double frobenius_norm() const {
        double s = 0.0;
        for (double x : e_) s += x * x;
        return std::sqrt(s);
    }

private:
    std::size_t rows_ = 0, cols_ = 0;
    std::vector<double> e_;
};

// Symmetric matrix; symmetry is enforced on every write.
class SymMatrix {
public:
    SymMatrix() = default;
    explicit SymMatrix(std::size_t n, double fill = 0.0) : n_(n), e_(n * n, fill) {}

    static SymMatrix identity(std::size_t n) {
        SymMatrix s(n);
        for (std::size_t i = 0; i < n; ++i) s.set(i, i, 1.0);
        return s;
    }

    static SymMatrix from_matrix(const Matrix& m, double tol = 1e-12) {
        if (m.rows() != m.cols()) throw std::invalid_argument("SymMatrix: not square");
        SymMatrix s(m.rows());
        for (std::size_t i = 0; i < m.rows(); ++i)
            for (std::size_t j = i; j < m.cols(); ++j) {
                if (std::abs(m(i, j) - m(j, i)) > tol * (1.0 + std::abs(m(i, j))))
                    throw std::invalid_argument("SymMatrix: input not symmetric");
                s.set(i, j, 0.5 * (m(i, j) + m(j, i)));
            }
        return s;
    }

    std::size_t order() const { return n_; }

    double operator()(std::size_t i, std::size_t j) const { return e_[i * n_ + j]; }
    void set(std::size_t i, std::size_t j, double v) {
        e_[i * n_ + j] = v;
        e_[j * n_ + i] = v;
    }
    void add(std::size_t i, std::size_t j, double v) { set(i, j, (*this)(i, j) + v); }

    bool all_finite() const {
        for (double x : e_)
            if (!std::isfinite(x)) return false;
        return true;
    }

    Vec apply(const Vec& x) const {
        if (x.size() != n_) throw std::invalid_argument("SymMatrix::apply: dimension mismatch");
        Vec y(n_);
        for (std::size_t i = 0; i < n_; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < n_; ++j) s += (*this)(i, j) * x[j];
            y[i] = s;
        }
        return y;
    }

    Matrix to_matrix() const {
        Matrix m(n_, n_);
        for (std::size_t i = 0; i < n_; ++i)
            for (std::size_t j = 0; j < n_; ++j) m(i, j) = (*this)(i, j);
        return m;
    }

    double frobenius_norm() const {
        double s = 0.0;
        for (double x : e_) s += x * x;
        return std::sqrt(s);
    }

    friend SymMatrix operator+(SymMatrix a, const SymMatrix& b) {
        if (a.n_ != b.n_) throw std::invalid_argument("SymMatrix sum: order mismatch");
        for (std::size_t i = 0; i < a.e_.size(); ++i) a.e_[i] += b.e_[i];
        return a;
    }
    friend SymMatrix operator-(SymMatrix a, const SymMatrix& b) {
        if (a.n_ != b.n_) throw std::invalid_argument("SymMatrix difference: order mismatch");
        for (std::size_t i = 0; i < a.e_.size(); ++i) a.e_[i] -= b.e_[i];
        return a;
    }
    friend SymMatrix operator*(double s, SymMatrix a) {
        for (double& x : a.e_) x *= s;
        return a;
    }

private:
    std::size_t n_ = 0;
    std::vector<double> e_;
};

// trace(A * B) for symmetric A, B
inline double trace_product(const SymMatrix& a, const SymMatrix& b) {
    if (a.order() != b.order()) throw std::invalid_argument("trace_product: order mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.order(); ++i)
        for (std::size_t j = 0; j < a.order(); ++j) s += a(i, j) * b(j, i);
    return s;
}

// symmetric outer product (a (x) b) = (a b^T + b a^T) / 2
inline SymMatrix sym_outer(const Vec& a, const Vec& b) {
    if (a.size() != b.size()) throw std::invalid_argument("sym_outer: dimension mismatch");
    SymMatrix s(a.size());
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = i; j < a.size(); ++j)
            s.set(i, j, 0.5 * (a[i] * b[j] + b[i] * a[j]));
    return s;
}

inline SymMatrix outer(const Vec& a) {
    SymMatrix s(a.size());
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = i; j < a.size(); ++j) s.set(i, j, a[i] * a[j]);
    return s;
}

} // namespace fpi
