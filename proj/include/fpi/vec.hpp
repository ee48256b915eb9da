#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <stdexcept>
#include <vector>

namespace fpi {

// Dense real vector.  Thin wrapper over std::vector<double> with the
// arithmetic the iteration code needs; everything is value-semantic.
class Vec {
public:
    Vec() = default;
    explicit Vec(std::size_t n, double fill = 0.0) : e_(n, fill) {}
    Vec(std::initializer_list<double> xs) : e_(xs) {}
    explicit Vec(std::vector<double> xs) : e_(std::move(xs)) {}

    std::size_t size() const { return e_.size(); }
    double& operator[](std::size_t i) { return e_[i]; }
    double operator[](std::size_t i) const { return e_[i]; }
    const std::vector<double>& data() const { return e_; }
    std::vector<double>& data() { return e_; }

    auto begin() const { return e_.begin(); }
    auto end() const { return e_.end(); }

    bool all_finite() const {
        for (double x : e_)
            if (!std::isfinite(x)) return false;
        return true;
    }

    Vec& operator+=(const Vec& o) {
        check_same(o);
        for (std::size_t i = 0; i < e_.size(); ++i) e_[i] += o.e_[i];
        return *this;
    }
    Vec& operator-=(const Vec& o) {
        check_same(o);
        for (std::size_t i = 0; i < e_.size(); ++i) e_[i] -= o.e_[i];
        return *this;
    }
    Vec& operator*=(double s) {
        for (double& x : e_) x *= s;
        return *this;
    }

    friend Vec operator+(Vec a, const Vec& b) { return a += b; }
    friend Vec operator-(Vec a, const Vec& b) { return a -= b; }
    friend Vec operator*(double s, Vec a) { return a *= s; }
    friend Vec operator*(Vec a, double s) { return a *= s; }
    friend Vec operator-(Vec a) { return a *= -1.0; }

private:
    void check_same(const Vec& o) const {
        if (o.size() != size()) throw std::invalid_argument("Vec: dimension mismatch");
    }
    std::vector<double> e_;
};

inline double dot(const Vec& a, const Vec& b) {
    if (a.size() != b.size()) throw std::invalid_argument("dot: dimension mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm_sq(const Vec& a) { return dot(a, a); }
inline double norm(const Vec& a) { return std::sqrt(norm_sq(a)); }

// y += s * x
inline void axpy(double s, const Vec& x, Vec& y) {
    if (x.size() != y.size()) throw std::invalid_argument("axpy: dimension mismatch");
    for (std::size_t i = 0; i < x.size(); ++i) y[i] += s * x[i];
}

inline Vec unit(std::size_t n, std::size_t i) {
    Vec v(n);
    v[i] = 1.0;
    return v;
}

} // namespace fpi
