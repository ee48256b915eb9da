#include "fpi/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace fpi {

namespace {

double off_diagonal_norm(const SymMatrix& s) {
    double acc = 0.0;
    for (std::size_t i = 0; i < s.order(); ++i)
        for (std::size_t j = i + 1; j < s.order(); ++j) acc += 2.0 * s(i, j) * s(i, j);
    return std::sqrt(acc);
}

} // namespace

EigenDecomposition sym_eig(const SymMatrix& s, double tol, int max_sweeps) {
    if (!s.all_finite()) throw std::invalid_argument("sym_eig: non-finite input");
    if (tol <= 0.0) throw std::invalid_argument("sym_eig: tol must be positive");
    const std::size_t n = s.order();
    Matrix a = s.to_matrix();
    Matrix q = Matrix::identity(n);
    const double scale = std::max(s.frobenius_norm(), 1e-300);

    double off = off_diagonal_norm(s);
    int sweep = 0;
    while (off > tol * scale && sweep < max_sweeps) {
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t r = p + 1; r < n; ++r) {
                double apr = 0.5 * (a(p, r) + a(r, p));
                if (std::abs(apr) <= 1e-300) continue;
                double theta = (a(r, r) - a(p, p)) / (2.0 * apr);
                double t = (theta >= 0.0 ? 1.0 : -1.0) /
                           (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                double c = 1.0 / std::sqrt(t * t + 1.0);
                double sn = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    double akp = a(k, p), akr = a(k, r);
                    a(k, p) = c * akp - sn * akr;
                    a(k, r) = sn * akp + c * akr;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    double apk = a(p, k), ark = a(r, k);
                    a(p, k) = c * apk - sn * ark;
                    a(r, k) = sn * apk + c * ark;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    double qkp = q(k, p), qkr = q(k, r);
                    q(k, p) = c * qkp - sn * qkr;
                    q(k, r) = sn * qkp + c * qkr;
                }
            }
        }
        SymMatrix cur(n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i; j < n; ++j) cur.set(i, j, 0.5 * (a(i, j) + a(j, i)));
        off = off_diagonal_norm(cur);
        ++sweep;
    }
    if (off > tol * scale)
        throw NumericalError("sym_eig: Jacobi sweeps did not converge", off);

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t i, std::size_t j) { return a(i, i) > a(j, j); });

    EigenDecomposition out;
    out.eigenvalues = Vec(n);
    out.eigenvectors = Matrix(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        out.eigenvalues[j] = a(order[j], order[j]);
        for (std::size_t i = 0; i < n; ++i) out.eigenvectors(i, j) = q(i, order[j]);
    }
    return out;
}

SymMatrix project_psd(const SymMatrix& s, ConeSign sign, double tol) {
    EigenDecomposition eig = sym_eig(s, tol);
    const std::size_t n = s.order();
    Vec lam = eig.eigenvalues;
    for (std::size_t i = 0; i < n; ++i)
        lam[i] = (sign == ConeSign::plus) ? std::max(lam[i], 0.0) : std::min(lam[i], 0.0);
    SymMatrix out(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j) {
            double acc = 0.0;
            for (std::size_t k = 0; k < n; ++k)
                acc += eig.eigenvectors(i, k) * lam[k] * eig.eigenvectors(j, k);
            out.set(i, j, acc);
        }
    return out;
}

double spectral_norm(const Matrix& m, double tol, int max_iters) {
    if (!m.all_finite()) throw std::invalid_argument("spectral_norm: non-finite input");
    const std::size_t n = m.cols();
    if (n == 0 || m.rows() == 0) return 0.0;

    // seeded start: an exact symmetric start vector can sit orthogonal to the
    // leading singular space and never leave it
    Rng restart_rng(0x5eedULL);
    Vec v(n, 1.0);
    axpy(0.25, random_gaussian_vec(n, restart_rng), v);
    v *= 1.0 / norm(v);
    double prev = 0.0;
    for (int it = 0; it < max_iters; ++it) {
        Vec w = m.apply_transposed(m.apply(v));
        double lam = std::sqrt(dot(w, v) > 0 ? dot(w, v) : 0.0);
        double wn = norm(w);
        if (wn <= 1e-300) {
            // v landed in the kernel; restart from a deterministic pseudo-random draw
            v = random_gaussian_vec(n, restart_rng);
            double nv = norm(v);
            v *= 1.0 / nv;
            continue;
        }
        v = (1.0 / wn) * w;
        if (it > 0 && std::abs(lam - prev) <= tol * std::max(1.0, lam)) return lam;
        prev = lam;
    }
    return prev;
}

std::vector<Vec> orthonormalize(const std::vector<Vec>& cols, double drop_tol) {
    std::vector<Vec> basis;
    for (const Vec& c : cols) {
        Vec r = c;
        const double input_scale = std::max(norm(c), 1.0);
        for (int pass = 0; pass < 2; ++pass)
            for (const Vec& b : basis) axpy(-dot(r, b), b, r);
        double rn = norm(r);
        if (rn > drop_tol * input_scale) {
            r *= 1.0 / rn;
            basis.push_back(std::move(r));
        }
    }
    return basis;
}

Vec project_onto_span(const Vec& x, const std::vector<Vec>& basis) {
    Vec p(x.size());
    for (const Vec& b : basis) axpy(dot(x, b), b, p);
    return p;
}

Vec pseudo_solve(const Matrix& a, const Vec& b, double rank_tol) {
    const Matrix at = a.transposed();
    SymMatrix ata = SymMatrix::from_matrix(at * a, 1e-9);
    EigenDecomposition eig = sym_eig(ata);
    Vec atb = a.apply_transposed(b);
    const double lead = eig.eigenvalues.size() ? std::max(eig.eigenvalues[0], 0.0) : 0.0;
    Vec x(a.cols());
    for (std::size_t k = 0; k < eig.eigenvalues.size(); ++k) {
        double lam = eig.eigenvalues[k];
        if (lam <= rank_tol * std::max(lead, 1e-300)) continue;
        Vec qk = eig.eigenvectors.col(k);
        axpy(dot(qk, atb) / lam, qk, x);
    }
    return x;
}

Vec random_gaussian_vec(std::size_t n, Rng& rng) {
    Vec v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = rng.gaussian();
    return v;
}

Matrix random_orthogonal(std::size_t n, Rng& rng) {
    std::vector<Vec> cols;
    cols.reserve(n);
    while (true) {
        cols.clear();
        for (std::size_t j = 0; j < n; ++j) cols.push_back(random_gaussian_vec(n, rng));
        std::vector<Vec> basis = orthonormalize(cols, 1e-8);
        if (basis.size() == n) {
            Matrix q(n, n);
            for (std::size_t j = 0; j < n; ++j) q.set_col(j, basis[j]);
            return q;
        }
        // astronomically unlikely; draw again
    }
}

} // namespace fpi
