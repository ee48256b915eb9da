#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "fpi/matrix.hpp"
#include "fpi/rng.hpp"
#include "fpi/vec.hpp"

namespace fpi {

// Numerical failure carrying the residual the routine got stuck at.
class NumericalError : public std::runtime_error {
public:
    NumericalError(const std::string& what, double residual)
        : std::runtime_error(what + " (residual " + std::to_string(residual) + ")"),
          residual_(residual) {}
    double residual() const { return residual_; }

private:
    double residual_;
};

struct EigenDecomposition {
    Vec eigenvalues;   // descending
    Matrix eigenvectors; // columns match eigenvalues; Q Lambda Q^T = S
};

// Cyclic Jacobi, deterministic sweep order.  Sized for the small symmetric
// matrices this project works with (order <= ~60).
EigenDecomposition sym_eig(const SymMatrix& s, double tol = 1e-12, int max_sweeps = 100);

enum class ConeSign { plus, minus };

// Frobenius-nearest point of the PSD cone (plus) or the NSD cone (minus).
SymMatrix project_psd(const SymMatrix& s, ConeSign sign, double tol = 1e-12);

// Largest singular value via power iteration on M^T M.
double spectral_norm(const Matrix& m, double tol = 1e-12, int max_iters = 100000);

// Orthonormal basis of the column span, dropping columns whose residual after
// orthogonalization falls below drop_tol.  Two-pass modified Gram-Schmidt.
std::vector<Vec> orthonormalize(const std::vector<Vec>& cols, double drop_tol = 1e-10);

// Project x onto span(basis); basis must already be orthonormal.
Vec project_onto_span(const Vec& x, const std::vector<Vec>& basis);

// Minimum-norm least-squares solution of A x = b via the eigendecomposition
// of A^T A (rank decided by rank_tol relative to the largest eigenvalue).
Vec pseudo_solve(const Matrix& a, const Vec& b, double rank_tol = 1e-10);

// Haar-ish random orthogonal matrix: Gram-Schmidt on a Gaussian sample.
Matrix random_orthogonal(std::size_t n, Rng& rng);

Vec random_gaussian_vec(std::size_t n, Rng& rng);

} // namespace fpi
