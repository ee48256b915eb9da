#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "fpi/linalg.hpp"

using namespace fpi;

namespace {

SymMatrix random_symmetric(std::size_t n, Rng& rng) {
    SymMatrix s(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j) s.set(i, j, rng.gaussian());
    return s;
}

double reconstruction_residual(const SymMatrix& s, const EigenDecomposition& e) {
    const std::size_t n = s.order();
    Matrix rec(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double acc = 0.0;
            for (std::size_t k = 0; k < n; ++k)
                acc += e.eigenvectors(i, k) * e.eigenvalues[k] * e.eigenvectors(j, k);
            rec(i, j) = acc;
        }
    return (rec - s.to_matrix()).frobenius_norm();
}

double orthogonality_residual(const EigenDecomposition& e) {
    const Matrix& q = e.eigenvectors;
    return (q.transposed() * q - Matrix::identity(q.cols())).frobenius_norm();
}

} // namespace

TEST_CASE("sym_eig on identity") {
    EigenDecomposition e = sym_eig(SymMatrix::identity(3));
    for (int i = 0; i < 3; ++i) CHECK(e.eigenvalues[i] == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(orthogonality_residual(e) < 1e-12);
}

TEST_CASE("sym_eig on a diagonal matrix sorts descending") {
    SymMatrix d(3);
    d.set(0, 0, 1.0);
    d.set(1, 1, 3.0);
    d.set(2, 2, 2.0);
    EigenDecomposition e = sym_eig(d);
    CHECK(e.eigenvalues[0] == doctest::Approx(3.0));
    CHECK(e.eigenvalues[1] == doctest::Approx(2.0));
    CHECK(e.eigenvalues[2] == doctest::Approx(1.0));
    // columns are signed unit basis vectors
    for (std::size_t j = 0; j < 3; ++j) {
        Vec c = e.eigenvectors.col(j);
        CHECK(norm(c) == doctest::Approx(1.0).epsilon(1e-12));
        double maxabs = 0.0;
        for (double x : c) maxabs = std::max(maxabs, std::abs(x));
        CHECK(maxabs == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("sym_eig reconstruction on a seeded random 8x8") {
    Rng rng(42);
    SymMatrix s = random_symmetric(8, rng);
    EigenDecomposition e = sym_eig(s);
    CHECK(reconstruction_residual(s, e) <= 1e-10);
    CHECK(orthogonality_residual(e) <= 1e-10);
}

TEST_CASE("sym_eig residuals stay tiny up to order 50") {
    Rng rng(7);
    for (std::size_t n : {5, 17, 33, 50}) {
        SymMatrix s = random_symmetric(n, rng);
        EigenDecomposition e = sym_eig(s);
        double scale = std::max(1.0, s.frobenius_norm());
        CHECK(reconstruction_residual(s, e) <= 1e-10 * scale);
        CHECK(orthogonality_residual(e) <= 1e-10);
    }
}

TEST_CASE("project_psd clips eigenvalues") {
    SymMatrix d(2);
    d.set(0, 0, 1.0);
    d.set(1, 1, -1.0);
    SymMatrix plus = project_psd(d, ConeSign::plus);
    CHECK(plus(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(plus(1, 1) == doctest::Approx(0.0).epsilon(1e-12));
    SymMatrix minus = project_psd(d, ConeSign::minus);
    CHECK(minus(0, 0) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(minus(1, 1) == doctest::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("project_psd leaves PSD input untouched") {
    Rng rng(3);
    SymMatrix s = random_symmetric(5, rng);
    // square it into the cone
    Matrix m = s.to_matrix();
    SymMatrix psd = SymMatrix::from_matrix(m * m.transposed(), 1e-9);
    SymMatrix proj = project_psd(psd, ConeSign::plus);
    CHECK((proj - psd).frobenius_norm() <= 1e-12 * std::max(1.0, psd.frobenius_norm()));
}

TEST_CASE("project_psd idempotence, membership and orthogonality of the step") {
    Rng rng(11);
    for (int trial = 0; trial < 10; ++trial) {
        SymMatrix s = random_symmetric(6, rng);
        SymMatrix p = project_psd(s, ConeSign::plus);
        SymMatrix pp = project_psd(p, ConeSign::plus);
        CHECK((pp - p).frobenius_norm() <= 1e-8 * std::max(1.0, p.frobenius_norm()));
        EigenDecomposition e = sym_eig(p);
        for (std::size_t i = 0; i < 6; ++i) CHECK(e.eigenvalues[i] >= -1e-10);
        // the removed part is orthogonal to the projection
        SymMatrix diff = p - s;
        CHECK(std::abs(trace_product(diff, p)) <= 1e-8 * std::max(1.0, s.frobenius_norm()));
    }
}

TEST_CASE("spectral_norm basics") {
    CHECK(spectral_norm(Matrix::identity(4)) == doctest::Approx(1.0).epsilon(1e-10));
    Matrix m(2, 2);
    m(0, 1) = 2.0;
    CHECK(spectral_norm(m) == doctest::Approx(2.0).epsilon(1e-10));
    // top eigenvector of M^T M orthogonal to the all-ones direction
    Matrix s(2, 2);
    s(0, 0) = 1.0;
    s(0, 1) = -1.0;
    s(1, 0) = -1.0;
    s(1, 1) = 1.0; // M^T M = [[2,-2],[-2,2]], top direction (1,-1)
    CHECK(spectral_norm(s) == doctest::Approx(2.0).epsilon(1e-10));
}

TEST_CASE("spectral_norm of a signed permutation is 1") {
    // signed permutation: orthogonal by construction (M^T M = I)
    Matrix m(6, 6);
    int perm[6] = {2, 4, 0, 5, 3, 1};
    double sign[6] = {1, -1, 1, 1, -1, -1};
    for (int i = 0; i < 6; ++i) m(perm[i], i) = sign[i];
    Matrix gram = m.transposed() * m;
    CHECK((gram - Matrix::identity(6)).frobenius_norm() == doctest::Approx(0.0));
    CHECK(spectral_norm(m) == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("sym_eig rejects bad input") {
    SymMatrix s(2);
    s.set(0, 0, std::nan(""));
    CHECK_THROWS_AS(sym_eig(s), std::invalid_argument);
    CHECK_THROWS_AS(sym_eig(SymMatrix::identity(2), -1.0), std::invalid_argument);
}

TEST_CASE("orthonormalize drops dependent directions") {
    Vec a{1.0, 0.0, 0.0};
    Vec b{2.0, 0.0, 0.0};
    Vec c{0.0, 3.0, 0.0};
    auto basis = orthonormalize({a, b, c});
    CHECK(basis.size() == 2);
    CHECK(std::abs(dot(basis[0], basis[1])) < 1e-12);
}

TEST_CASE("pseudo_solve recovers a consistent least-squares solution") {
    Matrix a(3, 2);
    a(0, 0) = 1.0;
    a(1, 1) = 2.0;
    a(2, 0) = 1.0;
    Vec x_true{0.5, -1.25};
    Vec b = a.apply(x_true);
    Vec x = pseudo_solve(a, b);
    CHECK(norm(x - x_true) < 1e-10);
}

TEST_CASE("random_orthogonal is orthogonal") {
    Rng rng(5);
    Matrix q = random_orthogonal(7, rng);
    CHECK((q.transposed() * q - Matrix::identity(7)).frobenius_norm() < 1e-10);
}
