#include <doctest.h>

#include <cmath>

#include "aao/linalg.hpp"
#include "aao/rng.hpp"
#include "oracle.hpp"

using namespace aao;

TEST_CASE("cholesky solve agrees with Eigen LLT") {
    const Matrix a = oracle::random_spd(12, 3);
    Rng rng(4);
    const Vector b = rng.normals(12);
    const Vector x = Cholesky(DenseSymMatrix(a)).solve(b);
    const Eigen::VectorXd ref = oracle::to_eigen(a).llt().solve(oracle::to_eigen(b));
    CHECK(oracle::rel_diff(x, oracle::from_eigen(ref)) < 1e-12);
}

TEST_CASE("cholesky triangular pieces compose") {
    const Matrix a = oracle::random_spd(7, 5);
    const Cholesky c{DenseSymMatrix(a)};
    Rng rng(1);
    const Vector x = rng.normals(7);
    CHECK(oracle::rel_diff(c.solve_lower(c.apply_lower(x)), x) < 1e-13);
    // L^{-T} L^{-1} = A^{-1}
    CHECK(oracle::rel_diff(c.solve_upper(c.solve_lower(x)), c.solve(x)) < 1e-12);
}

TEST_CASE("cholesky reports the failing pivot") {
    Matrix a = Matrix::identity(4);
    a(2, 2) = -1.0;
    try {
        Cholesky c{DenseSymMatrix(a)};
        FAIL("expected NotPositiveDefinite");
    } catch (const NotPositiveDefinite& e) {
        CHECK(e.pivot == 2);
    }
}

TEST_CASE("nonsymmetric input is rejected") {
    Matrix a = Matrix::identity(3);
    a(0, 1) = 1.0;
    CHECK_THROWS_AS(DenseSymMatrix{a}, std::invalid_argument);
}

TEST_CASE("symmetric eigensolver matches Eigen") {
    for (std::size_t n : {1u, 2u, 9u, 40u}) {
        const Matrix a = oracle::random_spd(n, 10 + n, -3.0);
        const EigenDecomposition e = sym_eig(DenseSymMatrix(a));
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ref(oracle::to_eigen(a));
        for (std::size_t k = 0; k < n; ++k) CHECK(std::abs(e.eigenvalues[k] - ref.eigenvalues()[k]) < 1e-10 * (1.0 + std::abs(ref.eigenvalues()[k])));
        // A v = lambda v and orthonormality
        for (std::size_t k = 0; k < n; ++k) {
            const Vector v = e.eigenvectors.column(k);
            CHECK(oracle::rel_diff(a.apply(v), scaled(e.eigenvalues[k], v)) < 1e-9 * (1.0 + std::abs(e.eigenvalues[k])) + 1e-10);
            CHECK(std::abs(norm2(v) - 1.0) < 1e-12);
        }
    }
}

TEST_CASE("eigenvalue-only path matches full decomposition") {
    const Matrix a = oracle::random_spd(25, 77, -10.0);
    const Vector full = sym_eig(DenseSymMatrix(a)).eigenvalues;
    const Vector vals = sym_eigvals(DenseSymMatrix(a)).eigenvalues;
    CHECK(oracle::rel_diff(full, vals) < 1e-12);
}

TEST_CASE("generalized eigenproblem matches Eigen and is M-orthonormal") {
    const Matrix a = oracle::random_spd(15, 21, -2.0);
    const Matrix m = oracle::random_spd(15, 22, 5.0);
    const EigenDecomposition e = gen_sym_eig(DenseSymMatrix(a), DenseSymMatrix(m));
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> ref(oracle::to_eigen(a), oracle::to_eigen(m));
    for (std::size_t k = 0; k < 15; ++k) CHECK(std::abs(e.eigenvalues[k] - ref.eigenvalues()[k]) < 1e-9 * (1.0 + std::abs(ref.eigenvalues()[k])));
    const Matrix vtmv = e.eigenvectors.transpose() * (m * e.eigenvectors);
    CHECK((vtmv - Matrix::identity(15)).max_abs() < 1e-10);
}

TEST_CASE("matrix square root squares back") {
    const Matrix a = oracle::random_spd(10, 8);
    const DenseSymMatrix r = matrix_function(DenseSymMatrix(a), [](double x) { return std::sqrt(x); });
    CHECK((r.matrix() * r.matrix() - a).max_abs() < 1e-9 * a.max_abs());
}

TEST_CASE("CG converges in a weighted inner product") {
    // Operator self-adjoint in <v, w> = v^T W w: op = W^{-1} S with S symmetric.
    const std::size_t n = 30;
    const Matrix s = oracle::random_spd(n, 31);
    Vector w(n);
    for (std::size_t i = 0; i < n; ++i) w[i] = 1.0 + static_cast<double>(i);
    const LinearOp op = [&](const Vector& x) {
        Vector y = s.apply(x);
        for (std::size_t i = 0; i < n; ++i) y[i] /= w[i];
        return y;
    };
    Rng rng(2);
    const Vector b = rng.normals(n);
    CgOptions opts;
    opts.tol = 1e-12;
    const CgResult r = conjugate_gradient(op, b, InnerProduct::diagonal(w), opts);
    CHECK(oracle::rel_diff(op(r.solution), b) < 1e-9);
    CHECK(r.residual <= 1e-12);
}

TEST_CASE("CG failure carries the best iterate") {
    const Matrix s = oracle::random_spd(40, 9, 0.01);
    Rng rng(5);
    const Vector b = rng.normals(40);
    CgOptions opts;
    opts.tol = 1e-14;
    opts.max_iter = 2;
    try {
        conjugate_gradient([&](const Vector& x) { return s.apply(x); }, b, InnerProduct::euclidean(), opts);
        FAIL("expected CgFailure");
    } catch (const CgFailure& e) {
        CHECK(e.iterations == 2);
        CHECK(e.best.size() == 40);
        CHECK(e.residual > 1e-14);
    }
}

TEST_CASE("rng is reproducible and roughly standard normal") {
    Rng a(42), b(42);
    for (int i = 0; i < 10; ++i) CHECK(a.next_u64() == b.next_u64());
    Rng r(7);
    const Vector z = r.normals(200000);
    double m = 0.0, v = 0.0;
    for (double x : z) m += x;
    m /= static_cast<double>(z.size());
    for (double x : z) v += (x - m) * (x - m);
    v /= static_cast<double>(z.size());
    CHECK(std::abs(m) < 0.01);
    CHECK(std::abs(v - 1.0) < 0.01);
}
