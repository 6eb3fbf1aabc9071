#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "aao/aao_is.hpp"
#include "aao/fem.hpp"
#include "aao/rng.hpp"
#include "oracle.hpp"

using namespace aao;

namespace {

is::IsBlockVector random_x(std::size_t d, Rng& rng) { return {rng.normals(d), rng.normals(d)}; }
is::L2Pair random_y(std::size_t d, Rng& rng) { return {rng.normals(d), rng.normals(d)}; }

double norm_domain(const is::IsOperator& op, const is::IsBlockVector& x) { return std::sqrt(op.inner_domain(x, x)); }
double norm_range(const is::IsOperator& op, const is::L2Pair& y) { return std::sqrt(op.inner_range(y, y)); }

}  // namespace

TEST_CASE("adjoint identity in U x L2, spectral and FE") {
    for (const ModalBasis& b : {ModalBasis::spectral(8), ModalBasis::finite_element(fem::Mesh(10))}) {
        const is::IsOperator op(b);
        Rng rng(11);
        for (int k = 0; k < 20; ++k) {
            const auto x = random_x(op.size(), rng);
            const auto y = random_y(op.size(), rng);
            const double lhs = op.inner_range(op.apply_G(x), y);
            const double rhs = op.inner_domain(x, op.apply_G_adjoint(y));
            CHECK(std::abs(lhs - rhs) / (norm_domain(op, x) * norm_range(op, y)) < 1e-12);
        }
    }
}

TEST_CASE("G acts as A u - theta and u") {
    const is::IsOperator op(ModalBasis::spectral(3));
    Rng rng(1);
    const auto x = random_x(op.size(), rng);
    const auto gx = op.apply_G(x);
    for (std::size_t n = 0; n < op.size(); ++n) {
        CHECK(gx.first[n] == doctest::Approx(op.basis().eigenvalue(n) * x.u[n] - x.theta[n]));
        CHECK(gx.second[n] == doctest::Approx(x.u[n]));
    }
}

TEST_CASE("transformed operator is G G* in L2 coordinates") {
    // With v = (A u, theta) the domain is isometric to L2 x L2 and
    // G G* there equals [[I + A^{-2}, -I], [-I, I]] after the change of variables.
    const is::IsOperator op(ModalBasis::spectral(4));
    Rng rng(2);
    const auto p = random_y(op.size(), rng);
    const auto q = random_y(op.size(), rng);
    const auto tp = op.transformed_GstarG(p);
    // symmetric in L2 x L2
    CHECK(std::abs(op.inner_range(tp, q) - op.inner_range(p, op.transformed_GstarG(q))) < 1e-12 * norm_range(op, p) * norm_range(op, q));
    for (std::size_t n = 0; n < op.size(); ++n) {
        const double g = op.basis().eigenvalue(n);
        CHECK(tp.first[n] == doctest::Approx((1.0 + 1.0 / (g * g)) * p.first[n] - p.second[n]));
        CHECK(tp.second[n] == doctest::Approx(-p.first[n] + p.second[n]));
    }
}

TEST_CASE("closed-form pair solves the characteristic quadratic") {
    for (double mu : {1e-12, 1e-6, 1e-3, 0.1, 1.0, 10.0}) {
        const auto pr = is::analytic_eigenvalue_pair(mu);
        for (double l : {pr.upper, pr.lower}) CHECK(std::abs(l * l - l * (2.0 + mu) + mu) < 1e-14 * (1.0 + mu) * std::max(1.0, l));
        CHECK(pr.upper * pr.lower == doctest::Approx(mu).epsilon(1e-13));
        CHECK(pr.lower / (mu / 2.0) == doctest::Approx(1.0).epsilon(mu));
    }
}

TEST_CASE("FE pencil spectrum agrees with an Eigen generalized solve") {
    const fem::Mesh mesh(8);
    const std::size_t d = mesh.interior_count();
    const auto entries = is::discrete_spectrum(mesh, 2 * d);
    REQUIRE(entries.size() == 2 * d);

    const Eigen::MatrixXd M = oracle::to_eigen(fem::assemble_mass(mesh).matrix());
    const Eigen::MatrixXd K = oracle::to_eigen(fem::assemble_stiffness(mesh).matrix());
    const Eigen::MatrixXd B = K * M.ldlt().solve(K);
    Eigen::MatrixXd lhs = Eigen::MatrixXd::Zero(2 * d, 2 * d), rhs(2 * d, 2 * d);
    lhs.topLeftCorner(d, d) = M;
    lhs.bottomRightCorner(d, d) = M;
    rhs << B, B, B, B + M;
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> ref(lhs, rhs);
    std::vector<double> want(ref.eigenvalues().data(), ref.eigenvalues().data() + 2 * d);
    std::sort(want.begin(), want.end(), std::greater<>());
    for (std::size_t k = 0; k < 2 * d; ++k) {
        CHECK(entries[k].value == doctest::Approx(want[k]).epsilon(1e-8));
        CHECK(std::abs(entries[k].value - entries[k].analytic) < 1e-8 * (1.0 + entries[k].value));
    }
    // Upper branch near 2, lower branch near 0.
    for (std::size_t k = 0; k < d; ++k) CHECK(entries[k].upper_branch);
    CHECK(entries[d - 1].value > 2.0);
    CHECK(entries[d].value < 0.1);
}

TEST_CASE("discrete spectrum count must fit") {
    CHECK_THROWS_AS(is::discrete_spectrum(fem::Mesh(5), 19), std::invalid_argument);
}
