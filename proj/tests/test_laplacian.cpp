#include <doctest.h>

#include <cmath>
#include <numbers>

#include "aao/laplacian.hpp"
#include "aao/modal.hpp"
#include "aao/rng.hpp"
#include "oracle.hpp"

using namespace aao;
using std::numbers::pi;

TEST_CASE("sine basis eigenvalues are pi^2 (j^2 + k^2), ascending") {
    const laplacian::SpectralBasis b(5);
    REQUIRE(b.size() == 25);
    for (std::size_t m = 0; m < b.size(); ++m) {
        const auto [j, k] = b.mode(m);
        CHECK(b.eigenvalue(m) == doctest::Approx(pi * pi * static_cast<double>(j * j + k * k)).epsilon(1e-14));
        if (m > 0) CHECK(b.eigenvalue(m) >= b.eigenvalue(m - 1));
    }
    CHECK(b.mode(0) == std::make_pair<std::size_t, std::size_t>(1, 1));
}

TEST_CASE("sine modes are L2-orthonormal by quadrature") {
    const laplacian::SpectralBasis b(3);
    // Midpoint rule is exact for products of these trigonometric polynomials.
    const int q = 64;
    for (std::size_t a = 0; a < b.size(); ++a)
        for (std::size_t c = 0; c < b.size(); ++c) {
            double s = 0.0;
            for (int i = 0; i < q; ++i)
                for (int j = 0; j < q; ++j) {
                    const double x = (i + 0.5) / q, y = (j + 0.5) / q;
                    s += b.evaluate(a, x, y) * b.evaluate(c, x, y);
                }
            CHECK(s / (q * q) == doctest::Approx(a == c ? 1.0 : 0.0).epsilon(1e-12));
        }
}

TEST_CASE("synthesize then analyze is the identity") {
    auto b = std::make_shared<const laplacian::SpectralBasis>(6);
    Rng rng(3);
    laplacian::SpectralField f{b, rng.normals(b->size())};
    const fem::Mesh mesh(12);
    const laplacian::SpectralField g = laplacian::analyze(laplacian::synthesize(f, mesh), b);
    CHECK(oracle::rel_diff(f.coefficients, g.coefficients) < 1e-12);
}

TEST_CASE("norms and powers") {
    auto b = std::make_shared<const laplacian::SpectralBasis>(4);
    Vector c(b->size(), 0.0);
    c[0] = 1.0;
    c[3] = 2.0;
    const laplacian::SpectralField f{b, c};
    CHECK(f.norm_l2() == doctest::Approx(std::sqrt(5.0)));
    CHECK(f.norm_h1() == doctest::Approx(std::sqrt(b->eigenvalue(0) + 4.0 * b->eigenvalue(3))));
    CHECK(f.norm_hminus1() == doctest::Approx(std::sqrt(1.0 / b->eigenvalue(0) + 4.0 / b->eigenvalue(3))));
    const laplacian::SpectralField half = laplacian::apply_power(f, 0.5);
    CHECK(half.norm_l2() == doctest::Approx(f.norm_h1()));
}

TEST_CASE("semigroup decays modes and rejects negative time") {
    auto b = std::make_shared<const laplacian::SpectralBasis>(3);
    const laplacian::SpectralField f{b, Vector(b->size(), 1.0)};
    const laplacian::SpectralField g = laplacian::apply_semigroup(f, 0.01);
    for (std::size_t m = 0; m < b->size(); ++m) CHECK(g.coefficients[m] == doctest::Approx(std::exp(-0.01 * b->eigenvalue(m))));
    // e^{-sA} e^{-tA} = e^{-(s+t)A}
    const laplacian::SpectralField h = laplacian::apply_semigroup(laplacian::apply_semigroup(f, 0.004), 0.006);
    CHECK(oracle::rel_diff(h.coefficients, g.coefficients) < 1e-14);
    CHECK_THROWS_AS(laplacian::apply_semigroup(f, -1.0), std::invalid_argument);
}

TEST_CASE("finite element modal basis approximates the Laplacian spectrum") {
    const ModalBasis basis = ModalBasis::finite_element(fem::Mesh(21));
    CHECK(basis.size() == 19u * 19u);
    // P1 eigenvalues converge from above at O(h^2).
    CHECK(basis.eigenvalue(0) >= 2.0 * pi * pi);
    CHECK(basis.eigenvalue(0) == doctest::Approx(2.0 * pi * pi).epsilon(0.01));
    CHECK(basis.eigenvalue(1) == doctest::Approx(5.0 * pi * pi).epsilon(0.02));
    // Coefficients carry the discrete L2 norm.
    Rng rng(9);
    const Vector c = rng.normals(basis.size());
    const fem::NodalField f = basis.to_nodal(c, *basis.mesh());
    CHECK(dot(f.values, basis.mass().apply(f.values)) == doctest::Approx(dot(c, c)).epsilon(1e-10));
    CHECK(oracle::rel_diff(basis.from_nodal(f), c) < 1e-10);
}
