#include <doctest.h>

#include <cmath>

#include "aao/fem.hpp"
#include "aao/rng.hpp"
#include "oracle.hpp"

using namespace aao;

TEST_CASE("mesh indexing round trips") {
    const fem::Mesh m(6);
    CHECK(m.node_count() == 36);
    CHECK(m.interior_count() == 16);
    CHECK(m.triangle_count() == 50);
    for (std::size_t k = 0; k < m.interior_count(); ++k) {
        const std::size_t g = m.global_index(k);
        CHECK_FALSE(m.is_boundary(g));
        CHECK(m.interior_index(g) == static_cast<long>(k));
    }
    CHECK(m.interior_index(0) == -1);
}

TEST_CASE("full mass matrix integrates constants and linears") {
    const fem::Mesh m(9);
    const DenseSymMatrix mass = fem::assemble_mass_full(m);
    Vector one(m.node_count(), 1.0), x(m.node_count());
    for (std::size_t g = 0; g < m.node_count(); ++g) x[g] = m.node(g)[0];
    CHECK(dot(one, mass.apply(one)) == doctest::Approx(1.0).epsilon(1e-13));
    CHECK(dot(one, mass.apply(x)) == doctest::Approx(0.5).epsilon(1e-13));
    CHECK(dot(x, mass.apply(x)) == doctest::Approx(1.0 / 3.0).epsilon(1e-13));
}

TEST_CASE("full stiffness annihilates linears and gives the Dirichlet energy") {
    const fem::Mesh m(7);
    const DenseSymMatrix k = fem::assemble_stiffness_full(m);
    Vector lin(m.node_count());
    for (std::size_t g = 0; g < m.node_count(); ++g) lin[g] = 2.0 * m.node(g)[0] - 3.0 * m.node(g)[1] + 1.0;
    CHECK(max_abs(k.apply(Vector(m.node_count(), 1.0))) < 1e-12);
    CHECK(dot(lin, k.apply(lin)) == doctest::Approx(13.0).epsilon(1e-12));
}

TEST_CASE("interior matrices are positive definite") {
    const fem::Mesh m(8);
    CHECK_NOTHROW(Cholesky(fem::assemble_mass(m)));
    CHECK_NOTHROW(Cholesky(fem::assemble_stiffness(m)));
}

TEST_CASE("Poisson solve converges at second order") {
    // -Lap u = 2 pi^2 sin(pi x) sin(pi y)  =>  u = sin(pi x) sin(pi y)
    const double pi = std::acos(-1.0);
    double err_prev = 0.0;
    for (std::size_t n : {9u, 17u}) {
        const fem::Mesh m(n);
        const fem::NodalField f = fem::interpolate(m, [&](double x, double y) { return 2 * pi * pi * std::sin(pi * x) * std::sin(pi * y); });
        const fem::NodalField exact = fem::interpolate(m, [&](double x, double y) { return std::sin(pi * x) * std::sin(pi * y); });
        const Vector u = Cholesky(fem::assemble_stiffness(m)).solve(fem::assemble_mass(m).apply(f.values));
        const double err = max_abs(sub(u, exact.values));
        if (err_prev > 0.0) CHECK(err_prev / err > 3.5);
        err_prev = err;
    }
}

TEST_CASE("point evaluation reproduces linears and locates points") {
    const fem::Mesh m(11);
    const fem::NodalField f = fem::interpolate(m, [](double x, double y) { return x * (1 - x) + 0.0 * y; });
    const auto loc = fem::locate(m, 0.33, 0.71);
    double s = 0.0;
    for (double w : loc.weights) {
        CHECK(w >= -1e-14);
        s += w;
    }
    CHECK(s == doctest::Approx(1.0));
    // P1 interpolation of a quadratic at a node is exact.
    CHECK(fem::evaluate(f, 0.3, 0.6) == doctest::Approx(0.21).epsilon(1e-12));
    const Matrix o = fem::observation_operator(m, {{0.3, 0.6}, {0.55, 0.45}});
    CHECK(o.rows() == 2);
    CHECK(o.apply(f.values)[0] == doctest::Approx(0.21).epsilon(1e-12));
    CHECK(o.apply(f.values)[1] == doctest::Approx(fem::evaluate(f, 0.55, 0.45)).epsilon(1e-12));
}

TEST_CASE("observation set rejects boundary points") {
    const fem::Mesh m(5);
    CHECK_THROWS_AS(fem::make_observation_set(m, {{0.5, 0.5}, {0.0, 0.5}}), std::invalid_argument);
    CHECK(fem::make_observation_set(m, {{0.5, 0.5}}).locations.size() == 1);
}

TEST_CASE("random points respect the margin and the seed") {
    const auto a = fem::random_points(100, 0.1, 5), b = fem::random_points(100, 0.1, 5), c = fem::random_points(100, 0.1, 6);
    CHECK(a == b);
    CHECK(a != c);
    for (const auto& p : a) {
        CHECK(p[0] >= 0.1);
        CHECK(p[0] <= 0.9);
        CHECK(p[1] >= 0.1);
        CHECK(p[1] <= 0.9);
    }
}

TEST_CASE("noise is deterministic and has the requested scale") {
    const Vector v(50000, 1.0);
    const Vector a = fem::add_noise(v, 0.1, 3), b = fem::add_noise(v, 0.1, 3);
    CHECK(a == b);
    double s = 0.0;
    for (double x : a) s += (x - 1.0) * (x - 1.0);
    CHECK(std::sqrt(s / 50000.0) == doctest::Approx(0.1).epsilon(0.02));
    CHECK(fem::add_noise(v, 0.0, 3) == v);
}

TEST_CASE("restriction to a nested coarse mesh is exact on nodes") {
    const fem::Mesh fine(41), coarse(21);
    const auto fn = [](double x, double y) { return std::sin(3 * x) * y * (1 - y) * x * (1 - x); };
    const fem::NodalField r = fem::restrict_to_coarse(fem::interpolate(fine, fn), coarse);
    CHECK(oracle::rel_diff(r.values, fem::interpolate(coarse, fn).values) < 1e-13);
    // Non-nested: 41 -> 31 interpolates linearly.
    const fem::NodalField r2 = fem::restrict_to_coarse(fem::interpolate(fine, fn), fem::Mesh(31));
    CHECK(oracle::rel_diff(r2.values, fem::interpolate(fem::Mesh(31), fn).values) < 1e-2);
}
