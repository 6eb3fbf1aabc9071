#include <doctest.h>

#include <cmath>

#include "aao/priors.hpp"
#include "oracle.hpp"

using namespace aao;

TEST_CASE("diagonal prior pieces are consistent") {
    const priors::PriorModel p = priors::diagonal_prior("d", {4.0, 1.0, 0.25}, {1.0, 2.0, 3.0});
    CHECK(p.diagonal());
    const Vector x{1.0, 1.0, 1.0};
    CHECK(p.cov(x) == Vector{4.0, 1.0, 0.25});
    CHECK(p.sqrt_cov(x) == Vector{2.0, 1.0, 0.5});
    CHECK(oracle::rel_diff(p.precision(p.cov(x)), x) < 1e-15);
    CHECK_THROWS_AS(priors::diagonal_prior("bad", {1.0, -1.0}), std::invalid_argument);
}

TEST_CASE("smoothness prior variances and Monte Carlo covariance") {
    const ModalBasis b = ModalBasis::spectral(3);
    const priors::PriorModel p = priors::smoothness_prior(1.5, 0.5, 2, b);
    for (std::size_t n = 0; n < b.size(); ++n) CHECK(p.variances[n] == doctest::Approx(std::pow(1.5 + 0.5 * b.eigenvalue(n), -2.0)));
    const auto draws = priors::sample_prior(p, 3, 20000);
    for (std::size_t n : {0u, 4u}) {
        double s = 0.0;
        for (const auto& d : draws) s += d[n] * d[n];
        CHECK(s / 20000.0 == doctest::Approx(p.variances[n]).epsilon(0.05));
    }
}

TEST_CASE("nodal smoothness prior is self-adjoint in M and inverts its precision") {
    const fem::Mesh mesh(7);
    const priors::PriorModel p = priors::smoothness_prior(1.0, 0.1, 1, mesh);
    Rng rng(1);
    const Vector x = rng.normals(p.dim()), y = rng.normals(p.dim());
    CHECK(p.ip(p.cov(x), y) == doctest::Approx(p.ip(x, p.cov(y))).epsilon(1e-10));
    CHECK(oracle::rel_diff(p.precision(p.cov(x)), x) < 1e-10);
    // C = (A^{-1} M): A C x = M x
    const DenseSymMatrix m = fem::assemble_mass(mesh), k = fem::assemble_stiffness(mesh);
    const Vector cx = p.cov(x);
    const Vector acx = add(m.apply(cx), scaled(0.1, k.apply(cx)));
    CHECK(oracle::rel_diff(acx, m.apply(x)) < 1e-10);
}

TEST_CASE("semigroup state prior: decay and translation invariance") {
    const ModalBasis b = ModalBasis::spectral(3);
    const priors::PriorModel cp = priors::smoothness_prior(1.5, 0.5, 1, b);
    const std::vector<double> times{0.0, 0.05, 0.1};
    const priors::PriorModel p0 = priors::semigroup_state_prior(cp, b, times);
    Vector f(b.size());
    for (std::size_t n = 0; n < f.size(); ++n) f[n] = 1.0 + static_cast<double>(n);
    const priors::PriorModel pf = priors::semigroup_state_prior(cp, b, times, f);
    Rng rng(4);
    for (int k = 0; k < 5; ++k) {
        const Vector v = rng.normals(p0.dim());
        CHECK(p0.cov(v) == pf.cov(v));
    }
    CHECK(p0.variances[b.size()] == doctest::Approx(std::exp(-0.1 * b.eigenvalue(0)) * cp.variances[0]));
    CHECK(pf.mean[2 * b.size()] == doctest::Approx(f[0] * (1 - std::exp(-0.1 * b.eigenvalue(0))) / b.eigenvalue(0)));
    CHECK_THROWS_AS(priors::semigroup_state_prior(cp, b, {0.1, 0.05}), std::invalid_argument);
}

TEST_CASE("heuristic factor preserves the G norm; full variant has no square root") {
    const bh::BhOperator op(ModalBasis::spectral(4), bh::TimeGrid(0.1, 4));
    const LinearOp c = priors::heuristic_factor(op);
    Rng rng(8);
    for (int k = 0; k < 10; ++k) {
        bh::BhBlockVector x{op.zero_field(), rng.normals(op.size())};
        x.u.data = rng.normals(x.u.data.size());
        const bh::BhRange gx = op.apply_G(x);
        CHECK(priors::domain_norm(op, c(bh::flatten(x))) == doctest::Approx(std::sqrt(op.inner_range(gx, gx))).epsilon(1e-10));
    }
    const priors::PriorModel full = priors::heuristic_bh_prior(op, false);
    CHECK_THROWS_AS(full.sqrt_cov(Vector(full.dim(), 1.0)), priors::UnsupportedOperation);
    const priors::PriorModel diag = priors::heuristic_bh_prior(op, true);
    CHECK(diag.diagonal());
    CHECK_NOTHROW(priors::sample_prior(diag, 1, 2));
}

TEST_CASE("trivial IS prior equals G*G in the domain inner product") {
    const is::IsOperator op(ModalBasis::spectral(3));
    const priors::PriorModel c0 = priors::is_trivial_prior(op);
    const LinearOp g = priors::is_forward(op);
    Rng rng(2);
    for (int k = 0; k < 5; ++k) {
        const Vector x = rng.normals(c0.dim()), y = rng.normals(c0.dim());
        CHECK(c0.ip(x, c0.cov(y)) == doctest::Approx(dot(g(x), g(y))).epsilon(1e-11));
        CHECK(oracle::rel_diff(c0.cov(x), c0.sqrt_cov(c0.sqrt_cov(x))) < 1e-11);
    }
}

TEST_CASE("log spaced modes are strictly increasing and span the range") {
    const auto m = priors::log_spaced_modes(1000, 50);
    REQUIRE(m.size() == 50);
    CHECK(m.front() == 0);
    CHECK(m.back() == 999);
    for (std::size_t i = 1; i < m.size(); ++i) CHECK(m[i] > m[i - 1]);
    CHECK(priors::log_spaced_modes(10, 50).size() == 10);
}

TEST_CASE("link check: trivial unit ratios, inverse diverges, zero denominators skipped") {
    const is::IsOperator op(ModalBasis::spectral(10));
    for (const auto& setup : {priors::is_trivial_link(op), priors::is_inverse_link(op)}) {
        const auto r = priors::check_link_condition(setup.psi, setup.g, setup.sampler, 100, setup.probes, 9);
        CHECK(r.samples == 100);
        if (setup.name == "is-trivial") {
            CHECK(r.min_ratio == doctest::Approx(1.0).epsilon(1e-12));
            CHECK(r.max_ratio == doctest::Approx(1.0).epsilon(1e-12));
            CHECK_FALSE(r.diverges);
        } else {
            CHECK(r.diverges);
            CHECK(r.lower_stable);
        }
    }
    const auto r = priors::check_link_condition([](const Vector&) { return 0.0; }, [](const Vector& x) { return norm2(x); },
                                                [](Rng& g) { return g.normals(3); }, 10, {}, 1);
    CHECK(r.skipped == 10);
}
