#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "aao/aao_bh.hpp"
#include "aao/rng.hpp"
#include "oracle.hpp"

using namespace aao;

namespace {

// Value of a V_h function at t.
double eval_vh(const bh::TimeGrid& g, double gamma, const double* a, double t) {
    int k = 0;
    while (k < g.steps() && t >= g.cell_end(k)) ++k;
    return a[k] + a[g.steps() + 1] * std::exp(-gamma * (g.final_time() - t));
}

// u' = -gamma u + a(t), u(0) = 0, by RK4 cell by cell.
double rk4_state(const bh::TimeGrid& g, double gamma, const double* a, double t_end) {
    double u = 0.0;
    for (int k = 0; k <= g.steps(); ++k) {
        const double lo = g.cell_begin(k), hi = std::min(g.cell_end(k), t_end);
        if (hi <= lo) break;
        const int steps = 4000;
        const double h = (hi - lo) / steps;
        const auto rhs = [&](double t, double v) { return -gamma * v + a[k] + a[g.steps() + 1] * std::exp(-gamma * (g.final_time() - t)); };
        double t = lo;
        for (int s = 0; s < steps; ++s) {
            const double k1 = rhs(t, u), k2 = rhs(t + h / 2, u + h / 2 * k1), k3 = rhs(t + h / 2, u + h / 2 * k2), k4 = rhs(t + h, u + h * k3);
            u += h / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
            t += h;
        }
    }
    return u;
}

bh::BhBlockVector random_block(const bh::BhOperator& op, Rng& rng) {
    bh::BhBlockVector x{op.zero_field(), rng.normals(op.size())};
    x.u.data = rng.normals(x.u.data.size());
    return x;
}

}  // namespace

TEST_CASE("time grid has half end cells") {
    const bh::TimeGrid g(1.0, 4);
    CHECK(g.weight(0) == doctest::Approx(0.125));
    CHECK(g.weight(2) == doctest::Approx(0.25));
    CHECK(g.weight(4) == doctest::Approx(0.125));
    double s = 0.0;
    for (int k = 0; k <= 4; ++k) s += g.weight(k);
    CHECK(s == doctest::Approx(1.0));
    CHECK_THROWS_AS(bh::TimeGrid(0.0, 4), std::invalid_argument);
}

TEST_CASE("mode time Gram matches Gauss quadrature") {
    const bh::TimeGrid g(0.7, 5);
    for (double gamma : {0.5, 20.0, 400.0}) {
        const bh::ModeTime mt(gamma, g);
        const Matrix gram = mt.gram();
        std::vector<double> x, w;
        for (int k = 0; k <= g.steps(); ++k) oracle::graded_rule(g.cell_begin(k), g.cell_end(k), 20, 12, x, w);
        const std::size_t s = mt.dim();
        for (std::size_t i = 0; i < s; ++i)
            for (std::size_t j = 0; j < s; ++j) {
                Vector ei(s, 0.0), ej(s, 0.0);
                ei[i] = 1.0;
                ej[j] = 1.0;
                double q = 0.0;
                for (std::size_t p = 0; p < x.size(); ++p) q += w[p] * eval_vh(g, gamma, ei.data(), x[p]) * eval_vh(g, gamma, ej.data(), x[p]);
                CHECK(gram(i, j) == doctest::Approx(q).epsilon(1e-10));
            }
    }
}

TEST_CASE("closed-form state matches RK4") {
    const bh::TimeGrid g(0.5, 4);
    Rng rng(3);
    for (double gamma : {1.0, 30.0}) {
        const bh::ModeTime mt(gamma, g);
        const Vector a = rng.normals(mt.dim());
        for (double t : {0.0, 0.1, 0.3125, 0.5}) CHECK(mt.state_value(a.data(), t) == doctest::Approx(rk4_state(g, gamma, a.data(), t)).epsilon(1e-9));
        std::vector<double> x, w;
        for (int k = 0; k <= g.steps(); ++k) oracle::graded_rule(g.cell_begin(k), g.cell_end(k), 20, 12, x, w);
        double integral = 0.0, sq = 0.0;
        for (std::size_t p = 0; p < x.size(); ++p) {
            const double u = mt.state_value(a.data(), x[p]);
            integral += w[p] * u;
            sq += w[p] * u * u;
        }
        CHECK(mt.state_integral(a.data()) == doctest::Approx(integral).epsilon(1e-10));
        CHECK(mt.state_l2_sq(a.data()) == doctest::Approx(sq).epsilon(1e-10));
    }
}

TEST_CASE("BH adjoint identity in exact inner products") {
    const bh::BhOperator op(ModalBasis::spectral(5), bh::TimeGrid(0.1, 4));
    Rng rng(17);
    for (int k = 0; k < 30; ++k) {
        const bh::BhBlockVector x = random_block(op, rng);
        bh::BhRange y{op.zero_field(), rng.normals(op.size())};
        y.first.data = rng.normals(y.first.data.size());
        const double lhs = op.inner_range(op.apply_G(x), y);
        const double rhs = op.inner_domain(x, op.apply_G_adjoint(y));
        const double scale = std::sqrt(op.inner_domain(x, x) * op.inner_range(y, y));
        CHECK(std::abs(lhs - rhs) / scale < 1e-10);
    }
}

TEST_CASE("flatten and unflatten are inverse") {
    const bh::BhOperator op(ModalBasis::spectral(3), bh::TimeGrid(1.0, 3));
    Rng rng(2);
    const bh::BhBlockVector x = random_block(op, rng);
    const bh::BhBlockVector y = bh::unflatten(op, bh::flatten(x));
    CHECK(y.u.data == x.u.data);
    CHECK(y.theta == x.theta);
    CHECK_THROWS_AS(bh::unflatten(op, Vector(3)), std::invalid_argument);
}

TEST_CASE("cubic roots solve the cubic and match a Nystrom oracle") {
    const double T = 1.0;
    for (double gamma : {0.3, 2.0, 19.7, 80.0}) {
        const double mu = 1.0 / gamma;
        const auto c = bh::BhCubicCoefficients::make(mu, T);
        const auto r = bh::analytic_cubic_roots(c);
        REQUIRE_FALSE(r.complex_pair);
        const double b2 = T + 2.5 + c.alpha, b1 = 1.5 * (T + 1) + c.beta;
        for (double l : r.roots) CHECK(std::abs(((l - b2) * l + b1) * l - c.rhs) < 1e-12 * std::max(1.0, l * l * l));

        // Per-mode operator [[I + gamma b b^T, 1 + b], [(1 + b)^T, T + mu]] on L2(0,T) x R.
        std::vector<double> x, w;
        oracle::graded_rule(T, 30, 10, x, w);
        const std::size_t m = x.size();
        Eigen::MatrixXd k = Eigen::MatrixXd::Identity(m + 1, m + 1);
        for (std::size_t i = 0; i < m; ++i) {
            const double bi = std::exp(-gamma * (T - x[i]));
            for (std::size_t j = 0; j < m; ++j) k(i, j) += gamma * std::sqrt(w[i] * w[j]) * bi * std::exp(-gamma * (T - x[j]));
            k(i, m) = k(m, i) = std::sqrt(w[i]) * (1.0 + bi);
        }
        k(m, m) = T + mu;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(k, Eigen::EigenvaluesOnly);
        std::vector<double> ev(es.eigenvalues().data(), es.eigenvalues().data() + m + 1);
        std::sort(ev.begin(), ev.end(), [](double a, double b) { return std::abs(a - 1.0) > std::abs(b - 1.0); });
        std::vector<double> top(ev.begin(), ev.begin() + 3);
        std::sort(top.begin(), top.end());
        for (int i = 0; i < 3; ++i) CHECK(std::abs(top[i] - r.roots[i]) < 1e-6);
        // Smallest root bound
        CHECK(r.roots[0] <= 2.0 * mu * std::exp(-2.0 * T / mu));
    }
}

TEST_CASE("tiny smallest roots keep their logarithm") {
    const auto r = bh::analytic_cubic_roots(bh::BhCubicCoefficients::make(1.0 / 2000.0, 1.0));
    CHECK(std::isfinite(r.log_smallest));
    CHECK(r.log_smallest < -3000.0);
}

TEST_CASE("history-to-final and D block norm bounds") {
    const bh::BhOperator op(ModalBasis::spectral(6), bh::TimeGrid(0.3, 4));
    Rng rng(5);
    for (int k = 0; k < 200; ++k) {
        bh::SpaceTimeField f = op.zero_field();
        f.data = rng.normals(f.data.size());
        const double fn = std::sqrt(op.inner_l2l2(f, f));
        const Vector h = op.history_to_final(f);
        CHECK(std::sqrt(op.inner_h1(h, h)) <= fn / std::sqrt(2.0) * (1 + 1e-12));
        const bh::SpaceTimeField d = op.d_block(f);
        CHECK(std::sqrt(op.inner_l2l2(d, d)) <= 0.5 * fn * (1 + 1e-12));
    }
}

TEST_CASE("discrete assembly tends to the cubic when gamma tau is small") {
    DenseSymMatrix a(1);
    a.set(0, 0, 0.05);
    const int N = 256;
    const DenseSymMatrix e = bh::assemble_discrete_eigensystem(a, N, 1.0);
    CHECK(e.dim() == static_cast<std::size_t>(N + 2));
    Vector ev = sym_eigvals(e).eigenvalues;
    std::size_t unit = 0;
    for (double v : ev) unit += std::abs(v - 1.0) < 1e-9;
    CHECK(unit >= static_cast<std::size_t>(N - 1));
    std::sort(ev.begin(), ev.end(), [](double x, double y) { return std::abs(x - 1.0) > std::abs(y - 1.0); });
    std::vector<double> top(ev.begin(), ev.begin() + 3);
    std::sort(top.begin(), top.end());
    const auto r = bh::analytic_cubic_roots(bh::BhCubicCoefficients::make(20.0, 1.0));
    for (int i = 0; i < 3; ++i) CHECK(top[i] == doctest::Approx(r.roots[i]).epsilon(1e-3));
}

TEST_CASE("cluster summary") {
    const auto cs = bh::cluster_summary({2.05, 1.0, 1.0, 1.45, 1.55, 7.0}, {1.0, 1.5, 2.0}, 0.2);
    REQUIRE(cs.size() == 3);
    CHECK(cs[0].members == 2);
    CHECK(cs[1].center == doctest::Approx(1.5));
    CHECK(cs[1].max_distance == doctest::Approx(0.05));
    CHECK(cs[2].members == 1);
}
