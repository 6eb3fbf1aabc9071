#include "aao/bayes.hpp"

#include <algorithm>
#include <cmath>

namespace aao::bayes {

namespace {

Vector apply_or_zero(const LinearOp& op, const Vector& x, std::size_t out_dim) {
    return op ? op(x) : Vector(out_dim, 0.0);
}

Vector minus_or_self(const Vector& x, const Vector& mean) { return mean.empty() ? x : sub(x, mean); }

void add_to(Vector& y, const Vector& x) { axpy(1.0, x, y); }

void check_dim(const Vector& v, std::size_t n, const char* what) {
    if (v.size() != n) throw std::invalid_argument(std::string(what) + ": size mismatch");
}

// O_u u + O_theta theta
Vector observe(const LinearProblem& p, const Vector& u, const Vector& theta) {
    Vector r = p.O_u(u);
    if (p.O_theta) add_to(r, p.O_theta(theta));
    return r;
}

double penalty(const LinearProblem& p, const CostConfig& c, const Vector& du, const Vector& dt) {
    double s = 0.0;
    if (c.C1) s += p.ip_u(du, c.C1(du));
    if (c.C2) s += 2.0 * p.ip_u(du, c.C2(dt));
    if (c.C3) s += p.ip_theta(dt, c.C3(dt));
    return s;
}

// (C1 du + C2 dtheta, C2* du + C3 dtheta)
std::pair<Vector, Vector> penalty_gradient(const LinearProblem& p, const CostConfig& c, const Vector& du,
                                           const Vector& dt) {
    Vector gu = apply_or_zero(c.C1, du, p.dim_u);
    if (c.C2) add_to(gu, c.C2(dt));
    Vector gt = apply_or_zero(c.C3, dt, p.dim_theta);
    if (c.C2_adj) add_to(gt, c.C2_adj(du));
    return {std::move(gu), std::move(gt)};
}

Vector state_of(const LinearProblem& p, const Vector& theta) { return add(p.S(theta), p.u_f); }
Vector param_of(const LinearProblem& p, const Vector& u) { return sub(p.Q(u), p.theta_f); }

}  // namespace

double cost_theta(const LinearProblem& p, const CostConfig& c, const Vector& theta) {
    check_dim(theta, p.dim_theta, "cost_theta");
    const Vector u = state_of(p, theta);
    const Vector r = sub(observe(p, u, theta), c.y);
    return 0.5 * dot(r, r) + 0.5 * c.alpha * penalty(p, c, minus_or_self(u, c.u_mean), minus_or_self(theta, c.theta_mean));
}

Vector reduced_gradient_theta(const LinearProblem& p, const CostConfig& c, const Vector& theta) {
    check_dim(theta, p.dim_theta, "reduced_gradient_theta");
    const Vector u = state_of(p, theta);
    const Vector r = sub(observe(p, u, theta), c.y);
    auto [gu, gt] = penalty_gradient(p, c, minus_or_self(u, c.u_mean), minus_or_self(theta, c.theta_mean));
    Vector g = p.S_adj(add(p.O_u_adj(r), scaled(c.alpha, std::move(gu))));
    axpy(c.alpha, gt, g);
    if (p.O_theta_adj) add_to(g, p.O_theta_adj(r));
    return g;
}

Vector reduced_hessian_theta_action(const LinearProblem& p, const CostConfig& c, const Vector& h) {
    check_dim(h, p.dim_theta, "reduced_hessian_theta_action");
    const Vector v = p.S(h);
    const Vector rh = observe(p, v, h);
    auto [gu, gt] = penalty_gradient(p, c, v, h);
    Vector g = p.S_adj(add(p.O_u_adj(rh), scaled(c.alpha, std::move(gu))));
    axpy(c.alpha, gt, g);
    if (p.O_theta_adj) add_to(g, p.O_theta_adj(rh));
    return g;
}

double cost_u(const LinearProblem& p, const CostConfig& c, const Vector& u) {
    check_dim(u, p.dim_u, "cost_u");
    const Vector theta = param_of(p, u);
    const Vector r = sub(observe(p, u, theta), c.y);
    return 0.5 * dot(r, r) + 0.5 * c.alpha * penalty(p, c, minus_or_self(u, c.u_mean), minus_or_self(theta, c.theta_mean));
}

Vector reduced_gradient_u(const LinearProblem& p, const CostConfig& c, const Vector& u) {
    check_dim(u, p.dim_u, "reduced_gradient_u");
    const Vector theta = param_of(p, u);
    const Vector r = sub(observe(p, u, theta), c.y);
    auto [gu, gt] = penalty_gradient(p, c, minus_or_self(u, c.u_mean), minus_or_self(theta, c.theta_mean));
    Vector t = scaled(c.alpha, std::move(gt));
    if (p.O_theta_adj) add_to(t, p.O_theta_adj(r));
    Vector g = p.O_u_adj(r);
    axpy(c.alpha, gu, g);
    add_to(g, p.Q_adj(t));
    return g;
}

Vector reduced_hessian_u_action(const LinearProblem& p, const CostConfig& c, const Vector& h) {
    check_dim(h, p.dim_u, "reduced_hessian_u_action");
    const Vector w = p.Q(h);
    const Vector rh = observe(p, h, w);
    auto [gu, gt] = penalty_gradient(p, c, h, w);
    Vector t = scaled(c.alpha, std::move(gt));
    if (p.O_theta_adj) add_to(t, p.O_theta_adj(rh));
    Vector g = p.O_u_adj(rh);
    axpy(c.alpha, gu, g);
    add_to(g, p.Q_adj(t));
    return g;
}

MapResult map_estimate(const LinearProblem& p, const CostConfig& c, Variable v, const CgOptions& opts) {
    if (!(c.alpha > 0.0)) throw std::invalid_argument("map_estimate: alpha must be positive");
    CgOptions o = opts;
    if (!o.preconditioner) o.preconditioner = c.preconditioner;
    MapResult m;
    m.variable = v;
    if (v == Variable::theta) {
        const Vector g0 = reduced_gradient_theta(p, c, Vector(p.dim_theta, 0.0));
        const CgResult r = conjugate_gradient([&](const Vector& h) { return reduced_hessian_theta_action(p, c, h); },
                                              scaled(-1.0, g0), p.ip_theta, o);
        m.theta = r.solution;
        m.u = state_of(p, m.theta);
        m.iterations = r.iterations;
        m.cg_residual = r.residual;
        m.gradient_norm = p.ip_theta.norm(reduced_gradient_theta(p, c, m.theta));
    } else {
        const Vector g0 = reduced_gradient_u(p, c, Vector(p.dim_u, 0.0));
        const CgResult r = conjugate_gradient([&](const Vector& h) { return reduced_hessian_u_action(p, c, h); },
                                              scaled(-1.0, g0), p.ip_u, o);
        m.u = r.solution;
        m.theta = param_of(p, m.u);
        m.iterations = r.iterations;
        m.cg_residual = r.residual;
        m.gradient_norm = p.ip_u.norm(reduced_gradient_u(p, c, m.u));
    }
    return m;
}

namespace {

Matrix inverse_spd(const DenseSymMatrix& a) {
    const Cholesky ch(a);
    const std::size_t n = a.dim();
    Matrix inv(n, n);
    Vector e(n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
        e[j] = 1.0;
        const Vector c = ch.solve(e);
        e[j] = 0.0;
        for (std::size_t i = 0; i < n; ++i) inv(i, j) = c[i];
    }
    return inv;
}

Matrix gram_matrix(const InnerProduct& ip, std::size_t n) {
    return ip.gram ? Matrix::from_operator(ip.gram, n, n) : Matrix::identity(n);
}

}  // namespace

PosteriorModel posterior_from_map(const LinearProblem& p, const CostConfig& c, const MapResult& map, double delta) {
    const bool theta = map.variable == Variable::theta;
    const std::size_t n = theta ? p.dim_theta : p.dim_u;
    const InnerProduct& ip = theta ? p.ip_theta : p.ip_u;
    const Matrix h = Matrix::from_operator(
        [&](const Vector& x) { return theta ? reduced_hessian_theta_action(p, c, x) : reduced_hessian_u_action(p, c, x); },
        n, n);
    // G H is symmetric when H is ip-self-adjoint; Cov_euclid = delta^2 (G H)^{-1}.
    Matrix cov = inverse_spd(DenseSymMatrix(gram_matrix(ip, n) * h, 1e-6));
    cov *= delta * delta;
    PosteriorModel post;
    post.mean = theta ? map.theta : map.u;
    post.covariance = DenseSymMatrix(std::move(cov), 1e-6);
    post.ip = ip;
    post.iterations = map.iterations;
    post.residual = map.cg_residual;
    return post;
}

namespace {

struct DirectParts {
    Matrix s;       // C0^{1/2}
    Matrix gx;      // Gram of C0's inner product
    Matrix gm;      // G
    Matrix w;       // Sigma^{-1/2}
    Matrix p_inv;   // (alpha G_X + B^T B)^{-1}
    Matrix bt_w;    // B^T W
};

DirectParts direct_parts(const LinearOp& G, std::size_t dim_y, const priors::PriorModel& C0, const DenseSymMatrix* sigma,
                         double alpha) {
    if (!(alpha > 0.0)) throw std::invalid_argument("posterior_direct: alpha must be positive");
    if (!C0.sqrt_cov) throw priors::UnsupportedOperation("posterior_direct: prior has no square root");
    const std::size_t n = C0.dim();
    DirectParts d;
    d.s = Matrix::from_operator(C0.sqrt_cov, n, n);
    d.gx = gram_matrix(C0.ip, n);
    d.gm = Matrix::from_operator(G, n, dim_y);
    if (sigma) {
        if (sigma->dim() != dim_y) throw std::invalid_argument("posterior_direct: noise covariance has the wrong size");
        d.w = matrix_function(*sigma, [](double x) {
                  if (!(x > 0.0)) throw std::domain_error("noise covariance is not positive definite");
                  return 1.0 / std::sqrt(x);
              }).matrix();
    } else {
        d.w = Matrix::identity(dim_y);
    }
    const Matrix b = d.w * d.gm * d.s;
    const Matrix bt = b.transpose();
    Matrix pm = bt * b;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) pm(i, j) += alpha * d.gx(i, j);
    d.p_inv = inverse_spd(DenseSymMatrix(std::move(pm), 1e-6));
    d.bt_w = bt * d.w;
    return d;
}

}  // namespace

PosteriorModel posterior_direct(const LinearOp& G, std::size_t dim_y, const priors::PriorModel& C0,
                                const DenseSymMatrix* sigma, double alpha, double delta, const Vector& data) {
    if (data.size() != dim_y) throw std::invalid_argument("posterior_direct: data size mismatch");
    const DirectParts d = direct_parts(G, dim_y, C0, sigma, alpha);
    const Vector resid = sub(data, G(C0.mean));
    PosteriorModel post;
    post.mean = add(C0.mean, d.s.apply(d.p_inv.apply(d.bt_w.apply(resid))));
    Matrix cov = d.s * d.p_inv * d.s.transpose();
    cov *= delta * delta;
    post.covariance = DenseSymMatrix(std::move(cov), 1e-6);
    post.ip = C0.ip;
    return post;
}

std::vector<Vector> sample_posterior(const PosteriorModel& p, std::uint64_t seed, std::size_t count) {
    std::vector<Vector> out;
    if (count == 0) return out;
    const EigenDecomposition eig = sym_eig(p.covariance);
    const std::size_t n = eig.eigenvalues.size();
    const double top = std::max(1.0, std::abs(eig.eigenvalues.back()));
    if (eig.eigenvalues.front() < -1e-8 * top)
        throw NumericalError("sample_posterior: covariance is indefinite (eigenvalue " +
                             std::to_string(eig.eigenvalues.front()) + ")");
    Matrix f = eig.eigenvectors;
    for (std::size_t j = 0; j < n; ++j) {
        const double s = std::sqrt(std::max(eig.eigenvalues[j], 0.0));
        for (std::size_t i = 0; i < n; ++i) f(i, j) *= s;
    }
    Rng rng(seed);
    for (std::size_t k = 0; k < count; ++k) out.push_back(add(p.mean, f.apply(rng.normals(n))));
    return out;
}

double posterior_spread(const PosteriorModel& p) {
    const std::size_t n = p.covariance.dim();
    double s = 0.0;
    Vector e(n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
        e[j] = 1.0;
        const Vector g = p.ip.apply_gram(e);
        e[j] = 0.0;
        const double* row = p.covariance.matrix().row(j);
        for (std::size_t i = 0; i < n; ++i) s += row[i] * g[i];
    }
    return s;
}

SpcReport spc_components(const LinearOp& G, std::size_t dim_y, const priors::PriorModel& C0, double alpha,
                         double delta, const Vector& truth, std::size_t n_noise_draws, std::uint64_t seed) {
    if (truth.size() != C0.dim()) throw std::invalid_argument("spc_components: truth has the wrong size");
    const PosteriorModel clean = posterior_direct(G, dim_y, C0, nullptr, alpha, delta, G(truth));
    const DirectParts d = direct_parts(G, dim_y, C0, nullptr, alpha);
    const Matrix resp = d.s * d.p_inv * d.bt_w;  // d mean / d data
    const auto sq = [&](const Vector& v) { return C0.ip(v, v); };

    SpcReport r;
    r.draws = n_noise_draws;
    r.spread = posterior_spread(clean);
    const Vector bias = sub(truth, clean.mean);
    r.bias_sq = sq(bias);
    {
        // delta^2 tr[R^T G_X R]
        const Matrix gr = d.gx * resp;
        double t = 0.0;
        for (std::size_t i = 0; i < resp.rows(); ++i)
            for (std::size_t j = 0; j < resp.cols(); ++j) t += resp(i, j) * gr(i, j);
        r.variance_exact = delta * delta * t;
    }
    Rng rng(seed);
    double sv = 0.0, sv2 = 0.0, st = 0.0, st2 = 0.0;
    for (std::size_t k = 0; k < n_noise_draws; ++k) {
        const Vector dev = scaled(delta, resp.apply(rng.normals(dim_y)));
        const double v = sq(dev);
        const double t = sq(sub(bias, dev)) + r.spread;
        sv += v;
        sv2 += v * v;
        st += t;
        st2 += t * t;
    }
    if (n_noise_draws > 0) {
        const double n = static_cast<double>(n_noise_draws);
        r.variance = sv / n;
        r.total = st / n;
        if (n_noise_draws > 1) {
            r.variance_se = std::sqrt(std::max(sv2 / n - r.variance * r.variance, 0.0) / (n - 1.0));
            r.total_se = std::sqrt(std::max(st2 / n - r.total * r.total, 0.0) / (n - 1.0));
        }
    }
    return r;
}

double spc_bound_trivial_prior(const Vector& spectrum, double alpha, double delta, double source_exponent,
                               double m_upper) {
    if (!(alpha > 0.0)) throw std::invalid_argument("spc_bound_trivial_prior: alpha must be positive");
    double bias = 0.0, trace = 0.0;
    for (std::size_t i = 0; i < spectrum.size(); ++i) {
        const double h = spectrum[i];
        if (!(h > 0.0)) throw std::invalid_argument("spc_bound_trivial_prior: nonpositive eigenvalue at " + std::to_string(i));
        const double f0sq = std::sqrt(h);
        bias = std::max(bias, alpha / (alpha + h) * std::pow(f0sq, source_exponent));
        trace += f0sq / (alpha + h);
    }
    return m_upper * m_upper * bias + delta * delta * trace;
}

LinearProblem is_problem(const is::IsOperator& op, const Matrix* obs, const Vector& forcing) {
    const std::size_t d = op.size();
    const Vector gam = op.basis().eigenvalues();
    Vector inv(d), inv2(d), sq(d);
    for (std::size_t n = 0; n < d; ++n) {
        inv[n] = 1.0 / gam[n];
        inv2[n] = inv[n] * inv[n];
        sq[n] = gam[n] * gam[n];
    }
    if (obs && obs->cols() != d) throw std::invalid_argument("is_problem: observation matrix has the wrong width");
    if (!forcing.empty() && forcing.size() != d) throw std::invalid_argument("is_problem: forcing size mismatch");
    const auto diag = [](const Vector& w) { return [w](const Vector& x) { return hadamard(w, x); }; };

    LinearProblem p;
    p.name = "inverse_source";
    p.dim_u = d;
    p.dim_theta = d;
    p.dim_obs = obs ? obs->rows() : d;
    p.ip_u = InnerProduct::diagonal(sq);
    p.ip_theta = InnerProduct::euclidean();
    p.S = diag(inv);
    p.S_adj = diag(gam);
    p.Q = diag(gam);
    p.Q_adj = diag(inv);
    p.theta_f = forcing.empty() ? Vector(d, 0.0) : forcing;
    p.u_f = hadamard(inv, p.theta_f);
    if (obs) {
        const Matrix o = *obs;
        p.O_u = [o](const Vector& u) { return o.apply(u); };
        p.O_u_adj = [o, inv2](const Vector& r) { return hadamard(inv2, o.apply_transpose(r)); };
    } else {
        p.O_u = [](const Vector& u) { return u; };
        p.O_u_adj = diag(inv2);
    }
    return p;
}

LinearProblem bh_problem(const bh::BhOperator& op, const Matrix* obs, const bh::SpaceTimeField* forcing) {
    const std::size_t d = op.size();
    const double T = op.grid().final_time();
    if (obs && obs->cols() != d) throw std::invalid_argument("bh_problem: observation matrix has the wrong width");
    const Vector gam = op.basis().eigenvalues();
    const auto field = [&op](const Vector& v) {
        bh::SpaceTimeField f = op.zero_field();
        if (v.size() != f.data.size()) throw std::invalid_argument("bh_problem: state size mismatch");
        f.data = v;
        return f;
    };

    LinearProblem p;
    p.name = "backwards_heat";
    p.dim_u = op.zero_field().data.size();
    p.dim_theta = d;
    p.dim_obs = obs ? obs->rows() : d;
    p.ip_u = bh::u0_inner_product(op);
    p.ip_theta = InnerProduct::diagonal(gam);
    // L theta = -I A theta, S = K^{-1} L
    p.S = [&op, gam](const Vector& theta) { return op.constant_in_time(scaled(-1.0, hadamard(gam, theta))).data; };
    p.S_adj = [&op, field, gam](const Vector& v) {
        Vector r = op.integral_of(field(v));
        for (std::size_t n = 0; n < r.size(); ++n) r[n] = -r[n] / gam[n];
        return r;
    };
    p.Q = [&op, field, gam, T](const Vector& u) {
        Vector r = op.integral_of(field(u));
        for (std::size_t n = 0; n < r.size(); ++n) r[n] = -r[n] / (T * gam[n]);
        return r;
    };
    p.Q_adj = [&op, gam, T](const Vector& theta) {
        return op.constant_in_time(scaled(-1.0 / T, hadamard(gam, theta))).data;
    };
    if (forcing) {
        p.u_f = op.solve_forward(*forcing).data;
        p.theta_f = p.Q(forcing->data);
    } else {
        p.u_f.assign(p.dim_u, 0.0);
        p.theta_f.assign(d, 0.0);
    }
    Vector inv(d);
    for (std::size_t n = 0; n < d; ++n) inv[n] = 1.0 / gam[n];
    const std::optional<Matrix> o = obs ? std::optional<Matrix>(*obs) : std::nullopt;
    p.O_u = [&op, field, o](const Vector& u) {
        const Vector fin = op.state_final(field(u));
        return o ? o->apply(fin) : fin;
    };
    p.O_u_adj = [&op, o, gam](const Vector& r) {
        const Vector back = o ? o->apply_transpose(r) : r;
        return op.tail_field(hadamard(gam, back)).data;
    };
    p.O_theta = [o](const Vector& theta) { return o ? o->apply(theta) : theta; };
    p.O_theta_adj = [o, inv](const Vector& r) { return hadamard(inv, o ? o->apply_transpose(r) : r); };
    return p;
}

}  // namespace aao::bayes
