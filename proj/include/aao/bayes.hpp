#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "aao/aao_bh.hpp"
#include "aao/aao_is.hpp"
#include "aao/priors.hpp"

namespace aao::bayes {

// Linear model M(u, theta) = -K u + L theta + f = 0 with observation
// O_u u + O_theta theta.  Operators are given through
//   S = K^{-1} L,  u_f = K^{-1} f,   Q = L# K,  theta_f = L# f,
// so that u = S theta + u_f on the model manifold and theta = Q u - theta_f
// for the state-reduced problem.  Adjoints are taken in ip_u, ip_theta and the
// Euclidean observation space.
struct LinearProblem {
    std::string name;
    std::size_t dim_u = 0, dim_theta = 0, dim_obs = 0;
    InnerProduct ip_u, ip_theta;
    LinearOp S, S_adj;
    LinearOp Q, Q_adj;
    Vector u_f, theta_f;
    LinearOp O_u, O_u_adj;
    LinearOp O_theta, O_theta_adj;  // empty: zero
};

// Penalty R(u, theta) = <du, C1 du>_U + 2 <du, C2 dtheta>_U + <dtheta, C3 dtheta>_X
// with du = u - u_mean, dtheta = theta - theta_mean.  Empty operators are zero.
struct CostConfig {
    double alpha = 1.0;
    LinearOp C1, C2, C2_adj, C3;
    Vector y;
    Vector u_mean, theta_mean;   // empty: zero
    LinearOp preconditioner;     // optional, for CG on the reduced Hessian
};

enum class Variable { theta, u };

// j(theta) = 1/2 ||O_u u + O_theta theta - y||^2 + alpha/2 R(u, theta) on u = S theta + u_f.
double cost_theta(const LinearProblem& p, const CostConfig& c, const Vector& theta);
Vector reduced_gradient_theta(const LinearProblem& p, const CostConfig& c, const Vector& theta);
Vector reduced_hessian_theta_action(const LinearProblem& p, const CostConfig& c, const Vector& h);

// Same on theta = Q u - theta_f.
double cost_u(const LinearProblem& p, const CostConfig& c, const Vector& u);
Vector reduced_gradient_u(const LinearProblem& p, const CostConfig& c, const Vector& u);
Vector reduced_hessian_u_action(const LinearProblem& p, const CostConfig& c, const Vector& h);

struct MapResult {
    Variable variable = Variable::theta;
    Vector u, theta;
    int iterations = 0;
    double cg_residual = 0.0;
    double gradient_norm = 0.0;  // reduced gradient at the solution, in the variable's norm
};

MapResult map_estimate(const LinearProblem& p, const CostConfig& c, Variable v, const CgOptions& opts = {});

// Gaussian posterior on a coefficient space.  `covariance` is the Euclidean
// covariance matrix of the coefficients; `ip` gives the ambient norm for traces.
struct PosteriorModel {
    Vector mean;
    DenseSymMatrix covariance;
    InnerProduct ip;
    int iterations = 0;
    double residual = 0.0;
};

// delta^2 H^{-1} from the dense Hessian of the chosen variable (ip-self-adjoint).
PosteriorModel posterior_from_map(const LinearProblem& p, const CostConfig& c, const MapResult& map, double delta);

// Posterior for y = G x + delta eta, eta ~ N(0, Sigma), prior N(m, (delta^2/alpha) C0):
//   mean = m + C0^{1/2} (alpha I + B*B)^{-1} B* (Sigma^{-1/2} y - Sigma^{-1/2} G m),
//   cov  = delta^2 C0^{1/2} (alpha I + B*B)^{-1} C0^{1/2},   B = Sigma^{-1/2} G C0^{1/2}.
// G maps C0's coordinates to R^{dim_y}; sigma empty means the identity.
PosteriorModel posterior_direct(const LinearOp& G, std::size_t dim_y, const priors::PriorModel& C0,
                                const DenseSymMatrix* sigma, double alpha, double delta, const Vector& data);

std::vector<Vector> sample_posterior(const PosteriorModel& p, std::uint64_t seed, std::size_t count);

// Trace of the covariance operator, tr[C] = tr[Cov_euclid Gram].
double posterior_spread(const PosteriorModel& p);

struct SpcReport {
    double bias_sq = 0.0;
    double variance = 0.0;        // Monte Carlo
    double variance_exact = 0.0;  // delta^2 tr of the mean map's noise response
    double spread = 0.0;
    double total = 0.0;           // Monte Carlo E||x - x*||^2
    double total_se = 0.0;
    double variance_se = 0.0;
    std::size_t draws = 0;
    std::optional<double> bound;
};

// Squared posterior contraction for posterior_direct with data G x* + delta eta.
SpcReport spc_components(const LinearOp& G, std::size_t dim_y, const priors::PriorModel& C0, double alpha,
                         double delta, const Vector& truth, std::size_t n_noise_draws, std::uint64_t seed);

// m^2 max_h [alpha/(alpha+h) phi(f0^2(h))] + delta^2 sum_h f0^2(h)/(alpha+h)
// with f0^2(s) = s^{1/2} and phi(t) = t^p.
double spc_bound_trivial_prior(const Vector& spectrum, double alpha, double delta, double source_exponent,
                               double m_upper = 1.0);

// Inverse source instance on modal coefficients: A u = theta + f.  `obs` is a
// points x modes evaluation matrix; null observes u itself.
LinearProblem is_problem(const is::IsOperator& op, const Matrix* obs, const Vector& forcing = {});

// Backwards heat instance: u is bh::SpaceTimeField data (generator), theta modal,
// observation u(T) + theta (optionally at points), L# = (1/T) L*.
LinearProblem bh_problem(const bh::BhOperator& op, const Matrix* obs, const bh::SpaceTimeField* forcing = nullptr);

}  // namespace aao::bayes
