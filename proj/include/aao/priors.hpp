#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "aao/aao_bh.hpp"
#include "aao/aao_is.hpp"
#include "aao/fem.hpp"
#include "aao/modal.hpp"
#include "aao/rng.hpp"

namespace aao::priors {

class UnsupportedOperation : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

// Gaussian N(mean, C0) on a flat coefficient space with inner product `ip`.
// Draws are mean + sqrt_cov(whiten(z)), z standard normal of size noise_dim.
struct PriorModel {
    std::string label;
    Vector mean;
    LinearOp cov;
    LinearOp sqrt_cov;
    LinearOp precision;
    LinearOp whiten;           // empty: identity
    std::size_t noise_dim = 0;
    InnerProduct ip;
    Vector variances;          // filled when cov is diagonal in these coordinates

    std::size_t dim() const { return mean.size(); }
    bool diagonal() const { return !variances.empty(); }
};

PriorModel diagonal_prior(std::string label, Vector variances, Vector mean = {});

// Covariance (kappa + gamma lambda_n)^{-n_power} on the modal coordinates of
// `basis` (spectral sines or M-orthonormal FE modes).
PriorModel smoothness_prior(double kappa, double gamma, int n_power, const ModalBasis& basis);
// Nodal FE version: covariance (A^{-1} M)^{n_power}, A = kappa M + gamma K,
// self-adjoint in the M inner product.
PriorModel smoothness_prior(double kappa, double gamma, int n_power, const fem::Mesh& mesh);

// State prior at `times` for a diagonal parameter prior: block i has covariance
// e^{-t_i A} C_p e^{-t_i A} and mean e^{-t_i A} m0 + int_0^{t_i} e^{-(t_i - s)A} f ds
// with f constant in time (empty: zero).
PriorModel semigroup_state_prior(const PriorModel& cp, const ModalBasis& basis, const std::vector<double>& times,
                                 const Vector& forcing = {});

// diagonal_only: covariance diag(I per time node t_0..t_N, A^{1/2}) on
// [u(t_0), ..., u(t_N), theta].  Full variant: cov acts on bh::flatten(x) as the
// (non-symmetric in general) operator psi(C0); sqrt and precision throw.
PriorModel heuristic_bh_prior(const bh::BhOperator& op, bool diagonal_only);

// The factor C~ of psi(C0) = A~ C~ + R: x -> (u + (I - e^{-At}) theta, A^{-1/2}(u(T) + theta))
// on flattened block vectors.  ||C~ x||_{U0 x H0^1} = ||G x||.
LinearOp heuristic_factor(const bh::BhOperator& op);
// Remainder R x = (0, B u + (A^{-1/2} - A^{-1}) theta), B u = int_0^T u dt.
LinearOp heuristic_remainder(const bh::BhOperator& op);
// Norm on U0 x H0^1 for flattened block vectors.
double domain_norm(const bh::BhOperator& op, const Vector& x);

// Trivial IS prior C0 = G*G on [u, theta] with the U x L2 inner product.
PriorModel is_trivial_prior(const is::IsOperator& op);
// All-at-once IS map [u, theta] -> [A u - theta, u] into Euclidean R^{2d}.
LinearOp is_forward(const is::IsOperator& op);

std::vector<Vector> sample_prior(const PriorModel& p, std::uint64_t seed, std::size_t count);

// Norm of an operator image, ||T x|| in its target space.
using ImageNorm = std::function<double(const Vector&)>;

struct LinkCheckReport {
    std::size_t samples = 0;
    std::size_t skipped = 0;
    Vector ratios;                         // ||G x|| / ||psi x|| on random draws
    std::vector<std::size_t> probe_modes;
    Vector probe_ratios;
    double min_ratio = 0.0;
    double max_ratio = 0.0;
    bool diverges = false;                 // max(last 10 probes) > 10 max(first 10)
    bool lower_stable = false;             // min(last 10 probes) >= 0.5 min(first 10)
};

struct LinkProbe {
    std::size_t mode;
    Vector x;
};

LinkCheckReport check_link_condition(const ImageNorm& psi, const ImageNorm& g,
                                     const std::function<Vector(Rng&)>& sampler, std::size_t n_samples,
                                     const std::vector<LinkProbe>& probes, std::uint64_t seed);

// K indices spread logarithmically over [0, total), strictly increasing.
std::vector<std::size_t> log_spaced_modes(std::size_t total, std::size_t count);

// Named choices.  Flat vectors are [u, theta] in modal coefficients (IS) or
// bh::flatten (BH).  Probes put a unit theta coefficient on one mode.
struct LinkSetup {
    std::string name;
    ImageNorm psi;
    ImageNorm g;
    std::function<Vector(Rng&)> sampler;
    std::vector<LinkProbe> probes;
};

LinkSetup is_trivial_link(const is::IsOperator& op, std::size_t probe_count = 50);
LinkSetup is_inverse_link(const is::IsOperator& op, std::size_t probe_count = 50);
LinkSetup bh_smoothing_link(const bh::BhOperator& op, std::size_t probe_count = 50);

// ||R x|| / ||G x|| over random draws, reported as (min, mean, max).
std::array<double, 3> heuristic_remainder_stats(const bh::BhOperator& op, std::size_t samples, std::uint64_t seed);

}  // namespace aao::priors
