#pragma once

#include <array>
#include <map>
#include <utility>
#include <vector>

#include "aao/fem.hpp"
#include "aao/modal.hpp"

// All-at-once backwards heat problem with shifted state u(0) = 0:
//   (d_t + A) u + I A theta = f,   observation u(T) + theta,
// G = [[d_t + A, I A], [delta_T, I]] : U0 x H0^1 -> L2(H^-1) x L2.
namespace aao::bh {

// Uniform grid t_k = k tau with dG(0) cells [t_k - tau/2, t_k + tau/2)
// clipped to [0, T] (half cells at both ends).
class TimeGrid {
public:
    TimeGrid(double T, int N);

    double final_time() const { return t_; }
    int steps() const { return n_; }
    double tau() const { return t_ / n_; }
    double node(int k) const { return k * tau(); }
    double cell_begin(int k) const;
    double cell_end(int k) const;
    double cell_length(int k) const { return cell_end(k) - cell_begin(k); }
    // Quadrature weights tau (1/2, 1, ..., 1, 1/2).
    double weight(int k) const { return cell_length(k); }

private:
    double t_;
    int n_;
};

// Time functions of one spatial mode, spanned by the N+1 cell indicators and
// e^{-gamma (T - t)}.  All inner products are closed form.
class ModeTime {
public:
    ModeTime(double gamma, const TimeGrid& grid);

    std::size_t dim() const { return len_.size() + 1; }
    double gamma() const { return gamma_; }
    double inner(const double* a, const double* b) const;        // L2(0, T)
    double integral(const double* a) const;                     // <1, a>
    double against_tail(const double* a) const;                 // <e^{-gamma(T-.)}, a>
    double tail_norm_sq() const { return q_; }
    double cell_tail_integral(int k) const { return e_[k]; }
    // u(t) for the state with generator (d_t + gamma) u = a, u(0) = 0.
    double state_value(const double* a, double t) const;
    // int_0^T u(t) dt for the same state.
    double state_integral(const double* a) const;
    // int_0^T u(t)^2 dt by graded Gauss-Legendre quadrature.
    double state_l2_sq(const double* a) const;
    Matrix gram() const;

private:
    double gamma_;
    TimeGrid grid_;
    std::vector<double> len_, e_;
    double q_;
};

// Per spatial mode n, coefficients [c_0 .. c_N, tail] of a function in the
// space above.  Used for L2(L2) and L2(H^-1) data and, as generator
// (d_t + A) u, for states in U0.
struct SpaceTimeField {
    std::size_t modes = 0;
    int steps = 0;
    Vector data;

    SpaceTimeField() = default;
    SpaceTimeField(std::size_t modes, int steps);
    std::size_t stride() const { return static_cast<std::size_t>(steps) + 2; }
    double* mode(std::size_t n) { return data.data() + n * stride(); }
    const double* mode(std::size_t n) const { return data.data() + n * stride(); }
    double& cell(std::size_t n, int k) { return mode(n)[k]; }
    double cell(std::size_t n, int k) const { return mode(n)[k]; }
    double& tail(std::size_t n) { return mode(n)[steps + 1]; }
    double tail(std::size_t n) const { return mode(n)[steps + 1]; }
};

// u is stored by its generator (d_t + A) u; see BhOperator::state_at.
struct BhBlockVector {
    SpaceTimeField u;
    Vector theta;
};

struct BhRange {
    SpaceTimeField first;  // L2(H^-1)
    Vector second;         // L2
};

class BhOperator {
public:
    BhOperator(ModalBasis basis, TimeGrid grid);

    const ModalBasis& basis() const { return basis_; }
    const TimeGrid& grid() const { return grid_; }
    std::size_t size() const { return basis_.size(); }
    const ModeTime& mode_time(std::size_t n) const { return modes_[n]; }
    SpaceTimeField zero_field() const { return SpaceTimeField(size(), grid_.steps()); }

    // u = int_0^t e^{-(t-s)A} f(s) ds.  With the generator representation
    // this is the identity on coefficients.
    SpaceTimeField solve_forward(const SpaceTimeField& f) const;
    Vector state_at(const SpaceTimeField& u, double t) const;
    std::vector<Vector> state_slices(const SpaceTimeField& u) const;  // t_0 .. t_N
    Vector state_final(const SpaceTimeField& u) const;
    Vector state_time_integral(const SpaceTimeField& u) const;
    // sum_n w_n int_0^T u_n(t)^2 dt (w = 1 when empty).
    double state_l2l2_sq(const SpaceTimeField& u, const Vector& weights = {}) const;

    BhRange apply_G(const BhBlockVector& x) const;
    BhBlockVector apply_G_adjoint(const BhRange& y) const;
    std::pair<SpaceTimeField, Vector> transformed_GstarG(const SpaceTimeField& f, const Vector& g) const;
    // f -> int_0^T e^{-A(T-s)} f(s) ds
    Vector history_to_final(const SpaceTimeField& f) const;
    // f -> e^{-A(T-.)} A^{1/2} int_0^T e^{-A(T-s)} A^{1/2} f(s) ds
    SpaceTimeField d_block(const SpaceTimeField& f) const;

    SpaceTimeField constant_in_time(const Vector& v) const;
    SpaceTimeField tail_field(const Vector& v) const;
    Vector integral_of(const SpaceTimeField& f) const;   // <1, f_n>
    Vector against_tail(const SpaceTimeField& f) const;  // <e^{-gamma_n(T-.)}, f_n>

    double inner_l2l2(const SpaceTimeField& a, const SpaceTimeField& b) const;
    double inner_u0(const SpaceTimeField& a, const SpaceTimeField& b) const;  // on generators
    double inner_wprime(const SpaceTimeField& a, const SpaceTimeField& b) const { return inner_u0(a, b); }
    double inner_h1(const Vector& a, const Vector& b) const;
    double inner_domain(const BhBlockVector& a, const BhBlockVector& b) const;
    double inner_range(const BhRange& a, const BhRange& b) const;

private:
    ModalBasis basis_;
    TimeGrid grid_;
    std::vector<ModeTime> modes_;
};

// [u.data, theta] and back; used wherever a flat coefficient vector is needed.
Vector flatten(const BhBlockVector& x);
BhBlockVector unflatten(const BhOperator& op, const Vector& v);
// Block-diagonal U0 Gram on flattened generators.
InnerProduct u0_inner_product(const BhOperator& op);

// Coefficients of the per-mode cubic
//   lambda^3 - lambda^2 (T + 5/2 + alpha) + lambda (3/2 (T + 1) + beta) = rhs.
struct BhCubicCoefficients {
    double mu;
    double T;
    double alpha;
    double beta;
    double rhs;
    double log_rhs;

    static BhCubicCoefficients make(double mu, double T);
};

struct CubicRoots {
    std::array<double, 3> roots;  // ascending; roots[0] = NaN for a complex pair
    bool complex_pair = false;
    double log_smallest = 0.0;    // log of roots[0], accurate when roots[0] underflows
};

CubicRoots analytic_cubic_roots(const BhCubicCoefficients& c);

// A_h = M^{-1/2} K M^{-1/2} on the interior nodes.
DenseSymMatrix symmetric_laplacian(const fem::Mesh& mesh);

// Transformed, time-discretized eigensystem of dimension (N+1) d + d.
DenseSymMatrix assemble_discrete_eigensystem(const DenseSymMatrix& a_h, int N, double T);
DenseSymMatrix assemble_discrete_eigensystem(const fem::Mesh& mesh, int N, double T);

// Largest `count` eigenvalues of the assembled system, descending.
Vector discrete_spectrum_bh(const fem::Mesh& mesh, int N, double T, std::size_t count);

struct Cluster {
    double target;
    std::size_t members;
    double center;
    double max_distance;
};

std::vector<Cluster> cluster_summary(const Vector& eigenvalues, const std::vector<double>& targets, double radius);

}  // namespace aao::bh
