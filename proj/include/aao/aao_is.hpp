#pragma once

#include <string>
#include <utility>
#include <vector>

#include "aao/fem.hpp"
#include "aao/modal.hpp"

// All-at-once inverse source problem  A u - theta = 0,  observation u,
// G = [[A, -I], [I, 0]] : U x L2 -> L2 x L2 with <u, v>_U = <Au, Av>_L2.
namespace aao::is {

// Modal coefficients of u and theta.
struct IsBlockVector {
    Vector u;
    Vector theta;
};

struct L2Pair {
    Vector first;
    Vector second;
};

class IsOperator {
public:
    explicit IsOperator(ModalBasis basis);

    const ModalBasis& basis() const { return basis_; }
    std::size_t size() const { return basis_.size(); }

    L2Pair apply_G(const IsBlockVector& x) const;
    IsBlockVector apply_G_adjoint(const L2Pair& y) const;
    // [[I + A^{-2}, -I], [-I, I]], symmetric in L2 x L2.
    L2Pair transformed_GstarG(const L2Pair& x) const;

    double inner_domain(const IsBlockVector& a, const IsBlockVector& b) const;
    double inner_range(const L2Pair& a, const L2Pair& b) const;

private:
    ModalBasis basis_;
};

struct EigenvaluePair {
    double upper;
    double lower;
};

// Roots of lambda^2 - lambda (2 + mu) + mu = 0, mu an eigenvalue of A^{-2}.
EigenvaluePair analytic_eigenvalue_pair(double mu);

struct SpectrumEntry {
    double value;
    bool upper_branch;
    double mu_hat;     // matching eigenvalue of A_h^{-2}
    double analytic;   // closed-form value for that mu_hat and branch
};

// Generalized eigenvalues of diag(M, M) x = lambda (G*G)^{-1}_h x with
// (G*G)^{-1}_h = [[K M^{-1} K, K M^{-1} K], [K M^{-1} K, K M^{-1} K + M]],
// largest `count` returned in descending order.
std::vector<SpectrumEntry> discrete_spectrum(const fem::Mesh& mesh, std::size_t count);

}  // namespace aao::is
