#pragma once

#include <memory>
#include <vector>

#include "aao/fem.hpp"
#include "aao/linalg.hpp"

namespace aao::laplacian {

// Dirichlet Laplacian eigenpairs on the unit square: lambda = pi^2 (j^2 + k^2),
// phi = 2 sin(j pi x) sin(k pi y), 1 <= j, k <= J.  Modes are ordered by
// ascending eigenvalue, ties broken lexicographically in (j, k).
class SpectralBasis {
public:
    explicit SpectralBasis(std::size_t modes_per_dim);

    std::size_t modes_per_dim() const { return j_; }
    std::size_t size() const { return modes_.size(); }
    double eigenvalue(std::size_t m) const { return eig_[m]; }
    const Vector& eigenvalues() const { return eig_; }
    std::pair<std::size_t, std::size_t> mode(std::size_t m) const { return modes_[m]; }
    double evaluate(std::size_t m, double x, double y) const;

private:
    std::size_t j_;
    std::vector<std::pair<std::size_t, std::size_t>> modes_;
    Vector eig_;
};

struct SpectralField {
    std::shared_ptr<const SpectralBasis> basis;
    Vector coefficients;

    double norm_l2() const;
    double norm_h1() const;
    double norm_hminus1() const;
};

SpectralField apply_power(const SpectralField& f, double s);
// Heat semigroup e^{-tA}; t < 0 is rejected.
SpectralField apply_semigroup(const SpectralField& f, double t);

// Evaluates the field at the interior nodes of the mesh.  The mesh must have
// at least J interior nodes per dimension, otherwise modes alias.
fem::NodalField synthesize(const SpectralField& f, const fem::Mesh& mesh);
// Discrete sine transform of interior nodal values onto the basis.
SpectralField analyze(const fem::NodalField& g, std::shared_ptr<const SpectralBasis> basis);

}  // namespace aao::laplacian
