#pragma once

#include <array>
#include <memory>
#include <optional>
#include <vector>

#include "aao/fem.hpp"
#include "aao/laplacian.hpp"
#include "aao/linalg.hpp"

namespace aao {

// L2-orthonormal eigen-coordinates of a (discrete) Dirichlet Laplacian.
// Spectral backend: the exact sine basis.  FE backend: M-orthonormal
// eigenvectors of the (K, M) pencil, so that A_h = M^{-1}K is diagonal and
// coefficient vectors carry the discrete L2 norm.
class ModalBasis {
public:
    enum class Kind { spectral, finite_element };

    static ModalBasis spectral(std::size_t modes_per_dim);
    static ModalBasis finite_element(const fem::Mesh& mesh);

    Kind kind() const { return kind_; }
    std::size_t size() const { return gamma_.size(); }
    const Vector& eigenvalues() const { return gamma_; }
    double eigenvalue(std::size_t n) const { return gamma_[n]; }

    // Rows are points, columns are modes.
    Matrix point_evaluation(const std::vector<std::array<double, 2>>& points) const;

    fem::NodalField to_nodal(const Vector& coeffs, const fem::Mesh& mesh) const;
    Vector from_nodal(const fem::NodalField& f) const;

    const std::shared_ptr<const laplacian::SpectralBasis>& spectral_basis() const { return sines_; }
    const std::optional<fem::Mesh>& mesh() const { return mesh_; }
    const Matrix& nodal_modes() const { return modes_; }
    const DenseSymMatrix& mass() const { return mass_; }

private:
    Kind kind_ = Kind::spectral;
    Vector gamma_;
    std::shared_ptr<const laplacian::SpectralBasis> sines_;
    std::optional<fem::Mesh> mesh_;
    Matrix modes_;
    DenseSymMatrix mass_;
};

}  // namespace aao
