#include "aao/modal.hpp"

#include <stdexcept>

namespace aao {

ModalBasis ModalBasis::spectral(std::size_t modes_per_dim) {
    ModalBasis b;
    b.kind_ = Kind::spectral;
    b.sines_ = std::make_shared<laplacian::SpectralBasis>(modes_per_dim);
    b.gamma_ = b.sines_->eigenvalues();
    return b;
}

ModalBasis ModalBasis::finite_element(const fem::Mesh& mesh) {
    ModalBasis b;
    b.kind_ = Kind::finite_element;
    b.mesh_ = mesh;
    b.mass_ = fem::assemble_mass(mesh);
    const DenseSymMatrix k = fem::assemble_stiffness(mesh);
    EigenDecomposition eig = gen_sym_eig(k, b.mass_);
    b.gamma_ = std::move(eig.eigenvalues);
    b.modes_ = std::move(eig.eigenvectors);
    return b;
}

Matrix ModalBasis::point_evaluation(const std::vector<std::array<double, 2>>& points) const {
    if (kind_ == Kind::spectral) {
        Matrix o(points.size(), size());
        for (std::size_t p = 0; p < points.size(); ++p) {
            const double x = points[p][0], y = points[p][1];
            if (!(x > 0.0 && x < 1.0 && y > 0.0 && y < 1.0))
                throw std::invalid_argument("observation point " + std::to_string(p) + " is not strictly inside the domain");
            for (std::size_t n = 0; n < size(); ++n) o(p, n) = sines_->evaluate(n, x, y);
        }
        return o;
    }
    return fem::observation_operator(*mesh_, points) * modes_;
}

fem::NodalField ModalBasis::to_nodal(const Vector& coeffs, const fem::Mesh& mesh) const {
    if (coeffs.size() != size()) throw std::invalid_argument("ModalBasis::to_nodal: size mismatch");
    if (kind_ == Kind::spectral) return laplacian::synthesize({sines_, coeffs}, mesh);
    if (mesh.nodes_per_dim() != mesh_->nodes_per_dim())
        throw std::invalid_argument("ModalBasis::to_nodal: mesh differs from the basis mesh");
    return {mesh, modes_.apply(coeffs)};
}

Vector ModalBasis::from_nodal(const fem::NodalField& f) const {
    if (kind_ == Kind::spectral) return laplacian::analyze(f, sines_).coefficients;
    if (f.mesh.nodes_per_dim() != mesh_->nodes_per_dim())
        throw std::invalid_argument("ModalBasis::from_nodal: mesh differs from the basis mesh");
    return modes_.apply_transpose(mass_.apply(f.values));
}

}  // namespace aao
