#include "aao/aao_is.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace aao::is {

IsOperator::IsOperator(ModalBasis basis) : basis_(std::move(basis)) {}

namespace {
void check_size(const Vector& v, std::size_t n, const char* what) {
    if (v.size() != n) throw std::invalid_argument(std::string(what) + ": size mismatch");
}
}  // namespace

L2Pair IsOperator::apply_G(const IsBlockVector& x) const {
    const std::size_t n = size();
    check_size(x.u, n, "IsOperator::apply_G");
    check_size(x.theta, n, "IsOperator::apply_G");
    L2Pair y{Vector(n), x.u};
    for (std::size_t k = 0; k < n; ++k) y.first[k] = basis_.eigenvalue(k) * x.u[k] - x.theta[k];
    return y;
}

IsBlockVector IsOperator::apply_G_adjoint(const L2Pair& y) const {
    const std::size_t n = size();
    check_size(y.first, n, "IsOperator::apply_G_adjoint");
    check_size(y.second, n, "IsOperator::apply_G_adjoint");
    IsBlockVector x{Vector(n), Vector(n)};
    for (std::size_t k = 0; k < n; ++k) {
        const double g = basis_.eigenvalue(k);
        x.u[k] = y.first[k] / g + y.second[k] / (g * g);
        x.theta[k] = -y.first[k];
    }
    return x;
}

L2Pair IsOperator::transformed_GstarG(const L2Pair& x) const {
    const std::size_t n = size();
    check_size(x.first, n, "IsOperator::transformed_GstarG");
    check_size(x.second, n, "IsOperator::transformed_GstarG");
    L2Pair y{Vector(n), Vector(n)};
    for (std::size_t k = 0; k < n; ++k) {
        const double g = basis_.eigenvalue(k);
        y.first[k] = (1.0 + 1.0 / (g * g)) * x.first[k] - x.second[k];
        y.second[k] = x.second[k] - x.first[k];
    }
    return y;
}

double IsOperator::inner_domain(const IsBlockVector& a, const IsBlockVector& b) const {
    double s = 0.0;
    for (std::size_t k = 0; k < size(); ++k) {
        const double g = basis_.eigenvalue(k);
        s += g * g * a.u[k] * b.u[k] + a.theta[k] * b.theta[k];
    }
    return s;
}

double IsOperator::inner_range(const L2Pair& a, const L2Pair& b) const {
    return dot(a.first, b.first) + dot(a.second, b.second);
}

EigenvaluePair analytic_eigenvalue_pair(double mu) {
    if (!(mu > 0.0) || !std::isfinite(mu)) throw std::invalid_argument("analytic_eigenvalue_pair: mu must be positive");
    const double upper = 1.0 + 0.5 * mu + std::sqrt(1.0 + 0.25 * mu * mu);
    return {upper, mu / upper};
}

std::vector<SpectrumEntry> discrete_spectrum(const fem::Mesh& mesh, std::size_t count) {
    const DenseSymMatrix m = fem::assemble_mass(mesh);
    const DenseSymMatrix k = fem::assemble_stiffness(mesh);
    const std::size_t d = m.dim();
    if (count > 2 * d) throw std::invalid_argument("discrete_spectrum: count exceeds 2 x interior DOFs");

    const Cholesky mchol(m);
    Matrix minv_k(d, d);
    for (std::size_t j = 0; j < d; ++j) {
        const Vector c = mchol.solve(k.matrix().column(j));
        for (std::size_t i = 0; i < d; ++i) minv_k(i, j) = c[i];
    }
    const Matrix kmk = k.matrix() * minv_k;

    Matrix lhs(2 * d, 2 * d), rhs(2 * d, 2 * d);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) {
            lhs(i, j) = m(i, j);
            lhs(d + i, d + j) = m(i, j);
            const double b = kmk(i, j);
            rhs(i, j) = b;
            rhs(i, d + j) = b;
            rhs(d + i, j) = b;
            rhs(d + i, d + j) = b + m(i, j);
        }
    EigenDecomposition eig;
    try {
        eig = gen_sym_eig(DenseSymMatrix(std::move(lhs)), DenseSymMatrix(std::move(rhs), 1e-6));
    } catch (const NotPositiveDefinite& e) {
        throw NumericalError(std::string("discrete_spectrum: singular pencil (") + e.what() + ")");
    }

    // Closed-form partners from the (K, M) pencil.
    const Vector nu = gen_sym_eig(k, m).eigenvalues;
    struct Partner {
        double value;
        bool upper;
        double mu;
    };
    std::vector<Partner> partners;
    for (double v : nu) {
        const double mu = 1.0 / (v * v);
        const auto p = analytic_eigenvalue_pair(mu);
        partners.push_back({p.upper, true, mu});
        partners.push_back({p.lower, false, mu});
    }
    std::stable_sort(partners.begin(), partners.end(), [](const Partner& a, const Partner& b) { return a.value > b.value; });

    std::vector<SpectrumEntry> out;
    const std::size_t n = eig.eigenvalues.size();
    for (std::size_t r = 0; r < count; ++r) {
        const double value = eig.eigenvalues[n - 1 - r];
        out.push_back({value, partners[r].upper, partners[r].mu, partners[r].value});
    }
    return out;
}

}  // namespace aao::is
