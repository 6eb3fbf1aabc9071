#include "aao/laplacian.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace aao::laplacian {

SpectralBasis::SpectralBasis(std::size_t J) : j_(J) {
    if (J == 0) throw std::invalid_argument("SpectralBasis: J must be positive");
    for (std::size_t j = 1; j <= J; ++j)
        for (std::size_t k = 1; k <= J; ++k) modes_.emplace_back(j, k);
    std::stable_sort(modes_.begin(), modes_.end(), [](const auto& a, const auto& b) {
        return a.first * a.first + a.second * a.second < b.first * b.first + b.second * b.second;
    });
    for (const auto& [j, k] : modes_) eig_.push_back(M_PI * M_PI * static_cast<double>(j * j + k * k));
}

double SpectralBasis::evaluate(std::size_t m, double x, double y) const {
    const auto [j, k] = modes_[m];
    return 2.0 * std::sin(static_cast<double>(j) * M_PI * x) * std::sin(static_cast<double>(k) * M_PI * y);
}

double SpectralField::norm_l2() const { return norm2(coefficients); }

double SpectralField::norm_h1() const {
    double s = 0.0;
    for (std::size_t m = 0; m < coefficients.size(); ++m) s += basis->eigenvalue(m) * coefficients[m] * coefficients[m];
    return std::sqrt(s);
}

double SpectralField::norm_hminus1() const {
    double s = 0.0;
    for (std::size_t m = 0; m < coefficients.size(); ++m) s += coefficients[m] * coefficients[m] / basis->eigenvalue(m);
    return std::sqrt(s);
}

namespace {
void check(const SpectralField& f) {
    if (!f.basis || f.coefficients.size() != f.basis->size())
        throw std::invalid_argument("SpectralField: coefficient count does not match basis");
    for (double c : f.coefficients)
        if (!std::isfinite(c)) throw std::invalid_argument("SpectralField: non-finite coefficient");
}
}  // namespace

SpectralField apply_power(const SpectralField& f, double s) {
    check(f);
    SpectralField out = f;
    for (std::size_t m = 0; m < out.coefficients.size(); ++m) out.coefficients[m] *= std::pow(f.basis->eigenvalue(m), s);
    return out;
}

SpectralField apply_semigroup(const SpectralField& f, double t) {
    check(f);
    if (t < 0.0) throw std::invalid_argument("apply_semigroup: negative time is not supported");
    SpectralField out = f;
    for (std::size_t m = 0; m < out.coefficients.size(); ++m) out.coefficients[m] *= std::exp(-f.basis->eigenvalue(m) * t);
    return out;
}

namespace {
// sin(j pi i / (m+1)) for i = 1..m, j = 1..J.
Matrix sine_table(std::size_t J, std::size_t m) {
    Matrix s(J + 1, m);
    for (std::size_t j = 1; j <= J; ++j)
        for (std::size_t i = 0; i < m; ++i)
            s(j, i) = std::sin(static_cast<double>(j) * M_PI * static_cast<double>(i + 1) / static_cast<double>(m + 1));
    return s;
}

void check_alias(std::size_t J, std::size_t m) {
    if (m < J)
        throw std::invalid_argument("spectral/nodal transform: " + std::to_string(m) +
                                    " interior nodes per dimension alias " + std::to_string(J) + " modes");
}
}  // namespace

fem::NodalField synthesize(const SpectralField& f, const fem::Mesh& mesh) {
    check(f);
    const std::size_t m = mesh.interior_per_dim();
    const std::size_t J = f.basis->modes_per_dim();
    check_alias(J, m);
    const Matrix s = sine_table(J, m);
    fem::NodalField out{mesh, Vector(m * m, 0.0)};
    for (std::size_t q = 0; q < f.basis->size(); ++q) {
        const double c = f.coefficients[q];
        if (c == 0.0) continue;
        const auto [j, k] = f.basis->mode(q);
        for (std::size_t b = 0; b < m; ++b) {
            const double cy = 2.0 * c * s(k, b);
            double* row = out.values.data() + b * m;
            for (std::size_t a = 0; a < m; ++a) row[a] += cy * s(j, a);
        }
    }
    return out;
}

SpectralField analyze(const fem::NodalField& g, std::shared_ptr<const SpectralBasis> basis) {
    const std::size_t m = g.mesh.interior_per_dim();
    const std::size_t J = basis->modes_per_dim();
    check_alias(J, m);
    const Matrix s = sine_table(J, m);
    const double scale = 2.0 / static_cast<double>((m + 1) * (m + 1));
    SpectralField out{basis, Vector(basis->size(), 0.0)};
    for (std::size_t q = 0; q < basis->size(); ++q) {
        const auto [j, k] = basis->mode(q);
        double sum = 0.0;
        for (std::size_t b = 0; b < m; ++b) {
            const double* row = g.values.data() + b * m;
            double inner = 0.0;
            for (std::size_t a = 0; a < m; ++a) inner += row[a] * s(j, a);
            sum += inner * s(k, b);
        }
        out.coefficients[q] = scale * sum;
    }
    return out;
}

}  // namespace aao::laplacian
