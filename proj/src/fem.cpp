#include "aao/fem.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "aao/rng.hpp"

namespace aao::fem {

Mesh::Mesh(std::size_t nodes_per_dim) : n_(nodes_per_dim) {
    if (n_ < 3) throw std::invalid_argument("Mesh: need at least 3 nodes per dimension");
    h_ = 1.0 / static_cast<double>(n_ - 1);
}

std::array<double, 2> Mesh::node(std::size_t g) const {
    return {static_cast<double>(g % n_) * h_, static_cast<double>(g / n_) * h_};
}

std::array<std::size_t, 3> Mesh::triangle(std::size_t t) const {
    const std::size_t cell = t / 2;
    const std::size_t i = cell % (n_ - 1), j = cell / (n_ - 1);
    const std::size_t a = j * n_ + i, b = j * n_ + i + 1, c = (j + 1) * n_ + i + 1, d = (j + 1) * n_ + i;
    if (t % 2 == 0) return {a, b, c};
    return {a, c, d};
}

bool Mesh::is_boundary(std::size_t g) const {
    const std::size_t i = g % n_, j = g / n_;
    return i == 0 || j == 0 || i == n_ - 1 || j == n_ - 1;
}

long Mesh::interior_index(std::size_t g) const {
    if (is_boundary(g)) return -1;
    const std::size_t i = g % n_, j = g / n_;
    return static_cast<long>((j - 1) * (n_ - 2) + (i - 1));
}

std::size_t Mesh::global_index(std::size_t k) const {
    const std::size_t m = n_ - 2;
    return (k / m + 1) * n_ + (k % m + 1);
}

std::array<double, 2> Mesh::interior_node(std::size_t k) const { return node(global_index(k)); }

NodalField interpolate(const Mesh& mesh, const std::function<double(double, double)>& f) {
    NodalField out{mesh, Vector(mesh.interior_count())};
    for (std::size_t k = 0; k < out.values.size(); ++k) {
        const auto p = mesh.interior_node(k);
        out.values[k] = f(p[0], p[1]);
    }
    return out;
}

namespace {

struct ElementMatrices {
    double mass[3][3];
    double stiff[3][3];
};

ElementMatrices element(const Mesh& mesh, std::size_t t) {
    const auto tri = mesh.triangle(t);
    std::array<std::array<double, 2>, 3> p;
    for (int a = 0; a < 3; ++a) p[a] = mesh.node(tri[a]);
    const double det = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
    if (!(det > 0.0)) throw std::runtime_error("degenerate or inverted triangle " + std::to_string(t));
    const double area = 0.5 * det;
    // Gradients of the barycentric coordinates.
    double gx[3], gy[3];
    for (int a = 0; a < 3; ++a) {
        const auto& q1 = p[(a + 1) % 3];
        const auto& q2 = p[(a + 2) % 3];
        gx[a] = (q1[1] - q2[1]) / det;
        gy[a] = (q2[0] - q1[0]) / det;
    }
    ElementMatrices e{};
    for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) {
            e.mass[a][b] = area / 12.0 * (a == b ? 2.0 : 1.0);
            e.stiff[a][b] = area * (gx[a] * gx[b] + gy[a] * gy[b]);
        }
    return e;
}

DenseSymMatrix assemble(const Mesh& mesh, bool stiffness, bool full) {
    const std::size_t dim = full ? mesh.node_count() : mesh.interior_count();
    Matrix m(dim, dim);
    for (std::size_t t = 0; t < mesh.triangle_count(); ++t) {
        const auto e = element(mesh, t);
        const auto tri = mesh.triangle(t);
        for (int a = 0; a < 3; ++a) {
            const long ia = full ? static_cast<long>(tri[a]) : mesh.interior_index(tri[a]);
            if (ia < 0) continue;
            for (int b = 0; b < 3; ++b) {
                const long ib = full ? static_cast<long>(tri[b]) : mesh.interior_index(tri[b]);
                if (ib < 0) continue;
                m(ia, ib) += stiffness ? e.stiff[a][b] : e.mass[a][b];
            }
        }
    }
    return DenseSymMatrix(std::move(m));
}

}  // namespace

DenseSymMatrix assemble_mass(const Mesh& mesh) { return assemble(mesh, false, false); }
DenseSymMatrix assemble_stiffness(const Mesh& mesh) { return assemble(mesh, true, false); }
DenseSymMatrix assemble_mass_full(const Mesh& mesh) { return assemble(mesh, false, true); }
DenseSymMatrix assemble_stiffness_full(const Mesh& mesh) { return assemble(mesh, true, true); }

PointLocation locate(const Mesh& mesh, double x, double y) {
    if (!(x >= 0.0 && x <= 1.0 && y >= 0.0 && y <= 1.0)) throw std::out_of_range("point outside the unit square");
    const std::size_t n = mesh.nodes_per_dim();
    const double h = mesh.spacing();
    const std::size_t i = std::min(static_cast<std::size_t>(std::floor(x / h)), n - 2);
    const std::size_t j = std::min(static_cast<std::size_t>(std::floor(y / h)), n - 2);
    const double xi = x / h - static_cast<double>(i), eta = y / h - static_cast<double>(j);
    const std::size_t cell = j * (n - 1) + i;
    const std::size_t a = j * n + i, b = j * n + i + 1, c = (j + 1) * n + i + 1, d = (j + 1) * n + i;
    if (xi >= eta) return {2 * cell, {a, b, c}, {1.0 - xi, xi - eta, eta}};
    return {2 * cell + 1, {a, c, d}, {1.0 - eta, xi, eta - xi}};
}

std::vector<std::array<double, 2>> random_points(std::size_t count, double margin, std::uint64_t seed) {
    if (!(margin >= 0.0 && margin < 0.5)) throw std::invalid_argument("random_points: margin must lie in [0, 0.5)");
    Rng rng(seed);
    std::vector<std::array<double, 2>> pts(count);
    for (auto& p : pts) {
        p[0] = rng.uniform(margin, 1.0 - margin);
        p[1] = rng.uniform(margin, 1.0 - margin);
    }
    return pts;
}

ObservationSet make_observation_set(const Mesh& mesh, const std::vector<std::array<double, 2>>& points,
                                    std::uint64_t seed) {
    ObservationSet set;
    set.seed = seed;
    for (std::size_t k = 0; k < points.size(); ++k) {
        const double x = points[k][0], y = points[k][1];
        if (!(x > 0.0 && x < 1.0 && y > 0.0 && y < 1.0))
            throw std::invalid_argument("observation point " + std::to_string(k) + " is not strictly inside the domain");
        set.points.push_back(points[k]);
        set.locations.push_back(locate(mesh, x, y));
    }
    return set;
}

Matrix observation_operator(const Mesh& mesh, const std::vector<std::array<double, 2>>& points) {
    const ObservationSet set = make_observation_set(mesh, points);
    Matrix o(points.size(), mesh.interior_count());
    for (std::size_t k = 0; k < points.size(); ++k) {
        const auto& loc = set.locations[k];
        for (int a = 0; a < 3; ++a) {
            const long col = mesh.interior_index(loc.nodes[a]);
            if (col >= 0) o(k, col) += loc.weights[a];
        }
    }
    return o;
}

Vector add_noise(const Vector& values, double delta, std::uint64_t seed) {
    if (delta < 0.0) throw std::invalid_argument("add_noise: delta must be nonnegative");
    Rng rng(seed);
    Vector out = values;
    for (double& v : out) v += delta * rng.normal();
    return out;
}

double evaluate(const NodalField& f, double x, double y) {
    const auto loc = locate(f.mesh, x, y);
    double s = 0.0;
    for (int a = 0; a < 3; ++a) {
        const long k = f.mesh.interior_index(loc.nodes[a]);
        if (k >= 0) s += loc.weights[a] * f.values[k];
    }
    return s;
}

NodalField restrict_to_coarse(const NodalField& fine, const Mesh& coarse) {
    NodalField out{coarse, Vector(coarse.interior_count())};
    for (std::size_t k = 0; k < out.values.size(); ++k) {
        const auto p = coarse.interior_node(k);
        out.values[k] = evaluate(fine, p[0], p[1]);
    }
    return out;
}

}  // namespace aao::fem
