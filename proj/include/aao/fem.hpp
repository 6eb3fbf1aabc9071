#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <vector>

#include "aao/linalg.hpp"

namespace aao::fem {

// Structured P1 triangulation of the unit square with n nodes per dimension.
// Node (i, j) sits at (i h, j h), h = 1/(n-1); every cell is split along the
// diagonal from (i, j) to (i+1, j+1).
class Mesh {
public:
    explicit Mesh(std::size_t nodes_per_dim);

    std::size_t nodes_per_dim() const { return n_; }
    double spacing() const { return h_; }
    std::size_t node_count() const { return n_ * n_; }
    std::size_t interior_per_dim() const { return n_ - 2; }
    std::size_t interior_count() const { return (n_ - 2) * (n_ - 2); }
    std::size_t triangle_count() const { return 2 * (n_ - 1) * (n_ - 1); }

    std::array<double, 2> node(std::size_t global) const;
    std::array<std::size_t, 3> triangle(std::size_t t) const;
    bool is_boundary(std::size_t global) const;
    // Interior index of a global node, or -1 on the boundary.
    long interior_index(std::size_t global) const;
    std::size_t global_index(std::size_t interior) const;
    std::array<double, 2> interior_node(std::size_t interior) const;

private:
    std::size_t n_;
    double h_;
};

// P1 nodal values on the interior nodes (Dirichlet data eliminated).
struct NodalField {
    Mesh mesh;
    Vector values;
};

NodalField interpolate(const Mesh& mesh, const std::function<double(double, double)>& f);

DenseSymMatrix assemble_mass(const Mesh& mesh);
DenseSymMatrix assemble_stiffness(const Mesh& mesh);
DenseSymMatrix assemble_mass_full(const Mesh& mesh);
DenseSymMatrix assemble_stiffness_full(const Mesh& mesh);

struct PointLocation {
    std::size_t triangle;
    std::array<std::size_t, 3> nodes;   // global node indices
    std::array<double, 3> weights;      // barycentric
};

PointLocation locate(const Mesh& mesh, double x, double y);

struct ObservationSet {
    std::vector<std::array<double, 2>> points;
    std::vector<PointLocation> locations;
    std::uint64_t seed = 0;
};

// Uniform i.i.d. points in [margin, 1 - margin]^2.
std::vector<std::array<double, 2>> random_points(std::size_t count, double margin, std::uint64_t seed);

// Rejects points on or outside the boundary, naming the point index.
ObservationSet make_observation_set(const Mesh& mesh, const std::vector<std::array<double, 2>>& points,
                                    std::uint64_t seed = 0);

// Matrix of the point-evaluation map, rows = points, columns = interior nodes.
Matrix observation_operator(const Mesh& mesh, const std::vector<std::array<double, 2>>& points);

Vector add_noise(const Vector& values, double delta, std::uint64_t seed);

NodalField restrict_to_coarse(const NodalField& fine, const Mesh& coarse);

// Evaluates a nodal field at an arbitrary point of the closed square.
double evaluate(const NodalField& f, double x, double y);

}  // namespace aao::fem
