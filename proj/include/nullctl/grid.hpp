#pragma once

#include "nullctl/core.hpp"
#include "nullctl/domain.hpp"

#include <array>
#include <cmath>
#include <vector>

namespace nullctl {

/// Uniform partition of [0, T] into `steps` intervals; nodes t_n = n T / steps.
struct TimeGrid {
    double T = 1.0;
    int steps = 100;

    double dt() const { return T / steps; }
    double time(int n) const { return n * dt(); }
    int nodes() const { return steps + 1; }
    /// Trapezoidal quadrature weight of node n.
    double weight(int n) const { return (n == 0 || n == steps) ? 0.5 * dt() : dt(); }
};

/// Dense per-axis spectral operators for the sine basis sin(k pi x / L), k = 1..N,
/// sampled at the interior nodes x_j = j L / (N + 1).
struct AxisOperators {
    Mat sine;         ///< orthonormal DST-I matrix; symmetric and involutory
    Mat derivative;   ///< d/dx, sine series evaluated as a cosine series at the nodes
    Mat second;       ///< d^2/dx^2
    Mat dealias;      ///< projection onto modes k <= 2N/3
    Vec wavenumber;   ///< k pi / L
};

/// Tensor-product grid of interior nodes with sine-spectral metadata. Nodal
/// vectors are flattened with the first axis fastest. Boundary nodes are not
/// stored; every field vanishes there structurally.
class SpatialGrid {
public:
    SpatialGrid() : SpatialGrid(1, {16, 1}, {1.0, 1.0}) {}
    SpatialGrid(int dim, std::array<int, 2> nodes, std::array<double, 2> extent);

    static SpatialGrid line(int n, double length = 1.0) { return {1, {n, 1}, {length, 1.0}}; }

    int dim() const { return dim_; }
    int nodes(int axis) const { return n_[axis]; }
    double extent(int axis) const { return extent_[axis]; }
    Eigen::Index size() const { return size_; }
    double spacing(int axis) const { return extent_[axis] / (n_[axis] + 1); }
    /// Quadrature weight of a node; sums over nodes are exact Parseval sums.
    double cell_volume() const { return cell_; }

    double coordinate(int axis, int i) const { return (i + 1) * spacing(axis); }
    /// Coordinates as a dim x size matrix.
    Mat points() const;

    /// mu_k = (sum_i (k_i pi / L_i)^2)^2, flattened like nodal vectors.
    const Vec& biharmonic_eigenvalues() const { return mu_; }
    /// nu_k = -sum_i (k_i pi / L_i)^2.
    const Vec& laplacian_eigenvalues() const { return nu_; }
    const AxisOperators& axis(int a) const { return ops_[a]; }

    Vec to_modal(const Vec& nodal) const;
    Vec to_nodal(const Vec& modal) const { return to_modal(modal); }

    Vec derivative(int axis, const Vec& v) const;
    Vec derivative_transpose(int axis, const Vec& v) const;
    /// d^2 / dx_a dx_b.
    Vec second_derivative(int a, int b, const Vec& v) const;
    Vec second_derivative_transpose(int a, int b, const Vec& v) const;
    Vec laplacian(const Vec& v) const;
    Vec bilaplacian(const Vec& v) const;
    Vec grad_laplacian(int axis, const Vec& v) const { return derivative(axis, laplacian(v)); }
    Vec dealias(const Vec& v) const;

    double inner(const Vec& a, const Vec& b) const { return cell_ * a.dot(b); }
    double norm(const Vec& v) const { return std::sqrt(inner(v, v)); }

    /// Indicator of an open box at the nodes.
    Vec mask(const Box& box) const;

    bool same_as(const SpatialGrid& other) const {
        return dim_ == other.dim_ && n_ == other.n_ && extent_ == other.extent_;
    }

private:
    Vec apply_axis(const Mat& op, int axis, const Vec& v) const;

    int dim_;
    std::array<int, 2> n_;
    std::array<double, 2> extent_;
    Eigen::Index size_;
    double cell_;
    std::array<AxisOperators, 2> ops_;
    Vec mu_;
    Vec nu_;
};

/// Grid pair used by every space-time routine.
struct Grids {
    SpatialGrid space;
    TimeGrid time;
};

}  // namespace nullctl
