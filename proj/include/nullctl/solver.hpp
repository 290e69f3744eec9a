#pragma once

#include "nullctl/coefficients.hpp"
#include "nullctl/core.hpp"
#include "nullctl/grid.hpp"

namespace nullctl {

enum class FieldRole { State, Adjoint, Control, Source };

/// Scalar field on SpatialGrid x TimeGrid; column n is the slice at t_n.
/// State and adjoint fields satisfy the Navier conditions structurally: the
/// sine basis vanishes together with its Laplacian on the boundary.
struct SpaceTimeField {
    Mat values;
    FieldRole role = FieldRole::State;

    int nodes() const { return static_cast<int>(values.cols()); }
    Vec slice(int n) const { return values.col(n); }
    Vec terminal() const { return values.col(values.cols() - 1); }
};

enum class AdjointMode {
    Free,           ///< -z_t + lap^2 z
    Transposition,  ///< adds d_ij(D_ij z) + lap(a1 z)
    Full,           ///< adds a0 z - div(B0 z) as well
};

/// Output of a backward solve. The discrete adjoint is the exact transpose of
/// the forward time stepping, so it carries two views of the same solution:
///  - `state`: the backward-marched nodal adjoint, z(t_n)
///  - `paired`: the derivative of the pairing functional with respect to the
///    forward source at t_n, divided by the trapezoidal weight. Pairing this
///    field with a forward source reproduces the forward pairing exactly.
struct AdjointTrajectory {
    SpaceTimeField state{Mat{}, FieldRole::Adjoint};
    SpaceTimeField paired{Mat{}, FieldRole::Adjoint};
    Vec terminal;
    Mat source;
};

/// Exponential time-differencing weights per sine mode for step size dt:
/// decay = exp(-z), phi1 = (1 - exp(-z)) / z, lead = int_0^1 exp(-z u) u du,
/// trail = phi1 - lead, with z = dt mu_k.
struct EtdWeights {
    Vec decay;
    Vec phi1;
    Vec lead;
    Vec trail;

    static EtdWeights build(const Vec& mu, double dt);
};

/// Lower-order part B(t_n) y = a0 y + B0.grad y + D:hess y + a1 lap y. The
/// differentiated field is dealiased (2/3 rule) before the pointwise products.
Vec apply_lower_order(const SpatialGrid& grid, const CoefficientSet& c, int n, const Vec& y);
/// Exact transpose of apply_lower_order.
Vec apply_lower_order_transpose(const SpatialGrid& grid, const CoefficientSet& c, int n, const Vec& y);

/// Spatial part of the forward operator at time node n: lap^2 y + B(t_n) y.
Vec apply_forward_operator(const SpatialGrid& grid, const CoefficientSet& c, int n, const Vec& y);

/// Forward march of y_t + lap^2 y + B y = source from y(0) = y0. Stiff part
/// integrated exactly per mode, lower-order terms by second-order
/// Adams-Bashforth extrapolation, the source by linear interpolation in time.
/// Throws Instability when a slice norm exceeds 1e12.
SpaceTimeField solve_forward(const Grids& grids, const CoefficientSet& c, const Vec& y0, const Mat& source);

/// Same with source chi_omega v + g.
SpaceTimeField solve_forward(const Grids& grids, const CoefficientSet& c, const Vec& y0, const Mat& control,
                             const Mat& g);

/// Reverse sweep of the forward scheme for the functional sum_n <loads_n, y_n>.
AdjointTrajectory transpose_solve(const Grids& grids, const CoefficientSet& c, const Mat& loads);

/// Backward solve of the adjoint problem with terminal datum zT and source g
/// (empty g means zero).
AdjointTrajectory solve_adjoint(const Grids& grids, const CoefficientSet& c, AdjointMode mode, const Vec& zT,
                                const Mat& g = Mat{});

/// Backward solve discretized directly (not as a transpose): the problem is
/// reversed in time and marched like solve_forward, with the divergence-form
/// lower-order terms a0 z - div(B0 z) + d_ij(D_ij z) + lap(a1 z) restricted by
/// `mode`. Second-order accurate nodal trajectory, used by the audits.
SpaceTimeField solve_backward(const Grids& grids, const CoefficientSet& c, AdjointMode mode, const Vec& zT,
                              const Mat& g = Mat{});

/// L2(Q) pairing with trapezoidal time weights and Parseval sums in space.
double space_time_inner(const Grids& grids, const Mat& a, const Mat& b);
inline double space_time_norm(const Grids& grids, const Mat& a) { return std::sqrt(space_time_inner(grids, a, a)); }
/// Same restricted to the mask.
double masked_norm(const Grids& grids, const Mat& a, const Vec& mask);

struct DualityResidual {
    double absolute = 0.0;
    double relative = 0.0;
};

/// Discrete form of the transposition identity
///   (z, L w) = int (g w - (B w) z) + (z0, w(T)),   L = d/dt + lap^2,
/// for w solving the forward problem with `forcing` and w(0) = 0, and z from
/// solve_adjoint with the same coefficients (Full mode). With a0 = B0 = 0 this
/// is the weak-solution identity for the transposition operator.
DualityResidual duality_check(const Grids& grids, const CoefficientSet& c, const SpaceTimeField& w,
                              const Mat& forcing, const AdjointTrajectory& z);

}  // namespace nullctl
