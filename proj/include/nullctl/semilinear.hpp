#pragma once

#include "nullctl/core.hpp"
#include "nullctl/grid.hpp"
#include "nullctl/hum.hpp"
#include "nullctl/solver.hpp"

#include <json.hpp>

#include <array>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

namespace nullctl {

/// Built-in nonlinearities F(u, p, r) with p the gradient slot and r the
/// Hessian slot (row-major, dim x dim).
///
///  - zero:       0
///  - linear:     c u
///  - sine:       a sin(b u)
///  - tanh:       a tanh(b u)
///  - composite:  a sin(b u) + c sum_i sin(p_i) + d sum_ij sin(r_ij)
struct NonlinearitySpec {
    enum class Kind { Zero, Linear, Sine, Tanh, Composite };

    Kind kind = Kind::Zero;
    double a = 0.0;
    double b = 0.0;
    double c = 0.0;
    double d = 0.0;

    static NonlinearitySpec zero() { return {}; }
    static NonlinearitySpec linear(double c);
    static NonlinearitySpec sine(double a, double b);
    static NonlinearitySpec tanh(double a, double b);
    static NonlinearitySpec composite(double a, double b, double c, double d);

    double value(double u, const double* p, const double* r, int dim) const;
    /// dF/du, dF/dp_i and dF/dr_ij at one argument.
    struct Partials {
        double du = 0.0;
        std::array<double, 2> dp{0, 0};
        std::array<double, 4> dr{0, 0, 0, 0};
    };
    Partials partials(double u, const double* p, const double* r, int dim) const;

    /// Global bound on |dF/du| + sum |dF/dp_i| + sum |dF/dr_ij|.
    double bound(int dim) const;
    /// F depends on u only.
    bool state_only() const { return kind != Kind::Composite; }

    bool operator==(const NonlinearitySpec&) const = default;
};

std::string to_string(NonlinearitySpec::Kind kind);
NonlinearitySpec::Kind nonlinearity_kind_from_string(const std::string& name);

/// Gauss-Legendre nodes and weights on [0, 1].
struct Quadrature {
    Vec nodes;
    Vec weights;
};
Quadrature gauss_legendre(int n);

/// G1 = int_0^1 dF/du(tau z, tau grad z, tau hess z) dtau and the analogous
/// G2 (one field per axis) and G3 (dim x dim fields, row-major), sampled at
/// every space-time node.
struct AveragedJacobians {
    Mat g1;
    std::vector<Mat> g2;
    std::vector<Mat> g3;
    double sup = 0.0;  ///< max over nodes of |G1| + sum |G2_i| + sum |G3_ij|
};

/// Throws UnresolvedIterate when z or its derivatives are not finite and
/// InvalidArgument when quad_nodes < 2.
AveragedJacobians averaged_jacobians(const Grids& grids, const SpaceTimeField& z, const NonlinearitySpec& F,
                                     int quad_nodes = 8);

/// Pointwise max |F(z, grad z, hess z) - F(0) - G1 z - G2.grad z - G3:hess z|,
/// relative to max |F(z, grad z, hess z) - F(0)|.
double mean_value_residual(const Grids& grids, const SpaceTimeField& z, const NonlinearitySpec& F,
                           const AveragedJacobians& G);

struct FixedPointOptions {
    double tolerance = 1e-8;  ///< on the iteration-norm distance
    int max_iterations = 50;
    int quad_nodes = 8;
    double damping = 1.0;  ///< theta; halved once after two consecutive distance increases

    bool operator==(const FixedPointOptions&) const = default;
};

struct FixedPointRow {
    int iter = 0;
    double distance = 0.0;
    double terminal_norm = 0.0;
    double control_norm = 0.0;
};

struct FixedPointTrace {
    std::vector<FixedPointRow> rows;
    bool converged = false;
    double damping = 1.0;           ///< final theta
    double iterate_cap = 0.0;       ///< max iteration norm of Lambda(z_k) seen
    double jacobian_sup = 0.0;      ///< max of AveragedJacobians::sup over the run
    double fixed_point_residual = 0.0;  ///< |Lambda(z) - z| for the last iterate z fed to Lambda
    double y0_l2 = 0.0;
    double y0_h2 = 0.0;
};

struct FixedPointResult {
    HumResult hum;
    FixedPointTrace trace;
    std::vector<Mat> iterates;  ///< z_1, z_2, ...
};

class FixedPointError : public Error {
public:
    FixedPointError(const std::string& what, FixedPointResult partial)
        : Error(ErrorKind::NoConvergence, what), partial_(std::make_shared<FixedPointResult>(std::move(partial))) {}
    const FixedPointResult& partial() const { return *partial_; }

private:
    std::shared_ptr<FixedPointResult> partial_;
};

/// Discrete L2(0,T; H2) norm: trapezoid in time of the modal sums
/// sum_k (1 + |nu_k|)^2 |z_k|^2 h.
double iteration_norm(const Grids& grids, const Mat& z);

/// Coefficients of the linearized problem: a0 - G1, B0 - G2, D - G3.
CoefficientSet linearized_coefficients(const CoefficientSet& base, const AveragedJacobians& G,
                                       const NonlinearitySpec& F);

/// Picard iteration z_{k+1} = (1 - theta) z_k + theta Lambda(z_k) from z_0 = 0,
/// where Lambda(z) is the penalized null control state of the problem
/// linearized at z with source g + F(0, 0, 0), started from y0. Stops when the
/// distance between consecutive iterates is at most the tolerance. Throws
/// FixedPointError after max_iterations.
FixedPointResult fixed_point_solve(const HumConfig& cfg, const Vec& y0, const Mat& g, const NonlinearitySpec& F,
                                   const FixedPointOptions& options = {});

/// Same pipeline for F = G(u): only G1 is formed and y0 is only required to
/// be finite. Throws InvalidArgument when G depends on the derivative slots.
FixedPointResult state_only_variant(const HumConfig& cfg, const Vec& y0, const Mat& g, const NonlinearitySpec& G,
                                    const FixedPointOptions& options = {});

/// Columns: iter, distance, terminal_norm, control_norm.
void write_trace_csv(std::ostream& os, const FixedPointTrace& trace);
nlohmann::json fixed_point_summary(const FixedPointResult& r);

}  // namespace nullctl
