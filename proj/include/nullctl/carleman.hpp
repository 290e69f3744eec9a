#pragma once

#include "nullctl/coefficients.hpp"
#include "nullctl/core.hpp"
#include "nullctl/grid.hpp"
#include "nullctl/solver.hpp"
#include "nullctl/weights.hpp"

#include <json.hpp>

#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

namespace nullctl {

/// Grids, coefficients (masks, D, a1) and eta shared by the audits.
struct AuditSetup {
    Grids grids;
    CoefficientSet coefficients;
    EtaField eta;
};

/// One weighted space-time integral, kept as a natural logarithm.
struct WeightedTerm {
    std::string name;
    double log_value = -std::numeric_limits<double>::infinity();
    double value() const { return std::exp(log_value); }
};

enum class CarlemanTarget { Lemma22, Theorem322 };
std::string to_string(CarlemanTarget target);

/// Both sides of a Carleman inequality evaluated on a computed solution.
/// Integrals run over the interior time nodes with the trapezoidal weight dt
/// and Parseval sums in space.
struct CarlemanReport {
    CarlemanTarget target = CarlemanTarget::Lemma22;
    double s = 0.0;
    double lambda = 0.0;
    std::vector<WeightedTerm> lhs;
    std::vector<WeightedTerm> rhs;
    double log_lhs = 0.0;  ///< log of the sum of the lhs terms
    double log_rhs = 0.0;
    double ratio = 0.0;  ///< exp(log_lhs - log_rhs)

    int dim = 1;
    std::array<int, 2> nodes{0, 0};
    int steps = 0;
    double T = 0.0;
    double delta_t = 0.0;
};

/// Weighted integral int s^ps lambda^pl xi^px exp(sign 2 s alpha) |f|^2 over the
/// interior time nodes; `f2` holds |f|^2 at all time nodes (size x nodes).
/// Empty mask means the whole domain.
double log_weighted_integral(const Grids& grids, const WeightBundle& w, double ps, double pl, double px, int sign,
                             const Mat& f2, const Vec& mask = Vec{});

/// Pointwise squared magnitudes of spatial derivatives of a trajectory.
struct DerivativeSquares {
    Mat value, grad, lap, hess, grad_lap, bilap, time;
};
DerivativeSquares derivative_squares(const Grids& grids, const Mat& z);

/// z solves -z_t + lap^2 z = g backward from z0. Throws DegenerateSolution
/// when |z|_{L2(Q)} < 1e-30.
CarlemanReport audit_lemma22(const AuditSetup& setup, const Vec& z0, const Mat& g, double s, double lambda);

/// z solves the transposition problem with D and a1 from the setup and
/// source g0 + sum_i d(g_i)/dx_i.
CarlemanReport audit_theorem322(const AuditSetup& setup, const Vec& z0, const SourceTerm& g, double s,
                                double lambda);

struct ConstantSweepRow {
    CarlemanReport report;
    bool flagged = false;  ///< ratio above 10x the sweep median
};

struct ConstantSweep {
    CarlemanTarget target = CarlemanTarget::Lemma22;
    std::vector<ConstantSweepRow> rows;  ///< sorted by (lambda, s)
    double median_ratio = 0.0;
    bool all_finite = false;
};

/// One audit per (s, lambda) pair; `g` is used as g0 for Theorem322 with `gi` as the rest.
ConstantSweep constant_sweep(const AuditSetup& setup, CarlemanTarget target, const Vec& z0, const SourceTerm& g,
                             const std::vector<double>& s_list, const std::vector<double>& lambda_list);

/// Columns: s, lambda, log_<term> for every lhs and rhs term, ratio, log_ratio, flag.
void write_constant_sweep_csv(std::ostream& os, const ConstantSweep& sweep);
/// Includes the measured C(lambda) = max ratio over s per lambda.
nlohmann::json constant_sweep_summary(const ConstantSweep& sweep);

/// s values s0 (sqrt(T) + T).
std::vector<double> default_s_values(double T, const std::vector<double>& s0 = {1, 2, 4, 8});

struct DualExtremalOptions {
    enum class Method { Iterative, Dense, Both };
    Method method = Method::Iterative;
    double tolerance = 1e-12;  ///< relative stationarity residual for CG
    int max_iterations = 0;    ///< 0 means four times the number of unknowns
    int dense_limit = 1500;    ///< largest unknown count for the dense solve and fallback
};

/// Solution of the weighted extremal problem
///   min (1/2) int |w|^2 e^{-2 s alpha} + (1/2) int_omega |u|^2 e^{-2 s alpha} / (s^7 lambda^8 xi^7)
///   subject to w_t + lap^2 w = s^6 lambda^8 xi^6 e^{2 s alpha} z + chi_omega u, w(0) = 0,
/// with the multiplier p of -p_t + lap^2 p = w e^{-2 s alpha}, p(T) = 0.
/// Computed in extended precision (MPFR) because the weights span e^{+-2 s |alpha|}.
struct DualExtremalResult {
    double s = 0.0;
    double lambda = 0.0;
    SpaceTimeField w{Mat{}, FieldRole::State};
    SpaceTimeField u{Mat{}, FieldRole::Control};
    SpaceTimeField p{Mat{}, FieldRole::Adjoint};
    double log_cost = -std::numeric_limits<double>::infinity();  ///< log J(w, u)

    std::vector<WeightedTerm> bound_lhs;  ///< grad, lap, hess, value of w and the u term
    WeightedTerm bound_rhs;               ///< int s^6 lambda^8 xi^6 |z|^2 e^{2 s alpha}
    double log_bound_lhs = -std::numeric_limits<double>::infinity();
    double quotient = 0.0;

    double stationarity_residual = 0.0;  ///< |u + s^7 lambda^8 xi^7 e^{2 s alpha} p| / |u|, weighted
    double terminal_ratio = 0.0;         ///< |w(T)| / max_n |w(t_n)|
    int iterations = 0;
    bool used_dense = false;
    double dense_agreement = std::numeric_limits<double>::quiet_NaN();  ///< relative, Method::Both only
    int digits = 0;
    int unknowns = 0;

    double cost() const { return std::exp(log_cost); }
};

DualExtremalResult solve_dual_extremal(const AuditSetup& setup, const SpaceTimeField& z, double s, double lambda,
                                       const DualExtremalOptions& options = {});

nlohmann::json dual_extremal_summary(const DualExtremalResult& r);

}  // namespace nullctl
