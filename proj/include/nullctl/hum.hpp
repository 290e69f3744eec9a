#pragma once

#include "nullctl/coefficients.hpp"
#include "nullctl/core.hpp"
#include "nullctl/grid.hpp"
#include "nullctl/solver.hpp"
#include "nullctl/weights.hpp"

#include <json.hpp>

#include <iosfwd>
#include <memory>
#include <optional>
#include <vector>

namespace nullctl {

/// Carleman weight parameters used for the weighted source norm in reports.
struct WeightParams {
    EtaField eta;
    double s = 1.0;
    double lambda = 1.0;
};

struct HumConfig {
    double epsilon = 1e-4;
    double tolerance = 1e-8;  ///< relative residual of the normal equation
    int max_iterations = 500;
    /// Diagonal modal preconditioner eps + |omega|/|O| (1 - exp(-2 mu T)) / (2 mu).
    bool precondition = false;
    Grids grids;
    CoefficientSet coefficients;
    std::optional<WeightParams> weights;

    /// Throws InvalidArgument.
    void validate() const;
};

/// Penalized control problem
///   min (1/2eps) |y(T)|^2 + (1/2) |v|^2_{L2(Q_omega)}
/// solved through the terminal datum zT = y(T) / eps of the adjoint.
struct HumResult {
    SpaceTimeField v{Mat{}, FieldRole::Control};
    SpaceTimeField y{Mat{}, FieldRole::State};
    SpaceTimeField p{Mat{}, FieldRole::Adjoint};  ///< paired view; v = -chi_omega p
    Vec zT;
    Vec y_free_T;

    double epsilon = 0.0;
    double terminal_norm = 0.0;
    double control_norm = 0.0;
    double cost = 0.0;
    int cg_iterations = 0;
    std::vector<double> residual_history;  ///< relative, one entry per iteration plus the initial one
    /// log |xi~^-3 exp(-s alpha~) g|_{L2(Q)}; -inf for g = 0 or when no weights are configured.
    double log_weighted_source_norm = -std::numeric_limits<double>::infinity();
    /// |(Lambda + eps) zT - y_free(T)| / |y_free(T)|, measured on the final trajectory.
    double optimality_residual = 0.0;
    bool converged = false;
};

/// Thrown by hum_solve when CG exhausts its iterations; carries the best iterate.
class CgStagnationError : public Error {
public:
    CgStagnationError(const std::string& what, HumResult best)
        : Error(ErrorKind::CgStagnation, what), best_(std::make_shared<HumResult>(std::move(best))) {}
    const HumResult& best() const { return *best_; }

private:
    std::shared_ptr<HumResult> best_;
};

/// Uncontrolled trajectory from y0 with source g (empty g means zero).
SpaceTimeField free_trajectory(const Grids& grids, const CoefficientSet& c, const Vec& y0, const Mat& g = Mat{});

/// Lambda zT = w(T): p from the full adjoint backward from zT, w forward from
/// zero with source chi_omega p.
Vec gramian_apply(const Grids& grids, const CoefficientSet& c, const Vec& zT);
/// Dense Lambda, column j = Lambda e_j.
Mat assemble_gramian(const Grids& grids, const CoefficientSet& c);

/// Assembles the result for a given terminal datum (no solve).
HumResult hum_evaluate(const HumConfig& cfg, const Vec& y0, const Mat& g, const Vec& zT);
/// CG on (Lambda + eps) zT = y_free(T). Throws CgStagnationError.
HumResult hum_solve(const HumConfig& cfg, const Vec& y0, const Mat& g = Mat{});
/// Same normal equation solved densely (Cholesky of the assembled Gramian).
HumResult hum_solve_dense(const HumConfig& cfg, const Vec& y0, const Mat& g = Mat{});

/// log |xi~^-3 exp(-s alpha~) g| over the interior time nodes.
double log_weighted_source_norm(const Grids& grids, const WeightParams& w, const Mat& g);

struct SweepRow {
    double epsilon = 0.0;
    double terminal_norm = 0.0;
    double control_norm = 0.0;
    double cost = 0.0;
    int cg_iters = 0;
    double bound_quotient = 0.0;
};

struct SweepReport {
    std::vector<SweepRow> rows;
    double fitted_exponent = 0.0;  ///< least-squares slope of log |y(T)| against log eps
    double control_ratio = 1.0;    ///< max / min |v| over the last three eps
    double sqrt_law_constant = 0.0;
    bool control_bounded = false;
    bool sqrt_law_ok = false;
    bool terminal_monotone = false;
    bool cost_monotone = false;
    double quotient_variation = 1.0;  ///< max / min bound quotient
    double y0_l2 = 0.0;
    double y0_h2 = 0.0;
    double log_weighted_source_norm = 0.0;
};

class SweepDivergenceError : public Error {
public:
    SweepDivergenceError(const std::string& what, SweepReport report)
        : Error(ErrorKind::SweepDivergence, what), report_(std::make_shared<SweepReport>(std::move(report))) {}
    const SweepReport& report() const { return *report_; }

private:
    std::shared_ptr<SweepReport> report_;
};

/// One hum_solve per eps (decreasing, at least 4 values over at least 3 decades).
/// Throws SweepDivergenceError when the control norm is not bounded.
SweepReport epsilon_sweep(const HumConfig& base, const Vec& y0, const Mat& g, const std::vector<double>& eps);

/// Columns: epsilon, terminal_norm, control_norm, cost, cg_iters, bound_quotient.
void write_sweep_csv(std::ostream& os, const SweepReport& report);
nlohmann::json sweep_summary(const SweepReport& report);

/// Discrete H2-type norm sqrt(sum_k (1 + |nu_k|)^2 |y_k|^2 h).
double h2_norm(const SpatialGrid& grid, const Vec& y);

}  // namespace nullctl
