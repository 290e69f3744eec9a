#pragma once

#include "nullctl/core.hpp"
#include "nullctl/domain.hpp"
#include "nullctl/grid.hpp"

#include <json.hpp>

#include <iosfwd>

namespace nullctl {

/// The auxiliary function eta(x) = prod_i x_i (L_i - x_i): positive inside,
/// zero on the boundary, with its only interior critical point at the center.
struct EtaField {
    DomainSpec domain;
    double sup_norm = 0.0;  ///< prod_i L_i^2 / 4

    double value(const double* x) const;
    /// Writes dim entries.
    void gradient(const double* x, double* out) const;
    /// Writes dim x dim entries, row-major.
    void hessian(const double* x, double* out) const;

    Vec sample(const Mat& points) const;
};

/// Node-by-node check of the eta invariants on a closed grid (boundary included).
struct EtaCheck {
    double min_interior = 0.0;          ///< min of eta over interior nodes
    double max_boundary = 0.0;          ///< max |eta| over boundary nodes
    double min_gradient_outside = 0.0;  ///< min |grad eta| on closure(O \ omega0), corners excluded
    int corners_excluded = 0;
    bool ok() const { return min_interior > 0 && max_boundary == 0.0 && min_gradient_outside > 0; }
};

/// Builds eta for the domain. Throws InvalidRegion when the region
/// containments fail and ConstructionInfeasible when omega0 misses the center.
EtaField build_eta(const DomainSpec& spec, int check_nodes = 65);

EtaCheck check_eta(const EtaField& eta, int nodes_per_axis);

/// Carleman weights sampled on points x interior times t_1 .. t_{N-1}.
///   alpha = (exp(lambda (2|eta| + eta)) - exp(4 lambda |eta|)) / sqrt(t (T - t))
///   xi    =  exp(lambda (2|eta| + eta)) / sqrt(t (T - t))
/// Stored as s*alpha and log xi; the truncated weights freeze t at T/2 for t <= T/2.
struct WeightBundle {
    double s = 1.0;
    double lambda = 1.0;
    double T = 1.0;
    double delta_t = 0.0;  ///< distance of the first and last sample from 0 and T
    double eta_sup = 0.0;

    Mat points;  ///< dim x P
    Vec eta;     ///< P
    Vec times;   ///< interior sample times

    Mat s_alpha;  ///< P x times
    Mat log_xi;
    Mat s_alpha_tilde;
    Mat log_xi_tilde;

    /// Plain-value accessors; throw Overflow when a value leaves double range.
    Mat alpha() const;
    Mat xi() const;
    Mat alpha_tilde() const;
    Mat xi_tilde() const;
};

/// Pure pointwise formulas shared by eval_weights and the property report.
namespace weight_formula {
/// s * alpha at (eta, t).
double s_alpha(double s, double lambda, double eta_sup, double eta, double t, double T);
double log_xi(double lambda, double eta_sup, double eta, double t, double T);
}  // namespace weight_formula

/// Samples the weights on `points` at t_n, n = 1 .. steps - 1 of the time grid.
WeightBundle eval_weights(const EtaField& eta, double s, double lambda, const TimeGrid& time, const Mat& points);
/// Same on the interior nodes of a spatial grid.
WeightBundle eval_weights(const EtaField& eta, double s, double lambda, const TimeGrid& time,
                          const SpatialGrid& grid);

struct WeightPropertyReport {
    double gradient_residual = 0.0;  ///< max relative |grad alpha - lambda xi grad eta| and for xi
    double min_xi_margin = 0.0;      ///< min of xi T/2 - 1
    double max_time_ratio = 0.0;     ///< max (|alpha_t| + |xi_t|) / xi^3
    double time_bound = 0.0;         ///< T / 2
    bool gradient_ok = false;
    bool xi_ok = false;
    bool time_ok = false;
    bool passed() const { return gradient_ok && xi_ok && time_ok; }
};

WeightPropertyReport check_weight_properties(const WeightBundle& bundle, const EtaField& eta);

/// Columns: x[, y], t, alpha, xi, alpha_tilde, xi_tilde.
void write_weights_csv(std::ostream& os, const WeightBundle& bundle);
nlohmann::json weights_summary(const WeightBundle& bundle, const WeightPropertyReport& report);

}  // namespace nullctl
