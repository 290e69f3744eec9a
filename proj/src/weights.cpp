#include "nullctl/weights.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

namespace nullctl {

double EtaField::value(const double* x) const {
    double v = 1.0;
    for (int a = 0; a < domain.dim; ++a) v *= x[a] * (domain.extent[a] - x[a]);
    return v;
}

void EtaField::gradient(const double* x, double* out) const {
    const int dim = domain.dim;
    for (int a = 0; a < dim; ++a) {
        double g = domain.extent[a] - 2.0 * x[a];
        for (int b = 0; b < dim; ++b)
            if (b != a) g *= x[b] * (domain.extent[b] - x[b]);
        out[a] = g;
    }
}

void EtaField::hessian(const double* x, double* out) const {
    const int dim = domain.dim;
    for (int a = 0; a < dim; ++a) {
        for (int b = 0; b < dim; ++b) {
            double h;
            if (a == b) {
                h = -2.0;
                for (int c = 0; c < dim; ++c)
                    if (c != a) h *= x[c] * (domain.extent[c] - x[c]);
            } else {
                h = (domain.extent[a] - 2.0 * x[a]) * (domain.extent[b] - 2.0 * x[b]);
            }
            out[a * dim + b] = h;
        }
    }
}

Vec EtaField::sample(const Mat& points) const {
    Vec v(points.cols());
    for (Eigen::Index k = 0; k < points.cols(); ++k) v(k) = value(points.col(k).data());
    return v;
}

EtaField build_eta(const DomainSpec& spec, int check_nodes) {
    spec.validate();
    const auto c = spec.center();
    if (!spec.inner.contains(c.data(), spec.dim))
        fail(ErrorKind::ConstructionInfeasible,
             "omega0 does not contain the domain center, the only interior critical point of eta");
    EtaField eta;
    eta.domain = spec;
    eta.sup_norm = 1.0;
    for (int a = 0; a < spec.dim; ++a) eta.sup_norm *= 0.25 * spec.extent[a] * spec.extent[a];
    if (!check_eta(eta, check_nodes).ok())
        fail(ErrorKind::ConstructionInfeasible, "eta invariants fail on the check grid");
    return eta;
}

EtaCheck check_eta(const EtaField& eta, int nodes) {
    const auto& d = eta.domain;
    const int ny = d.dim == 2 ? nodes : 1;
    EtaCheck r;
    r.min_interior = std::numeric_limits<double>::infinity();
    r.min_gradient_outside = std::numeric_limits<double>::infinity();
    for (int j = 0; j < ny; ++j) {
        for (int i = 0; i < nodes; ++i) {
            const auto node = [&](int a, int m) { return m == nodes - 1 ? d.extent[a] : d.extent[a] * m / (nodes - 1); };
            double x[2] = {node(0, i), d.dim == 2 ? node(1, j) : 0.0};
            const bool bx = i == 0 || i == nodes - 1;
            const bool by = d.dim == 2 && (j == 0 || j == ny - 1);
            const double v = eta.value(x);
            if (bx || by)
                r.max_boundary = std::max(r.max_boundary, std::abs(v));
            else
                r.min_interior = std::min(r.min_interior, v);

            if (d.inner.contains(x, d.dim)) continue;
            if (bx && by) {
                ++r.corners_excluded;
                continue;
            }
            double g[2] = {0, 0};
            eta.gradient(x, g);
            r.min_gradient_outside = std::min(r.min_gradient_outside, std::hypot(g[0], g[1]));
        }
    }
    return r;
}

namespace weight_formula {

double s_alpha(double s, double lambda, double eta_sup, double eta, double t, double T) {
    return s * std::exp(4.0 * lambda * eta_sup) * std::expm1(lambda * (eta - 2.0 * eta_sup)) /
           std::sqrt(t * (T - t));
}

double log_xi(double lambda, double eta_sup, double eta, double t, double T) {
    return lambda * (2.0 * eta_sup + eta) - 0.5 * std::log(t * (T - t));
}

}  // namespace weight_formula

namespace {

Mat checked_exp(const Mat& log_values, const char* what) {
    Mat out = log_values.array().exp().matrix();
    if (!out.allFinite()) fail(ErrorKind::Overflow, std::string(what) + " overflows; use the log-space fields");
    return out;
}

Mat checked_div(const Mat& s_alpha, double s, const char* what) {
    Mat out = s_alpha / s;
    if (!out.allFinite()) fail(ErrorKind::Overflow, std::string(what) + " overflows");
    return out;
}

}  // namespace

Mat WeightBundle::alpha() const { return checked_div(s_alpha, s, "alpha"); }
Mat WeightBundle::xi() const { return checked_exp(log_xi, "xi"); }
Mat WeightBundle::alpha_tilde() const { return checked_div(s_alpha_tilde, s, "alpha_tilde"); }
Mat WeightBundle::xi_tilde() const { return checked_exp(log_xi_tilde, "xi_tilde"); }

WeightBundle eval_weights(const EtaField& eta, double s, double lambda, const TimeGrid& time, const Mat& points) {
    if (!(s > 0) || !(lambda > 0)) fail(ErrorKind::InvalidArgument, "weights need s > 0 and lambda > 0");
    if (time.steps < 2) fail(ErrorKind::InvalidArgument, "weights need at least two time steps");
    WeightBundle b;
    b.s = s;
    b.lambda = lambda;
    b.T = time.T;
    b.delta_t = time.dt();
    b.eta_sup = eta.sup_norm;
    b.points = points;
    b.eta = eta.sample(points);

    const int nt = time.steps - 1;
    b.times.resize(nt);
    for (int n = 0; n < nt; ++n) b.times(n) = time.time(n + 1);

    const Eigen::Index np = points.cols();
    b.s_alpha.resize(np, nt);
    b.log_xi.resize(np, nt);
    b.s_alpha_tilde.resize(np, nt);
    b.log_xi_tilde.resize(np, nt);
    const double half = 0.5 * time.T;
    for (int n = 0; n < nt; ++n) {
        const double t = b.times(n);
        const double tt = std::max(t, half);
        for (Eigen::Index k = 0; k < np; ++k) {
            const double e = b.eta(k);
            b.s_alpha(k, n) = weight_formula::s_alpha(s, lambda, eta.sup_norm, e, t, time.T);
            b.log_xi(k, n) = weight_formula::log_xi(lambda, eta.sup_norm, e, t, time.T);
            b.s_alpha_tilde(k, n) = weight_formula::s_alpha(s, lambda, eta.sup_norm, e, tt, time.T);
            b.log_xi_tilde(k, n) = weight_formula::log_xi(lambda, eta.sup_norm, e, tt, time.T);
        }
    }
    if (!b.s_alpha.allFinite() || !b.log_xi.allFinite())
        fail(ErrorKind::Overflow, "weight exponents leave double range");
    return b;
}

WeightBundle eval_weights(const EtaField& eta, double s, double lambda, const TimeGrid& time,
                          const SpatialGrid& grid) {
    return eval_weights(eta, s, lambda, time, grid.points());
}

WeightPropertyReport check_weight_properties(const WeightBundle& b, const EtaField& eta) {
    WeightPropertyReport r;
    r.time_bound = 0.5 * b.T;
    r.min_xi_margin = std::numeric_limits<double>::infinity();
    const double lam = b.lambda;
    const double sup = b.eta_sup;
    const int dim = eta.domain.dim;
    for (Eigen::Index n = 0; n < b.times.size(); ++n) {
        const double t = b.times(n);
        const double q = t * (b.T - t);
        const double theta = 1.0 / std::sqrt(q);
        const double log_abs_dtheta = std::log(0.5 * std::abs(b.T - 2.0 * t)) - 1.5 * std::log(q);
        for (Eigen::Index k = 0; k < b.points.cols(); ++k) {
            const double e = b.eta(k);
            double grad[2] = {0, 0};
            eta.gradient(b.points.col(k).data(), grad);

            // d alpha / d eta from the stored formula versus lambda xi.
            const double dalpha = std::exp(4.0 * lam * sup) * lam * std::exp(lam * (e - 2.0 * sup)) * theta;
            const double lxi = lam * std::exp(b.log_xi(k, n));
            for (int a = 0; a < dim; ++a) {
                const double rhs = lxi * grad[a];
                const double scale = std::max(std::abs(rhs), std::numeric_limits<double>::min());
                r.gradient_residual = std::max(r.gradient_residual, std::abs(dalpha * grad[a] - rhs) / scale);
                const double dxi = lam * std::exp(lam * (2.0 * sup + e)) * theta;
                r.gradient_residual = std::max(r.gradient_residual, std::abs(dxi * grad[a] - rhs) / scale);
            }

            r.min_xi_margin = std::min(r.min_xi_margin, std::expm1(b.log_xi(k, n) + std::log(0.5 * b.T)));

            // alpha = A theta, xi = B theta with |A| + B = exp(4 lambda |eta|).
            const double u = lam * (e - 2.0 * sup);
            const double log_sum = 4.0 * lam * sup + std::log(-std::expm1(u) + std::exp(u));
            const double log_b = lam * (2.0 * sup + e);
            const double log_ratio = log_sum + log_abs_dtheta - 3.0 * (log_b + std::log(theta));
            r.max_time_ratio = std::max(r.max_time_ratio, std::exp(log_ratio));
        }
    }
    r.gradient_ok = r.gradient_residual <= 1e-12;
    r.xi_ok = r.min_xi_margin >= 0.0;
    r.time_ok = r.max_time_ratio <= r.time_bound;
    return r;
}

void write_weights_csv(std::ostream& os, const WeightBundle& b) {
    const int dim = static_cast<int>(b.points.rows());
    const Mat alpha = b.alpha(), xi = b.xi(), at = b.alpha_tilde(), xt = b.xi_tilde();
    os << (dim == 2 ? "x,y,t,alpha,xi,alpha_tilde,xi_tilde\n" : "x,t,alpha,xi,alpha_tilde,xi_tilde\n");
    const auto old = os.precision(17);
    for (Eigen::Index n = 0; n < b.times.size(); ++n) {
        for (Eigen::Index k = 0; k < b.points.cols(); ++k) {
            for (int a = 0; a < dim; ++a) os << b.points(a, k) << ',';
            os << b.times(n) << ',' << alpha(k, n) << ',' << xi(k, n) << ',' << at(k, n) << ',' << xt(k, n)
               << '\n';
        }
    }
    os.precision(old);
}

nlohmann::json weights_summary(const WeightBundle& b, const WeightPropertyReport& r) {
    return {
        {"s", b.s},
        {"lambda", b.lambda},
        {"T", b.T},
        {"eta_sup", b.eta_sup},
        {"delta_t", b.delta_t},
        {"gradient_residual", r.gradient_residual},
        {"min_xi_margin", r.min_xi_margin},
        {"max_time_ratio", r.max_time_ratio},
        {"time_bound", r.time_bound},
        {"passed", r.passed()},
    };
}

}  // namespace nullctl
