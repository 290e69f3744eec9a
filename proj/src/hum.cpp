#include "nullctl/hum.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

namespace nullctl {

namespace {

double log_sum_exp(const std::vector<double>& terms) {
    if (terms.empty()) return -std::numeric_limits<double>::infinity();
    const double m = *std::max_element(terms.begin(), terms.end());
    if (!std::isfinite(m)) return m;
    double sum = 0.0;
    for (double t : terms) sum += std::exp(t - m);
    return m + std::log(sum);
}

Vec modal_preconditioner(const HumConfig& cfg) {
    const auto& g = cfg.grids.space;
    const double fraction = cfg.coefficients.control_mask.mean();
    const double T = cfg.grids.time.T;
    const Vec& mu = g.biharmonic_eigenvalues();
    Vec d(mu.size());
    for (Eigen::Index k = 0; k < mu.size(); ++k)
        d(k) = cfg.epsilon + fraction * (-std::expm1(-2.0 * mu(k) * T)) / (2.0 * mu(k));
    return d;
}

struct CgOutcome {
    Vec x;
    int iterations = 0;
    std::vector<double> history;
    bool converged = false;
};

CgOutcome conjugate_gradient(const HumConfig& cfg, const Vec& b) {
    const auto& grid = cfg.grids.space;
    const auto apply = [&](const Vec& d) -> Vec {
        return gramian_apply(cfg.grids, cfg.coefficients, d) + cfg.epsilon * d;
    };
    const Vec diag = cfg.precondition ? modal_preconditioner(cfg) : Vec{};
    const auto precond = [&](const Vec& r) -> Vec {
        if (!cfg.precondition) return r;
        return grid.to_nodal(grid.to_modal(r).cwiseQuotient(diag));
    };

    CgOutcome out;
    out.x = Vec::Zero(b.size());
    const double bnorm = b.norm();
    if (bnorm == 0.0) {
        out.history.push_back(0.0);
        out.converged = true;
        return out;
    }

    Vec best = out.x;
    double best_res = 1.0;
    out.history.push_back(1.0);
    // Restarts recompute the true residual so the recurrence cannot drift past the tolerance.
    while (out.iterations < cfg.max_iterations) {
        Vec r = b - apply(out.x);
        double rel = r.norm() / bnorm;
        if (rel <= cfg.tolerance) {
            out.converged = true;
            best = out.x;
            best_res = rel;
            break;
        }
        Vec z = precond(r);
        Vec d = z;
        double rz = r.dot(z);
        bool progressed = false;
        while (out.iterations < cfg.max_iterations) {
            const Vec q = apply(d);
            const double dq = d.dot(q);
            if (!(dq > 0.0)) break;
            const double step = rz / dq;
            out.x += step * d;
            r -= step * q;
            ++out.iterations;
            rel = r.norm() / bnorm;
            out.history.push_back(rel);
            if (rel < best_res) {
                best_res = rel;
                best = out.x;
                progressed = true;
            }
            if (rel <= cfg.tolerance) break;
            z = precond(r);
            const double rz_next = r.dot(z);
            d = z + (rz_next / rz) * d;
            rz = rz_next;
        }
        if (!progressed && rel > cfg.tolerance) break;
    }
    out.x = best;
    if (!out.converged) out.converged = (b - apply(best)).norm() / bnorm <= cfg.tolerance;
    return out;
}

HumResult evaluate(const HumConfig& cfg, const Vec& y0, const Mat& g, const Vec& zT, const Vec& y_free_T) {
    const auto& grids = cfg.grids;
    const auto& c = cfg.coefficients;
    const auto& space = grids.space;
    HumResult r;
    r.epsilon = cfg.epsilon;
    r.zT = zT;
    r.y_free_T = y_free_T;

    const AdjointTrajectory adj = solve_adjoint(grids, c, AdjointMode::Full, zT);
    r.p = adj.paired;
    r.v.values = -(c.control_mask.asDiagonal() * r.p.values);
    r.y = solve_forward(grids, c, y0, r.v.values, g);

    r.terminal_norm = space.norm(r.y.terminal());
    r.control_norm = space_time_norm(grids, r.v.values);
    r.cost = 0.5 / cfg.epsilon * r.terminal_norm * r.terminal_norm + 0.5 * r.control_norm * r.control_norm;

    const double scale = space.norm(y_free_T);
    const double res = space.norm(cfg.epsilon * zT - r.y.terminal());
    r.optimality_residual = scale > 0 ? res / scale : res;
    if (cfg.weights && g.size()) r.log_weighted_source_norm = log_weighted_source_norm(grids, *cfg.weights, g);
    return r;
}

}  // namespace

void HumConfig::validate() const {
    if (!(epsilon > 0)) fail(ErrorKind::InvalidArgument, "penalty epsilon must be positive");
    if (!(tolerance > 0 && tolerance < 1)) fail(ErrorKind::InvalidArgument, "CG tolerance must lie in (0, 1)");
    if (max_iterations < 1) fail(ErrorKind::InvalidArgument, "CG needs at least one iteration");
    coefficients.check_shape(grids);
}

SpaceTimeField free_trajectory(const Grids& grids, const CoefficientSet& c, const Vec& y0, const Mat& g) {
    return solve_forward(grids, c, y0, Mat{}, g);
}

Vec gramian_apply(const Grids& grids, const CoefficientSet& c, const Vec& zT) {
    const AdjointTrajectory adj = solve_adjoint(grids, c, AdjointMode::Full, zT);
    return solve_forward(grids, c, Vec::Zero(zT.size()), adj.paired.values, Mat{}).terminal();
}

Mat assemble_gramian(const Grids& grids, const CoefficientSet& c) {
    const Eigen::Index m = grids.space.size();
    Mat G(m, m);
    for (Eigen::Index j = 0; j < m; ++j) G.col(j) = gramian_apply(grids, c, Vec::Unit(m, j));
    return G;
}

HumResult hum_evaluate(const HumConfig& cfg, const Vec& y0, const Mat& g, const Vec& zT) {
    cfg.validate();
    const Vec y_free_T = free_trajectory(cfg.grids, cfg.coefficients, y0, g).terminal();
    return evaluate(cfg, y0, g, zT, y_free_T);
}

HumResult hum_solve(const HumConfig& cfg, const Vec& y0, const Mat& g) {
    cfg.validate();
    const Vec y_free_T = free_trajectory(cfg.grids, cfg.coefficients, y0, g).terminal();
    CgOutcome cg = conjugate_gradient(cfg, y_free_T);
    HumResult r = evaluate(cfg, y0, g, cg.x, y_free_T);
    r.cg_iterations = cg.iterations;
    r.residual_history = std::move(cg.history);
    r.converged = cg.converged;
    if (!cg.converged)
        throw CgStagnationError("CG reached " + std::to_string(cfg.max_iterations) +
                                    " iterations without meeting the tolerance",
                                std::move(r));
    return r;
}

HumResult hum_solve_dense(const HumConfig& cfg, const Vec& y0, const Mat& g) {
    cfg.validate();
    const Vec y_free_T = free_trajectory(cfg.grids, cfg.coefficients, y0, g).terminal();
    Mat A = assemble_gramian(cfg.grids, cfg.coefficients);
    A = 0.5 * (A + A.transpose());
    A.diagonal().array() += cfg.epsilon;
    const Vec zT = A.ldlt().solve(y_free_T);
    HumResult r = evaluate(cfg, y0, g, zT, y_free_T);
    r.converged = true;
    return r;
}

double log_weighted_source_norm(const Grids& grids, const WeightParams& w, const Mat& g) {
    if (g.size() == 0) return -std::numeric_limits<double>::infinity();
    const WeightBundle b = eval_weights(w.eta, w.s, w.lambda, grids.time, grids.space);
    const double log_cell = std::log(grids.space.cell_volume() * grids.time.dt());
    std::vector<double> terms;
    for (Eigen::Index n = 0; n < b.times.size(); ++n) {
        for (Eigen::Index k = 0; k < g.rows(); ++k) {
            const double v = std::abs(g(k, n + 1));
            if (v == 0.0) continue;
            terms.push_back(2.0 * (-3.0 * b.log_xi_tilde(k, n) - b.s_alpha_tilde(k, n) + std::log(v)) + log_cell);
        }
    }
    return 0.5 * log_sum_exp(terms);
}

double h2_norm(const SpatialGrid& grid, const Vec& y) {
    const Vec yh = grid.to_modal(y);
    const Vec wt = (1.0 + grid.laplacian_eigenvalues().array().abs()).matrix();
    return std::sqrt(grid.cell_volume() * yh.cwiseProduct(wt).squaredNorm());
}

SweepReport epsilon_sweep(const HumConfig& base, const Vec& y0, const Mat& g, const std::vector<double>& eps) {
    if (eps.size() < 4) fail(ErrorKind::InvalidArgument, "epsilon sweep needs at least 4 values");
    for (std::size_t i = 0; i < eps.size(); ++i) {
        if (!(eps[i] > 0)) fail(ErrorKind::InvalidArgument, "epsilon values must be positive");
        if (i && !(eps[i] < eps[i - 1])) fail(ErrorKind::InvalidArgument, "epsilon list must be decreasing");
    }
    if (eps.front() / eps.back() < 1e3 * (1 - 1e-12))
        fail(ErrorKind::InvalidArgument, "epsilon list must span at least three decades");

    SweepReport rep;
    const auto& space = base.grids.space;
    rep.y0_l2 = space.norm(y0);
    rep.y0_h2 = h2_norm(space, y0);
    rep.log_weighted_source_norm =
        base.weights && g.size() ? log_weighted_source_norm(base.grids, *base.weights, g)
                                 : -std::numeric_limits<double>::infinity();
    const double log_denominator =
        log_sum_exp({2.0 * rep.log_weighted_source_norm, 2.0 * std::log(rep.y0_l2)});

    for (double e : eps) {
        HumConfig cfg = base;
        cfg.epsilon = e;
        const HumResult r = hum_solve(cfg, y0, g);
        SweepRow row;
        row.epsilon = e;
        row.terminal_norm = r.terminal_norm;
        row.control_norm = r.control_norm;
        row.cost = r.cost;
        row.cg_iters = r.cg_iterations;
        const double num = r.terminal_norm * r.terminal_norm / e + r.control_norm * r.control_norm;
        row.bound_quotient = num > 0 ? std::exp(std::log(num) - log_denominator) : 0.0;
        rep.rows.push_back(row);
    }

    const auto& rows = rep.rows;
    const std::size_t m = rows.size();

    // log-log least squares over rows with nonzero terminal norm
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int cnt = 0;
    for (const auto& r : rows) {
        if (!(r.terminal_norm > 0)) continue;
        const double x = std::log(r.epsilon), y = std::log(r.terminal_norm);
        sx += x, sy += y, sxx += x * x, sxy += x * y;
        ++cnt;
    }
    rep.fitted_exponent = cnt >= 2 ? (cnt * sxy - sx * sy) / (cnt * sxx - sx * sx)
                                   : std::numeric_limits<double>::quiet_NaN();

    rep.sqrt_law_constant = std::max(rows[0].terminal_norm / std::sqrt(rows[0].epsilon),
                                     rows[1].terminal_norm / std::sqrt(rows[1].epsilon));
    rep.sqrt_law_ok = true;
    for (std::size_t i = 2; i < m; ++i)
        if (rows[i].terminal_norm > rep.sqrt_law_constant * std::sqrt(rows[i].epsilon) * (1 + 1e-9))
            rep.sqrt_law_ok = false;

    double vmax = 0, vmin = std::numeric_limits<double>::infinity();
    for (std::size_t i = m - 3; i < m; ++i) {
        vmax = std::max(vmax, rows[i].control_norm);
        vmin = std::min(vmin, rows[i].control_norm);
    }
    rep.control_ratio = vmax == 0 ? 1.0 : vmax / vmin;
    rep.control_bounded = rep.control_ratio <= 2.0;

    rep.terminal_monotone = rep.cost_monotone = true;
    double qmax = 0, qmin = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < m; ++i) {
        qmax = std::max(qmax, rows[i].bound_quotient);
        qmin = std::min(qmin, rows[i].bound_quotient);
        if (i == 0) continue;
        const double tol = 1e-9;
        if (rows[i].terminal_norm > rows[i - 1].terminal_norm * (1 + tol) + 1e-300) rep.terminal_monotone = false;
        if (rows[i].cost < rows[i - 1].cost * (1 - tol)) rep.cost_monotone = false;
    }
    rep.quotient_variation = qmax == 0 ? 1.0 : qmax / qmin;

    if (!rep.control_bounded)
        throw SweepDivergenceError("control norm ratio over the last three epsilon values is " +
                                       std::to_string(rep.control_ratio) + " > 2",
                                   rep);
    return rep;
}

void write_sweep_csv(std::ostream& os, const SweepReport& report) {
    const auto old = os.precision(17);
    os << "epsilon,terminal_norm,control_norm,cost,cg_iters,bound_quotient\n";
    for (const auto& r : report.rows)
        os << r.epsilon << ',' << r.terminal_norm << ',' << r.control_norm << ',' << r.cost << ',' << r.cg_iters
           << ',' << r.bound_quotient << '\n';
    os.precision(old);
}

nlohmann::json sweep_summary(const SweepReport& r) {
    const auto finite_or_null = [](double v) -> nlohmann::json {
        if (std::isfinite(v)) return v;
        return nullptr;
    };
    return {
        {"fitted_exponent", finite_or_null(r.fitted_exponent)},
        {"control_ratio", r.control_ratio},
        {"control_bounded", r.control_bounded},
        {"sqrt_law_constant", r.sqrt_law_constant},
        {"sqrt_law_ok", r.sqrt_law_ok},
        {"terminal_monotone", r.terminal_monotone},
        {"cost_monotone", r.cost_monotone},
        {"quotient_variation", r.quotient_variation},
        {"y0_l2", r.y0_l2},
        {"y0_h2", r.y0_h2},
        {"log_weighted_source_norm", finite_or_null(r.log_weighted_source_norm)},
        {"rows", r.rows.size()},
    };
}

}  // namespace nullctl
