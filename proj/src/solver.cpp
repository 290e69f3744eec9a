#include "nullctl/solver.hpp"

#include <cmath>

namespace nullctl {

namespace {

constexpr double kBlowUp = 1e12;

// int_0^1 exp(-z u) u du, by series where the closed form cancels.
double lead_weight(double z) {
    if (z < 0.5) {
        double term = 1.0;  // (-z)^k / k!
        double sum = 0.0;
        for (int k = 0; k < 30; ++k) {
            sum += term / (k + 2);
            term *= -z / (k + 1);
        }
        return sum;
    }
    return (-std::expm1(-z) - z * std::exp(-z)) / (z * z);
}

void check_inputs(const Grids& grids, const CoefficientSet& c, const Mat& field, const char* what) {
    c.check_shape(grids);
    if (field.rows() != grids.space.size() || field.cols() != grids.time.nodes())
        fail(ErrorKind::ShapeMismatch, std::string(what) + " does not match the space-time grid");
}

Vec weighted_sum(const Vec& w, const Vec& v) { return w.cwiseProduct(v); }

}  // namespace

EtdWeights EtdWeights::build(const Vec& mu, double dt) {
    EtdWeights w;
    const Eigen::Index m = mu.size();
    w.decay.resize(m);
    w.phi1.resize(m);
    w.lead.resize(m);
    w.trail.resize(m);
    for (Eigen::Index k = 0; k < m; ++k) {
        const double z = dt * mu(k);
        w.decay(k) = std::exp(-z);
        w.phi1(k) = z == 0.0 ? 1.0 : -std::expm1(-z) / z;
        w.lead(k) = lead_weight(z);
        w.trail(k) = w.phi1(k) - w.lead(k);
    }
    return w;
}

Vec apply_lower_order(const SpatialGrid& grid, const CoefficientSet& c, int n, const Vec& y) {
    Vec out = Vec::Zero(grid.size());
    if (!c.has_lower_order()) return out;
    const Vec yd = grid.dealias(y);
    if (c.has_a0()) out += c.a0.col(n).cwiseProduct(yd);
    for (std::size_t i = 0; i < c.b0.size(); ++i)
        if (c.b0[i].size()) out += c.b0[i].col(n).cwiseProduct(grid.derivative(static_cast<int>(i), yd));
    const int dim = grid.dim();
    for (std::size_t ij = 0; ij < c.d.size(); ++ij) {
        if (!c.d[ij].size()) continue;
        const int i = static_cast<int>(ij) / dim, j = static_cast<int>(ij) % dim;
        out += c.d[ij].col(n).cwiseProduct(grid.second_derivative(i, j, yd));
    }
    if (c.has_a1()) out += c.a1.col(n).cwiseProduct(grid.laplacian(yd));
    return out;
}

Vec apply_lower_order_transpose(const SpatialGrid& grid, const CoefficientSet& c, int n, const Vec& y) {
    Vec acc = Vec::Zero(grid.size());
    if (!c.has_lower_order()) return acc;
    if (c.has_a0()) acc += c.a0.col(n).cwiseProduct(y);
    for (std::size_t i = 0; i < c.b0.size(); ++i)
        if (c.b0[i].size())
            acc += grid.derivative_transpose(static_cast<int>(i), c.b0[i].col(n).cwiseProduct(y));
    const int dim = grid.dim();
    for (std::size_t ij = 0; ij < c.d.size(); ++ij) {
        if (!c.d[ij].size()) continue;
        const int i = static_cast<int>(ij) / dim, j = static_cast<int>(ij) % dim;
        acc += grid.second_derivative_transpose(i, j, c.d[ij].col(n).cwiseProduct(y));
    }
    if (c.has_a1()) acc += grid.laplacian(c.a1.col(n).cwiseProduct(y));
    return grid.dealias(acc);
}

Vec apply_forward_operator(const SpatialGrid& grid, const CoefficientSet& c, int n, const Vec& y) {
    if (y.size() != grid.size()) fail(ErrorKind::ShapeMismatch, "field size does not match the grid");
    return grid.bilaplacian(y) + apply_lower_order(grid, c, n, y);
}

namespace {

// ETD-AB2 march of y' + lap^2 y + lower(k, y) = source(k), k = 0 .. steps.
template <class Lower>
SpaceTimeField march(const Grids& grids, bool lower_present, const Vec& y0, const Mat& source, Lower&& lower,
                     const char* what) {
    const auto& g = grids.space;
    const int steps = grids.time.steps;
    const double dt = grids.time.dt();
    const EtdWeights w = EtdWeights::build(g.biharmonic_eigenvalues(), dt);

    SpaceTimeField out{Mat(g.size(), steps + 1), FieldRole::State};
    out.values.col(0) = y0;
    Vec y_hat = g.to_modal(y0);
    Vec s_hat = g.to_modal(source.col(0));
    Vec f_prev;
    for (int n = 0; n < steps; ++n) {
        const Vec s_next = g.to_modal(source.col(n + 1));
        Vec next = w.decay.cwiseProduct(y_hat) + dt * (w.lead.cwiseProduct(s_hat) + w.trail.cwiseProduct(s_next));
        if (lower_present) {
            const Vec f = -g.to_modal(lower(n, Vec(out.values.col(n))));
            if (n == 0)
                next += dt * w.phi1.cwiseProduct(f);
            else
                next += dt * ((w.phi1 + w.trail).cwiseProduct(f) - w.trail.cwiseProduct(f_prev));
            f_prev = f;
        }
        y_hat = std::move(next);
        s_hat = s_next;
        out.values.col(n + 1) = g.to_nodal(y_hat);
        const double norm = g.norm(out.values.col(n + 1));
        if (!(norm <= kBlowUp))
            fail(ErrorKind::Instability, std::string(what) + " blew up at step " + std::to_string(n + 1));
    }
    return out;
}

}  // namespace

SpaceTimeField solve_forward(const Grids& grids, const CoefficientSet& c, const Vec& y0, const Mat& source) {
    check_inputs(grids, c, source, "source");
    const auto& g = grids.space;
    if (y0.size() != g.size()) fail(ErrorKind::ShapeMismatch, "initial datum does not match the grid");
    return march(
        grids, c.has_lower_order(), y0, source,
        [&](int n, const Vec& y) { return apply_lower_order(g, c, n, y); }, "forward solve");
}

SpaceTimeField solve_forward(const Grids& grids, const CoefficientSet& c, const Vec& y0, const Mat& control,
                             const Mat& g) {
    Mat source = g.size() ? g : Mat::Zero(grids.space.size(), grids.time.nodes());
    if (control.size()) {
        check_inputs(grids, c, control, "control");
        source += c.control_mask.asDiagonal() * control;
    }
    return solve_forward(grids, c, y0, source);
}

AdjointTrajectory transpose_solve(const Grids& grids, const CoefficientSet& c, const Mat& loads) {
    check_inputs(grids, c, loads, "adjoint loads");
    const auto& g = grids.space;
    const int steps = grids.time.steps;
    const double dt = grids.time.dt();
    const EtdWeights w = EtdWeights::build(g.biharmonic_eigenvalues(), dt);
    const bool lower = c.has_lower_order();

    std::vector<Vec> lam(steps + 1);
    lam[steps] = g.to_modal(loads.col(steps));
    for (int n = steps - 1; n >= 0; --n) {
        Vec cur = g.to_modal(loads.col(n)) + w.decay.cwiseProduct(lam[n + 1]);
        if (lower) {
            Vec mu = dt * (n == 0 ? w.phi1 : Vec(w.phi1 + w.trail)).cwiseProduct(lam[n + 1]);
            if (n + 2 <= steps) mu -= dt * w.trail.cwiseProduct(lam[n + 2]);
            cur -= g.to_modal(apply_lower_order_transpose(g, c, n, g.to_nodal(mu)));
        }
        if (!(cur.norm() * std::sqrt(g.cell_volume()) <= kBlowUp))
            fail(ErrorKind::Instability, "adjoint solve blew up at step " + std::to_string(n));
        lam[n] = std::move(cur);
    }

    AdjointTrajectory out;
    out.state.values.resize(g.size(), steps + 1);
    out.paired.values.resize(g.size(), steps + 1);
    for (int n = 0; n <= steps; ++n) {
        Vec grad = Vec::Zero(g.size());
        if (n < steps) grad += dt * weighted_sum(w.lead, lam[n + 1]);
        if (n >= 1) grad += dt * weighted_sum(w.trail, lam[n]);
        out.state.values.col(n) = g.to_nodal(lam[n]);
        out.paired.values.col(n) = g.to_nodal(grad) / grids.time.weight(n);
    }
    return out;
}

AdjointTrajectory solve_adjoint(const Grids& grids, const CoefficientSet& c, AdjointMode mode, const Vec& zT,
                                const Mat& g) {
    const auto& space = grids.space;
    if (zT.size() != space.size()) fail(ErrorKind::ShapeMismatch, "terminal datum does not match the grid");
    const int nt = grids.time.nodes();
    Mat source = g.size() ? g : Mat::Zero(space.size(), nt);
    if (source.rows() != space.size() || source.cols() != nt)
        fail(ErrorKind::ShapeMismatch, "adjoint source does not match the space-time grid");

    Mat loads(space.size(), nt);
    for (int n = 0; n < nt; ++n) loads.col(n) = grids.time.weight(n) * source.col(n);
    loads.col(nt - 1) += zT;

    const CoefficientSet coeffs = mode == AdjointMode::Free            ? c.free_part()
                                  : mode == AdjointMode::Transposition ? c.transposition_part()
                                                                       : c;
    AdjointTrajectory out = transpose_solve(grids, coeffs, loads);
    out.terminal = zT;
    out.source = std::move(source);
    return out;
}

SpaceTimeField solve_backward(const Grids& grids, const CoefficientSet& c, AdjointMode mode, const Vec& zT,
                              const Mat& g) {
    const auto& space = grids.space;
    if (zT.size() != space.size()) fail(ErrorKind::ShapeMismatch, "terminal datum does not match the grid");
    const int steps = grids.time.steps;
    Mat source = g.size() ? g : Mat::Zero(space.size(), steps + 1);
    check_inputs(grids, c, source, "backward source");
    const CoefficientSet coeffs = mode == AdjointMode::Free            ? c.free_part()
                                  : mode == AdjointMode::Transposition ? c.transposition_part()
                                                                       : c;
    const Mat reversed = source.rowwise().reverse();
    SpaceTimeField out = march(
        grids, coeffs.has_lower_order(), zT, reversed,
        [&](int m, const Vec& y) { return apply_lower_order_transpose(space, coeffs, steps - m, y); },
        "backward solve");
    out.values = out.values.rowwise().reverse().eval();
    out.role = FieldRole::Adjoint;
    return out;
}

double space_time_inner(const Grids& grids, const Mat& a, const Mat& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols() || a.cols() != grids.time.nodes())
        fail(ErrorKind::ShapeMismatch, "space-time fields have different shapes");
    double sum = 0.0;
    for (int n = 0; n < a.cols(); ++n) sum += grids.time.weight(n) * a.col(n).dot(b.col(n));
    return sum * grids.space.cell_volume();
}

double masked_norm(const Grids& grids, const Mat& a, const Vec& mask) {
    const Mat masked = mask.asDiagonal() * a;
    return space_time_norm(grids, masked);
}

DualityResidual duality_check(const Grids& grids, const CoefficientSet& c, const SpaceTimeField& w,
                              const Mat& forcing, const AdjointTrajectory& z) {
    const auto& g = grids.space;
    const int nt = grids.time.nodes();
    if (w.values.rows() != g.size() || w.values.cols() != nt || z.paired.values.cols() != nt ||
        z.paired.values.rows() != g.size() || forcing.rows() != g.size() || forcing.cols() != nt)
        fail(ErrorKind::ShapeMismatch, "duality check needs fields on one grid");
    if (w.values.col(0).cwiseAbs().maxCoeff() != 0.0)
        fail(ErrorKind::InvalidArgument, "duality check requires w(0) = 0");

    Mat lw(g.size(), nt);
    Mat bw(g.size(), nt);
    for (int n = 0; n < nt; ++n) {
        bw.col(n) = apply_lower_order(g, c, n, w.values.col(n));
        lw.col(n) = forcing.col(n) - bw.col(n);
    }
    const Mat& zq = z.paired.values;
    const double lhs = space_time_inner(grids, zq, lw);
    const double gw = space_time_inner(grids, z.source, w.values);
    const double bwz = space_time_inner(grids, bw, zq);
    const double terminal = g.inner(z.terminal, w.terminal());
    const double rhs = gw - bwz + terminal;

    const double scale = space_time_norm(grids, zq) * space_time_norm(grids, lw) +
                         space_time_norm(grids, z.source) * space_time_norm(grids, w.values) +
                         space_time_norm(grids, bw) * space_time_norm(grids, zq) +
                         g.norm(z.terminal) * g.norm(w.terminal());
    DualityResidual r;
    r.absolute = std::abs(lhs - rhs);
    r.relative = scale > 0 ? r.absolute / scale : r.absolute;
    return r;
}

}  // namespace nullctl
