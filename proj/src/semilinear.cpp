#include "nullctl/semilinear.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <ostream>

namespace nullctl {

NonlinearitySpec NonlinearitySpec::linear(double c) {
    NonlinearitySpec f;
    f.kind = Kind::Linear;
    f.c = c;
    return f;
}

NonlinearitySpec NonlinearitySpec::sine(double a, double b) {
    NonlinearitySpec f;
    f.kind = Kind::Sine;
    f.a = a;
    f.b = b;
    return f;
}

NonlinearitySpec NonlinearitySpec::tanh(double a, double b) {
    NonlinearitySpec f;
    f.kind = Kind::Tanh;
    f.a = a;
    f.b = b;
    return f;
}

NonlinearitySpec NonlinearitySpec::composite(double a, double b, double c, double d) {
    NonlinearitySpec f;
    f.kind = Kind::Composite;
    f.a = a;
    f.b = b;
    f.c = c;
    f.d = d;
    return f;
}

double NonlinearitySpec::value(double u, const double* p, const double* r, int dim) const {
    switch (kind) {
        case Kind::Zero:
            return 0.0;
        case Kind::Linear:
            return c * u;
        case Kind::Sine:
            return a * std::sin(b * u);
        case Kind::Tanh:
            return a * std::tanh(b * u);
        case Kind::Composite: {
            double v = a * std::sin(b * u);
            for (int i = 0; i < dim; ++i) v += c * std::sin(p[i]);
            for (int i = 0; i < dim * dim; ++i) v += d * std::sin(r[i]);
            return v;
        }
    }
    return 0.0;
}

NonlinearitySpec::Partials NonlinearitySpec::partials(double u, const double* p, const double* r, int dim) const {
    Partials out;
    switch (kind) {
        case Kind::Zero:
            break;
        case Kind::Linear:
            out.du = c;
            break;
        case Kind::Sine:
            out.du = a * b * std::cos(b * u);
            break;
        case Kind::Tanh: {
            const double th = std::tanh(b * u);
            out.du = a * b * (1.0 - th * th);
            break;
        }
        case Kind::Composite:
            out.du = a * b * std::cos(b * u);
            for (int i = 0; i < dim; ++i) out.dp[i] = c * std::cos(p[i]);
            for (int i = 0; i < dim * dim; ++i) out.dr[i] = d * std::cos(r[i]);
            break;
    }
    return out;
}

double NonlinearitySpec::bound(int dim) const {
    switch (kind) {
        case Kind::Zero:
            return 0.0;
        case Kind::Linear:
            return std::abs(c);
        case Kind::Sine:
        case Kind::Tanh:
            return std::abs(a * b);
        case Kind::Composite:
            return std::abs(a * b) + dim * std::abs(c) + dim * dim * std::abs(d);
    }
    return 0.0;
}

std::string to_string(NonlinearitySpec::Kind kind) {
    switch (kind) {
        case NonlinearitySpec::Kind::Zero:
            return "zero";
        case NonlinearitySpec::Kind::Linear:
            return "linear";
        case NonlinearitySpec::Kind::Sine:
            return "sine";
        case NonlinearitySpec::Kind::Tanh:
            return "tanh";
        case NonlinearitySpec::Kind::Composite:
            return "composite";
    }
    return "zero";
}

NonlinearitySpec::Kind nonlinearity_kind_from_string(const std::string& name) {
    for (auto k : {NonlinearitySpec::Kind::Zero, NonlinearitySpec::Kind::Linear, NonlinearitySpec::Kind::Sine,
                   NonlinearitySpec::Kind::Tanh, NonlinearitySpec::Kind::Composite})
        if (to_string(k) == name) return k;
    fail(ErrorKind::InvalidArgument, "unknown nonlinearity '" + name + "'");
}

Quadrature gauss_legendre(int n) {
    if (n < 1) fail(ErrorKind::InvalidArgument, "quadrature needs at least one node");
    // Golub-Welsch on the Jacobi matrix of the Legendre recurrence
    Mat J = Mat::Zero(n, n);
    for (int k = 1; k < n; ++k) {
        const double beta = k / std::sqrt(4.0 * k * k - 1.0);
        J(k, k - 1) = beta;
        J(k - 1, k) = beta;
    }
    Eigen::SelfAdjointEigenSolver<Mat> eig(J);
    Quadrature q;
    q.nodes = (0.5 * (eig.eigenvalues().array() + 1.0)).matrix();
    q.weights = eig.eigenvectors().row(0).transpose().array().square().matrix();
    return q;
}

namespace {

struct Derivatives {
    std::vector<Mat> grad;  // dim fields
    std::vector<Mat> hess;  // dim * dim fields, row-major
};

Derivatives spatial_derivatives(const Grids& grids, const Mat& z, bool need) {
    Derivatives d;
    if (!need) return d;
    const SpatialGrid& space = grids.space;
    const int dim = space.dim();
    d.grad.assign(dim, Mat(z.rows(), z.cols()));
    d.hess.assign(dim * dim, Mat(z.rows(), z.cols()));
    for (Eigen::Index n = 0; n < z.cols(); ++n) {
        const Vec zn = z.col(n);
        for (int a = 0; a < dim; ++a) {
            d.grad[a].col(n) = space.derivative(a, zn);
            for (int b = 0; b < dim; ++b) d.hess[a * dim + b].col(n) = space.second_derivative(a, b, zn);
        }
    }
    for (const auto& h : d.hess)
        if (!h.allFinite()) fail(ErrorKind::UnresolvedIterate, "Hessian of the iterate is not finite");
    for (const auto& g : d.grad)
        if (!g.allFinite()) fail(ErrorKind::UnresolvedIterate, "gradient of the iterate is not finite");
    return d;
}

AveragedJacobians jacobians(const Grids& grids, const Mat& z, const NonlinearitySpec& F, int quad_nodes,
                            bool derivative_slots) {
    if (quad_nodes < 2) fail(ErrorKind::InvalidArgument, "averaged Jacobians need at least 2 quadrature nodes");
    if (!z.allFinite()) fail(ErrorKind::UnresolvedIterate, "iterate is not finite");
    const int dim = grids.space.dim();
    const Derivatives d = spatial_derivatives(grids, z, derivative_slots);
    const Quadrature q = gauss_legendre(quad_nodes);

    AveragedJacobians G;
    G.g1 = Mat::Zero(z.rows(), z.cols());
    if (derivative_slots) {
        G.g2.assign(dim, Mat::Zero(z.rows(), z.cols()));
        G.g3.assign(dim * dim, Mat::Zero(z.rows(), z.cols()));
    }
    double p[2] = {0, 0}, r[4] = {0, 0, 0, 0};
    for (Eigen::Index n = 0; n < z.cols(); ++n) {
        for (Eigen::Index k = 0; k < z.rows(); ++k) {
            double sup = 0.0;
            for (int m = 0; m < quad_nodes; ++m) {
                const double tau = q.nodes(m);
                const double w = q.weights(m);
                if (derivative_slots) {
                    for (int a = 0; a < dim; ++a) p[a] = tau * d.grad[a](k, n);
                    for (int a = 0; a < dim * dim; ++a) r[a] = tau * d.hess[a](k, n);
                }
                const auto part = F.partials(tau * z(k, n), p, r, dim);
                G.g1(k, n) += w * part.du;
                if (derivative_slots) {
                    for (int a = 0; a < dim; ++a) G.g2[a](k, n) += w * part.dp[a];
                    for (int a = 0; a < dim * dim; ++a) G.g3[a](k, n) += w * part.dr[a];
                }
            }
            sup = std::abs(G.g1(k, n));
            for (const auto& g : G.g2) sup += std::abs(g(k, n));
            for (const auto& g : G.g3) sup += std::abs(g(k, n));
            G.sup = std::max(G.sup, sup);
        }
    }
    return G;
}

Mat shifted(const Mat& base, const Mat& g, Eigen::Index rows, Eigen::Index cols) {
    Mat out = base.size() ? base : Mat::Zero(rows, cols);
    return out - g;
}

FixedPointResult picard(const HumConfig& cfg, const Vec& y0, const Mat& g, const NonlinearitySpec& F,
                        const FixedPointOptions& opt, bool state_only) {
    cfg.validate();
    if (!(opt.tolerance > 0)) fail(ErrorKind::InvalidArgument, "fixed-point tolerance must be positive");
    if (opt.max_iterations < 1) fail(ErrorKind::InvalidArgument, "fixed-point iteration needs max_iterations >= 1");
    if (!(opt.damping > 0 && opt.damping <= 1)) fail(ErrorKind::InvalidArgument, "damping must lie in (0, 1]");
    const SpatialGrid& space = cfg.grids.space;
    if (y0.size() != space.size()) fail(ErrorKind::ShapeMismatch, "y0 does not match the spatial grid");
    if (!y0.allFinite()) fail(ErrorKind::InvalidArgument, "y0 is not finite");

    const Eigen::Index rows = space.size();
    const Eigen::Index cols = cfg.grids.time.nodes();
    const int dim = space.dim();
    const double p0[2] = {0, 0}, r0[4] = {0, 0, 0, 0};
    const double f0 = F.value(0.0, p0, r0, dim);
    Mat source = g;
    if (f0 != 0.0) {
        if (source.size() == 0) source = Mat::Zero(rows, cols);
        source.array() += f0;
    }
    const double M = F.bound(dim);
    const bool slots = !state_only;

    FixedPointResult res;
    FixedPointTrace& tr = res.trace;
    tr.y0_l2 = space.norm(y0);
    tr.y0_h2 = h2_norm(space, y0);
    double theta = opt.damping;
    Mat z = Mat::Zero(rows, cols);
    for (int k = 1; k <= opt.max_iterations; ++k) {
        const AveragedJacobians G = jacobians(cfg.grids, z, F, opt.quad_nodes, slots);
        if (G.sup > M * (1 + 1e-12) + 1e-300)
            fail(ErrorKind::InvalidArgument, "averaged Jacobians exceed the derivative bound M");
        tr.jacobian_sup = std::max(tr.jacobian_sup, G.sup);

        HumConfig lin = cfg;
        lin.coefficients = linearized_coefficients(cfg.coefficients, G, F);
        res.hum = hum_solve(lin, y0, source);

        const Mat& y = res.hum.y.values;
        tr.fixed_point_residual = iteration_norm(cfg.grids, y - z);
        tr.iterate_cap = std::max(tr.iterate_cap, iteration_norm(cfg.grids, y));
        Mat next = theta == 1.0 ? y : Mat((1.0 - theta) * z + theta * y);
        FixedPointRow row;
        row.iter = k;
        row.distance = iteration_norm(cfg.grids, next - z);
        row.terminal_norm = res.hum.terminal_norm;
        row.control_norm = res.hum.control_norm;
        tr.rows.push_back(row);
        z = std::move(next);
        res.iterates.push_back(z);

        if (row.distance <= opt.tolerance) {
            tr.converged = true;
            break;
        }
        const std::size_t m = tr.rows.size();
        if (m >= 3 && theta > 0.5 && tr.rows[m - 1].distance > tr.rows[m - 2].distance &&
            tr.rows[m - 2].distance > tr.rows[m - 3].distance)
            theta = 0.5;
    }
    tr.damping = theta;
    if (!tr.converged)
        throw FixedPointError("fixed-point iteration did not converge in " + std::to_string(opt.max_iterations) +
                                  " iterations",
                              std::move(res));
    return res;
}

}  // namespace

AveragedJacobians averaged_jacobians(const Grids& grids, const SpaceTimeField& z, const NonlinearitySpec& F,
                                     int quad_nodes) {
    return jacobians(grids, z.values, F, quad_nodes, true);
}

double mean_value_residual(const Grids& grids, const SpaceTimeField& z, const NonlinearitySpec& F,
                           const AveragedJacobians& G) {
    const int dim = grids.space.dim();
    const Derivatives d = spatial_derivatives(grids, z.values, true);
    const double p0[2] = {0, 0}, r0[4] = {0, 0, 0, 0};
    const double f0 = F.value(0.0, p0, r0, dim);
    double worst = 0.0, scale = 0.0;
    double p[2] = {0, 0}, r[4] = {0, 0, 0, 0};
    for (Eigen::Index n = 0; n < z.values.cols(); ++n) {
        for (Eigen::Index k = 0; k < z.values.rows(); ++k) {
            const double u = z.values(k, n);
            for (int a = 0; a < dim; ++a) p[a] = d.grad[a](k, n);
            for (int a = 0; a < dim * dim; ++a) r[a] = d.hess[a](k, n);
            const double diff = F.value(u, p, r, dim) - f0;
            double lin = G.g1(k, n) * u;
            for (std::size_t a = 0; a < G.g2.size(); ++a) lin += G.g2[a](k, n) * p[a];
            for (std::size_t a = 0; a < G.g3.size(); ++a) lin += G.g3[a](k, n) * r[a];
            worst = std::max(worst, std::abs(diff - lin));
            scale = std::max(scale, std::abs(diff));
        }
    }
    return scale > 0 ? worst / scale : worst;
}

double iteration_norm(const Grids& grids, const Mat& z) {
    double acc = 0.0;
    for (int n = 0; n < grids.time.nodes(); ++n) {
        const double h = h2_norm(grids.space, z.col(n));
        acc += grids.time.weight(n) * h * h;
    }
    return std::sqrt(acc);
}

CoefficientSet linearized_coefficients(const CoefficientSet& base, const AveragedJacobians& G,
                                       const NonlinearitySpec& F) {
    CoefficientSet c = base;
    if (F.kind == NonlinearitySpec::Kind::Zero) return c;
    const Eigen::Index rows = G.g1.rows(), cols = G.g1.cols();
    c.a0 = shifted(base.a0, G.g1, rows, cols);
    if (!G.g2.empty()) {
        const std::size_t dim = G.g2.size();
        c.b0.resize(dim);
        c.d.resize(dim * dim);
        for (std::size_t a = 0; a < dim; ++a)
            c.b0[a] = shifted(a < base.b0.size() ? base.b0[a] : Mat{}, G.g2[a], rows, cols);
        for (std::size_t a = 0; a < dim * dim; ++a)
            c.d[a] = shifted(a < base.d.size() ? base.d[a] : Mat{}, G.g3[a], rows, cols);
    }
    return c;
}

FixedPointResult fixed_point_solve(const HumConfig& cfg, const Vec& y0, const Mat& g, const NonlinearitySpec& F,
                                   const FixedPointOptions& options) {
    return picard(cfg, y0, g, F, options, false);
}

FixedPointResult state_only_variant(const HumConfig& cfg, const Vec& y0, const Mat& g, const NonlinearitySpec& G,
                                    const FixedPointOptions& options) {
    if (!G.state_only())
        fail(ErrorKind::InvalidArgument, "state-only variant needs a nonlinearity of u alone");
    return picard(cfg, y0, g, G, options, true);
}

void write_trace_csv(std::ostream& os, const FixedPointTrace& trace) {
    os << "iter,distance,terminal_norm,control_norm\n";
    const auto old = os.precision(17);
    for (const auto& r : trace.rows)
        os << r.iter << ',' << r.distance << ',' << r.terminal_norm << ',' << r.control_norm << '\n';
    os.precision(old);
}

nlohmann::json fixed_point_summary(const FixedPointResult& r) {
    const auto& t = r.trace;
    nlohmann::json distances = nlohmann::json::array();
    for (const auto& row : t.rows) distances.push_back(row.distance);
    return {
        {"iterations", static_cast<int>(t.rows.size())},
        {"converged", t.converged},
        {"distances", distances},
        {"damping", t.damping},
        {"iterate_cap", t.iterate_cap},
        {"jacobian_sup", t.jacobian_sup},
        {"fixed_point_residual", t.fixed_point_residual},
        {"terminal_norm", r.hum.terminal_norm},
        {"control_norm", r.hum.control_norm},
        {"epsilon", r.hum.epsilon},
        {"y0_l2", t.y0_l2},
        {"y0_h2", t.y0_h2},
    };
}

}  // namespace nullctl
