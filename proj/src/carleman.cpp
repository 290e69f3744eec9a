#include "nullctl/carleman.hpp"

#include <boost/multiprecision/eigen.hpp>
#include <boost/multiprecision/mpfr.hpp>

#include <algorithm>
#include <cmath>
#include <map>
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

double log_total(const std::vector<WeightedTerm>& terms) {
    std::vector<double> logs;
    for (const auto& t : terms) logs.push_back(t.log_value);
    return log_sum_exp(logs);
}

void finish(CarlemanReport& r, const Grids& grids) {
    r.log_lhs = log_total(r.lhs);
    r.log_rhs = log_total(r.rhs);
    r.ratio = std::exp(r.log_lhs - r.log_rhs);
    r.dim = grids.space.dim();
    r.nodes = {grids.space.nodes(0), grids.space.dim() == 2 ? grids.space.nodes(1) : 1};
    r.steps = grids.time.steps;
    r.T = grids.time.T;
    r.delta_t = grids.time.dt();
}

void require_nondegenerate(const Grids& grids, const Mat& z) {
    if (space_time_norm(grids, z) < 1e-30)
        fail(ErrorKind::DegenerateSolution, "adjoint solution has L2(Q) norm below 1e-30");
}

Mat squares(const Mat& m) { return m.array().square().matrix(); }

}  // namespace

std::string to_string(CarlemanTarget target) {
    return target == CarlemanTarget::Lemma22 ? "lemma22" : "theorem322";
}

std::vector<double> default_s_values(double T, const std::vector<double>& s0) {
    std::vector<double> out;
    for (double v : s0) out.push_back(v * (std::sqrt(T) + T));
    return out;
}

double log_weighted_integral(const Grids& grids, const WeightBundle& w, double ps, double pl, double px, int sign,
                             const Mat& f2, const Vec& mask) {
    const int steps = grids.time.steps;
    if (w.times.size() != steps - 1 || w.points.cols() != grids.space.size())
        fail(ErrorKind::ShapeMismatch, "weight bundle does not match the grids");
    if (f2.rows() != grids.space.size() || f2.cols() != steps + 1)
        fail(ErrorKind::ShapeMismatch, "integrand does not match the space-time grid");
    const double base = ps * std::log(w.s) + pl * std::log(w.lambda) +
                        std::log(grids.time.dt() * grids.space.cell_volume());
    std::vector<double> terms;
    terms.reserve(static_cast<std::size_t>(f2.rows()) * (steps - 1));
    for (int n = 1; n < steps; ++n) {
        for (Eigen::Index k = 0; k < f2.rows(); ++k) {
            if (mask.size() && mask(k) == 0.0) continue;
            const double v = f2(k, n);
            if (v == 0.0) continue;
            terms.push_back(base + px * w.log_xi(k, n - 1) + 2.0 * sign * w.s_alpha(k, n - 1) + std::log(v));
        }
    }
    return log_sum_exp(terms);
}

DerivativeSquares derivative_squares(const Grids& grids, const Mat& z) {
    const auto& g = grids.space;
    const int dim = g.dim();
    const int nt = static_cast<int>(z.cols());
    DerivativeSquares d;
    d.value = squares(z);
    d.grad = d.lap = d.hess = d.grad_lap = d.bilap = d.time = Mat::Zero(z.rows(), nt);
    for (int n = 0; n < nt; ++n) {
        const Vec zn = z.col(n);
        const Vec lap = g.laplacian(zn);
        for (int a = 0; a < dim; ++a) {
            d.grad.col(n) += squares(g.derivative(a, zn));
            d.grad_lap.col(n) += squares(g.derivative(a, lap));
            for (int b = 0; b < dim; ++b) d.hess.col(n) += squares(g.second_derivative(a, b, zn));
        }
        d.lap.col(n) = squares(lap);
        d.bilap.col(n) = squares(g.bilaplacian(zn));
    }
    const double dt = grids.time.dt();
    for (int n = 1; n + 1 < nt; ++n) d.time.col(n) = squares((z.col(n + 1) - z.col(n - 1)) / (2.0 * dt));
    return d;
}

CarlemanReport audit_lemma22(const AuditSetup& setup, const Vec& z0, const Mat& g, double s, double lambda) {
    const auto& grids = setup.grids;
    const Mat gz = g.size() ? g : Mat::Zero(grids.space.size(), grids.time.nodes());
    const SpaceTimeField z = solve_backward(grids, setup.coefficients, AdjointMode::Free, z0, gz);
    require_nondegenerate(grids, z.values);

    const WeightBundle w = eval_weights(setup.eta, s, lambda, grids.time, grids.space);
    const DerivativeSquares d = derivative_squares(grids, z.values);
    const auto term = [&](const char* name, double ps, double pl, double px, const Mat& f2, const Vec& mask = Vec{}) {
        return WeightedTerm{name, log_weighted_integral(grids, w, ps, pl, px, 1, f2, mask)};
    };

    CarlemanReport r;
    r.target = CarlemanTarget::Lemma22;
    r.s = s;
    r.lambda = lambda;
    r.lhs = {
        term("z", 6, 8, 6, d.value),
        term("grad_z", 4, 6, 4, d.grad),
        term("lap_z", 3, 4, 3, d.lap),
        term("hess_z", 2, 4, 2, d.hess),
        term("grad_lap_z", 1, 2, 1, d.grad_lap),
        term("z_t", -1, 0, -1, d.time),
        term("bilap_z", -1, 0, -1, d.bilap),
    };
    r.rhs = {
        term("observation", 7, 8, 7, d.value, setup.coefficients.control_mask),
        term("source", 0, 0, 0, squares(gz)),
    };
    finish(r, grids);
    return r;
}

CarlemanReport audit_theorem322(const AuditSetup& setup, const Vec& z0, const SourceTerm& g, double s,
                                double lambda) {
    const auto& grids = setup.grids;
    const auto& space = grids.space;
    const Mat zero = Mat::Zero(space.size(), grids.time.nodes());
    const Mat assembled = g.empty() ? zero : g.assemble(grids);
    const SpaceTimeField z = solve_backward(grids, setup.coefficients, AdjointMode::Transposition, z0, assembled);
    require_nondegenerate(grids, z.values);

    const WeightBundle w = eval_weights(setup.eta, s, lambda, grids.time, space);
    const DerivativeSquares d = derivative_squares(grids, z.values);
    const auto term = [&](const char* name, double ps, double pl, double px, const Mat& f2, const Vec& mask = Vec{}) {
        return WeightedTerm{name, log_weighted_integral(grids, w, ps, pl, px, 1, f2, mask)};
    };

    Mat gi2 = Mat::Zero(space.size(), grids.time.nodes());
    for (const auto& gi : g.gi()) gi2 += squares(gi);
    const Mat g0 = g.empty() || g.g0().size() == 0 ? zero : g.g0();

    CarlemanReport r;
    r.target = CarlemanTarget::Theorem322;
    r.s = s;
    r.lambda = lambda;
    r.lhs = {
        term("z", 6, 8, 6, d.value),
        term("grad_z", 4, 6, 4, d.grad),
        term("lap_z", 2, 4, 2, d.lap),
        term("hess_z", 2, 4, 2, d.hess),
    };
    r.rhs = {
        term("source_g0", 0, 0, 0, squares(g0)),
        term("source_gi", 2, 2, 2, gi2),
        term("observation", 7, 8, 7, d.value, setup.coefficients.control_mask),
    };
    finish(r, grids);
    return r;
}

ConstantSweep constant_sweep(const AuditSetup& setup, CarlemanTarget target, const Vec& z0, const SourceTerm& g,
                             const std::vector<double>& s_list, const std::vector<double>& lambda_list) {
    if (s_list.empty() || lambda_list.empty()) fail(ErrorKind::InvalidArgument, "constant sweep needs s and lambda");
    ConstantSweep sweep;
    sweep.target = target;
    for (double lambda : lambda_list) {
        for (double s : s_list) {
            ConstantSweepRow row;
            row.report = target == CarlemanTarget::Lemma22
                             ? audit_lemma22(setup, z0, g.empty() ? Mat{} : g.assemble(setup.grids), s, lambda)
                             : audit_theorem322(setup, z0, g, s, lambda);
            sweep.rows.push_back(std::move(row));
        }
    }
    std::stable_sort(sweep.rows.begin(), sweep.rows.end(), [](const auto& a, const auto& b) {
        if (a.report.lambda != b.report.lambda) return a.report.lambda < b.report.lambda;
        return a.report.s < b.report.s;
    });

    std::vector<double> logs;
    sweep.all_finite = true;
    for (const auto& r : sweep.rows) {
        logs.push_back(r.report.log_lhs - r.report.log_rhs);
        if (!std::isfinite(r.report.ratio) || !(r.report.ratio > 0)) sweep.all_finite = false;
    }
    std::vector<double> sorted = logs;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t m = sorted.size();
    const double log_median = m % 2 ? sorted[m / 2] : 0.5 * (sorted[m / 2 - 1] + sorted[m / 2]);
    sweep.median_ratio = std::exp(log_median);
    for (std::size_t i = 0; i < m; ++i) sweep.rows[i].flagged = logs[i] > log_median + std::log(10.0);
    return sweep;
}

void write_constant_sweep_csv(std::ostream& os, const ConstantSweep& sweep) {
    if (sweep.rows.empty()) return;
    const auto old = os.precision(17);
    const auto& first = sweep.rows.front().report;
    os << "s,lambda";
    for (const auto& t : first.lhs) os << ",log_" << t.name;
    for (const auto& t : first.rhs) os << ",log_" << t.name;
    os << ",ratio,log_ratio,flag\n";
    for (const auto& row : sweep.rows) {
        const auto& r = row.report;
        os << r.s << ',' << r.lambda;
        for (const auto& t : r.lhs) os << ',' << t.log_value;
        for (const auto& t : r.rhs) os << ',' << t.log_value;
        os << ',' << r.ratio << ',' << (r.log_lhs - r.log_rhs) << ',' << (row.flagged ? 1 : 0) << '\n';
    }
    os.precision(old);
}

nlohmann::json constant_sweep_summary(const ConstantSweep& sweep) {
    std::map<double, std::pair<double, double>> per_lambda;  // max, min ratio
    for (const auto& row : sweep.rows) {
        auto [it, fresh] = per_lambda.try_emplace(row.report.lambda, row.report.ratio, row.report.ratio);
        if (!fresh) {
            it->second.first = std::max(it->second.first, row.report.ratio);
            it->second.second = std::min(it->second.second, row.report.ratio);
        }
    }
    nlohmann::json constants = nlohmann::json::array();
    for (const auto& [lambda, mm] : per_lambda)
        constants.push_back({{"lambda", lambda},
                             {"C", mm.first},
                             {"max_over_min", mm.second > 0 ? mm.first / mm.second : 0.0}});
    int flagged = 0;
    for (const auto& row : sweep.rows) flagged += row.flagged;
    return {
        {"target", to_string(sweep.target)},
        {"rows", sweep.rows.size()},
        {"median_ratio", sweep.median_ratio},
        {"flagged", flagged},
        {"all_finite", sweep.all_finite},
        {"constants", constants},
    };
}

// ---------------------------------------------------------------------------
// Weighted extremal problem in extended precision.

namespace {

namespace bmp = boost::multiprecision;
using Real = bmp::number<bmp::mpfr_float_backend<0>, bmp::et_off>;
using RVec = Eigen::Matrix<Real, Eigen::Dynamic, 1>;
using RMat = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic>;

class PrecisionScope {
public:
    explicit PrecisionScope(unsigned digits) : old_(Real::default_precision()) { Real::default_precision(digits); }
    ~PrecisionScope() { Real::default_precision(old_); }
    PrecisionScope(const PrecisionScope&) = delete;
    PrecisionScope& operator=(const PrecisionScope&) = delete;

private:
    unsigned old_;
};

RVec matvec(const RMat& a, const RVec& x) {
    RVec y(a.rows());
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        Real acc = 0;
        for (Eigen::Index k = 0; k < a.cols(); ++k) acc += a(i, k) * x(k);
        y(i) = acc;
    }
    return y;
}

Real dot(const RVec& a, const RVec& b) {
    Real acc = 0;
    for (Eigen::Index i = 0; i < a.size(); ++i) acc += a(i) * b(i);
    return acc;
}

// Sine-spectral operators of the grid rebuilt in Real arithmetic.
struct RealSpectral {
    int dim = 1;
    std::array<int, 2> n{1, 1};
    Eigen::Index size = 0;
    std::array<RMat, 2> sine, first, second;
    RVec mu;

    explicit RealSpectral(const SpatialGrid& g) : dim(g.dim()), size(g.size()) {
        const Real pi = acos(Real(-1));
        for (int a = 0; a < dim; ++a) {
            const int m = g.nodes(a);
            n[a] = m;
            const Real scale = sqrt(Real(2) / (m + 1));
            RMat cosine(m, m);
            sine[a].resize(m, m);
            RVec k(m);
            for (int j = 0; j < m; ++j) {
                for (int q = 0; q < m; ++q) {
                    const Real arg = pi * (j + 1) * (q + 1) / (m + 1);
                    sine[a](j, q) = scale * sin(arg);
                    cosine(j, q) = scale * cos(arg);
                }
                k(j) = pi * (j + 1) / Real(g.extent(a));
            }
            first[a] = cosine * k.asDiagonal() * sine[a];
            RVec k2 = k.cwiseProduct(k);
            second[a] = -(sine[a] * k2.asDiagonal() * sine[a]);
            if (a == 0) mu.resize(size);
        }
        for (int k1 = 0; k1 < n[1]; ++k1) {
            for (int k0 = 0; k0 < n[0]; ++k0) {
                Real lap = pow(pi * (k0 + 1) / Real(g.extent(0)), 2);
                if (dim == 2) lap += pow(pi * (k1 + 1) / Real(g.extent(1)), 2);
                mu(k0 + static_cast<Eigen::Index>(n[0]) * k1) = lap * lap;
            }
        }
    }

    RVec apply(const RMat& op, int axis, const RVec& v) const {
        if (dim == 1) return matvec(op, v);
        RVec out(size);
        const int n0 = n[0], n1 = n[1];
        if (axis == 0) {
            RVec col(n0);
            for (int j = 0; j < n1; ++j) {
                for (int i = 0; i < n0; ++i) col(i) = v(i + n0 * j);
                const RVec r = matvec(op, col);
                for (int i = 0; i < n0; ++i) out(i + n0 * j) = r(i);
            }
        } else {
            RVec row(n1);
            for (int i = 0; i < n0; ++i) {
                for (int j = 0; j < n1; ++j) row(j) = v(i + n0 * j);
                const RVec r = matvec(op, row);
                for (int j = 0; j < n1; ++j) out(i + n0 * j) = r(j);
            }
        }
        return out;
    }

    RVec transform(const RVec& v) const {
        RVec out = apply(sine[0], 0, v);
        return dim == 2 ? apply(sine[1], 1, out) : out;
    }
    RVec derivative(int a, const RVec& v) const { return apply(first[a], a, v); }
    RVec second_derivative(int a, int b, const RVec& v) const {
        return a == b ? apply(second[a], a, v) : derivative(b, derivative(a, v));
    }
};

// The extremal problem in the scaled unknowns
//   W = sqrt(dt h) e^{-s alpha} w,   U = sqrt(dt h / sigma) u,   sigma = s^7 lambda^8 xi^7 e^{2 s alpha},
// where J = |W|^2 / 2 + |U|^2 / 2 and W = b + A U.
class DualSystem {
public:
    DualSystem(const AuditSetup& setup, const Mat& z, double s, double lambda)
        : grids_(setup.grids), spec_(setup.grids.space), s_(s), lambda_(lambda) {
        const auto& g = grids_.space;
        steps_ = grids_.time.steps;
        size_ = g.size();
        const Real dt = Real(grids_.time.T) / steps_;
        dt_ = dt;
        cell_ = Real(g.cell_volume());

        for (Eigen::Index k = 0; k < size_; ++k)
            if (setup.coefficients.control_mask(k) != 0.0) omega_.push_back(k);

        // ETD weights per mode
        const Eigen::Index m = size_;
        decay_.resize(m);
        lead_.resize(m);
        trail_.resize(m);
        for (Eigen::Index k = 0; k < m; ++k) {
            const Real zz = dt * spec_.mu(k);
            decay_(k) = exp(-zz);
            const Real phi1 = -expm1(-zz) / zz;
            Real lead;
            if (zz < 0.5) {
                Real term = 1, sum = 0;
                for (int q = 0; q < 200; ++q) {
                    sum += term / (q + 2);
                    term *= -zz / (q + 1);
                }
                lead = sum;
            } else {
                lead = (-expm1(-zz) - zz * exp(-zz)) / (zz * zz);
            }
            lead_(k) = dt * lead;
            trail_(k) = dt * (phi1 - lead);
        }

        // weights at interior nodes n = 1 .. steps - 1
        const Real T = Real(grids_.time.T);
        const Real L = Real(lambda);
        const Real S = Real(s);
        const Real sup = Real(setup.eta.sup_norm);
        const Vec eta = setup.eta.sample(g.points());
        s_alpha_.resize(size_, steps_ + 1);
        log_xi_.resize(size_, steps_ + 1);
        for (int n = 1; n < steps_; ++n) {
            const Real t = dt * n;
            const Real theta = 1 / sqrt(t * (T - t));
            for (Eigen::Index k = 0; k < size_; ++k) {
                const Real e = Real(eta(k));
                s_alpha_(k, n) = S * exp(4 * L * sup) * expm1(L * (e - 2 * sup)) * theta;
                log_xi_(k, n) = L * (2 * sup + e) + log(theta);
            }
        }
        const Real sqrt_q = sqrt(dt * cell_);
        r_.resize(size_, steps_ + 1);
        c_.resize(size_, steps_ + 1);
        const Real log_s = log(S), log_l = log(L);
        for (int n = 1; n < steps_; ++n) {
            for (Eigen::Index k = 0; k < size_; ++k) {
                r_(k, n) = sqrt_q * exp(-s_alpha_(k, n));
                const Real log_sigma = 7 * log_s + 8 * log_l + 7 * log_xi_(k, n) + 2 * s_alpha_(k, n);
                c_(k, n) = exp(log_sigma / 2) / sqrt_q;
            }
        }

        z_.resize(size_, steps_ + 1);
        f_ = RMat::Zero(size_, steps_ + 1);
        for (int n = 0; n <= steps_; ++n)
            for (Eigen::Index k = 0; k < size_; ++k) z_(k, n) = Real(z(k, n));
        for (int n = 1; n < steps_; ++n) {
            for (Eigen::Index k = 0; k < size_; ++k) {
                const Real log_w = 6 * log_s + 8 * log_l + 6 * log_xi_(k, n) + 2 * s_alpha_(k, n);
                f_(k, n) = exp(log_w) * z_(k, n);
            }
        }
        b_ = restrict_scaled(march(f_));
    }

    Eigen::Index unknowns() const { return static_cast<Eigen::Index>(omega_.size()) * (steps_ - 1); }
    const RVec& b() const { return b_; }

    // Forward solution w at all nodes from a nodal source (zero initial datum).
    RMat march(const RMat& source) const {
        RMat w = RMat::Zero(size_, steps_ + 1);
        RVec wh = RVec::Zero(size_);
        RVec sh = spec_.transform(source.col(0));
        for (int n = 0; n < steps_; ++n) {
            const RVec sn = spec_.transform(source.col(n + 1));
            for (Eigen::Index k = 0; k < size_; ++k)
                wh(k) = decay_(k) * wh(k) + lead_(k) * sh(k) + trail_(k) * sn(k);
            sh = sn;
            w.col(n + 1) = spec_.transform(wh);
        }
        return w;
    }

    // Gradient of sum_n <loads_n, w_n> with respect to the source at every node.
    RMat transpose_march(const RMat& loads) const {
        std::vector<RVec> lam(steps_ + 1);
        lam[steps_] = spec_.transform(loads.col(steps_));
        for (int n = steps_ - 1; n >= 0; --n) {
            RVec cur = spec_.transform(loads.col(n));
            for (Eigen::Index k = 0; k < size_; ++k) cur(k) += decay_(k) * lam[n + 1](k);
            lam[n] = std::move(cur);
        }
        RMat grad(size_, steps_ + 1);
        for (int n = 0; n <= steps_; ++n) {
            RVec gh = RVec::Zero(size_);
            for (Eigen::Index k = 0; k < size_; ++k) {
                if (n < steps_) gh(k) += lead_(k) * lam[n + 1](k);
                if (n >= 1) gh(k) += trail_(k) * lam[n](k);
            }
            grad.col(n) = spec_.transform(gh);
        }
        return grad;
    }

    RMat control_from(const RVec& U) const {
        RMat u = RMat::Zero(size_, steps_ + 1);
        Eigen::Index idx = 0;
        for (int n = 1; n < steps_; ++n)
            for (Eigen::Index k : omega_) u(k, n) = c_(k, n) * U(idx++);
        return u;
    }

    RVec restrict_scaled(const RMat& w) const {
        RVec out(static_cast<Eigen::Index>(size_) * (steps_ - 1));
        Eigen::Index idx = 0;
        for (int n = 1; n < steps_; ++n)
            for (Eigen::Index k = 0; k < size_; ++k) out(idx++) = r_(k, n) * w(k, n);
        return out;
    }

    RVec apply_A(const RVec& U) const { return restrict_scaled(march(control_from(U))); }

    RVec apply_At(const RVec& R) const {
        RMat loads = RMat::Zero(size_, steps_ + 1);
        Eigen::Index idx = 0;
        for (int n = 1; n < steps_; ++n)
            for (Eigen::Index k = 0; k < size_; ++k) loads(k, n) = r_(k, n) * R(idx++);
        const RMat grad = transpose_march(loads);
        RVec out(unknowns());
        idx = 0;
        for (int n = 1; n < steps_; ++n)
            for (Eigen::Index k : omega_) out(idx++) = c_(k, n) * grad(k, n);
        return out;
    }

    RVec normal(const RVec& U) const { return U + apply_At(apply_A(U)); }


    // fields and report
    void fill(const RVec& U, DualExtremalResult& res) const {
        const RMat u = control_from(U);
        RMat source = f_ + u;
        const RMat w = march(source);

        RMat loads = RMat::Zero(size_, steps_ + 1);
        for (int n = 1; n < steps_; ++n)
            for (Eigen::Index k = 0; k < size_; ++k) loads(k, n) = r_(k, n) * r_(k, n) * w(k, n);
        RMat p = transpose_march(loads);
        for (int n = 0; n <= steps_; ++n) {
            const Real q = (n == 0 || n == steps_ ? dt_ / 2 : dt_) * cell_;
            p.col(n) /= q;
        }

        res.w.values = to_double(w);
        res.u.values = to_double(u);
        res.p.values = to_double(p);

        // stationarity u + sigma p on omega, in the scaled norm
        Real num = 0, den = 0;
        for (int n = 1; n < steps_; ++n) {
            for (Eigen::Index k : omega_) {
                // sigma = c^2 dt h, so (u + sigma p) / c = U + c dt h p
                const Real scaled_u = u(k, n) / c_(k, n);
                const Real scaled_res = scaled_u + c_(k, n) * dt_ * cell_ * p(k, n);
                num += scaled_res * scaled_res;
                den += scaled_u * scaled_u;
            }
        }
        res.stationarity_residual = den > 0 ? static_cast<double>(sqrt(num / den)) : 0.0;

        Real wmax = 0;
        for (int n = 0; n < steps_; ++n) wmax = std::max(wmax, Real(w.col(n).norm()));
        res.terminal_ratio = wmax > 0 ? static_cast<double>(Real(w.col(steps_).norm()) / wmax) : 0.0;

        // cost and bound terms
        const Real log_s = log(Real(s_)), log_l = log(Real(lambda_));
        const int dim = spec_.dim;
        Real cost = 0, t_grad = 0, t_lap = 0, t_hess = 0, t_val = 0, t_u = 0, rhs = 0;
        for (int n = 1; n < steps_; ++n) {
            const RVec wn = w.col(n);
            std::vector<RVec> d1(dim);
            for (int a = 0; a < dim; ++a) d1[a] = spec_.derivative(a, wn);
            RVec lap = RVec::Zero(size_);
            RVec hess2 = RVec::Zero(size_);
            for (int a = 0; a < dim; ++a) {
                for (int bb = 0; bb < dim; ++bb) {
                    const RVec h = spec_.second_derivative(a, bb, wn);
                    if (a == bb) lap += h;
                    hess2 += h.cwiseProduct(h);
                }
            }
            for (Eigen::Index k = 0; k < size_; ++k) {
                const Real q = dt_ * cell_;
                const Real rho = exp(-2 * s_alpha_(k, n));
                const Real sl = exp(log_s + log_l + log_xi_(k, n));  // s lambda xi
                Real grad2 = 0;
                for (int a = 0; a < dim; ++a) grad2 += d1[a](k) * d1[a](k);
                const Real w2 = wn(k) * wn(k);
                t_val += q * rho * w2;
                t_grad += q * rho * grad2 / (sl * sl);
                const Real sl4 = sl * sl * sl * sl;
                t_lap += q * rho * lap(k) * lap(k) / sl4;
                t_hess += q * rho * hess2(k) / sl4;
                const Real log_sigma = 7 * log_s + 8 * log_l + 7 * log_xi_(k, n) + 2 * s_alpha_(k, n);
                const Real uu = u(k, n) * u(k, n);
                if (uu != 0) t_u += q * uu * exp(-log_sigma);
                const Real log_rw = 6 * log_s + 8 * log_l + 6 * log_xi_(k, n) + 2 * s_alpha_(k, n);
                rhs += q * exp(log_rw) * z_(k, n) * z_(k, n);
            }
        }
        cost = (t_val + t_u) / 2;
        const auto lg = [](const Real& v) {
            return v > 0 ? static_cast<double>(log(v)) : -std::numeric_limits<double>::infinity();
        };
        res.log_cost = lg(cost);
        res.bound_lhs = {
            {"grad_w", lg(t_grad)}, {"lap_w", lg(t_lap)}, {"hess_w", lg(t_hess)},
            {"w", lg(t_val)},       {"u", lg(t_u)},
        };
        res.bound_rhs = {"z", lg(rhs)};
        res.log_bound_lhs = lg(t_grad + t_lap + t_hess + t_val + t_u);
        res.quotient = std::isfinite(res.log_bound_lhs) ? std::exp(res.log_bound_lhs - res.bound_rhs.log_value) : 0.0;
    }

    Real max_abs_s_alpha() const {
        Real m = 0;
        for (int n = 1; n < steps_; ++n)
            for (Eigen::Index k = 0; k < size_; ++k) m = std::max(m, Real(abs(s_alpha_(k, n))));
        return m;
    }

private:
    static Mat to_double(const RMat& m) {
        Mat out(m.rows(), m.cols());
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            for (Eigen::Index i = 0; i < m.rows(); ++i) out(i, j) = static_cast<double>(m(i, j));
        return out;
    }

    const Grids& grids_;
    RealSpectral spec_;
    double s_, lambda_;
    int steps_ = 0;
    Eigen::Index size_ = 0;
    Real dt_, cell_;
    std::vector<Eigen::Index> omega_;
    RVec decay_, lead_, trail_;
    RMat s_alpha_, log_xi_, r_, c_, z_, f_;
    RVec b_;
};

struct CgResult {
    RVec x;
    int iterations = 0;
    bool converged = false;
};

// CG with full reorthogonalization of the residuals; the normal matrix spans
// many decades and plain CG loses orthogonality long before n steps.
CgResult solve_cg(const DualSystem& sys, const RVec& rhs, double tol, int max_iter) {
    CgResult out;
    out.x = RVec::Zero(rhs.size());
    if (sqrt(dot(rhs, rhs)) == 0) {
        out.converged = true;
        return out;
    }
    const Real target = Real(tol);
    std::vector<RVec> basis;
    RVec r = rhs;
    RVec d = r;
    Real rr = dot(r, r);
    while (out.iterations < max_iter) {
        basis.push_back(r / sqrt(rr));
        const RVec q = sys.normal(d);
        const Real step = rr / dot(d, q);
        out.x += step * d;
        r -= step * q;
        ++out.iterations;
        for (int pass = 0; pass < 2; ++pass)
            for (const RVec& v : basis) r -= dot(v, r) * v;
        const Real xn = sqrt(dot(out.x, out.x));
        if (sqrt(dot(r, r)) <= target * xn) {
            const RVec true_r = rhs - sys.normal(out.x);
            if (sqrt(dot(true_r, true_r)) <= target * xn) {
                out.converged = true;
                break;
            }
            r = true_r;
            basis.clear();
            d = r;
            rr = dot(r, r);
            continue;
        }
        if (static_cast<Eigen::Index>(basis.size()) >= rhs.size()) {
            // Krylov space exhausted; restart from the true residual
            r = rhs - sys.normal(out.x);
            basis.clear();
            d = r;
            rr = dot(r, r);
            continue;
        }
        const Real rr_next = dot(r, r);
        d = r + (rr_next / rr) * d;
        rr = rr_next;
    }
    return out;
}

RVec solve_dense(const DualSystem& sys) {
    const Eigen::Index m = sys.unknowns();
    RMat G(m, m);
    for (Eigen::Index j = 0; j < m; ++j) {
        RVec e = RVec::Zero(m);
        e(j) = 1;
        G.col(j) = sys.normal(e);
    }
    RMat Gs = (G + G.transpose()) / 2;
    const RVec rhs = -sys.apply_At(sys.b());
    Eigen::LLT<RMat> llt(Gs);
    return llt.solve(rhs);
}

}  // namespace

DualExtremalResult solve_dual_extremal(const AuditSetup& setup, const SpaceTimeField& z, double s, double lambda,
                                       const DualExtremalOptions& options) {
    const auto& grids = setup.grids;
    if (z.values.rows() != grids.space.size() || z.values.cols() != grids.time.nodes())
        fail(ErrorKind::ShapeMismatch, "datum z does not match the space-time grid");
    if (!(s > 0) || !(lambda > 0)) fail(ErrorKind::InvalidArgument, "s and lambda must be positive");

    DualExtremalResult res;
    res.s = s;
    res.lambda = lambda;

    // Precision covers the dynamic range e^{+-2 s |alpha|} of the weights and
    // the polynomial factors (s lambda xi)^14.
    const WeightBundle wb = eval_weights(setup.eta, s, lambda, grids.time, grids.space);
    const double max_sa = wb.s_alpha.cwiseAbs().maxCoeff();
    const double max_slx = std::log10(s * lambda) + wb.log_xi.maxCoeff() / std::log(10.0);
    res.digits = 40 + static_cast<int>(std::ceil(2.0 * max_sa / std::log(10.0))) +
                 static_cast<int>(std::ceil(14.0 * std::max(0.0, max_slx)));
    PrecisionScope scope(static_cast<unsigned>(res.digits));

    const DualSystem sys(setup, z.values, s, lambda);
    res.unknowns = static_cast<int>(sys.unknowns());

    if (z.values.cwiseAbs().maxCoeff() == 0.0) {
        sys.fill(RVec::Zero(sys.unknowns()), res);
        res.quotient = 0.0;
        return res;
    }

    const RVec rhs = -sys.apply_At(sys.b());
    const int max_iter = options.max_iterations > 0 ? options.max_iterations : 4 * res.unknowns;
    using Method = DualExtremalOptions::Method;

    RVec U;
    if (options.method == Method::Dense) {
        if (res.unknowns > options.dense_limit)
            fail(ErrorKind::InvalidArgument, "dense extremal solve above the size limit");
        U = solve_dense(sys);
        res.used_dense = true;
    } else {
        CgResult cg = solve_cg(sys, rhs, options.tolerance, max_iter);
        res.iterations = cg.iterations;
        U = cg.x;
        if (!cg.converged) {
            if (res.unknowns > options.dense_limit)
                fail(ErrorKind::CoupledSolveDivergence,
                     "CG on the extremal problem stalled after " + std::to_string(cg.iterations) + " iterations");
            U = solve_dense(sys);
            res.used_dense = true;
        } else if (options.method == Method::Both) {
            const RVec Ud = solve_dense(sys);
            const Real diff = sqrt(dot(RVec(U - Ud), RVec(U - Ud)));
            const Real ref = sqrt(dot(Ud, Ud));
            res.dense_agreement = ref > 0 ? static_cast<double>(diff / ref) : static_cast<double>(diff);
        }
    }
    sys.fill(U, res);
    return res;
}

nlohmann::json dual_extremal_summary(const DualExtremalResult& r) {
    nlohmann::json terms = nlohmann::json::object();
    for (const auto& t : r.bound_lhs) terms["log_" + t.name] = t.log_value;
    const auto finite_or_null = [](double v) -> nlohmann::json {
        if (std::isfinite(v)) return v;
        return nullptr;
    };
    return {
        {"s", r.s},
        {"lambda", r.lambda},
        {"log_cost", finite_or_null(r.log_cost)},
        {"bound_lhs", terms},
        {"log_bound_rhs", finite_or_null(r.bound_rhs.log_value)},
        {"quotient", r.quotient},
        {"stationarity_residual", r.stationarity_residual},
        {"terminal_ratio", r.terminal_ratio},
        {"iterations", r.iterations},
        {"used_dense", r.used_dense},
        {"dense_agreement", finite_or_null(r.dense_agreement)},
        {"digits", r.digits},
        {"unknowns", r.unknowns},
    };
}

}  // namespace nullctl
