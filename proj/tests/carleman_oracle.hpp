#pragma once

#include "nullctl/carleman.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <string>
#include <vector>

namespace carleman_oracle {

using namespace nullctl;

using Real = long double;

// Derivatives of a sine series on (0, 1), summed term by term.
struct SeriesDerivatives {
    std::vector<Real> value, d1, d2, d3, d4;
};

inline SeriesDerivatives series(const Vec& nodal) {
    const int N = static_cast<int>(nodal.size());
    const Real h = 1.0L / (N + 1), pi = std::numbers::pi_v<Real>;
    std::vector<Real> c(N + 1, 0.0L);
    for (int k = 1; k <= N; ++k)
        for (int j = 1; j <= N; ++j) c[k] += 2 * h * nodal(j - 1) * std::sin(k * pi * j * h);
    SeriesDerivatives d;
    for (int j = 1; j <= N; ++j) {
        Real v = 0, a = 0, b = 0, e = 0, f = 0;
        for (int k = 1; k <= N; ++k) {
            const Real w = k * pi, sn = std::sin(w * j * h), cs = std::cos(w * j * h);
            v += c[k] * sn;
            a += c[k] * w * cs;
            b -= c[k] * w * w * sn;
            e -= c[k] * w * w * w * cs;
            f += c[k] * w * w * w * w * sn;
        }
        d.value.push_back(v), d.d1.push_back(a), d.d2.push_back(b), d.d3.push_back(e), d.d4.push_back(f);
    }
    return d;
}

// Plain sums of s^ps lambda^pl xi^px e^{2 s alpha} |f|^2 dt h over interior
// times, weights from the closed form with eta = x (1 - x).
struct Oracle {
    double T, s, lambda;
    int steps;
    std::vector<SeriesDerivatives> slices;
    Mat z;

    Oracle(const Mat& z_, double T_, double s_, double lambda_) : T(T_), s(s_), lambda(lambda_), z(z_) {
        steps = static_cast<int>(z.cols()) - 1;
        for (int n = 0; n <= steps; ++n) slices.push_back(series(z.col(n)));
    }

    template <class F>
    Real integral(double ps, double pl, double px, F integrand, bool omega_only = false) const {
        const int N = static_cast<int>(z.rows());
        const Real h = 1.0L / (N + 1), dt = static_cast<Real>(T) / steps;
        Real sum = 0;
        for (int n = 1; n < steps; ++n) {
            const Real t = n * dt, root = std::sqrt(t * (T - t));
            for (int j = 0; j < N; ++j) {
                const Real x = (j + 1) * h;
                if (omega_only && !(x > 0.3L && x < 0.7L)) continue;
                const Real eta = x * (1 - x);
                const Real xi = std::exp(lambda * (eta + 0.5L)) / root;
                const Real alpha = (std::exp(lambda * (eta + 0.5L)) - std::exp(Real(lambda))) / root;
                sum += std::pow(Real(s), ps) * std::pow(Real(lambda), pl) * std::pow(xi, px) *
                       std::exp(2 * s * alpha) * integrand(n, j) * dt * h;
            }
        }
        return sum;
    }

    Real sq(const std::vector<Real> SeriesDerivatives::*m, int n, int j) const {
        const Real v = (slices[n].*m)[j];
        return v * v;
    }
};

inline std::map<std::string, Real> oracle_terms(const Oracle& o, CarlemanTarget target) {
    using S = SeriesDerivatives;
    const auto val = [&](int n, int j) { return o.sq(&S::value, n, j); };
    const auto d1 = [&](int n, int j) { return o.sq(&S::d1, n, j); };
    const auto d2 = [&](int n, int j) { return o.sq(&S::d2, n, j); };
    const auto d3 = [&](int n, int j) { return o.sq(&S::d3, n, j); };
    const auto d4 = [&](int n, int j) { return o.sq(&S::d4, n, j); };
    const Real dt = static_cast<Real>(o.T) / o.steps;
    const auto zt = [&](int n, int j) {
        const Real v = (static_cast<Real>(o.z(j, n + 1)) - o.z(j, n - 1)) / (2 * dt);
        return v * v;
    };
    std::map<std::string, Real> out{
        {"z", o.integral(6, 8, 6, val)},
        {"grad_z", o.integral(4, 6, 4, d1)},
        {"hess_z", o.integral(2, 4, 2, d2)},
        {"observation", o.integral(7, 8, 7, val, true)},
    };
    if (target == CarlemanTarget::Lemma22) {
        out["lap_z"] = o.integral(3, 4, 3, d2);
        out["grad_lap_z"] = o.integral(1, 2, 1, d3);
        out["z_t"] = o.integral(-1, 0, -1, zt);
        out["bilap_z"] = o.integral(-1, 0, -1, d4);
    } else {
        out["lap_z"] = o.integral(2, 4, 2, d2);
    }
    return out;
}

inline double worst_oracle_gap(const CarlemanReport& r, const std::map<std::string, Real>& expected) {
    double worst = 0.0;
    int matched = 0;
    for (const auto* side : {&r.lhs, &r.rhs}) {
        for (const auto& t : *side) {
            const auto it = expected.find(t.name);
            if (it == expected.end()) continue;
            ++matched;
            const Real e = it->second;
            worst = std::max(worst, static_cast<double>(std::abs(std::exp(Real(t.log_value)) - e) / e));
        }
    }
    return matched == static_cast<int>(expected.size()) ? worst : std::numeric_limits<double>::infinity();
}

}  // namespace carleman_oracle
