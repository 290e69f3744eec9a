#pragma once

#include "nullctl/coefficients.hpp"
#include "nullctl/domain.hpp"
#include "nullctl/grid.hpp"

#include <cmath>
#include <numbers>
#include <random>

namespace testing_support {

using namespace nullctl;

inline DomainSpec line_domain() {
    DomainSpec d;
    d.control = Box{{0.3, 0}, {0.7, 0}};
    d.inner = Box{{0.4, 0}, {0.6, 0}};
    return d;
}

inline Grids line_grids(int n, double T, int steps) { return Grids{SpatialGrid::line(n), TimeGrid{T, steps}}; }

inline Vec sine_mode(const SpatialGrid& g, int k, double amplitude = 1.0) {
    Vec v(g.size());
    for (Eigen::Index i = 0; i < g.size(); ++i)
        v(i) = amplitude * std::sin(k * std::numbers::pi * g.coordinate(0, static_cast<int>(i)) / g.extent(0));
    return v;
}

/// Random combination of the first `modes` sine modes (1D).
inline Vec low_mode(const SpatialGrid& g, std::mt19937_64& rng, int modes = 4) {
    std::normal_distribution<double> n;
    Vec v = Vec::Zero(g.size());
    for (int k = 1; k <= modes; ++k) v += (n(rng) / k) * sine_mode(g, k);
    return v;
}

/// Smooth space-time field c0 + c1 cos(k pi x / L + phase) cos(w t).
inline Mat smooth_field(const Grids& grids, std::mt19937_64& rng, double scale) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const double c0 = scale * u(rng), c1 = 0.5 * scale * u(rng);
    const int k = 1 + static_cast<int>(3 * (u(rng) + 1.0) / 2.0);
    const double phase = u(rng), w = 3.0 * u(rng);
    Mat m(grids.space.size(), grids.time.nodes());
    for (int n = 0; n < grids.time.nodes(); ++n)
        for (Eigen::Index i = 0; i < grids.space.size(); ++i) {
            const double x = grids.space.coordinate(0, static_cast<int>(i));
            m(i, n) = c0 + c1 * std::cos(k * std::numbers::pi * x / grids.space.extent(0) + phase) *
                               std::cos(w * grids.time.time(n));
        }
    return m;
}

/// 1D coefficient set with smooth a0, B0, D, a1.
inline CoefficientSet random_coefficients(const Grids& grids, std::mt19937_64& rng, bool a0_b0 = true,
                                          bool d_a1 = true) {
    CoefficientSet c = CoefficientSet::zero(grids, line_domain());
    if (a0_b0) {
        c.a0 = smooth_field(grids, rng, 2.0);
        c.b0 = {smooth_field(grids, rng, 1.0)};
    }
    if (d_a1) {
        c.d = {smooth_field(grids, rng, 0.3)};
        c.a1 = smooth_field(grids, rng, 0.3);
    }
    return c;
}

inline Mat random_field(const Grids& grids, std::mt19937_64& rng) {
    Mat m(grids.space.size(), grids.time.nodes());
    for (int n = 0; n < grids.time.nodes(); ++n) m.col(n) = low_mode(grids.space, rng);
    return m;
}

}  // namespace testing_support
