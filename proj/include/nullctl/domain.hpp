#pragma once

#include "nullctl/core.hpp"

#include <array>

namespace nullctl {

/// Axis-aligned open box (lo, hi) in one or two dimensions.
struct Box {
    std::array<double, 2> lo{0.0, 0.0};
    std::array<double, 2> hi{0.0, 0.0};

    bool contains(const double* x, int dim) const {
        for (int i = 0; i < dim; ++i)
            if (!(x[i] > lo[i] && x[i] < hi[i])) return false;
        return true;
    }

    bool operator==(const Box&) const = default;
};

/// Rectangular domain (0, L_1) x ... with a control region and an inner region.
///
/// Invariants: closure(inner) is contained in control, control is contained
/// in the domain, both boxes are nonempty.
struct DomainSpec {
    int dim = 1;
    std::array<double, 2> extent{1.0, 1.0};
    Box control;
    Box inner;

    /// Throws InvalidRegion naming the violated containment.
    void validate() const;

    std::array<double, 2> center() const { return {0.5 * extent[0], 0.5 * extent[1]}; }

    bool operator==(const DomainSpec&) const = default;
};

}  // namespace nullctl
