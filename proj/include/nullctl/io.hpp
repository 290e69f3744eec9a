#pragma once

#include "nullctl/grid.hpp"
#include "nullctl/solver.hpp"

#include <iosfwd>

namespace nullctl {

/// Binary trajectory layout, little-endian:
///   int32 dim, int32 N[dim], int32 Nt, float64 T,
///   then Nt + 1 slices of prod(N) float64 values, first axis fastest.
void write_trajectory(std::ostream& os, const Grids& grids, const SpaceTimeField& field);

struct Trajectory {
    int dim = 1;
    std::array<int, 2> nodes{0, 1};
    int steps = 0;
    double T = 0.0;
    Mat values;  ///< size x (steps + 1)
};

/// Throws InvalidArgument on a truncated or inconsistent stream.
Trajectory read_trajectory(std::istream& is);

/// 1D only; columns t, x, value, time-major.
void write_trajectory_csv(std::ostream& os, const Grids& grids, const SpaceTimeField& field);

}  // namespace nullctl
