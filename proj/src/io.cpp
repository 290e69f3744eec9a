#include "nullctl/io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>

namespace nullctl {

namespace {

static_assert(std::endian::native == std::endian::little, "trajectory IO assumes a little-endian host");

template <class T>
void put(std::ostream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& is) {
    T v{};
    if (!is.read(reinterpret_cast<char*>(&v), sizeof(T)))
        fail(ErrorKind::InvalidArgument, "trajectory stream is truncated");
    return v;
}

}  // namespace

void write_trajectory(std::ostream& os, const Grids& grids, const SpaceTimeField& field) {
    const SpatialGrid& s = grids.space;
    if (field.values.rows() != s.size() || field.values.cols() != grids.time.nodes())
        fail(ErrorKind::ShapeMismatch, "trajectory does not match the grids");
    put<std::int32_t>(os, s.dim());
    for (int a = 0; a < s.dim(); ++a) put<std::int32_t>(os, s.nodes(a));
    put<std::int32_t>(os, grids.time.steps);
    put<double>(os, grids.time.T);
    os.write(reinterpret_cast<const char*>(field.values.data()),
             static_cast<std::streamsize>(field.values.size() * sizeof(double)));
}

Trajectory read_trajectory(std::istream& is) {
    Trajectory t;
    t.dim = get<std::int32_t>(is);
    if (t.dim != 1 && t.dim != 2) fail(ErrorKind::InvalidArgument, "trajectory dimension must be 1 or 2");
    Eigen::Index size = 1;
    for (int a = 0; a < t.dim; ++a) {
        t.nodes[a] = get<std::int32_t>(is);
        if (t.nodes[a] < 1) fail(ErrorKind::InvalidArgument, "trajectory node count must be positive");
        size *= t.nodes[a];
    }
    t.steps = get<std::int32_t>(is);
    if (t.steps < 1) fail(ErrorKind::InvalidArgument, "trajectory step count must be positive");
    t.T = get<double>(is);
    t.values.resize(size, t.steps + 1);
    if (!is.read(reinterpret_cast<char*>(t.values.data()),
                 static_cast<std::streamsize>(t.values.size() * sizeof(double))))
        fail(ErrorKind::InvalidArgument, "trajectory stream is truncated");
    return t;
}

void write_trajectory_csv(std::ostream& os, const Grids& grids, const SpaceTimeField& field) {
    if (grids.space.dim() != 1) fail(ErrorKind::InvalidArgument, "CSV trajectory export is 1D only");
    os << "t,x,value\n";
    const auto old = os.precision(17);
    for (Eigen::Index n = 0; n < field.values.cols(); ++n)
        for (Eigen::Index i = 0; i < field.values.rows(); ++i)
            os << grids.time.time(static_cast<int>(n)) << ',' << grids.space.coordinate(0, static_cast<int>(i))
               << ',' << field.values(i, n) << '\n';
    os.precision(old);
}

}  // namespace nullctl
