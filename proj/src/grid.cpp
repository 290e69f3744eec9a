#include "nullctl/grid.hpp"

#include <cmath>
#include <numbers>

namespace nullctl {

namespace {

AxisOperators make_axis(int n, double length) {
    AxisOperators ops;
    const double scale = std::sqrt(2.0 / (n + 1));
    const double base = std::numbers::pi / (n + 1);
    Mat cosine(n, n);
    ops.sine.resize(n, n);
    ops.wavenumber.resize(n);
    for (int j = 0; j < n; ++j) {
        for (int k = 0; k < n; ++k) {
            const double arg = base * (j + 1) * (k + 1);
            ops.sine(j, k) = scale * std::sin(arg);
            cosine(j, k) = scale * std::cos(arg);
        }
    }
    for (int k = 0; k < n; ++k) ops.wavenumber(k) = (k + 1) * std::numbers::pi / length;

    ops.derivative = cosine * ops.wavenumber.asDiagonal() * ops.sine;
    ops.second = -ops.sine * ops.wavenumber.array().square().matrix().asDiagonal() * ops.sine;

    const int cutoff = (2 * n) / 3;
    Vec keep = Vec::Zero(n);
    keep.head(cutoff).setOnes();
    ops.dealias = ops.sine * keep.asDiagonal() * ops.sine;
    return ops;
}

}  // namespace

SpatialGrid::SpatialGrid(int dim, std::array<int, 2> nodes, std::array<double, 2> extent)
    : dim_(dim), n_(nodes), extent_(extent) {
    if (dim != 1 && dim != 2) fail(ErrorKind::InvalidArgument, "grid dimension must be 1 or 2");
    if (dim == 1) {
        n_[1] = 1;
        extent_[1] = 1.0;
    }
    for (int a = 0; a < dim; ++a) {
        if (n_[a] < 2) fail(ErrorKind::InvalidArgument, "grid needs at least two nodes per axis");
        if (!(extent_[a] > 0.0)) fail(ErrorKind::InvalidArgument, "grid extent must be positive");
        ops_[a] = make_axis(n_[a], extent_[a]);
    }
    size_ = static_cast<Eigen::Index>(n_[0]) * n_[1];
    cell_ = spacing(0) * (dim == 2 ? spacing(1) : 1.0);

    mu_.resize(size_);
    nu_.resize(size_);
    for (int k1 = 0; k1 < n_[1]; ++k1) {
        for (int k0 = 0; k0 < n_[0]; ++k0) {
            double lap = std::pow(ops_[0].wavenumber(k0), 2);
            if (dim == 2) lap += std::pow(ops_[1].wavenumber(k1), 2);
            const Eigen::Index idx = k0 + static_cast<Eigen::Index>(n_[0]) * k1;
            nu_(idx) = -lap;
            mu_(idx) = lap * lap;
        }
    }
}

Mat SpatialGrid::points() const {
    Mat p(dim_, size_);
    for (int j = 0; j < n_[1]; ++j) {
        for (int i = 0; i < n_[0]; ++i) {
            const Eigen::Index idx = i + static_cast<Eigen::Index>(n_[0]) * j;
            p(0, idx) = coordinate(0, i);
            if (dim_ == 2) p(1, idx) = coordinate(1, j);
        }
    }
    return p;
}

Vec SpatialGrid::apply_axis(const Mat& op, int axis, const Vec& v) const {
    if (v.size() != size_) fail(ErrorKind::ShapeMismatch, "field size does not match the grid");
    if (dim_ == 1) return op * v;
    Vec out(size_);
    Eigen::Map<const Mat> in(v.data(), n_[0], n_[1]);
    Eigen::Map<Mat> res(out.data(), n_[0], n_[1]);
    if (axis == 0)
        res.noalias() = op * in;
    else
        res.noalias() = in * op.transpose();
    return out;
}

Vec SpatialGrid::to_modal(const Vec& v) const {
    Vec out = apply_axis(ops_[0].sine, 0, v);
    if (dim_ == 2) out = apply_axis(ops_[1].sine, 1, out);
    return out;
}

Vec SpatialGrid::derivative(int axis, const Vec& v) const {
    return apply_axis(ops_[axis].derivative, axis, v);
}

Vec SpatialGrid::derivative_transpose(int axis, const Vec& v) const {
    return apply_axis(ops_[axis].derivative.transpose(), axis, v);
}

Vec SpatialGrid::second_derivative(int a, int b, const Vec& v) const {
    if (a == b) return apply_axis(ops_[a].second, a, v);
    return derivative(b, derivative(a, v));
}

Vec SpatialGrid::second_derivative_transpose(int a, int b, const Vec& v) const {
    if (a == b) return apply_axis(ops_[a].second, a, v);
    return derivative_transpose(a, derivative_transpose(b, v));
}

Vec SpatialGrid::laplacian(const Vec& v) const {
    Vec modal = to_modal(v);
    return to_nodal(nu_.cwiseProduct(modal));
}

Vec SpatialGrid::bilaplacian(const Vec& v) const {
    Vec modal = to_modal(v);
    return to_nodal(mu_.cwiseProduct(modal));
}

Vec SpatialGrid::dealias(const Vec& v) const {
    Vec out = apply_axis(ops_[0].dealias, 0, v);
    if (dim_ == 2) out = apply_axis(ops_[1].dealias, 1, out);
    return out;
}

Vec SpatialGrid::mask(const Box& box) const {
    Mat p = points();
    Vec m(size_);
    for (Eigen::Index k = 0; k < size_; ++k) m(k) = box.contains(p.col(k).data(), dim_) ? 1.0 : 0.0;
    return m;
}

}  // namespace nullctl
