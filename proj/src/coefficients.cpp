#include "nullctl/coefficients.hpp"

#include <cmath>
#include <numbers>

namespace nullctl {

namespace {

double bump1(double u) {
    if (std::abs(u) >= 1.0) return 0.0;
    return std::exp(1.0 - 1.0 / (1.0 - u * u));
}

double max_abs(const Mat& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

void check_field(const Mat& m, const Grids& grids, const char* name) {
    if (m.size() == 0) return;
    if (m.rows() != grids.space.size() || m.cols() != grids.time.nodes())
        fail(ErrorKind::ShapeMismatch, std::string("coefficient ") + name + " has the wrong shape");
}

}  // namespace

std::string to_string(Profile::Kind kind) {
    switch (kind) {
        case Profile::Kind::Const: return "const";
        case Profile::Kind::Sinusoidal: return "sinusoidal";
        case Profile::Kind::Bump: return "bump";
    }
    return "const";
}

Profile::Kind profile_kind_from_string(const std::string& name) {
    if (name == "const") return Profile::Kind::Const;
    if (name == "sinusoidal") return Profile::Kind::Sinusoidal;
    if (name == "bump") return Profile::Kind::Bump;
    fail(ErrorKind::ConfigParse, "unknown profile '" + name + "'");
}

Mat Profile::sample(const Grids& grids) const {
    const auto& g = grids.space;
    const Mat pts = g.points();
    const int nt = grids.time.nodes();
    Mat out(g.size(), nt);

    Vec spatial(g.size());
    for (Eigen::Index k = 0; k < g.size(); ++k) {
        double v = 1.0;
        for (int a = 0; a < g.dim(); ++a) {
            const double x = pts(a, k);
            switch (kind) {
                case Kind::Const: break;
                case Kind::Sinusoidal:
                    v *= std::sin(mode[a] * std::numbers::pi * x / g.extent(a));
                    break;
                case Kind::Bump: {
                    const double c = 0.5 * (support.lo[a] + support.hi[a]);
                    const double r = 0.5 * (support.hi[a] - support.lo[a]);
                    v *= r > 0 ? bump1((x - c) / r) : 0.0;
                    break;
                }
            }
        }
        spatial(k) = v;
    }

    for (int n = 0; n < nt; ++n) {
        const double t = grids.time.time(n);
        switch (kind) {
            case Kind::Const: out.col(n).setConstant(value); break;
            case Kind::Sinusoidal:
                out.col(n) = (value + amplitude * std::cos(frequency * t) * spatial.array()).matrix();
                break;
            case Kind::Bump: {
                double w = 1.0;
                if (time_window) {
                    const auto [t0, t1] = *time_window;
                    w = bump1((t - 0.5 * (t0 + t1)) / (0.5 * (t1 - t0)));
                }
                out.col(n) = amplitude * w * spatial;
                break;
            }
        }
    }
    return out;
}

SourceTerm SourceTerm::plain(Mat g) {
    SourceTerm s;
    s.plain_ = std::move(g);
    return s;
}

SourceTerm SourceTerm::divergence(Mat g0, std::vector<Mat> gi) {
    SourceTerm s;
    s.divergence_ = true;
    s.g0_ = std::move(g0);
    s.gi_ = std::move(gi);
    return s;
}

Mat SourceTerm::assemble(const Grids& grids) const {
    const Eigen::Index m = grids.space.size();
    const int nt = grids.time.nodes();
    if (!divergence_) {
        if (plain_.size() == 0) return Mat::Zero(m, nt);
        if (plain_.rows() != m || plain_.cols() != nt)
            fail(ErrorKind::ShapeMismatch, "source has the wrong shape");
        return plain_;
    }
    Mat out = g0_.size() ? g0_ : Mat::Zero(m, nt);
    if (out.rows() != m || out.cols() != nt) fail(ErrorKind::ShapeMismatch, "g0 has the wrong shape");
    if (static_cast<int>(gi_.size()) > grids.space.dim())
        fail(ErrorKind::ShapeMismatch, "more divergence components than dimensions");
    for (std::size_t i = 0; i < gi_.size(); ++i) {
        if (gi_[i].size() == 0) continue;
        if (gi_[i].rows() != m || gi_[i].cols() != nt)
            fail(ErrorKind::ShapeMismatch, "g_i has the wrong shape");
        for (int n = 0; n < nt; ++n)
            out.col(n) += grids.space.derivative(static_cast<int>(i), gi_[i].col(n));
    }
    return out;
}

CoefficientSet CoefficientSet::zero(const Grids& grids) {
    CoefficientSet c;
    c.control_mask = Vec::Zero(grids.space.size());
    c.inner_mask = Vec::Zero(grids.space.size());
    return c;
}

CoefficientSet CoefficientSet::zero(const Grids& grids, const DomainSpec& domain) {
    CoefficientSet c;
    c.control_mask = grids.space.mask(domain.control);
    c.inner_mask = grids.space.mask(domain.inner);
    return c;
}

bool CoefficientSet::has_b0() const {
    for (const auto& b : b0)
        if (b.size()) return true;
    return false;
}

bool CoefficientSet::has_d() const {
    for (const auto& x : d)
        if (x.size()) return true;
    return false;
}

CoefficientSet CoefficientSet::transposition_part() const {
    CoefficientSet c = *this;
    c.a0.resize(0, 0);
    c.b0.clear();
    return c;
}

CoefficientSet CoefficientSet::free_part() const {
    CoefficientSet c;
    c.control_mask = control_mask;
    c.inner_mask = inner_mask;
    return c;
}

CoefficientSet::SupNorms CoefficientSet::sup_norms() const {
    SupNorms s;
    s.a0 = max_abs(a0);
    s.a1 = max_abs(a1);
    for (const auto& b : b0) s.b0 = std::max(s.b0, max_abs(b));
    for (const auto& x : d) s.d = std::max(s.d, max_abs(x));
    if (!std::isfinite(s.a0 + s.a1 + s.b0 + s.d))
        fail(ErrorKind::InvalidArgument, "coefficient field is not bounded");
    return s;
}

void CoefficientSet::check_shape(const Grids& grids) const {
    check_field(a0, grids, "a0");
    check_field(a1, grids, "a1");
    const int dim = grids.space.dim();
    if (static_cast<int>(b0.size()) > dim) fail(ErrorKind::ShapeMismatch, "B0 has too many components");
    if (static_cast<int>(d.size()) > dim * dim) fail(ErrorKind::ShapeMismatch, "D has too many components");
    for (const auto& b : b0) check_field(b, grids, "B0");
    for (const auto& x : d) check_field(x, grids, "D");
    if (control_mask.size() != grids.space.size())
        fail(ErrorKind::ShapeMismatch, "control mask does not match the grid");
    if (inner_mask.size() && inner_mask.size() != grids.space.size())
        fail(ErrorKind::ShapeMismatch, "inner mask does not match the grid");
}

}  // namespace nullctl
