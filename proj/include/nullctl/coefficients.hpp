#pragma once

#include "nullctl/core.hpp"
#include "nullctl/grid.hpp"

#include <optional>
#include <string>
#include <vector>

namespace nullctl {

/// Named analytic profile sampled onto a space-time grid.
///
///  - const:       value
///  - sinusoidal:  value + amplitude * prod_i sin(mode_i pi x_i / L_i) * cos(frequency t)
///  - bump:        amplitude * smooth compactly supported bump on `support`,
///                 optionally multiplied by a bump in time on (t_lo, t_hi)
struct Profile {
    enum class Kind { Const, Sinusoidal, Bump };

    Kind kind = Kind::Const;
    double value = 0.0;
    double amplitude = 0.0;
    std::array<int, 2> mode{1, 1};
    double frequency = 0.0;
    Box support;
    std::optional<std::array<double, 2>> time_window;

    static Profile constant(double v) {
        Profile p;
        p.value = v;
        return p;
    }

    Mat sample(const Grids& grids) const;
    bool operator==(const Profile&) const = default;
};

std::string to_string(Profile::Kind kind);
Profile::Kind profile_kind_from_string(const std::string& name);

/// Source either as a plain field or in divergence form g0 + sum_i d(g_i)/dx_i.
/// Fields are size x time-nodes matrices.
class SourceTerm {
public:
    SourceTerm() = default;
    static SourceTerm plain(Mat g);
    static SourceTerm divergence(Mat g0, std::vector<Mat> gi);

    bool is_divergence_form() const { return divergence_; }
    bool empty() const { return plain_.size() == 0 && g0_.size() == 0 && gi_.empty(); }
    const Mat& g0() const { return divergence_ ? g0_ : plain_; }
    const std::vector<Mat>& gi() const { return gi_; }

    /// The source as a single field (derivatives of g_i taken spectrally).
    Mat assemble(const Grids& grids) const;

private:
    bool divergence_ = false;
    Mat plain_;
    Mat g0_;
    std::vector<Mat> gi_;
};

/// Coefficients of the lower-order part a0 y + B0.grad y + D:hess y + a1 lap y,
/// sampled at every node of the space-time grid (size x time-nodes). Empty
/// matrices stand for identically zero coefficients. D is stored row-major,
/// entry (i, j) at index i * dim + j.
struct CoefficientSet {
    Mat a0;
    Mat a1;
    std::vector<Mat> b0;
    std::vector<Mat> d;
    Vec control_mask;  ///< chi_omega
    Vec inner_mask;    ///< chi_omega0

    static CoefficientSet zero(const Grids& grids, const DomainSpec& domain);
    static CoefficientSet zero(const Grids& grids);

    bool has_a0() const { return a0.size() > 0; }
    bool has_a1() const { return a1.size() > 0; }
    bool has_b0() const;
    bool has_d() const;
    bool has_lower_order() const { return has_a0() || has_a1() || has_b0() || has_d(); }

    /// Copy keeping only D and a1 (the transposition operator).
    CoefficientSet transposition_part() const;
    /// Copy with all lower-order terms removed.
    CoefficientSet free_part() const;

    /// Finite sup norms of every coefficient; throws InvalidArgument on non-finite data.
    struct SupNorms {
        double a0 = 0, a1 = 0, b0 = 0, d = 0;
    };
    SupNorms sup_norms() const;

    /// Throws ShapeMismatch unless every present field matches the grids.
    void check_shape(const Grids& grids) const;
};

}  // namespace nullctl
