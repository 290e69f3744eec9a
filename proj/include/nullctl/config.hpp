#pragma once

#include "nullctl/coefficients.hpp"
#include "nullctl/domain.hpp"
#include "nullctl/grid.hpp"
#include "nullctl/hum.hpp"
#include "nullctl/semilinear.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace nullctl {

/// Initial datum (or terminal datum for the audits).
///  - sine:    amplitude * prod_i sin(mode_i pi x_i / L_i)
///  - random:  sum over k_i <= modes of N(0, 1) / |k|^2 sine modes, scaled to
///             L2 norm `amplitude`; drawn from the experiment seed
struct InitialDatum {
    enum class Kind { Sine, Random };
    Kind kind = Kind::Sine;
    double amplitude = 1.0;
    std::array<int, 2> mode{1, 1};
    int modes = 4;

    Vec sample(const SpatialGrid& grid, std::uint64_t seed) const;
    bool operator==(const InitialDatum&) const = default;
};

/// (0, 1) with control (0.3, 0.7) and inner region (0.4, 0.6).
DomainSpec default_domain();

struct ExperimentConfig {
    DomainSpec domain = default_domain();
    std::array<int, 2> nodes{32, 1};
    int steps = 200;
    double T = 1.0;

    std::optional<Profile> a0, a1;
    std::vector<Profile> b0;  ///< one per axis, or empty
    std::vector<Profile> d;   ///< dim * dim, row-major, or empty
    std::optional<Profile> source;
    InitialDatum initial;

    std::vector<double> lambda{1.0};
    std::vector<double> s0{1.0, 2.0, 4.0, 8.0};

    double epsilon = 1e-4;
    std::vector<double> epsilon_list{1e-2, 1e-3, 1e-4, 1e-5, 1e-6};
    double cg_tolerance = 1e-8;
    int cg_max_iterations = 500;
    bool precondition = false;

    std::string audit = "lemma22";  ///< lemma22, theorem322 or prop34

    std::optional<NonlinearitySpec> nonlinearity;
    bool state_only = false;
    FixedPointOptions fixed_point;

    std::string output = "runs/default";
    std::uint64_t seed = 0;

    /// Throws Error(Validation) with a message naming the violated invariant.
    void validate() const;

    Grids grids() const;
    CoefficientSet coefficients(const Grids& grids) const;
    Mat source_field(const Grids& grids) const;  ///< empty when no source is configured
    HumConfig hum_config() const;
    /// s values s0 (sqrt(T) + T).
    std::vector<double> s_values() const;

    bool operator==(const ExperimentConfig&) const = default;
};

/// Throws Error(ConfigParse) on malformed input or unknown keys.
ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig load_config(const std::string& path);
nlohmann::json to_json(const ExperimentConfig& c);

nlohmann::json to_json(const Profile& p);
Profile profile_from_json(const nlohmann::json& j);

}  // namespace nullctl
