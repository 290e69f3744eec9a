#include "nullctl/carleman.hpp"

#include "carleman_oracle.hpp"
#include "support.hpp"

#include <doctest.h>

#include <map>
#include <sstream>

using namespace nullctl;
using namespace testing_support;
using namespace carleman_oracle;

namespace {

AuditSetup line_setup(int n, double T, int steps) {
    const Grids grids = line_grids(n, T, steps);
    return AuditSetup{grids, CoefficientSet::zero(grids, line_domain()), build_eta(line_domain())};
}

}  // namespace

TEST_CASE("weighted integrals match a long double oracle at N = 16") {
    const double T = 1.0;
    const AuditSetup setup = line_setup(16, T, 100);
    std::mt19937_64 rng(41);
    for (int trial = 0; trial < 3; ++trial) {
        const Vec z0 = low_mode(setup.grids.space, rng);
        const SpaceTimeField z =
            solve_backward(setup.grids, setup.coefficients, AdjointMode::Free, z0, Mat::Zero(16, 101));
        for (double lambda : {1.0, 2.0}) {
            for (double s : default_s_values(T)) {
                CAPTURE(trial);
                CAPTURE(s);
                CAPTURE(lambda);
                const Oracle o(z.values, T, s, lambda);
                const CarlemanReport r = audit_lemma22(setup, z0, Mat{}, s, lambda);
                CHECK(worst_oracle_gap(r, oracle_terms(o, CarlemanTarget::Lemma22)) <= 1e-6);
            }
        }
    }
}

TEST_CASE("theorem audit with a single divergence source term") {
    const double T = 1.0;
    AuditSetup setup = line_setup(16, T, 100);
    const Eigen::Index size = setup.grids.space.size();
    const int nodes = setup.grids.time.nodes();
    Mat bump = Mat::Zero(size, nodes);
    for (Eigen::Index k = 0; k < size; ++k) {
        const double x = setup.grids.space.coordinate(0, static_cast<int>(k));
        if (x > 0.35 && x < 0.65) bump.row(k).setConstant(std::pow(std::sin(std::numbers::pi * (x - 0.35) / 0.3), 4));
    }
    const SourceTerm g = SourceTerm::divergence(Mat::Zero(size, nodes), {bump});
    const Vec z0 = sine_mode(setup.grids.space, 1);
    const CarlemanReport r = audit_theorem322(setup, z0, g, 2.0, 1.0);
    REQUIRE(r.rhs.size() == 3);
    CHECK(r.rhs[0].name == "source_g0");
    CHECK(r.rhs[0].log_value == -std::numeric_limits<double>::infinity());

    Mat b2 = bump.array().square().matrix();
    const Oracle o(Mat::Zero(size, nodes), T, 2.0, 1.0);
    const Real expected = o.integral(2, 2, 2, [&](int n, int j) { return static_cast<Real>(b2(j, n)); });
    CHECK(std::abs(r.rhs[1].value() - static_cast<double>(expected)) <= 1e-10 * static_cast<double>(expected));

    const SpaceTimeField z = solve_backward(setup.grids, setup.coefficients, AdjointMode::Transposition, z0,
                                            g.assemble(setup.grids));
    const Oracle oz(z.values, T, 2.0, 1.0);
    CHECK(worst_oracle_gap(r, oracle_terms(oz, CarlemanTarget::Theorem322)) <= 1e-6);
}

TEST_CASE("shared terms coincide when D = a1 = 0") {
    const AuditSetup setup = line_setup(32, 0.5, 200);
    const Vec z0 = sine_mode(setup.grids.space, 1);
    for (double s : default_s_values(0.5)) {
        const CarlemanReport a = audit_lemma22(setup, z0, Mat{}, s, 2.0);
        const CarlemanReport b = audit_theorem322(setup, z0, SourceTerm{}, s, 2.0);
        const auto find = [](const CarlemanReport& r, const std::string& name) {
            for (const auto* side : {&r.lhs, &r.rhs})
                for (const auto& t : *side)
                    if (t.name == name) return t.value();
            return -1.0;
        };
        for (const char* name : {"z", "grad_z", "hess_z", "observation"}) {
            CAPTURE(name);
            const double va = find(a, name), vb = find(b, name);
            REQUIRE(va > 0);
            CHECK(std::abs(va - vb) <= 1e-10 * va);
        }
    }
}

TEST_CASE("reported ratios are finite over random data and the default sweep") {
    const double T = 0.5;
    const AuditSetup setup = line_setup(32, T, 200);
    std::mt19937_64 rng(43);
    for (int trial = 0; trial < 10; ++trial) {
        const Vec z0 = low_mode(setup.grids.space, rng);
        for (CarlemanTarget target : {CarlemanTarget::Lemma22, CarlemanTarget::Theorem322}) {
            const ConstantSweep sweep =
                constant_sweep(setup, target, z0, SourceTerm{}, default_s_values(T), {1.0, 2.0, 3.0});
            CAPTURE(trial);
            CHECK(sweep.all_finite);
            CHECK(sweep.rows.size() == 12);
            for (const auto& row : sweep.rows) {
                const auto& r = row.report;
                for (const auto* side : {&r.lhs, &r.rhs})
                    for (const auto& t : *side) CHECK_FALSE(std::isnan(t.log_value));
                CHECK(r.ratio == doctest::Approx(std::exp(r.log_lhs - r.log_rhs)).epsilon(1e-14));
            }
        }
    }
}

TEST_CASE("transposition audit with constant D and a1") {
    const double T = 0.5;
    AuditSetup setup = line_setup(32, T, 200);
    setup.coefficients.d = {Mat::Constant(32, 201, 0.1)};
    setup.coefficients.a1 = Mat::Constant(32, 201, 0.05);
    std::mt19937_64 rng(47);
    const Vec z0 = low_mode(setup.grids.space, rng);
    const ConstantSweep sweep =
        constant_sweep(setup, CarlemanTarget::Theorem322, z0, SourceTerm{}, default_s_values(T), {2.0, 3.0});
    CHECK(sweep.all_finite);
    const auto j = constant_sweep_summary(sweep);
    REQUIRE(j["constants"].size() == 2);
    for (const auto& c : j["constants"]) {
        CAPTURE(c.dump());
        CHECK(c["max_over_min"].get<double>() <= 10.0);
    }

    std::ostringstream os;
    write_constant_sweep_csv(os, sweep);
    CHECK(os.str().rfind("s,lambda,log_z,log_grad_z,log_lap_z,log_hess_z,log_source_g0,log_source_gi,"
                         "log_observation,ratio,log_ratio,flag\n",
                         0) == 0);
}

TEST_CASE("doubling s lowers the exponential weight where alpha < 0") {
    const AuditSetup setup = line_setup(16, 1.0, 50);
    const WeightBundle a = eval_weights(setup.eta, 2.0, 1.0, setup.grids.time, setup.grids.space);
    const WeightBundle b = eval_weights(setup.eta, 4.0, 1.0, setup.grids.time, setup.grids.space);
    CHECK((a.s_alpha.array() < 0).all());
    CHECK((b.s_alpha.array() < a.s_alpha.array()).all());
}

TEST_CASE("zero datum is degenerate") {
    const AuditSetup setup = line_setup(16, 1.0, 50);
    try {
        audit_lemma22(setup, Vec::Zero(16), Mat{}, 2.0, 1.0);
        FAIL("expected degenerate solution");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::DegenerateSolution);
    }
    CHECK_THROWS_AS(audit_theorem322(setup, Vec::Zero(16), SourceTerm{}, 2.0, 1.0), Error);
}

TEST_CASE("dual extremal problem on a small grid") {
    const double T = 1.0;
    const AuditSetup setup = line_setup(8, T, 24);
    const Vec z0 = sine_mode(setup.grids.space, 1);
    const SpaceTimeField z =
        solve_backward(setup.grids, setup.coefficients, AdjointMode::Free, z0, Mat::Zero(8, 25));
    DualExtremalOptions opt;
    opt.method = DualExtremalOptions::Method::Both;
    for (double s : {2.0, 4.0}) {
        CAPTURE(s);
        const DualExtremalResult r = solve_dual_extremal(setup, z, s, 1.0, opt);
        CHECK(r.stationarity_residual <= 1e-6);
        CHECK(r.dense_agreement <= 1e-6);
        CHECK(std::isfinite(r.quotient));
        CHECK(r.quotient > 0.0);
        CHECK(r.w.values.col(0).norm() == 0.0);

        // J assembled from the stored fields
        Real cost_w = 0, cost_u = 0;
        const Real h = 1.0L / 9, dt = 1.0L / 24;
        for (int n = 1; n < 24; ++n) {
            const Real t = n * dt, root = std::sqrt(t * (1 - t));
            for (int j = 0; j < 8; ++j) {
                const Real x = (j + 1) * h, eta = x * (1 - x);
                const Real xi = std::exp(eta + 0.5L) / root;
                const Real alpha = (std::exp(eta + 0.5L) - std::exp(1.0L)) / root;
                const Real rho = std::exp(-2 * s * alpha);
                const Real w = r.w.values(j, n), u = r.u.values(j, n);
                cost_w += rho * w * w * dt * h;
                cost_u += rho * u * u / (std::pow(Real(s), 7) * std::pow(xi, 7)) * dt * h;
            }
        }
        const double J = static_cast<double>((cost_w + cost_u) / 2);
        CHECK(r.cost() == doctest::Approx(J).epsilon(1e-8));

        const auto j = dual_extremal_summary(r);
        CHECK(j.contains("quotient"));
    }
}
