#include "nullctl/semilinear.hpp"

#include "support.hpp"

#include <doctest.h>

#include <sstream>

using namespace nullctl;
using namespace testing_support;

namespace {

HumConfig benchmark(int n, int steps, double eps) {
    HumConfig cfg;
    cfg.epsilon = eps;
    cfg.grids = line_grids(n, 0.5, steps);
    cfg.coefficients = CoefficientSet::zero(cfg.grids, line_domain());
    return cfg;
}

SpaceTimeField smooth_iterate(const Grids& grids, std::mt19937_64& rng, double scale) {
    Mat m(grids.space.size(), grids.time.nodes());
    const Vec a = low_mode(grids.space, rng, 3), b = low_mode(grids.space, rng, 3);
    for (int n = 0; n < grids.time.nodes(); ++n) {
        const double t = grids.time.time(n) / grids.time.T;
        m.col(n) = scale * ((1 - t) * a + t * b);
    }
    return {m, FieldRole::State};
}

}  // namespace

TEST_CASE("Gauss-Legendre rule is exact to degree 2n - 1") {
    for (int n : {2, 5, 8, 16}) {
        const Quadrature q = gauss_legendre(n);
        CHECK(q.weights.sum() == doctest::Approx(1.0).epsilon(1e-14));
        for (int k = 0; k < 2 * n; ++k) {
            double sum = 0;
            for (int i = 0; i < n; ++i) sum += q.weights(i) * std::pow(q.nodes(i), k);
            CHECK(sum == doctest::Approx(1.0 / (k + 1)).epsilon(1e-13));
        }
    }
    CHECK_THROWS_AS(gauss_legendre(0), Error);
}

TEST_CASE("averaged Jacobians in closed form") {
    const Grids grids = line_grids(16, 0.5, 10);
    const SpaceTimeField one{Mat::Ones(16, 11), FieldRole::State};
    const AveragedJacobians s = averaged_jacobians(grids, one, NonlinearitySpec::sine(1.0, 1.0));
    CHECK((s.g1.array() - std::sin(1.0)).abs().maxCoeff() <= 1e-14);
    CHECK(std::sin(1.0) == doctest::Approx(0.8414709848078965).epsilon(1e-15));

    std::mt19937_64 rng(3);
    const SpaceTimeField z = smooth_iterate(grids, rng, 1.0);
    const AveragedJacobians l = averaged_jacobians(grids, z, NonlinearitySpec::linear(0.7));
    CHECK((l.g1.array() - 0.7).abs().maxCoeff() <= 1e-14);
    for (const auto& m : l.g2) CHECK(m.cwiseAbs().maxCoeff() == 0.0);
    CHECK(l.sup == doctest::Approx(0.7));

    const AveragedJacobians zero = averaged_jacobians(grids, z, NonlinearitySpec::zero());
    CHECK(zero.g1.cwiseAbs().maxCoeff() == 0.0);

    CHECK_THROWS_AS(averaged_jacobians(grids, z, NonlinearitySpec::sine(1, 1), 1), Error);
    SpaceTimeField bad = z;
    bad.values(3, 4) = std::numeric_limits<double>::quiet_NaN();
    try {
        averaged_jacobians(grids, bad, NonlinearitySpec::sine(1, 1));
        FAIL("expected an unresolved iterate");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::UnresolvedIterate);
    }
}

TEST_CASE("mean-value identity on random smooth iterates") {
    const Grids grids = line_grids(32, 0.5, 20);
    std::mt19937_64 rng(5);
    const NonlinearitySpec specs[] = {NonlinearitySpec::sine(0.1, 1.0), NonlinearitySpec::tanh(0.5, 2.0),
                                      NonlinearitySpec::composite(0.3, 1.0, 0.2, 0.1)};
    for (const auto& F : specs) {
        for (int trial = 0; trial < 5; ++trial) {
            const SpaceTimeField z = smooth_iterate(grids, rng, 0.05);
            const AveragedJacobians G = averaged_jacobians(grids, z, F, 12);
            CAPTURE(to_string(F.kind));
            CHECK(mean_value_residual(grids, z, F, G) <= 1e-8);
            CHECK(G.sup <= F.bound(1) * (1 + 1e-12));
        }
    }
}

TEST_CASE("global Jacobian bound over random arguments") {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(-20.0, 20.0);
    const NonlinearitySpec specs[] = {NonlinearitySpec::linear(-1.5), NonlinearitySpec::sine(0.1, 3.0),
                                      NonlinearitySpec::tanh(2.0, 0.5), NonlinearitySpec::composite(1, 2, 0.5, 0.25)};
    for (const auto& F : specs) {
        for (int dim : {1, 2}) {
            double worst = 0;
            for (int i = 0; i < 10000; ++i) {
                const double p[2] = {u(rng), u(rng)};
                const double r[4] = {u(rng), u(rng), u(rng), u(rng)};
                const auto d = F.partials(u(rng), p, r, dim);
                double sum = std::abs(d.du);
                for (int a = 0; a < dim; ++a) sum += std::abs(d.dp[a]);
                for (int a = 0; a < dim * dim; ++a) sum += std::abs(d.dr[a]);
                worst = std::max(worst, sum);
            }
            CHECK(worst <= F.bound(dim));
        }
    }
}

TEST_CASE("partials match central differences") {
    const NonlinearitySpec F = NonlinearitySpec::composite(0.4, 1.3, 0.2, 0.7);
    const double p[2] = {0.3, -0.8}, r[4] = {0.1, 0.5, -0.2, 1.1};
    const double u0 = 0.6, h = 1e-6;
    const auto d = F.partials(u0, p, r, 2);
    CHECK(d.du == doctest::Approx((F.value(u0 + h, p, r, 2) - F.value(u0 - h, p, r, 2)) / (2 * h)).epsilon(1e-8));
    for (int a = 0; a < 2; ++a) {
        double pp[2] = {p[0], p[1]}, pm[2] = {p[0], p[1]};
        pp[a] += h, pm[a] -= h;
        CHECK(d.dp[a] == doctest::Approx((F.value(u0, pp, r, 2) - F.value(u0, pm, r, 2)) / (2 * h)).epsilon(1e-8));
    }
    for (int a = 0; a < 4; ++a) {
        double rp[4] = {r[0], r[1], r[2], r[3]}, rm[4] = {r[0], r[1], r[2], r[3]};
        rp[a] += h, rm[a] -= h;
        CHECK(d.dr[a] == doctest::Approx((F.value(u0, p, rp, 2) - F.value(u0, p, rm, 2)) / (2 * h)).epsilon(1e-8));
    }
    for (auto k : {NonlinearitySpec::Kind::Zero, NonlinearitySpec::Kind::Linear, NonlinearitySpec::Kind::Sine,
                   NonlinearitySpec::Kind::Tanh, NonlinearitySpec::Kind::Composite})
        CHECK(nonlinearity_kind_from_string(to_string(k)) == k);
    CHECK_THROWS_AS(nonlinearity_kind_from_string("cubic"), Error);
}

TEST_CASE("zero and linear nonlinearities stop after two iterations") {
    const HumConfig cfg = benchmark(16, 100, 1e-4);
    const Vec y0 = sine_mode(cfg.grids.space, 1);
    for (const auto& F : {NonlinearitySpec::zero(), NonlinearitySpec::linear(0.5)}) {
        CAPTURE(to_string(F.kind));
        const FixedPointResult r = fixed_point_solve(cfg, y0, Mat{}, F);
        CHECK(r.trace.converged);
        CHECK(r.trace.rows.size() == 2);
        CHECK(r.trace.rows.back().distance <= 1e-8);
        CHECK(r.iterates.size() == 2);
    }
    // F = 0 reproduces the linear control
    const FixedPointResult r = fixed_point_solve(cfg, y0, Mat{}, NonlinearitySpec::zero());
    const HumResult lin = hum_solve(cfg, y0);
    CHECK((r.hum.zT - lin.zT).norm() <= 1e-12 * lin.zT.norm());
}

TEST_CASE("state-only variant matches the general pipeline") {
    const HumConfig cfg = benchmark(16, 100, 1e-5);
    const Vec y0 = sine_mode(cfg.grids.space, 1, 2.0);
    for (const auto& F : {NonlinearitySpec::sine(0.1, 1.0), NonlinearitySpec::tanh(0.3, 1.0),
                          NonlinearitySpec::linear(-0.4)}) {
        CAPTURE(to_string(F.kind));
        const FixedPointResult a = fixed_point_solve(cfg, y0, Mat{}, F);
        const FixedPointResult b = state_only_variant(cfg, y0, Mat{}, F);
        REQUIRE(a.iterates.size() == b.iterates.size());
        const Mat& za = a.iterates.back();
        CHECK((za - b.iterates.back()).norm() <= 1e-10 * za.norm());
        CHECK((a.hum.v.values - b.hum.v.values).norm() <= 1e-10 * a.hum.v.values.norm());
    }
    CHECK_THROWS_AS(state_only_variant(cfg, y0, Mat{}, NonlinearitySpec::composite(0.1, 1, 0.1, 0.1)), Error);
}

TEST_CASE("sine benchmark contracts and stays near the linear terminal state") {
    const HumConfig cfg = benchmark(32, 200, 1e-6);
    const Vec y0 = sine_mode(cfg.grids.space, 1);
    const FixedPointResult r = fixed_point_solve(cfg, y0, Mat{}, NonlinearitySpec::sine(0.1, 1.0));
    const HumResult lin = hum_solve(cfg, y0);
    REQUIRE(r.trace.converged);
    const auto& rows = r.trace.rows;
    REQUIRE(rows.size() >= 3);
    for (std::size_t i = 2; i < rows.size(); ++i) CHECK(rows[i].distance <= 0.9 * rows[i - 1].distance);
    CHECK(r.hum.terminal_norm <= 10 * lin.terminal_norm);
    CHECK(r.trace.jacobian_sup <= 0.1 + 1e-15);
    CHECK(r.trace.fixed_point_residual <= 1e-8);

    std::ostringstream os;
    write_trace_csv(os, r.trace);
    CHECK(os.str().rfind("iter,distance,terminal_norm,control_norm\n", 0) == 0);
    const auto j = fixed_point_summary(r);
    CHECK(j["converged"].get<bool>());
}

TEST_CASE("fixed point is grid independent in its low modes") {
    // sine coefficients of the converged iterate at t = T/4, N = 32 against N = 64
    std::vector<Vec> coeffs;
    for (int n : {32, 64}) {
        const HumConfig cfg = benchmark(n, 200, 1e-4);
        const Vec y0 = sine_mode(cfg.grids.space, 1);
        const FixedPointResult r = fixed_point_solve(cfg, y0, Mat{}, NonlinearitySpec::sine(0.1, 1.0));
        const Vec slice = r.iterates.back().col(50);
        const double h = cfg.grids.space.spacing(0);
        Vec c(4);
        for (int k = 1; k <= 4; ++k) c(k - 1) = 2 * h * sine_mode(cfg.grids.space, k).dot(slice);
        coeffs.push_back(c);
    }
    CHECK((coeffs[0] - coeffs[1]).norm() <= 1e-3 * coeffs[1].norm());
}

TEST_CASE("fixed point iteration limit") {
    const HumConfig cfg = benchmark(16, 100, 1e-4);
    FixedPointOptions opt;
    opt.max_iterations = 1;
    try {
        fixed_point_solve(cfg, sine_mode(cfg.grids.space, 1), Mat{}, NonlinearitySpec::sine(0.1, 1.0), opt);
        FAIL("expected no convergence");
    } catch (const FixedPointError& e) {
        CHECK(e.kind() == ErrorKind::NoConvergence);
        CHECK(e.partial().trace.rows.size() == 1);
        CHECK_FALSE(e.partial().trace.converged);
    }
}
