#include "nullctl/weights.hpp"

#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

using namespace nullctl;

namespace {

DomainSpec line_domain() {
    DomainSpec d;
    d.control = Box{{0.3, 0}, {0.7, 0}};
    d.inner = Box{{0.4, 0}, {0.6, 0}};
    return d;
}

// Weights written out directly, independent of weight_formula.
double alpha_direct(double lambda, double sup, double eta, double t, double T) {
    return (std::exp(lambda * (eta + 2 * sup)) - std::exp(4 * lambda * sup)) / std::sqrt(t * (T - t));
}
double xi_direct(double lambda, double sup, double eta, double t, double T) {
    return std::exp(lambda * (eta + 2 * sup)) / std::sqrt(t * (T - t));
}

}  // namespace

TEST_CASE("build_eta rejects inadmissible regions") {
    DomainSpec d = line_domain();
    d.control.hi[0] = 1.2;
    CHECK_THROWS_AS(build_eta(d), Error);
    try {
        build_eta(d);
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::InvalidRegion);
        CHECK(std::string(e.what()).find("contained in the domain") != std::string::npos);
    }

    d = line_domain();
    d.inner = Box{{0.3, 0}, {0.6, 0}};  // touches the boundary of omega
    try {
        build_eta(d);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::InvalidRegion);
    }

    d = line_domain();
    d.dim = 3;
    CHECK_THROWS_AS(build_eta(d), Error);

    d = line_domain();
    d.control = Box{{0.05, 0}, {0.45, 0}};
    d.inner = Box{{0.1, 0}, {0.4, 0}};
    try {
        build_eta(d);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::ConstructionInfeasible);
    }
}

TEST_CASE("eta invariants on random admissible boxes") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 40; ++trial) {
        DomainSpec d;
        d.dim = trial % 2 + 1;
        for (int a = 0; a < d.dim; ++a) {
            d.extent[a] = 0.5 + 2.0 * u(rng);
            const double c = 0.5 * d.extent[a];
            const double r0 = (0.02 + 0.2 * u(rng)) * d.extent[a];
            const double r1 = r0 + (0.01 + 0.2 * u(rng)) * d.extent[a];
            d.inner.lo[a] = c - r0;
            d.inner.hi[a] = c + r0 * (0.5 + u(rng));
            d.control.lo[a] = std::max(0.0, c - r1);
            d.control.hi[a] = std::min(d.extent[a], d.inner.hi[a] + (r1 - r0));
        }
        const EtaField eta = build_eta(d, 41);
        const EtaCheck c = check_eta(eta, 41);
        CHECK(c.ok());
        CHECK(c.max_boundary == 0.0);
        CHECK(c.min_interior > 0.0);
        CHECK(c.min_gradient_outside > 0.0);
        if (d.dim == 2) CHECK(c.corners_excluded == 4);
    }
}

TEST_CASE("eta gradient and Hessian match central differences") {
    DomainSpec d;
    d.dim = 2;
    d.extent = {1.5, 0.8};
    d.control = Box{{0.3, 0.1}, {1.2, 0.7}};
    d.inner = Box{{0.5, 0.2}, {1.0, 0.6}};
    const EtaField eta = build_eta(d);
    const double x[2] = {0.37, 0.55};
    double g[2], H[4];
    eta.gradient(x, g);
    eta.hessian(x, H);
    const double h = 1e-5;
    for (int a = 0; a < 2; ++a) {
        double xp[2] = {x[0], x[1]}, xm[2] = {x[0], x[1]};
        xp[a] += h;
        xm[a] -= h;
        CHECK(g[a] == doctest::Approx((eta.value(xp) - eta.value(xm)) / (2 * h)).epsilon(1e-8));
        double gp[2], gm[2];
        eta.gradient(xp, gp);
        eta.gradient(xm, gm);
        for (int b = 0; b < 2; ++b) CHECK(H[b * 2 + a] == doctest::Approx((gp[b] - gm[b]) / (2 * h)).epsilon(1e-7));
    }
    CHECK(eta.sup_norm == doctest::Approx(0.25 * 1.5 * 1.5 * 0.25 * 0.8 * 0.8));
}

TEST_CASE("sampled weights agree with the closed form") {
    const EtaField eta = build_eta(line_domain());
    const SpatialGrid grid = SpatialGrid::line(16);
    const TimeGrid time{1.0, 40};
    const double s = 3.0, lambda = 2.0;
    const WeightBundle b = eval_weights(eta, s, lambda, time, grid);
    REQUIRE(b.times.size() == 39);
    CHECK(b.delta_t == doctest::Approx(time.dt()));
    const Mat alpha = b.alpha(), xi = b.xi();
    for (Eigen::Index n = 0; n < b.times.size(); ++n) {
        const double t = b.times(n);
        CHECK(t == doctest::Approx(time.time(static_cast<int>(n) + 1)));
        for (Eigen::Index k = 0; k < grid.size(); ++k) {
            const double x = grid.coordinate(0, static_cast<int>(k));
            const double e = x * (1 - x);
            CHECK(alpha(k, n) == doctest::Approx(alpha_direct(lambda, 0.25, e, t, 1.0)).epsilon(1e-12));
            CHECK(xi(k, n) == doctest::Approx(xi_direct(lambda, 0.25, e, t, 1.0)).epsilon(1e-12));
            const double tt = std::max(t, 0.5);
            CHECK(b.alpha_tilde()(k, n) == doctest::Approx(alpha_direct(lambda, 0.25, e, tt, 1.0)).epsilon(1e-12));
            CHECK(b.xi_tilde()(k, n) == doctest::Approx(xi_direct(lambda, 0.25, e, tt, 1.0)).epsilon(1e-12));
        }
    }
}

TEST_CASE("weight properties hold on the 1D default") {
    const EtaField eta = build_eta(line_domain());
    const SpatialGrid grid = SpatialGrid::line(64);
    const TimeGrid time{1.0, 200};
    for (double lambda : {1.0, 2.0, 3.0}) {
        CAPTURE(lambda);
        const WeightBundle b = eval_weights(eta, 1.0, lambda, time, grid);
        const WeightPropertyReport r = check_weight_properties(b, eta);
        CHECK(r.gradient_residual <= 1e-12);
        CHECK(r.min_xi_margin >= 0.0);
        CHECK(r.max_time_ratio <= 0.5);
        CHECK(r.passed());
    }
}

TEST_CASE("time-derivative bound by dense sampling, lambda = 2") {
    // central differences of the closed form over 10^4 (x, t) pairs
    const double T = 1.0, lambda = 2.0, sup = 0.25;
    double worst = 0.0;
    for (int i = 1; i <= 100; ++i) {
        const double x = i / 101.0;
        const double e = x * (1 - x);
        for (int j = 1; j <= 100; ++j) {
            const double t = T * j / 101.0;
            const double h = 1e-6 * std::min(t, T - t);
            const double at = (alpha_direct(lambda, sup, e, t + h, T) - alpha_direct(lambda, sup, e, t - h, T)) / (2 * h);
            const double xt = (xi_direct(lambda, sup, e, t + h, T) - xi_direct(lambda, sup, e, t - h, T)) / (2 * h);
            const double xi = xi_direct(lambda, sup, e, t, T);
            worst = std::max(worst, (std::abs(at) + std::abs(xt)) / (xi * xi * xi));
        }
    }
    CHECK(worst <= T / 2);

    const EtaField eta = build_eta(line_domain());
    const WeightBundle b = eval_weights(eta, 1.0, lambda, TimeGrid{T, 101}, SpatialGrid::line(100));
    const WeightPropertyReport r = check_weight_properties(b, eta);
    CHECK(r.max_time_ratio == doctest::Approx(worst).epsilon(1e-4));
}

TEST_CASE("weights overflow and argument errors") {
    const EtaField eta = build_eta(line_domain());
    CHECK_THROWS_AS(eval_weights(eta, 0.0, 1.0, TimeGrid{1.0, 10}, SpatialGrid::line(8)), Error);
    CHECK_THROWS_AS(eval_weights(eta, 1.0, -1.0, TimeGrid{1.0, 10}, SpatialGrid::line(8)), Error);
    try {
        eval_weights(eta, 1.0, 3000.0, TimeGrid{1.0, 10}, SpatialGrid::line(8));
        FAIL("expected overflow");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Overflow);
    }
}

TEST_CASE("weights CSV columns") {
    const EtaField eta = build_eta(line_domain());
    const WeightBundle b = eval_weights(eta, 1.0, 1.0, TimeGrid{1.0, 10}, SpatialGrid::line(8));
    std::ostringstream os;
    write_weights_csv(os, b);
    std::istringstream is(os.str());
    std::string header;
    std::getline(is, header);
    CHECK(header == "x,t,alpha,xi,alpha_tilde,xi_tilde");
    int rows = 0;
    for (std::string line; std::getline(is, line);) ++rows;
    CHECK(rows == 8 * 9);
    const auto j = weights_summary(b, check_weight_properties(b, eta));
    CHECK(j.contains("eta_sup"));
    CHECK(j["passed"].get<bool>());
}
