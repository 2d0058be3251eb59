#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>

#include "negperc/gauss_kernels.hpp"
#include "negperc/pure_thresholds.hpp"

using namespace negperc;

namespace {

bool rel_close(double got, double want, double tol) { return std::fabs(got - want) <= tol * std::fabs(want); }

// Smallest Psi(q) - Psi(0) over a grid, evaluated with the closed-form tilt.
double min_psi_gap(double kappa, double delta) {
    const double base = psi_rate(0.0, kappa, delta);
    double worst = INFINITY;
    for (double q = -0.995; q < 1.0; q += 0.005) {
        if (std::fabs(q) < 1e-9) continue;
        worst = std::min(worst, psi_rate(q, kappa, delta) - base);
    }
    return worst;
}

}  // namespace

// ============================================================================
// Closed forms
// ============================================================================

TEST_CASE("c star reference values") {
    CHECK(rel_close(c_star(-1.0), 0.51894161296537196901, 1e-13));
    CHECK(rel_close(c_star(-0.5), 1.6311504076242980703, 1e-13));
    CHECK(rel_close(c_star(-3.0), 0.0044981763797707608073, 1e-11));
    for (double kappa : {-0.2, -1.7, -4.0, -8.0}) {
        const double c = c_star(kappa);
        CHECK(c > 0.0);
        CHECK(c * normal_sf(kappa + c) == doctest::Approx(normal_pdf(kappa + c)).epsilon(1e-12));
    }
    CHECK_THROWS(c_star(0.0));
}

TEST_CASE("replica and linear thresholds") {
    CHECK(std::fabs(delta_rs(0.0) - 2.0) <= 1e-9);
    CHECK(std::fabs(delta_lin_pure(0.0) - 2.0) <= 1e-12);
    CHECK(rel_close(delta_rs(-1.0), 13.273199837024511962, 1e-12));
    CHECK(delta_lin_pure(-2.0) == doctest::Approx(1.0 / std_normal_cdf(-2.0)));
    // E[(kappa - G)_+^2] < Phi(kappa) for kappa < 0.
    for (double kappa : {-0.25, -0.5, -1.0}) CHECK(delta_lin_pure(kappa) < delta_rs(kappa));
    CHECK_THROWS(delta_lin_pure(0.5));
}

TEST_CASE("psi rate at the origin") {
    // Psi(0) = -log e(0), independent of delta.
    CHECK(psi_rate(0.0, -1.0, 3.0) == doctest::Approx(psi_rate(0.0, -1.0, 30.0)));
    CHECK_THROWS(psi_rate(1.0, -1.0, 3.0));
}

// ============================================================================
// Bounds
// ============================================================================

TEST_CASE("lower bound is the second moment threshold") {
    for (double kappa : {-1.0, -2.0}) {
        LowerBoundDiagnostics diag;
        const double lb = delta_lb_pure(kappa, {}, &diag);
        CHECK(lb > 0.0);
        CHECK(diag.c_star == doctest::Approx(c_star(kappa)));
        // Below the bound the origin is the unique maximizer of Psi.
        CHECK(min_psi_gap(kappa, 0.98 * lb) > 0.0);
        // Above it the curvature or some q defeats it.
        const double h = 1e-3;
        const double above = 1.05 * lb;
        const double curv = psi_rate(h, kappa, above) + psi_rate(-h, kappa, above) - 2.0 * psi_rate(0.0, kappa, above);
        CHECK((min_psi_gap(kappa, above) <= 0.0 || curv <= 0.0));
    }
}

TEST_CASE("bounds are ordered") {
    for (double kappa : {-1.0, -2.0, -3.0}) {
        const auto rec = pure_threshold_record(kappa);
        REQUIRE(rec.delta_lb.has_value());
        REQUIRE(rec.delta_ub.has_value());
        CHECK(*rec.delta_lb <= *rec.delta_ub);
        CHECK(*rec.delta_ub < rec.delta_rs);
        CHECK(rec.delta_lin <= *rec.delta_ub);
    }
    const auto zero = pure_threshold_record(0.0);
    CHECK_FALSE(zero.delta_lb.has_value());
    CHECK(zero.delta_rs == doctest::Approx(2.0));
}

TEST_CASE("upper bound never exceeds the replica value") {
    // At small |kappa| the infimum sits at the c -> 0 limit, which equals delta_rs.
    const double kappa = -0.5;
    UpperBoundDiagnostics diag;
    const double ub = delta_ub_pure(kappa, {}, &diag);
    CHECK(ub <= delta_rs(kappa) * (1.0 + 1e-9));
    CHECK(ub == doctest::Approx(delta_rs(kappa)).epsilon(1e-6));
}

TEST_CASE("upper bound left side") {
    CHECK(upper_bound_lhs(0.0, 1.3) == 0.0);
    // K_s(c) = x/(x + sqrt(x^2 + 4)) + asinh(x/2), x = cs.
    const double x = 0.7 * 1.9;
    CHECK(upper_bound_lhs(0.7, 1.9) == doctest::Approx(x / (x + std::sqrt(x * x + 4)) + std::asinh(x / 2)));
}

TEST_CASE("q grid layout") {
    const auto g = second_moment_q_grid(11, 3);
    CHECK(std::is_sorted(g.begin(), g.end()));
    for (double q : g) {
        CHECK(q != 0.0);
        CHECK(std::fabs(q) < 1.0);
    }
    CHECK(std::find(g.begin(), g.end(), 0.999) != g.end());
    CHECK(std::find(g.begin(), g.end(), -0.999) != g.end());
}

TEST_CASE("tilted moment derivative matches finite differences") {
    const double kappa = -1.3, c = c_star(kappa), h = 1e-6;
    for (double q : {-0.7, -0.1, 0.4, 0.9}) {
        const double fd = (tilted_pair_moment(q + h, kappa, c) - tilted_pair_moment(q - h, kappa, c)) / (2 * h);
        CHECK(tilted_pair_moment_derivative(q, kappa, c) == doctest::Approx(fd).epsilon(1e-6));
    }
}
