#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>

#include "negperc/gauss_kernels.hpp"
#include "negperc/signal_thresholds.hpp"

using namespace negperc;

namespace {

bool rel_close(double got, double want, double tol) { return std::fabs(got - want) <= tol * std::fabs(want); }

SignalUpperOptions coarse_upper() {
    SignalUpperOptions o;
    o.rho_points = 41;
    o.rho_refine_iters = 20;
    return o;
}

}  // namespace

// ============================================================================
// The function D
// ============================================================================

TEST_CASE("dee kernel reference values") {
    CHECK(rel_close(dee_kernel(0.3), 0.267659400869053990988209313569, 1e-12));
    CHECK(rel_close(dee_kernel(5.0), 0.686747819714778450886773152732, 1e-12));
    // J(t) ~ 2t near 0 and J -> 1 at infinity.
    CHECK(dee_kernel(1e-8) == doctest::Approx(2e-8).epsilon(1e-6));
    CHECK(dee_kernel(1e12) == doctest::Approx(1.0).epsilon(1e-5));
}

TEST_CASE("dee anchors") {
    CHECK(std::fabs(dee(1.0) - 0.5) <= 1e-6);
    CHECK(std::fabs(dee(2.0) - 1.0) <= 1e-6);
    CHECK(std::fabs(dee(4.0) - 2.0) <= 1e-6);
    CHECK(dee(0.0) == 0.0);
    CHECK_THROWS(dee(-1.0));
}

TEST_CASE("dee grows like half the log") {
    double prev = INFINITY;
    for (double x : {10.0, 20.0, 40.0, 80.0}) {
        const double ratio = 2.0 * dee(std::exp(x)) / x;
        CHECK(ratio > 1.0);
        CHECK(ratio < prev);
        prev = ratio;
    }
    CHECK(prev < 1.15);
    // Monotone in a.
    CHECK(dee(10.0) < dee(100.0));
}

// ============================================================================
// Upper bound
// ============================================================================

TEST_CASE("upper bound at rho = 0 reduces to pure noise") {
    const auto pure = LinkFunction::pure_noise();
    for (double kappa : {-1.0, -2.0}) {
        UpperBoundOptions inner;  // the pure-noise defaults
        SignalUpperOptions o;
        o.inner = inner;
        CHECK(delta_ub_signal(kappa, 0.0, pure, o) == doctest::Approx(delta_ub_pure(kappa, inner)).epsilon(1e-9));
    }
    CHECK(delta_ub_signal(-1.0, 1.0, pure) == 0.0);
}

TEST_CASE("rho band contains the maximizer") {
    const auto lg = LinkFunction::logistic(1.0);
    const auto o = coarse_upper();
    const auto top = delta_ub_signal_max(-1.0, lg, o);
    CHECK(top.delta > delta_ub_signal(-1.0, 0.0, lg, o));
    const auto band = rho_band(-1.0, 0.5 * top.delta, lg, o);
    CHECK_FALSE(band.empty);
    CHECK(band.rho_min <= top.rho);
    CHECK(top.rho <= band.rho_max);
    // Points of the band pass the test; points outside fail it.
    CHECK(delta_ub_signal(-1.0, 0.5 * (band.rho_min + band.rho_max), lg, o) >= 0.5 * top.delta);
    if (band.rho_max < 0.98) CHECK(delta_ub_signal(-1.0, band.rho_max + 0.02, lg, o) < 0.5 * top.delta);
    CHECK(rho_band(-1.0, 2.0 * top.delta, lg, o).empty);
}

// ============================================================================
// Lower bound
// ============================================================================

TEST_CASE("truncated second moment threshold") {
    const auto lg = LinkFunction::logistic(1.0);
    const double d1 = delta_sec(0.5, -1.5, -1.0, lg);
    CHECK(std::isfinite(d1));
    CHECK(d1 > 0.0);
    CHECK_THROWS(delta_sec(0.0, -1.5, -1.0, lg));
    CHECK_THROWS(delta_sec(0.5, -0.2, -1.0, lg));
}

TEST_CASE("lower bound stays below the upper bound") {
    const auto lg = LinkFunction::logistic(1.0);
    SignalLowerOptions o;
    o.grid_tuples = 8;
    o.random_tuples = 16;
    o.rho_points = 21;
    const auto lb = delta_lb_signal(-1.0, lg, o);
    REQUIRE(lb.found);
    CHECK(lb.delta > 0.0);
    CHECK(lb.delta <= delta_ub_signal_max(-1.0, lg, coarse_upper()).delta);
    // The reported branch value certifies the delta.
    CHECK(lb.delta == doctest::Approx(1.0 / (lb.from_branch_a ? lb.branch_a : lb.branch_b)).epsilon(1e-9));
}

// ============================================================================
// Error predictions
// ============================================================================

TEST_CASE("linear bound on the overlap") {
    const auto pure = LinkFunction::pure_noise();
    const auto r = rho_max_linbound(-1.0, 3.0, pure);
    CHECK(r.moment == doctest::Approx(truncated_second_moment(-1.0)).epsilon(1e-10));
    CHECK(r.value == doctest::Approx(1.0 - 1.5 * r.moment));
    CHECK(rho_max_linbound(-1.0, 1e6, pure).clamped);
}

TEST_CASE("error prediction") {
    const auto lg = LinkFunction::logistic(1.0);
    const auto e = error_prediction(-2.0, 50.0, lg);
    CHECK(e.m == doctest::Approx(mean_yg(lg)));
    CHECK(e.delta0 == doctest::Approx(4.0 * std::exp(2.0) / (2.0 * std_normal_cdf(-2.0))));
    CHECK(e.e_kappa == doctest::Approx(1.0 / (2.0 * e.m * e.m * 50.0) + 50.0 / e.delta0));
    CHECK_THROWS(error_prediction(-2.0, 50.0, LinkFunction::pure_noise()));
}
