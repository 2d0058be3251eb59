#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "negperc/gauss_kernels.hpp"

using namespace negperc;

namespace {

bool rel_close(double got, double want, double tol) { return std::fabs(got - want) <= tol * std::fabs(want); }

}  // namespace

// ============================================================================
// Scalar functions against 40-digit reference values
// ============================================================================

TEST_CASE("normal cdf and tails") {
    CHECK(rel_close(std_normal_cdf(-3.0), 0.0013498980316300945267, 1e-14));
    CHECK(rel_close(std_normal_cdf(-10.0), 7.619853024160526066e-24, 1e-13));
    CHECK(rel_close(std_normal_cdf(1.3), 0.90319951541438967446, 1e-15));
    CHECK(rel_close(std_normal_cdf(-38.0), 2.8854283600687843084e-316, 1e-6));
    CHECK(rel_close(log_normal_sf(40.0), -804.60844201375378817, 1e-14));
    CHECK(rel_close(log_normal_sf(-2.0), -0.023012909328963488465, 1e-13));
    CHECK(std_normal_cdf(0.0) == doctest::Approx(0.5).epsilon(1e-16));
}

TEST_CASE("mills ratio") {
    CHECK(rel_close(mills_ratio(0.5), 0.87636445645369234673, 1e-14));
    CHECK(rel_close(mills_ratio(5.0), 0.19280810471531576488, 1e-14));
    CHECK(rel_close(mills_ratio(30.0), 0.033296419072497213382, 1e-14));
    CHECK(rel_close(one_minus_u_mills(20.0), 0.0024814803632643268352, 1e-11));
    // R(u) lies between u/(1+u^2) and 1/u for u > 0.
    for (double u = 0.1; u < 60.0; u *= 1.37) {
        CHECK(mills_ratio(u) < 1.0 / u);
        CHECK(mills_ratio(u) > u / (1.0 + u * u));
    }
}

TEST_CASE("truncated gaussian moments") {
    CHECK(rel_close(gauss_tail_moment1(0.7), 0.14287937681061014678, 1e-13));
    CHECK(rel_close(gauss_tail_moment2(0.7), 0.141948088455645912, 1e-13));
    CHECK(rel_close(truncated_second_moment(-1.5), 0.022847010624951123093, 1e-13));
    CHECK(truncated_second_moment(0.0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(rel_close(gauss_max_sq_moment(0.3, 1.2, 0.5), 1.1829868217159055272, 1e-12));
    CHECK(rel_close(gauss_relu_mean(-0.4, 0.8), 0.15823724592104483246, 1e-12));
    // Point mass.
    CHECK(gauss_max_sq_moment(0.2, 0.0, 0.5) == doctest::Approx(0.25));
    CHECK(gauss_max_sq_moment(0.9, 0.0, 0.5) == doctest::Approx(0.81));
}

TEST_CASE("bivariate orthant") {
    CHECK(rel_close(bivariate_orthant(0.4, 0.3), 0.2067237432288102745, 1e-11));
    CHECK(rel_close(bivariate_orthant(-0.6, -0.5), 0.40830125396605631907, 1e-11));
    CHECK(rel_close(bivariate_orthant(0.95, 1.2), 0.09061811567532047892, 1e-11));
    CHECK(rel_close(bivariate_orthant(-0.3, 2.5), 1.47057446356716334e-6, 1e-9));
    // Endpoints: independence and perfect correlation.
    CHECK(bivariate_orthant(0.0, 0.7) == doctest::Approx(std::pow(normal_sf(0.7), 2)).epsilon(1e-13));
    CHECK(bivariate_orthant(1.0, 0.7) == doctest::Approx(normal_sf(0.7)).epsilon(1e-13));
    // Sheppard: P(G1 >= 0, G2 >= 0) = 1/4 + asin(q)/(2 pi).
    for (double q : {-0.9, -0.4, 0.2, 0.8})
        CHECK(bivariate_orthant(q, 0.0) == doctest::Approx(0.25 + std::asin(q) / (2.0 * std::numbers::pi)).epsilon(1e-12));
}

TEST_CASE("tilted pair moment") {
    CHECK(rel_close(tilted_pair_moment(0.3, -1.0, 0.5), 0.62160437361537243623, 1e-10));
    CHECK(rel_close(tilted_pair_moment(-0.5, -2.0, 1.2), 1.7233185457311181986, 1e-10));
    CHECK(rel_close(tilted_pair_moment(-0.9, -1.0, 3.0), 1.2694413502326692157, 1e-9));
    // Large tilt, where exp(c^2 (1+q)) alone overflows.
    CHECK(rel_close(tilted_pair_moment(0.7, -0.023, 43.455), 0.00087022166900546200324, 1e-8));
    CHECK(rel_close(tilted_pair_moment(0.99, -0.023, 43.455), 0.0043009258250489380051, 1e-8));
    CHECK(rel_close(tilted_pair_moment(-0.5, -0.023, 43.455), 0.00071784068344780886866, 1e-8));
    CHECK_THROWS(tilted_pair_moment(1.5, -1.0, 0.5));
}

TEST_CASE("psi kappa") {
    CHECK(rel_close(psi_kappa(2.0, -1.0), 0.93947962212324610677, 1e-12));
    CHECK(rel_close(psi_kappa_complement(1e-12, -1.0), 7.5339783343703388936e-14, 1e-8));
    CHECK(psi_kappa_complement(INFINITY, -1.0) == doctest::Approx(std_normal_cdf(-1.0)).epsilon(1e-14));
    for (double u : {0.01, 0.3, 2.0, 50.0})
        CHECK(psi_kappa(u, -0.7) + psi_kappa_complement(u, -0.7) == doctest::Approx(1.0).epsilon(1e-14));
}

// ============================================================================
// Quadrature
// ============================================================================

TEST_CASE("gauss-legendre is exact on polynomials") {
    std::vector<double> x, w;
    gauss_legendre(8, x, w);
    for (int k = 0; k <= 15; ++k) {
        double acc = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) acc += w[i] * std::pow(x[i], k);
        const double exact = k % 2 ? 0.0 : 2.0 / (k + 1);
        CHECK(acc == doctest::Approx(exact).epsilon(1e-14));
    }
}

TEST_CASE("composite quadrature and adaptive integral") {
    const auto& q = Quadrature::standard();
    CHECK(q.integrate([](double g) { return normal_pdf(g); }) == doctest::Approx(1.0).epsilon(1e-13));
    CHECK(q.integrate([](double g) { return g * g * normal_pdf(g); }) == doctest::Approx(1.0).epsilon(1e-12));
    const double tail = integrate_adaptive([](double g) { return normal_pdf(g); }, 2.0, INFINITY);
    CHECK(tail == doctest::Approx(normal_sf(2.0)).epsilon(1e-12));
    const double kinked = integrate_adaptive([](double g) { return std::fabs(g - 0.3) * normal_pdf(g); }, -INFINITY,
                                             INFINITY, 1e-12, {0.3});
    CHECK(kinked == doctest::Approx(2.0 * normal_pdf(0.3) + 0.3 * (2.0 * std_normal_cdf(0.3) - 1.0)).epsilon(1e-11));
}

// ============================================================================
// Monte Carlo cross-checks
// ============================================================================

TEST_CASE("orthant and psi agree with sampling") {
    std::mt19937_64 gen(12345);
    std::normal_distribution<double> n01;
    const int N = 400000;
    const double q = 0.45, a = 0.2, kappa = -0.8, u = 0.7;
    int hits = 0;
    double psum = 0.0, psq = 0.0;
    for (int i = 0; i < N; ++i) {
        const double g1 = n01(gen), z = n01(gen);
        const double g2 = q * g1 + std::sqrt(1.0 - q * q) * z;
        hits += (g1 >= a && g2 >= a) ? 1 : 0;
        const double t = std::max(kappa - g1, 0.0);
        const double e = std::exp(-u * t * t);
        psum += e;
        psq += e * e;
    }
    const double p = static_cast<double>(hits) / N;
    CHECK(std::fabs(p - bivariate_orthant(q, a)) <= 4.0 * std::sqrt(p * (1 - p) / N));
    const double mean = psum / N, se = std::sqrt((psq / N - mean * mean) / N);
    CHECK(std::fabs(mean - psi_kappa(u, kappa)) <= 4.0 * se);
}
