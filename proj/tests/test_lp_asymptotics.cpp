#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "negperc/gauss_kernels.hpp"
#include "negperc/lp_asymptotics.hpp"

using namespace negperc;

namespace {

struct Point {
    double rho, r, kappa, delta;
};

// Points strictly inside Omega: delta at half of its largest admissible value.
std::vector<Point> omega_points(int count, std::uint64_t seed, const LinkFunction& link) {
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> rho_d(-0.9, 0.9), r_d(0.5, 2.0), k_d(-2.0, -0.5), f_d(0.2, 0.8);
    std::vector<Point> out;
    for (int i = 0; i < count; ++i) {
        Point p{rho_d(gen), r_d(gen), k_d(gen), 0.0};
        const double sig2 = 1.0 - p.rho * p.rho;
        p.delta = f_d(gen) * sig2 * p.r * p.r / neg_part_second_moment(p.rho, p.r, p.kappa, link);
        out.push_back(p);
    }
    return out;
}

// Draws of Z = rho YG + sqrt(1 - rho^2) r W - kappa.
std::vector<double> sample_z(const Point& p, const LinkFunction& link, int n, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> n01;
    std::uniform_real_distribution<double> u01;
    std::vector<double> z(n);
    const double sd = std::sqrt(1.0 - p.rho * p.rho) * p.r;
    for (auto& v : z) {
        const double g = n01(gen), w = n01(gen);
        const double y = u01(gen) < link(g) ? 1.0 : -1.0;
        v = p.rho * y * g + sd * w - p.kappa;
    }
    return z;
}

}  // namespace

// ============================================================================
// Omega and s*
// ============================================================================

TEST_CASE("negative part moment in the pure model") {
    // Pure noise: Z ~ N(-kappa, rho^2 + (1 - rho^2) r^2).
    const auto pure = LinkFunction::pure_noise();
    const double rho = 0.3, r = 1.4, kappa = -1.2;
    const double sd = std::sqrt(rho * rho + (1 - rho * rho) * r * r);
    CHECK(neg_part_second_moment(rho, r, kappa, pure) ==
          doctest::Approx(sd * sd * truncated_second_moment(kappa / sd)).epsilon(1e-10));
}

TEST_CASE("omega status") {
    const auto lg = LinkFunction::logistic(1.0);
    const double m = neg_part_second_moment(0.4, 1.0, -1.0, lg);
    const double edge = 0.84 / m;
    CHECK(omega_status(0.4, 1.0, -1.0, 0.5 * edge, lg) == OmegaStatus::strict);
    CHECK(omega_status(0.4, 1.0, -1.0, 2.0 * edge, lg) == OmegaStatus::outside);
    CHECK(omega_status(0.4, 1.0, -1.0, edge, lg) == OmegaStatus::boundary);
    CHECK(s_star(0.4, 1.0, -1.0, edge, lg) == 0.0);
    CHECK_THROWS_AS(s_star(0.4, 1.0, -1.0, 2.0 * edge, lg), std::domain_error);
}

TEST_CASE("s star solves its equation and matches sampling") {
    const auto lg = LinkFunction::logistic(1.0);
    int idx = 0;
    for (const auto& p : omega_points(5, 99, lg)) {
        const double s = s_star(p.rho, p.r, p.kappa, p.delta, lg);
        const double target = (1 - p.rho * p.rho) * p.r * p.r / p.delta;
        CHECK(s > 0.0);
        const auto z = sample_z(p, lg, 200000, 1000 + idx++);
        double sum = 0.0, sq = 0.0, relu = 0.0, relu_sq = 0.0;
        for (double v : z) {
            const double m = std::max(s, -v);
            sum += m * m;
            sq += m * m * m * m;
            const double pos = std::max(v + s, 0.0);
            relu += pos;
            relu_sq += pos * pos;
        }
        const double n = static_cast<double>(z.size());
        const double mean = sum / n, se = std::sqrt((sq / n - mean * mean) / n);
        CHECK(std::fabs(mean - target) <= 4.0 * se);
        const auto bm = big_m(p.rho, p.r, p.kappa, p.delta, lg);
        CHECK(bm.s_star == doctest::Approx(s));
        CHECK(std::fabs(bm.value - bm.identity) <= 1e-9);
        const double rm = relu / n, rse = std::sqrt((relu_sq / n - rm * rm) / n);
        CHECK(std::fabs(bm.value - p.kappa - rm) <= 4.0 * rse);
    }
}

// ============================================================================
// Maximization
// ============================================================================

TEST_CASE("random direction objective in the pure model") {
    const auto pure = LinkFunction::pure_noise();
    MaximizeOptions o;
    o.rho_points = 41;
    o.r_points = 41;
    o.objective = MObjective::random_direction;
    // More samples shrink the feasible set, so the optimum falls with delta.
    double prev = 1.0;
    for (double delta : {2.0, 4.0, 8.0}) {
        const auto res = maximize_m(-1.0, delta, pure, 1.0, -1.0, 1.0, o);
        REQUIRE(res.feasible);
        CHECK(res.value < prev);
        CHECK(res.value == doctest::Approx(res.best.rho));
        CHECK(res.best.r <= 1.0);
        prev = res.value;
    }
}

TEST_CASE("linear threshold in the pure model matches 1 / Phi") {
    const auto pure = LinkFunction::pure_noise();
    for (double kappa : {-1.0, -2.0}) {
        const double d = delta_lin_signal(kappa, pure);
        CHECK(std::fabs(d * std_normal_cdf(kappa) - 1.0) <= 0.01);
    }
}
