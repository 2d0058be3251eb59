#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "negperc/erm_solvers.hpp"

using namespace negperc;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

Dataset two_dim(const std::vector<double>& xs, const std::vector<double>& ys) {
    Dataset data;
    const int n = static_cast<int>(ys.size());
    data.features.resize(n, 2);
    data.labels.resize(n);
    for (int i = 0; i < n; ++i) {
        data.features(i, 0) = xs[2 * i];
        data.features(i, 1) = xs[2 * i + 1];
        data.labels(i) = ys[i];
    }
    return data;
}

// max over unit theta of min_i y_i <x_i, theta> by scanning the circle.
double brute_margin_2d(const Dataset& data, int steps) {
    double best = -INFINITY;
    for (int k = 0; k < steps; ++k) {
        const double a = 2.0 * std::numbers::pi * k / steps;
        VectorXd th(2);
        th << std::cos(a), std::sin(a);
        best = std::max(best, margin(th, data));
    }
    return best;
}

}  // namespace

// ============================================================================
// Data
// ============================================================================

TEST_CASE("sampling is deterministic and follows the model") {
    const auto a = sample_dataset(50, 7, DataModel::pure_noise, 42);
    const auto b = sample_dataset(50, 7, DataModel::pure_noise, 42);
    CHECK(a.features == b.features);
    CHECK(a.labels == b.labels);
    CHECK(sample_dataset(50, 7, DataModel::pure_noise, 43).features != a.features);
    for (int i = 0; i < a.n(); ++i) CHECK(std::fabs(a.labels(i)) == 1.0);

    // Signal model: agreement of y with sign(x_1) is E[phi(|G|)] > 1/2.
    const auto s = sample_dataset(20000, 3, DataModel::linear_signal, 7, LinkFunction::logistic(4.0));
    int agree = 0;
    for (int i = 0; i < s.n(); ++i) agree += (s.labels(i) * s.features(i, 0) > 0.0) ? 1 : 0;
    CHECK(agree > 0.8 * s.n());
    CHECK(s.theta_star() == VectorXd::Unit(3, 0));
}

TEST_CASE("snapshot round trip") {
    for (auto model : {DataModel::pure_noise, DataModel::linear_signal}) {
        const auto link = model == DataModel::linear_signal ? std::optional<LinkFunction>(LinkFunction::logistic(1.5))
                                                            : std::nullopt;
        const auto data = sample_dataset(13, 5, model, 99, link);
        std::stringstream buf;
        write_snapshot(buf, data);
        CHECK(buf.str().substr(0, 4) == "NPDS");
        CHECK(buf.str().size() == 4 + 4 + 8 + 8 + 1 + 8 + 8 + 13 + 13 * 5 * 8);
        const auto back = read_snapshot(buf);
        CHECK(back.features == data.features);
        CHECK(back.labels == data.labels);
        CHECK(back.model == data.model);
        CHECK(back.seed == data.seed);
        CHECK(back.link.has_value() == data.link.has_value());
        if (back.link) CHECK(back.link->alpha() == 1.5);
    }
    std::stringstream bad("XXXX");
    CHECK_THROWS(read_snapshot(bad));
}

TEST_CASE("margin matches a direct loop") {
    const auto data = sample_dataset(40, 6, DataModel::pure_noise, 3);
    VectorXd th = VectorXd::LinSpaced(6, -1.0, 2.0);
    double m = INFINITY;
    for (int i = 0; i < data.n(); ++i) m = std::min(m, data.labels(i) * data.features.row(i).dot(th) / th.norm());
    CHECK(margin(th, data) == doctest::Approx(m).epsilon(1e-14));
    CHECK(margin(3.0 * th, data) == doctest::Approx(m).epsilon(1e-14));
}

// ============================================================================
// Linear program
// ============================================================================

TEST_CASE("single constraint in the plane") {
    // maximize <v, theta> s.t. <a, theta> >= kappa, |theta| <= 1.
    const auto data = two_dim({1.0, 2.0}, {-1.0});  // a = (-1, -2)
    VectorXd v(2);
    v << 1.0, 0.0;
    VectorXd a(2);
    a << -1.0, -2.0;
    for (double kappa : {-0.5, -1.5, -3.0}) {
        VectorXd want;
        if (a.dot(v) >= kappa) {
            want = v;
        } else {
            // On the line <a_hat, theta> = t, on the side of v.
            const VectorXd ah = a / a.norm();
            const double t = kappa / a.norm();
            VectorXd perp(2);
            perp << -ah(1), ah(0);
            if (perp.dot(v) < 0) perp = -perp;
            want = t * ah + std::sqrt(1.0 - t * t) * perp;
        }
        const auto rep = lp_solve(data, kappa, v);
        CHECK(rep.converged);
        CHECK(rep.norm == doctest::Approx(1.0).epsilon(1e-6));
        CHECK((rep.theta_hat - want).norm() <= 1e-5);
        CHECK(rep.success);
    }
}

TEST_CASE("interior point optimum respects weak duality") {
    const auto data = sample_dataset(150, 60, DataModel::pure_noise, 11);
    const VectorXd v = lp_direction(data);
    for (double kappa : {-1.0, -1.5}) {
        const auto rep = lp_solve(data, kappa, v);
        CHECK(rep.converged);
        CHECK(rep.duality_gap >= -1e-9);
        CHECK(rep.duality_gap <= 1e-4);
        CHECK(rep.feasibility_residual <= 1e-6);
        CHECK(rep.norm <= 1.0 + 1e-9);
    }
}

TEST_CASE("dual subgradient bounds the optimum") {
    const auto data = sample_dataset(120, 60, DataModel::pure_noise, 12);
    const VectorXd v = lp_direction(data);
    LpOptions sub;
    sub.method = LpMethod::dual_subgradient;
    sub.max_iters = 4000;
    const auto ipm = lp_solve(data, -1.5, v);
    const auto sg = lp_solve(data, -1.5, v, sub);
    // Its dual value un - kappa sum(lambda) = gap + <v, theta_sg> bounds the optimum.
    CHECK(sg.duality_gap + v.dot(sg.theta_hat) >= v.dot(ipm.theta_hat * ipm.norm) - 1e-8);
    // With v feasible the multipliers stay at zero and theta = v.
    const auto easy = sample_dataset(20, 60, DataModel::pure_noise, 13);
    const VectorXd ve = lp_direction(easy);
    if (margin(ve, easy) >= -3.0) {
        const auto r = lp_solve(easy, -3.0, ve, sub);
        CHECK(r.success);
        CHECK((r.theta_hat - ve / ve.norm()).norm() <= 1e-12);
    }
}

TEST_CASE("infeasible program") {
    // y x = (1, 0) and (-1, 0) cannot both reach margin 0.5.
    const auto data = two_dim({1.0, 0.0, 1.0, 0.0}, {1.0, -1.0});
    VectorXd v(2);
    v << 0.0, 1.0;
    const auto rep = lp_solve(data, 0.5, v);
    CHECK_FALSE(rep.success);
    CHECK(rep.converged);
}

TEST_CASE("ball and unconstrained verdicts agree") {
    for (std::uint64_t seed : {21, 22, 23}) {
        for (double f : {0.6, 1.6}) {
            const double kappa = -1.5;
            const int d = 40;
            const int n = static_cast<int>(std::lround(f / 0.0668072 * d));
            const auto data = sample_dataset(n, d, DataModel::pure_noise, seed);
            CHECK(lp_success_equivalence_check(data, kappa, lp_direction(data)));
        }
    }
}

TEST_CASE("separable data makes the unconstrained program unbounded") {
    auto data = sample_dataset(30, 5, DataModel::pure_noise, 5);
    for (int i = 0; i < data.n(); ++i) data.labels(i) = data.features(i, 0) >= 0.0 ? 1.0 : -1.0;
    const VectorXd e1 = VectorXd::Unit(5, 0);
    CHECK(margin(e1, data) >= 0.0);
    const auto free = lp_solve_unconstrained(data, -0.5, e1);
    CHECK(free.unbounded);
    const auto est = max_margin_estimate(data);
    CHECK(est.kappa_hat >= margin(e1, data) - 1e-12);
    CHECK_THROWS_AS(radius_from_margin(est.kappa_hat), std::domain_error);
}

// ============================================================================
// Gradient descent
// ============================================================================

TEST_CASE("gradient matches finite differences") {
    const auto data = sample_dataset(80, 10, DataModel::pure_noise, 8);
    std::mt19937_64 gen(8);
    std::normal_distribution<double> n01;
    for (int k = 0; k < 10; ++k) {
        VectorXd th(10);
        for (auto& x : th) x = n01(gen);
        const double kappa = -0.5 * (k + 1);
        const VectorXd g = gd_gradient(th, data, kappa);
        VectorXd fd(10);
        const double h = 1e-6;
        for (int j = 0; j < 10; ++j) {
            VectorXd a = th, b = th;
            a(j) += h;
            b(j) -= h;
            fd(j) = (gd_risk(a, data, kappa) - gd_risk(b, data, kappa)) / (2 * h);
        }
        CHECK((g - fd).norm() <= 1e-5 * g.norm());
    }
}

TEST_CASE("gradient descent on an easy instance") {
    const auto data = sample_dataset(30, 50, DataModel::pure_noise, 9);
    GdConfig cfg;
    cfg.max_iters = 20000;
    cfg.trajectory_stride = 10;
    const auto res = gd_solve(data, -1.0, cfg);
    CHECK(res.report.success);
    CHECK(res.report.margin >= -1.0);
    CHECK(res.report.risk_monotone);
    CHECK_FALSE(res.trajectory.empty());
    // Same seed, same run.
    const auto again = gd_solve(data, -1.0, cfg);
    CHECK(again.report.theta_hat == res.report.theta_hat);
}

// ============================================================================
// Margin and radius
// ============================================================================

TEST_CASE("max margin estimate is a lower bound") {
    for (std::uint64_t seed : {1, 2, 3, 4, 5}) {
        const auto data = sample_dataset(12, 2, DataModel::pure_noise, seed);
        const double brute = brute_margin_2d(data, 200000);
        const auto est = max_margin_estimate(data);
        CHECK(est.kappa_hat <= brute + 1e-4);
        CHECK(est.kappa_hat >= margin(lp_direction(data), data));
        CHECK(margin(est.theta_best, data) == doctest::Approx(est.kappa_hat));
    }
}

TEST_CASE("radius duality") {
    for (double k : {-0.1, -0.5, -2.0}) {
        const auto r = radius_from_margin(k);
        CHECK(r.outer * r.inner == doctest::Approx(1.0));
        CHECK(r.inner == doctest::Approx(-k));
    }
    CHECK_THROWS_AS(radius_from_margin(0.0), std::domain_error);
}
