#include "negperc/lp_asymptotics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "negperc/gauss_kernels.hpp"

namespace negperc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double sigma_of(double rho) { return std::sqrt((1.0 - rho) * (1.0 + rho)); }

// Features of integrands in YG: -Z changes sign near rho s = kappa, and
// max{s*, -Z} switches near rho s = kappa -+ s*.
std::vector<double> z_breaks(double rho, double kappa, double shift) {
    std::vector<double> b;
    if (rho != 0.0) {
        b.push_back(kappa / rho);
        if (shift > 0.0) {
            b.push_back((kappa - shift) / rho);
            b.push_back((kappa + shift) / rho);
        }
    }
    return b;
}

void check_args(double rho, double r) {
    if (!(std::fabs(rho) <= 1.0)) throw std::invalid_argument("lp_asymptotics: |rho| > 1");
    if (!(r >= 0.0)) throw std::invalid_argument("lp_asymptotics: r < 0");
}

// E[max{s, -Z}^2] and its derivative in s.
double max_sq(double rho, double sd, double kappa, double s, const LinkFunction& link) {
    auto f = [&](double y) { return gauss_max_sq_moment(kappa - rho * y, sd, s); };
    return yg_expectation(link, f, z_breaks(rho, kappa, s));
}

double max_sq_slope(double rho, double sd, double kappa, double s, const LinkFunction& link) {
    auto f = [&](double y) {
        const double d = s - (kappa - rho * y);
        if (sd == 0.0) return d > 0.0 ? 1.0 : 0.0;
        return std_normal_cdf(d / sd);
    };
    return 2.0 * s * yg_expectation(link, f, z_breaks(rho, kappa, s));
}

}  // namespace

// ============================================================================
// Scalar quantities
// ============================================================================

double neg_part_second_moment(double rho, double r, double kappa, const LinkFunction& link) {
    check_args(rho, r);
    const double sd = sigma_of(rho) * r;
    auto f = [&](double y) {
        const double a = kappa - rho * y;  // Z < 0 iff sd W < a
        if (sd == 0.0) return a > 0.0 ? a * a : 0.0;
        return sd * sd * truncated_second_moment(a / sd);
    };
    return yg_expectation(link, f, z_breaks(rho, kappa, 0.0));
}

OmegaStatus omega_status(double rho, double r, double kappa, double delta, const LinkFunction& link, double tol) {
    if (!(delta > 0.0)) throw std::invalid_argument("omega_status: delta must be positive");
    const double sig = sigma_of(rho);
    const double lhs = sig * sig * r * r / delta;
    const double rhs = neg_part_second_moment(rho, r, kappa, link);
    const double diff = lhs - rhs;
    if (std::fabs(diff) <= tol * std::max(lhs, rhs)) return OmegaStatus::boundary;
    return diff > 0.0 ? OmegaStatus::strict : OmegaStatus::outside;
}

double s_star(double rho, double r, double kappa, double delta, const LinkFunction& link) {
    check_args(rho, r);
    const OmegaStatus st = omega_status(rho, r, kappa, delta, link);
    if (st == OmegaStatus::outside) throw std::domain_error("s_star: (rho, r) lies outside Omega, no solution");
    if (st == OmegaStatus::boundary) return 0.0;
    const double sd = sigma_of(rho) * r;
    const double target = sd * sd / delta;
    const double tol = 1e-10 * std::max(1.0, target);
    // h(s) = E[max{s, -Z}^2] - target is increasing and convex with h(0) < 0 and
    // h(sqrt(target)) >= 0, so Newton from the right decreases monotonically.
    double lo = 0.0, hi = std::sqrt(target), s = hi;
    for (int it = 0; it < 200; ++it) {
        const double h = max_sq(rho, sd, kappa, s, link) - target;
        if (std::fabs(h) <= tol) return s;
        (h > 0.0 ? hi : lo) = s;
        const double dh = max_sq_slope(rho, sd, kappa, s, link);
        double next = dh > 0.0 ? s - h / dh : 0.5 * (lo + hi);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (hi - lo <= 1e-16 * std::max(1.0, hi)) return s;
        s = next;
    }
    return s;
}

BigM big_m(double rho, double r, double kappa, double delta, const LinkFunction& link) {
    BigM out;
    out.s_star = s_star(rho, r, kappa, delta, link);
    const double sd = sigma_of(rho) * r;
    const double s = out.s_star;
    const auto breaks = z_breaks(rho, kappa, s);
    out.value = yg_expectation(link, [&](double y) { return gauss_relu_mean(rho * y - kappa + s, sd); }, breaks) + kappa;
    out.identity = rho * mean_yg(link) + s +
                   yg_expectation(link, [&](double y) { return gauss_relu_mean(kappa - rho * y - s, sd); }, breaks);
    return out;
}

// ============================================================================
// Maximization
// ============================================================================

namespace {

// Objective on Omega, NaN outside.
double objective(double rho, double r, double kappa, double delta, const LinkFunction& link, MObjective obj,
                 OmegaStatus* st) {
    *st = omega_status(rho, r, kappa, delta, link);
    if (*st == OmegaStatus::outside) return std::numeric_limits<double>::quiet_NaN();
    if (obj == MObjective::random_direction) return rho;
    const double s = *st == OmegaStatus::boundary ? 0.0 : s_star(rho, r, kappa, delta, link);
    const double sd = sigma_of(rho) * r;
    return yg_expectation(link, [&](double y) { return gauss_relu_mean(rho * y - kappa + s, sd); },
                          z_breaks(rho, kappa, s)) +
           kappa;
}

}  // namespace

MaximizeResult maximize_m(double kappa, double delta, const LinkFunction& link, double r_max, double rho_lo,
                          double rho_hi, const MaximizeOptions& opts) {
    if (!(delta > 0.0)) throw std::invalid_argument("maximize_m: delta must be positive");
    if (!(r_max > 0.0)) throw std::invalid_argument("maximize_m: r_max must be positive");
    if (!(rho_lo >= -1.0 && rho_hi <= 1.0 && rho_lo <= rho_hi))
        throw std::invalid_argument("maximize_m: bad rho interval");
    const int nr = std::max(opts.rho_points, 2), nq = std::max(opts.r_points, 2);
    const double drho = (rho_hi - rho_lo) / (nr - 1), dr = r_max / (nq - 1);

    MaximizeResult res;
    std::vector<double> val(static_cast<std::size_t>(nr) * nq, -kInf);
    int bi = -1, bj = -1;
    for (int i = 0; i < nr; ++i) {
        const double rho = rho_lo + drho * i;
        for (int j = 0; j < nq; ++j) {
            const double r = dr * j;
            OmegaStatus st;
            const double v = objective(rho, r, kappa, delta, link, opts.objective, &st);
            if (st == OmegaStatus::outside) continue;
            ++res.feasible_points;
            if (st == OmegaStatus::strict) ++res.strict_points;
            res.max_feasible_r = std::max(res.max_feasible_r, r);
            val[static_cast<std::size_t>(i) * nq + j] = v;
            if (bi < 0 || v > val[static_cast<std::size_t>(bi) * nq + bj]) {
                bi = i;
                bj = j;
            }
        }
    }
    if (bi < 0) return res;
    res.feasible = true;
    const double grid_best = val[static_cast<std::size_t>(bi) * nq + bj];
    for (int i = 0; i < nr && !res.near_tie; ++i)
        for (int j = 0; j < nq; ++j) {
            if (std::abs(i - bi) <= 1 && std::abs(j - bj) <= 1) continue;
            if (val[static_cast<std::size_t>(i) * nq + j] >= grid_best - opts.tie_tol) {
                res.near_tie = true;
                break;
            }
        }

    // Nelder-Mead on (rho, r), clamped to the rectangle; points outside Omega
    // score -inf.
    auto clamp = [&](std::array<double, 2> p) {
        p[0] = std::clamp(p[0], rho_lo, rho_hi);
        p[1] = std::clamp(p[1], 0.0, r_max);
        return p;
    };
    auto score = [&](const std::array<double, 2>& p) {
        OmegaStatus st;
        const double v = objective(p[0], p[1], kappa, delta, link, opts.objective, &st);
        return st == OmegaStatus::outside ? -kInf : v;
    };
    const std::array<double, 2> p0{rho_lo + drho * bi, dr * bj};
    std::array<std::array<double, 2>, 3> x{p0, clamp({p0[0] + 0.5 * drho, p0[1]}), clamp({p0[0], p0[1] + 0.5 * dr})};
    if (x[1] == p0) x[1] = clamp({p0[0] - 0.5 * drho, p0[1]});
    if (x[2] == p0) x[2] = clamp({p0[0], p0[1] - 0.5 * dr});
    std::array<double, 3> f{grid_best, score(x[1]), score(x[2])};
    for (int it = 0; it < 2000; ++it) {
        std::array<int, 3> o{0, 1, 2};
        std::sort(o.begin(), o.end(), [&](int a, int b) { return f[a] > f[b]; });
        const auto& best = x[o[0]];
        double size = 0.0;
        for (int k : {o[1], o[2]}) size = std::max(size, std::hypot(x[k][0] - best[0], x[k][1] - best[1]));
        if (size < opts.arg_tol) break;
        const int w = o[2];
        const std::array<double, 2> c{0.5 * (x[o[0]][0] + x[o[1]][0]), 0.5 * (x[o[0]][1] + x[o[1]][1])};
        auto along = [&](double t) { return clamp({c[0] + t * (x[w][0] - c[0]), c[1] + t * (x[w][1] - c[1])}); };
        const auto xr = along(-1.0);
        const double fr = score(xr);
        if (fr > f[o[0]]) {
            const auto xe = along(-2.0);
            const double fe = score(xe);
            if (fe > fr) {
                x[w] = xe;
                f[w] = fe;
            } else {
                x[w] = xr;
                f[w] = fr;
            }
        } else if (fr > f[o[1]]) {
            x[w] = xr;
            f[w] = fr;
        } else {
            const auto xc = fr > f[w] ? along(-0.5) : along(0.5);
            const double fc = score(xc);
            if (fc > std::max(f[w], fr)) {
                x[w] = xc;
                f[w] = fc;
            } else {
                for (int k : {o[1], o[2]}) {
                    x[k] = {0.5 * (x[k][0] + best[0]), 0.5 * (x[k][1] + best[1])};
                    f[k] = score(x[k]);
                }
            }
        }
    }
    const int top = static_cast<int>(std::max_element(f.begin(), f.end()) - f.begin());
    res.best.rho = x[top][0];
    res.best.r = x[top][1];
    res.best.in_omega = omega_status(res.best.rho, res.best.r, kappa, delta, link);
    res.best.s_star = res.best.in_omega == OmegaStatus::boundary
                          ? 0.0
                          : s_star(res.best.rho, res.best.r, kappa, delta, link);
    res.best.big_m = f[top];
    res.value = f[top];
    return res;
}

// ============================================================================
// LP threshold
// ============================================================================

bool lin_condition(double kappa, double delta, const LinkFunction& link, const LinSignalOptions& opts) {
    MaximizeOptions mo = opts.grid;
    if (!link.has_signal()) mo.objective = MObjective::random_direction;
    const auto one = maximize_m(kappa, delta, link, 1.0, -1.0, 1.0, mo);
    if (!one.feasible || one.strict_points == 0) return false;
    double prev = 1.0;
    for (double cap : opts.r_caps) {
        if (!(cap > prev)) continue;
        const auto wide = maximize_m(kappa, delta, link, cap, -1.0, 1.0, mo);
        if (wide.best.r > 1.0 + opts.r_margin && wide.value > one.value) return true;
        // Omega has nothing beyond r = 1 on this grid: larger caps cannot help.
        if (wide.max_feasible_r <= 1.0) return false;
        prev = cap;
    }
    return false;
}

double delta_lin_signal(double kappa, const LinkFunction& link, const LinSignalOptions& opts) {
    if (!(kappa < 0.0)) throw std::invalid_argument("delta_lin_signal: kappa must be negative");
    auto ok = [&](double d) { return lin_condition(kappa, d, link, opts); };
    // Bracket in log scale starting from the pure-noise value.
    double lo = 1.0 / std_normal_cdf(kappa), hi = lo;
    if (ok(lo)) {
        do {
            lo = hi;
            hi *= 4.0;
        } while (ok(hi) && hi < 1e300);
    } else {
        do {
            hi = lo;
            lo *= 0.25;
        } while (!ok(lo) && lo > 1e-6);
    }
    while (hi / lo - 1.0 > opts.rel_width) {
        const double mid = std::sqrt(lo * hi);
        (ok(mid) ? lo : hi) = mid;
    }
    return std::sqrt(lo * hi);
}

}  // namespace negperc
