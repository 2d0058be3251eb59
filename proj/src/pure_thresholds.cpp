#include "negperc/pure_thresholds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include <boost/math/tools/roots.hpp>

#include "negperc/gauss_kernels.hpp"

namespace negperc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kGolden = 0.61803398874989484820;

double i_term(double q) { return -0.5 * std::log1p(-q * q); }

// e'(sin th) cos th; the 1/sqrt(1-q^2) singularity cancels against cos th.
double increment_integrand(double th, double kappa, double c) {
    const double q = std::sin(th);
    const double ct = std::cos(th);
    const double opq = 1.0 + q;
    if (!(opq > 0.0)) return 0.0;
    double v = std::exp(-kappa * kappa / opq - 2.0 * kappa * c) / (2.0 * std::numbers::pi);
    if (c > 0.0 && ct > 0.0) {
        const double a = kappa + c * opq;
        const double b = std::sqrt((1.0 - q) / opq) * a;
        const double shift = std::sqrt(2.0 / std::numbers::pi) * c * std::exp(log_normal_sf(b) + c * c * opq - 0.5 * a * a);
        v += ct * (c * c * tilted_pair_moment(q, kappa, c) - shift);
    }
    return v;
}

template <class F>
double golden_max(F&& f, double lo, double hi, int iters, double* arg) {
    double a = lo, b = hi;
    double x1 = b - kGolden * (b - a), x2 = a + kGolden * (b - a);
    double f1 = f(x1), f2 = f(x2);
    for (int i = 0; i < iters; ++i) {
        if (f1 < f2) {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + kGolden * (b - a);
            f2 = f(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - kGolden * (b - a);
            f1 = f(x1);
        }
    }
    if (f1 >= f2) {
        *arg = x1;
        return f1;
    }
    *arg = x2;
    return f2;
}

}  // namespace

// ============================================================================
// Second-moment machinery
// ============================================================================

std::vector<double> second_moment_q_grid(int uniform_points, int boundary_digits) {
    std::vector<double> q;
    for (int i = 1; i <= uniform_points; ++i) {
        const double v = -1.0 + 2.0 * i / (uniform_points + 1);
        if (std::fabs(v) > 1e-12) q.push_back(v);
    }
    for (int j = 1; j <= boundary_digits; ++j) {
        const double v = 1.0 - std::pow(10.0, -j);
        q.push_back(v);
        q.push_back(-v);
    }
    std::sort(q.begin(), q.end());
    q.erase(std::unique(q.begin(), q.end()), q.end());
    return q;
}

double tilted_pair_moment_derivative(double q, double kappa, double c) {
    if (!(std::fabs(q) < 1.0)) throw std::invalid_argument("tilted_pair_moment_derivative: |q| >= 1");
    return increment_integrand(std::asin(q), kappa, c) / std::sqrt((1.0 - q) * (1.0 + q));
}

std::vector<double> tilted_moment_increments(double kappa, double c, const std::vector<double>& q_grid,
                                             int segment_order) {
    std::vector<double> gx, gw;
    gauss_legendre(segment_order, gx, gw);
    auto segment = [&](double t0, double t1) {
        const double mid = 0.5 * (t0 + t1), half = 0.5 * (t1 - t0);
        double acc = 0.0;
        for (int k = 0; k < segment_order; ++k) acc += gw[k] * increment_integrand(mid + half * gx[k], kappa, c);
        return half * acc;
    };
    std::vector<double> out(q_grid.size(), 0.0);
    // Positive branch, ascending from zero.
    double acc = 0.0, tprev = 0.0;
    for (std::size_t i = 0; i < q_grid.size(); ++i) {
        if (q_grid[i] <= 0.0) continue;
        const double t = std::asin(q_grid[i]);
        acc += segment(tprev, t);
        tprev = t;
        out[i] = acc;
    }
    // Negative branch, descending from zero.
    acc = 0.0;
    tprev = 0.0;
    for (std::size_t i = q_grid.size(); i-- > 0;) {
        if (q_grid[i] >= 0.0) continue;
        const double t = std::asin(q_grid[i]);
        acc -= segment(t, tprev);
        tprev = t;
        out[i] = acc;
    }
    return out;
}

double second_moment_delta(const std::vector<double>& q_grid, const std::vector<double>& excess,
                           double excess_plus_h, double excess_minus_h, const LowerBoundOptions& opts,
                           LowerBoundDiagnostics* diag) {
    const double h = opts.curvature_step;
    const double ih = i_term(h);
    const double curv = std::log1p(excess_plus_h) + std::log1p(excess_minus_h);

    auto accepts = [&](double delta) {
        // Psi(h) + Psi(-h) - 2 Psi(0) > 0
        if (!(2.0 * ih / delta - curv > 0.0)) return false;
        for (std::size_t i = 0; i < q_grid.size(); ++i) {
            const double e = excess[i];
            const double iq = i_term(q_grid[i]);
            const double lhs = opts.criterion == GridCriterion::exact ? std::log1p(e) : e;
            if (!(iq / delta - lhs > 0.0)) return false;
        }
        return true;
    };

    double lo = 1e-8, hi = 1.0;
    int steps = 0;
    if (!accepts(lo)) return 0.0;
    while (accepts(hi)) {
        lo = hi;
        hi *= 2.0;
        if (hi > 1e300) break;
    }
    while ((hi - lo) > opts.rel_width * lo) {
        const double mid = 0.5 * (lo + hi);
        (accepts(mid) ? lo : hi) = mid;
        ++steps;
    }

    if (diag) {
        diag->delta_curvature = curv > 0.0 ? 2.0 * ih / curv : kInf;
        double best = kInf, arg = 0.0;
        for (std::size_t i = 0; i < q_grid.size(); ++i) {
            const double e = excess[i];
            const double lhs = opts.criterion == GridCriterion::exact ? std::log1p(e) : e;
            if (lhs > 0.0) {
                const double d = i_term(q_grid[i]) / lhs;
                if (d < best) {
                    best = d;
                    arg = q_grid[i];
                }
            }
        }
        diag->delta_grid = best;
        diag->binding_q = arg;
        diag->grid_size = static_cast<int>(q_grid.size());
        diag->bisection_steps = steps;
    }
    return lo;
}

double upper_bound_lhs(double c, double s) {
    const double cs = c * s;
    return cs / (cs + std::sqrt(cs * cs + 4.0)) + std::asinh(0.5 * cs);
}

double upper_bound_inf_sup(const std::function<double(double)>& g, double g_inf, double g_slope0, double s,
                           const UpperBoundOptions& opts, UpperBoundDiagnostics* diag) {
    // Shared log-grid of g values; the grid starts below the smallest c^2/(4K).
    const double k_min = upper_bound_lhs(opts.c_min, s);
    if (!(k_min > 0.0)) {
        if (diag) *diag = UpperBoundDiagnostics{opts.c_min, kInf, 0.0};
        return 0.0;
    }
    const double u_first = opts.c_min * opts.c_min / (4.0 * k_min) * 0.1;
    const double u_last = std::max(opts.u_max, u_first * 1e12);
    const int n_u = static_cast<int>(std::ceil(std::log10(u_last / u_first) * opts.u_points_per_decade)) + 1;
    std::vector<double> lu(n_u), gu(n_u);
    for (int i = 0; i < n_u; ++i) {
        lu[i] = std::log(u_first) + i * std::log(u_last / u_first) / (n_u - 1);
        gu[i] = g(std::exp(lu[i]));
    }

    // sup over u for a fixed c; refine = golden search on log u with exact g.
    auto sup_u = [&](double c, bool refine, double* u_arg) {
        const double K = upper_bound_lhs(c, s);
        if (!(K > 0.0)) {
            *u_arg = kInf;
            return 0.0;
        }
        const double u0 = c * c / (4.0 * K);
        double best = g_inf > 0.0 ? K / g_inf : kInf;
        int arg = -1;
        for (int i = 0; i < n_u; ++i) {
            const double u = std::exp(lu[i]);
            if (u <= u0 || !(gu[i] > 0.0)) continue;
            const double v = (K - c * c / (4.0 * u)) / gu[i];
            if (v > best) {
                best = v;
                arg = i;
            }
        }
        if (arg < 0) {
            *u_arg = kInf;
            return best;
        }
        *u_arg = std::exp(lu[arg]);
        if (!refine) return best;
        const double a = std::max(lu[std::max(arg - 1, 0)], std::log(u0));
        const double b = lu[std::min(arg + 1, n_u - 1)];
        auto h = [&](double x) {
            const double u = std::exp(x);
            const double gv = g(u);
            return gv > 0.0 ? (K - c * c / (4.0 * u)) / gv : -kInf;
        };
        double x_arg;
        const double v = golden_max(h, a, b, opts.refine_iters / 2, &x_arg);
        if (v > best) {
            best = v;
            *u_arg = std::exp(x_arg);
        }
        return best;
    };

    // inf over c on a log grid, then golden refinement around the grid minimum.
    std::vector<double> lc(opts.c_points), vc(opts.c_points);
    int arg = 0;
    for (int i = 0; i < opts.c_points; ++i) {
        lc[i] = std::log(opts.c_min) + i * std::log(opts.c_max / opts.c_min) / (opts.c_points - 1);
        double ua;
        vc[i] = sup_u(std::exp(lc[i]), false, &ua);
        if (vc[i] < vc[arg]) arg = i;
    }
    const double a = lc[std::max(arg - 1, 0)];
    const double b = lc[std::min(arg + 1, opts.c_points - 1)];
    double u_opt = kInf;
    auto neg = [&](double x) {
        double ua;
        return -sup_u(std::exp(x), true, &ua);
    };
    double x_opt;
    double value = -golden_max(neg, a, b, opts.refine_iters / 2, &x_opt);
    // The grid endpoint may beat the interior search when the inf sits at c_min.
    double ua_edge;
    const double edge = sup_u(std::exp(lc[arg]), true, &ua_edge);
    if (edge < value) {
        value = edge;
        x_opt = lc[arg];
    }
    sup_u(std::exp(x_opt), true, &u_opt);
    double c_opt = std::exp(x_opt);
    // Small-c limit: K_s(c) ~ cs and g(u) ~ g'(0) u give s^2 / g'(0).
    const double limit = g_slope0 > 0.0 ? s * s / g_slope0 : kInf;
    if (limit <= value) {
        value = limit;
        c_opt = 0.0;
        u_opt = 0.0;
    }
    if (diag) *diag = UpperBoundDiagnostics{c_opt, u_opt, value};
    return value;
}

// ============================================================================
// Pure-noise thresholds
// ============================================================================

double c_star(double kappa) {
    if (!(kappa < 0.0)) throw std::invalid_argument("c_star: kappa must be negative");
    // A(c) = c - 1/R(kappa + c) is increasing with A(0) < 0.
    auto A = [kappa](double c) { return c - 1.0 / mills_ratio(kappa + c); };
    const double hi = -kappa + 1.0 / -kappa + 1.0;
    std::uintmax_t iters = 500;
    boost::math::tools::eps_tolerance<double> tol(std::numeric_limits<double>::digits - 1);
    const auto r = boost::math::tools::toms748_solve(A, 0.0, hi, A(0.0), A(hi), tol, iters);
    const double c0 = r.first, c1 = r.second;
    auto resid = [kappa](double c) { return std::fabs(c * normal_sf(kappa + c) - normal_pdf(kappa + c)); };
    return resid(c0) <= resid(c1) ? c0 : c1;
}

double psi_rate(double q, double kappa, double delta) {
    if (!(std::fabs(q) < 1.0)) throw std::invalid_argument("psi_rate: |q| must be < 1");
    const double c = c_star(kappa);
    return -std::log(tilted_pair_moment(q, kappa, c)) - std::log1p(-q * q) / (2.0 * delta);
}

double delta_lb_pure(double kappa, const LowerBoundOptions& opts, LowerBoundDiagnostics* diag) {
    if (!(kappa < 0.0)) throw std::invalid_argument("delta_lb_pure: kappa must be negative");
    const double c = c_star(kappa);
    const double e0 = std::exp(c * c + 2.0 * log_normal_sf(kappa + c));
    const auto grid = second_moment_q_grid(opts.uniform_points, opts.boundary_digits);
    auto inc = tilted_moment_increments(kappa, c, grid, opts.segment_order);
    for (double& v : inc) v /= e0;
    const double h = opts.curvature_step;
    const auto hh = tilted_moment_increments(kappa, c, {-h, h}, opts.segment_order);
    LowerBoundDiagnostics local;
    const double d = second_moment_delta(grid, inc, hh[1] / e0, hh[0] / e0, opts, &local);
    local.c_star = c;
    local.e0 = e0;
    if (diag) *diag = local;
    return d;
}

double delta_ub_pure(double kappa, const UpperBoundOptions& opts, UpperBoundDiagnostics* diag) {
    if (!(kappa < 0.0)) throw std::invalid_argument("delta_ub_pure: kappa must be negative");
    auto g = [kappa](double u) { return -std::log1p(-psi_kappa_complement(u, kappa)); };
    const double g_inf = -std::log1p(-std_normal_cdf(kappa));
    return upper_bound_inf_sup(g, g_inf, truncated_second_moment(kappa), 1.0, opts, diag);
}

double delta_lin_pure(double kappa) {
    if (kappa > 0.0) throw std::invalid_argument("delta_lin_pure: kappa must be <= 0");
    return 1.0 / std_normal_cdf(kappa);
}

double delta_rs(double kappa) { return 1.0 / truncated_second_moment(kappa); }

PureThresholdRecord pure_threshold_record(double kappa, const LowerBoundOptions& lb, const UpperBoundOptions& ub) {
    PureThresholdRecord rec;
    rec.kappa = kappa;
    rec.delta_rs = delta_rs(kappa);
    rec.delta_lin = kappa <= 0.0 ? delta_lin_pure(kappa) : std::numeric_limits<double>::quiet_NaN();
    if (kappa < 0.0) {
        rec.delta_lb = delta_lb_pure(kappa, lb, &rec.lb_diag);
        rec.delta_ub = delta_ub_pure(kappa, ub, &rec.ub_diag);
    }
    return rec;
}

}  // namespace negperc
