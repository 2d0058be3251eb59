#include "negperc/signal_thresholds.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "negperc/gauss_kernels.hpp"
#include "negperc/seeding.hpp"

namespace negperc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kGolden = 0.61803398874989484820;

template <class F>
double golden_min(F&& f, double lo, double hi, int iters, double* arg) {
    double a = lo, b = hi;
    double x1 = b - kGolden * (b - a), x2 = a + kGolden * (b - a);
    double f1 = f(x1), f2 = f(x2);
    for (int i = 0; i < iters; ++i) {
        if (f1 > f2) {
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
    if (f1 <= f2) {
        *arg = x1;
        return f1;
    }
    *arg = x2;
    return f2;
}

// Uniform and normal draws from a splitmix64 stream; portable and seed-stable.
struct SplitMix {
    std::uint64_t state;
    std::uint64_t next() {
        const std::uint64_t out = splitmix64(state);
        state += 0x9e3779b97f4a7c15ULL;
        return out;
    }
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
    double normal() {
        double u = uniform();
        while (u <= 0.0) u = uniform();
        return std::sqrt(-2.0 * std::log(u)) * std::cos(2.0 * std::numbers::pi * uniform());
    }
};

double logit(double x) { return std::log(x / (1.0 - x)); }
double expit(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

// ============================================================================
// Upper bound and the rho band
// ============================================================================

double delta_ub_signal(double kappa, double rho, const LinkFunction& link, const SignalUpperOptions& opts,
                       UpperBoundDiagnostics* diag) {
    if (!(kappa < 0.0)) throw std::invalid_argument("delta_ub_signal: kappa must be negative");
    if (!(std::fabs(rho) <= 1.0)) throw std::invalid_argument("delta_ub_signal: |rho| > 1");
    const double s = std::sqrt((1.0 - rho) * (1.0 + rho));
    if (s == 0.0) {
        // Left-hand side is identically 0; every delta > 0 is feasible.
        if (diag) *diag = UpperBoundDiagnostics{0.0, kInf, 0.0};
        return 0.0;
    }
    auto g = [&](double u) { return -std::log1p(-psi_kappa_rho_complement(u, kappa, rho, link)); };
    const double g_inf = -std::log1p(-mixture_tail(rho, 1.0, -kappa, link));
    const double slope = psi_kappa_rho_slope(kappa, rho, link);
    return upper_bound_inf_sup(g, g_inf, slope, s, opts.inner, diag);
}

SignalUpperMax delta_ub_signal_max(double kappa, const LinkFunction& link, const SignalUpperOptions& opts) {
    const int n = std::max(opts.rho_points, 3);
    std::vector<double> rho(n), val(n);
    int arg = 0;
    for (int i = 0; i < n; ++i) {
        rho[i] = -1.0 + 2.0 * i / (n - 1);
        val[i] = delta_ub_signal(kappa, rho[i], link, opts);
        if (val[i] > val[arg]) arg = i;
    }
    SignalUpperMax out{val[arg], rho[arg]};
    const double a = rho[std::max(arg - 1, 0)], b = rho[std::min(arg + 1, n - 1)];
    double x;
    const double v = -golden_min([&](double r) { return -delta_ub_signal(kappa, r, link, opts); }, a, b,
                                 opts.rho_refine_iters, &x);
    if (v > out.delta) out = SignalUpperMax{v, x};
    return out;
}

RhoBand rho_band(double kappa, double delta, const LinkFunction& link, const SignalUpperOptions& opts) {
    if (!(delta > 0.0)) throw std::invalid_argument("rho_band: delta must be positive");
    const int n = std::max(opts.rho_points, 3);
    std::vector<double> rho(n);
    std::vector<char> below(n);
    auto pred = [&](double r) { return delta_ub_signal(kappa, r, link, opts) < delta; };
    bool all = true;
    for (int i = 0; i < n; ++i) {
        rho[i] = -1.0 + 2.0 * i / (n - 1);
        below[i] = pred(rho[i]);
        all = all && below[i];
    }
    RhoBand band;
    if (all) {
        band.empty = true;
        return band;
    }
    // Crossing between a grid point that satisfies the predicate and one that does not.
    auto cross = [&](double good, double bad) {
        for (int it = 0; it < 24; ++it) {
            const double mid = 0.5 * (good + bad);
            (pred(mid) ? good : bad) = mid;
        }
        return good;
    };
    int first = 0;
    while (below[first]) ++first;
    int last = n - 1;
    while (below[last]) --last;
    band.rho_min = first == 0 ? -1.0 : cross(rho[first - 1], rho[first]);
    band.rho_max = last == n - 1 ? 1.0 : cross(rho[last + 1], rho[last]);
    return band;
}

double dee_kernel(double t) {
    if (!(t > 0.0)) return 0.0;
    if (std::isinf(t)) return 1.0;
    return one_minus_u_mills(1.0 / std::sqrt(2.0 * t));
}

double dee(double a, const UpperBoundOptions& opts, UpperBoundDiagnostics* diag) {
    if (!(a >= 0.0)) throw std::invalid_argument("dee: a must be nonnegative");
    if (a == 0.0) {
        if (diag) *diag = UpperBoundDiagnostics{0.0, 0.0, 0.0};
        return 0.0;
    }
    // Multiplying the inequality by c puts it in the same form as the pure-noise
    // bound with s = 1 and g(u) = J(u / a), J(+inf) = 1, J'(0) = 2.
    // g varies on the scale u ~ a, so both grids stretch with a.
    UpperBoundOptions o = opts;
    o.u_max = std::max(opts.u_max, 1e6 * a);
    o.c_max = std::max(opts.c_max, 1e3 * std::sqrt(a));
    auto g = [a](double u) { return dee_kernel(u / a); };
    return upper_bound_inf_sup(g, 1.0, 2.0 / a, 1.0, o, diag);
}

// ============================================================================
// Truncated second moment
// ============================================================================

double delta_sec(double rho, double kappa_eff, double kappa_t, const LinkFunction& link,
                 const SecondMomentSignalOptions& opts, SecondMomentSignalDiagnostics* diag) {
    if (!(rho > 0.0 && rho < 1.0)) throw std::invalid_argument("delta_sec: rho must lie in (0, 1)");
    if (!(rho * kappa_t < 0.0 && rho * kappa_t > kappa_eff))
        throw std::invalid_argument("delta_sec: need 0 > rho kappa_t > kappa_eff");
    const double sig = std::sqrt((1.0 - rho) * (1.0 + rho));
    const auto& lb = opts.lb;
    const auto grid = second_moment_q_grid(lb.uniform_points, lb.boundary_digits);
    const double h = lb.curvature_step;
    const std::vector<double> hgrid{-h, h};

    std::vector<double> gx, gw;
    gauss_legendre(opts.s_order, gx, gw);
    // Panels crowd toward kappa_t, where p_YG(s) times the excess is largest.
    const double hi = std::max(kappa_t, 0.0) + 10.0;
    std::vector<double> edges(opts.s_panels + 1);
    for (int j = 0; j <= opts.s_panels; ++j) {
        const double f = static_cast<double>(j) / opts.s_panels;
        edges[j] = kappa_t + (hi - kappa_t) * f * f;
    }
    std::vector<double> excess(grid.size(), 0.0);
    double ex_plus = 0.0, ex_minus = 0.0;
    for (int j = 0; j < opts.s_panels; ++j) {
        const double mid = 0.5 * (edges[j] + edges[j + 1]), half = 0.5 * (edges[j + 1] - edges[j]);
        for (int k = 0; k < opts.s_order; ++k) {
            const double s = mid + half * gx[k];
            const double w = half * gw[k] * yg_density(s, link);
            if (w == 0.0) continue;
            const double ks = (kappa_eff - rho * s) / sig;
            const double cs = c_star(ks);
            const double e0 = std::exp(cs * cs + 2.0 * log_normal_sf(ks + cs));
            const auto inc = tilted_moment_increments(ks, cs, grid, lb.segment_order);
            for (std::size_t i = 0; i < grid.size(); ++i) excess[i] += w * inc[i] / e0;
            const auto hh = tilted_moment_increments(ks, cs, hgrid, lb.segment_order);
            ex_minus += w * hh[0] / e0;
            ex_plus += w * hh[1] / e0;
        }
    }
    LowerBoundDiagnostics local;
    const double d = second_moment_delta(grid, excess, ex_plus, ex_minus, lb, &local);
    if (diag) {
        diag->lb = local;
        diag->q_grid = grid;
        diag->excess = std::move(excess);
    }
    return d;
}

// ============================================================================
// Lower bound
// ============================================================================

double signal_lower_branch_a(double kappa, double rho, const LinkFunction& link) {
    const double sig = std::sqrt((1.0 - rho) * (1.0 + rho));
    const double p = mixture_tail(rho, 1.0, -kappa, link);
    if (sig == 0.0) return p;
    return std::max(p, psi_kappa_rho_slope(kappa, rho, link) / (sig * sig));
}

double signal_lower_bad_term(double kappa, const SignalLowerParams& p, const LinkFunction& link, double* c_arg) {
    const double sig = std::sqrt((1.0 - p.rho) * (1.0 + p.rho));
    const double kt = sig / p.rho * p.kappa1;
    const double p_good = 1.0 - mixture_tail(1.0, 1.0, -kt, link);  // P(YG >= kt)
    const double gap = p.kappa0 - p.kappa2;                           // < 0
    (void)kappa;
    auto term = [&](double c) {
        if (std::isinf(c)) return 0.5;  // both terms tend to their Gaussian halves
        const double tau = std::sqrt(1.0 + c * c);
        auto f = [&](double s) {
            if (s >= kt) return 0.0;
            const double a = p.kappa0 - p.rho * s / sig;
            return tau * tau * truncated_second_moment(a / tau);
        };
        const double bad = yg_expectation(link, f, {kt, p.kappa0 * sig / p.rho}, 1e-10);
        return p_good * truncated_second_moment(gap / c) + bad / (c * c);
    };
    // Log grid in c, then golden refinement.
    const int n = 28;
    double best = term(kInf), best_c = kInf;
    int arg = -1;
    std::vector<double> lc(n);
    for (int i = 0; i < n; ++i) {
        lc[i] = std::log(1e-3) + i * std::log(1e7) / (n - 1);
        const double v = term(std::exp(lc[i]));
        if (v < best) {
            best = v;
            best_c = std::exp(lc[i]);
            arg = i;
        }
    }
    if (arg >= 0) {
        double x;
        const double v = golden_min([&](double y) { return term(std::exp(y)); }, lc[std::max(arg - 1, 0)],
                                    lc[std::min(arg + 1, n - 1)], 30, &x);
        if (v < best) {
            best = v;
            best_c = std::exp(x);
        }
    }
    if (c_arg) *c_arg = best_c;
    return best;
}

double signal_lower_branch_b(double kappa, const SignalLowerParams& p, const LinkFunction& link,
                             const SecondMomentSignalOptions& opts) {
    const double sig = std::sqrt((1.0 - p.rho) * (1.0 + p.rho));
    const double bad = signal_lower_bad_term(kappa, p, link, nullptr);
    const double ds = delta_sec(p.rho, sig * p.kappa2, sig / p.rho * p.kappa1, link, opts);
    return ds > 0.0 ? 1.0 / ds + bad : kInf;
}

SignalLowerResult delta_lb_signal(double kappa, const LinkFunction& link, const SignalLowerOptions& opts) {
    if (!(kappa < 0.0)) throw std::invalid_argument("delta_lb_signal: kappa must be negative");
    SignalLowerResult res;

    // First branch depends on rho alone.
    double best_a = kInf, rho_a = 0.5;
    for (int i = 1; i <= opts.rho_points; ++i) {
        const double r = static_cast<double>(i) / (opts.rho_points + 1);
        const double v = signal_lower_branch_a(kappa, r, link);
        if (v < best_a) {
            best_a = v;
            rho_a = r;
        }
    }
    {
        const double step = 1.0 / (opts.rho_points + 1);
        double x;
        const double v = golden_min([&](double r) { return signal_lower_branch_a(kappa, r, link); },
                                    std::max(rho_a - step, 1e-9), std::min(rho_a + step, 1.0 - 1e-9), 40, &x);
        if (v < best_a) {
            best_a = v;
            rho_a = x;
        }
    }

    // Second branch: (rho, x2, x1) with kappa2 = kappa0 (1 - x2), kappa1 = kappa2 (1 - x1).
    auto make = [&](double rho, double x2, double x1) {
        SignalLowerParams p;
        p.rho = rho;
        p.kappa0 = kappa / std::sqrt((1.0 - rho) * (1.0 + rho));
        p.kappa2 = p.kappa0 * (1.0 - x2);
        p.kappa1 = p.kappa2 * (1.0 - x1);
        return p;
    };
    double best_b = kInf;
    SignalLowerParams best_p{};
    std::array<double, 3> best_z{logit(0.9), logit(0.05), logit(0.1)};
    int evals = 0;
    auto try_tuple = [&](double rho, double x2, double x1) {
        if (!(rho > 0.0 && rho < 1.0 && x2 > 0.0 && x2 < 1.0 && x1 > 0.0 && x1 < 1.0)) return;
        SignalLowerParams p = make(rho, x2, x1);
        ++evals;
        double c;
        const double bad = signal_lower_bad_term(kappa, p, link, &c);
        if (!(bad < std::min(best_a, best_b))) return;  // 1/delta_sec > 0 cannot rescue it
        const double sig = std::sqrt((1.0 - rho) * (1.0 + rho));
        const double ds = delta_sec(rho, sig * p.kappa2, sig / rho * p.kappa1, link, opts.sec);
        if (!(ds > 0.0)) return;
        const double b = 1.0 / ds + bad;
        if (b < best_b) {
            best_b = b;
            p.c = c;
            best_p = p;
            best_z = {logit(rho), logit(x2), logit(x1)};
        }
    };

    const int k = std::max(1, static_cast<int>(std::round(std::cbrt(static_cast<double>(opts.grid_tuples)))));
    auto level = [k](double lo, double hi, int j) {
        return k == 1 ? std::sqrt(lo * hi) : lo * std::pow(hi / lo, static_cast<double>(j) / (k - 1));
    };
    int done = 0;
    for (int i = 0; i < k && done < opts.grid_tuples; ++i)
        for (int j = 0; j < k && done < opts.grid_tuples; ++j)
            for (int l = 0; l < k && done < opts.grid_tuples; ++l, ++done)
                try_tuple(1.0 - level(0.5, 0.01, i), level(0.005, 0.5, j), level(0.01, 0.6, l));

    SplitMix rng{opts.seed};
    for (int t = 0; t < opts.random_tuples; ++t) {
        const double scale = 0.05 + 1.5 * (1.0 - static_cast<double>(t) / std::max(opts.random_tuples, 1));
        try_tuple(expit(best_z[0] + scale * rng.normal()), expit(best_z[1] + scale * rng.normal()),
                  expit(best_z[2] + scale * rng.normal()));
    }
    res.evaluations = evals;

    const double m = std::min(best_a, best_b);
    if (!(m < kInf) || !(m > 0.0)) return res;
    res.found = true;
    res.delta = 1.0 / m;
    if (best_a <= best_b) {
        // Any admissible kappa1, kappa2 work here; record a canonical pair and both branches.
        res.from_branch_a = true;
        res.params = make(rho_a, 1.0 / 3.0, 0.5);
        res.branch_a = best_a;
        double c;
        signal_lower_bad_term(kappa, res.params, link, &c);
        res.params.c = c;
        res.branch_b = signal_lower_branch_b(kappa, res.params, link, opts.sec);
    } else {
        res.params = best_p;
        res.branch_b = best_b;
        res.branch_a = signal_lower_branch_a(kappa, best_p.rho, link);
    }
    return res;
}

// ============================================================================
// Estimation-error predictions
// ============================================================================

RhoMaxBound rho_max_linbound(double kappa, double delta, const LinkFunction& link) {
    if (!(delta >= 0.0)) throw std::invalid_argument("rho_max_linbound: delta must be nonnegative");
    RhoMaxBound out;
    out.moment = yg_expectation(link, [kappa](double s) { return s < kappa ? (kappa - s) * (kappa - s) : 0.0; },
                                {kappa});
    out.value = 1.0 - 0.5 * delta * out.moment;
    if (out.value < -1.0) {
        out.value = -1.0;
        out.clamped = true;
    }
    return out;
}

ErrorPrediction error_prediction(double kappa, double delta, const LinkFunction& link) {
    if (!(kappa < 0.0)) throw std::invalid_argument("error_prediction: kappa must be negative");
    if (!(delta > 0.0)) throw std::invalid_argument("error_prediction: delta must be positive");
    ErrorPrediction out;
    out.m = mean_yg(link);
    if (!(out.m != 0.0)) throw std::invalid_argument("error_prediction: E[YG] = 0, the prediction diverges");
    out.delta0 = kappa * kappa * std::exp(link.alpha() * -kappa) / (2.0 * std_normal_cdf(kappa));
    out.e_kappa = 1.0 / (2.0 * out.m * out.m * delta) + delta / out.delta0;
    return out;
}

}  // namespace negperc
