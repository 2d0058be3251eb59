#include "negperc/gauss_kernels.hpp"

#include <algorithm>
#include <limits>
#include <queue>
#include <stdexcept>

#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace negperc {

namespace {

constexpr double kSqrt1_2 = 0.70710678118654752440;

// Continued-fraction switch point; below it the erfc route is exact enough.
constexpr double kCfSwitch = 5.0;

// m / (u + (m+1) / (u + (m+2) / (u + ...))) by modified Lentz.
double laplace_cf_tail(double u, double m) {
    const double tiny = 1e-300;
    double f = tiny, C = f, D = 0.0;
    for (int j = 1; j < 10000; ++j) {
        const double a = m + j - 1;
        D = u + a * D;
        if (D == 0.0) D = tiny;
        C = u + a / C;
        if (C == 0.0) C = tiny;
        D = 1.0 / D;
        const double delta = C * D;
        f *= delta;
        if (std::fabs(delta - 1.0) < 1e-16) break;
    }
    return f;
}

struct MillsParts {
    double R;   // 1 / (u + T1)
    double T1;  // 1 / (u + C2)
    double C2;  // 2 / (u + 3 / (u + ...))
};

MillsParts mills_parts(double u) {
    MillsParts p{};
    p.C2 = laplace_cf_tail(u, 2.0);
    p.T1 = 1.0 / (u + p.C2);
    p.R = 1.0 / (u + p.T1);
    return p;
}

}  // namespace

// ============================================================================
// Quadrature
// ============================================================================

void gauss_legendre(int order, std::vector<double>& nodes, std::vector<double>& weights) {
    nodes.assign(order, 0.0);
    weights.assign(order, 0.0);
    for (int i = 0; i < (order + 1) / 2; ++i) {
        double x = std::cos(std::numbers::pi * (i + 0.75) / (order + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= order; ++k) {
                const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = order * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / dp;
            x -= dx;
            if (std::fabs(dx) < 1e-16) break;
        }
        const double w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[order - 1 - i] = x;
        weights[i] = weights[order - 1 - i] = w;
    }
}

Quadrature::Quadrature(int node_count, double domain_halfwidth)
    : node_count_(node_count), halfwidth_(domain_halfwidth) {
    if (node_count < 64 || node_count % kPanelOrder != 0)
        throw std::invalid_argument("Quadrature: node_count must be >= 64 and a multiple of 16");
    if (!(domain_halfwidth >= 8.0))
        throw std::invalid_argument("Quadrature: halfwidth must be >= 8");
    gauss_legendre(kPanelOrder, ref_nodes_, ref_weights_);
    const int panels = node_count / kPanelOrder;
    const double width = 2.0 * halfwidth_ / panels;
    nodes_.reserve(node_count);
    weights_.reserve(node_count);
    for (int p = 0; p < panels; ++p) {
        const double mid = -halfwidth_ + (p + 0.5) * width;
        for (int k = 0; k < kPanelOrder; ++k) {
            nodes_.push_back(mid + 0.5 * width * ref_nodes_[k]);
            weights_.push_back(0.5 * width * ref_weights_[k]);
        }
    }
}

const Quadrature& Quadrature::standard() {
    static const Quadrature q(256, 10.0);
    return q;
}

double integrate_adaptive(const std::function<double(double)>& f, double a, double b,
                          double rel_tol, const std::vector<double>& breaks) {
    if (std::isnan(a) || std::isnan(b)) throw std::invalid_argument("integrate_adaptive: NaN limit");
    if (a > b) return -integrate_adaptive(f, b, a, rel_tol, breaks);
    // Globally adaptive: always bisect the piece with the largest error estimate.
    // Half-infinite end pieces run in t on [0, 1) with x = anchor +- t / (1 - t).
    using GK = boost::math::quadrature::gauss_kronrod<double, 21>;
    enum class Map { finite, right, left };
    struct Piece {
        double lo, hi, value, error;
        Map map;
        double anchor;
        bool operator<(const Piece& o) const { return error < o.error; }
    };
    auto eval = [&](double lo, double hi, Map map, double anchor) {
        double err = 0.0;
        double v = 0.0;
        if (map == Map::finite) {
            v = GK::integrate(f, lo, hi, 0, 0.0, &err);
        } else {
            const double sign = map == Map::right ? 1.0 : -1.0;
            auto g = [&](double t) {
                const double u = 1.0 - t;
                const double y = f(anchor + sign * t / u) / (u * u);
                return std::isfinite(y) ? y : 0.0;
            };
            v = GK::integrate(g, lo, hi, 0, 0.0, &err);
        }
        return Piece{lo, hi, v, err, map, anchor};
    };
    std::vector<double> pts;
    for (double x : breaks)
        if (x > a && x < b && std::isfinite(x)) pts.push_back(x);
    std::sort(pts.begin(), pts.end());
    if (std::isfinite(a)) pts.insert(pts.begin(), a);
    if (std::isfinite(b)) pts.push_back(b);
    if (pts.empty()) pts.push_back(0.0);
    std::priority_queue<Piece> heap;
    double total = 0.0, total_err = 0.0;
    auto add = [&](const Piece& p) {
        total += p.value;
        total_err += p.error;
        heap.push(p);
    };
    if (!std::isfinite(a)) add(eval(0.0, 1.0, Map::left, pts.front()));
    for (std::size_t i = 0; i + 1 < pts.size(); ++i)
        if (pts[i + 1] > pts[i]) add(eval(pts[i], pts[i + 1], Map::finite, 0.0));
    if (!std::isfinite(b)) add(eval(0.0, 1.0, Map::right, pts.back()));
    const double floor_err = 1e-300;
    for (int it = 0; it < 2000 && !heap.empty(); ++it) {
        if (total_err <= std::max(rel_tol * std::fabs(total), floor_err)) break;
        const Piece worst = heap.top();
        heap.pop();
        const double mid = 0.5 * (worst.lo + worst.hi);
        if (!(mid > worst.lo && mid < worst.hi)) break;
        const Piece l = eval(worst.lo, mid, worst.map, worst.anchor), r = eval(mid, worst.hi, worst.map, worst.anchor);
        total += l.value + r.value - worst.value;
        total_err += l.error + r.error - worst.error;
        heap.push(l);
        heap.push(r);
    }
    return total;
}

// ============================================================================
// Scalar functions
// ============================================================================

double std_normal_cdf(double x) {
    if (std::isnan(x)) return x;
    if (x < -10.0) {
        // Lower tail through the continued fraction for R.
        const double u = -x;
        return normal_pdf(u) * mills_parts(u).R;
    }
    return 0.5 * std::erfc(-x * kSqrt1_2);
}

double mills_ratio(double u) {
    if (u >= kCfSwitch) return mills_parts(u).R;
    return kSqrtHalfPi * std::exp(0.5 * u * u) * std::erfc(u * kSqrt1_2);
}

double log_normal_sf(double x) {
    if (x > 0.0) return -0.5 * x * x - 0.5 * std::log(2.0 * std::numbers::pi) + std::log(mills_ratio(x));
    return std::log(normal_sf(x));
}

double one_minus_u_mills(double u) {
    if (u >= kCfSwitch) {
        const MillsParts p = mills_parts(u);
        return p.T1 * p.R;
    }
    return 1.0 - u * mills_ratio(u);
}

double gauss_tail_moment1(double t) {
    // phi(t) - t Q(t)
    if (t >= kCfSwitch) {
        const MillsParts p = mills_parts(t);
        return normal_pdf(t) * p.T1 * p.R;
    }
    return normal_pdf(t) - t * normal_sf(t);
}

double gauss_tail_moment2(double t) {
    // (1 + t^2) Q(t) - t phi(t)
    if (t >= kCfSwitch) {
        const MillsParts p = mills_parts(t);
        return normal_pdf(t) * p.C2 * p.T1 * p.R;
    }
    return (1.0 + t * t) * normal_sf(t) - t * normal_pdf(t);
}

double truncated_second_moment(double kappa) { return gauss_tail_moment2(-kappa); }

double bivariate_orthant(double q, double a) {
    if (!std::isfinite(a)) throw std::invalid_argument("bivariate_orthant: non-finite threshold");
    if (!(q >= -1.0 && q <= 1.0)) throw std::invalid_argument("bivariate_orthant: |q| > 1");
    if (q == 1.0) return normal_sf(a);
    if (q == -1.0) return a < 0.0 ? 1.0 - 2.0 * std_normal_cdf(a) : 0.0;
    if (q == 0.0) {
        const double t = normal_sf(a);
        return t * t;
    }
    const double s = std::sqrt((1.0 - q) * (1.0 + q));
    const double hi = std::max(a, 0.0) + 12.0;
    auto f = [&](double g) { return normal_pdf(g) * normal_sf((a - q * g) / s); };
    // The conditional tail switches from 1 to 0 where |a - q g| < 8 s.
    std::vector<double> breaks;
    for (double z : {-8.0, -3.0, -1.0, 0.0, 1.0, 3.0, 8.0}) breaks.push_back((a - z * s) / q);
    if (a < -1.0) breaks.push_back(0.0);
    return integrate_adaptive(f, a, hi, 1e-14, breaks);
}

double tilted_pair_moment(double q, double kappa, double c) {
    if (!(q >= -1.0 && q <= 1.0)) throw std::invalid_argument("tilted_pair_moment: |q| > 1");
    const double a = kappa + c * (1.0 + q);
    const double ex = c * c * (1.0 + q);
    if (q == 1.0) return std::exp(ex + log_normal_sf(a));
    if (q == 0.0) return std::exp(ex + 2.0 * log_normal_sf(a));
    if (c < 1.0 && a < 8.0) return std::exp(ex) * bivariate_orthant(q, a);
    // Large tilt: exp(ex) overflows while the orthant underflows. Conditioning on
    // G1 = kappa + y gives
    //   e(q) = exp(-2 c kappa) int_0^inf exp(-c y) phi(kappa + y) phi(w) R(w + c s) dy,
    //   w = (kappa (1 - q) - q y) / s,
    // with phi(w) R(w + b) = Q(w + b) exp(b w + b^2 / 2) when w + b <= 0.
    const double s = std::sqrt((1.0 - q) * (1.0 + q));
    const double b = c * s;
    auto f = [&](double y) {
        const double w = (kappa * (1.0 - q) - q * y) / s;
        const double z = w + b;
        const double h = z > 0.0 ? normal_pdf(w) * mills_ratio(z) : normal_sf(z) * std::exp(b * (w + 0.5 * b));
        return std::exp(-c * y) * normal_pdf(kappa + y) * h;
    };
    std::vector<double> breaks;
    for (double d : {0.5, 2.0, 8.0, 32.0}) breaks.push_back(d / c);
    for (double d : {1.0, 4.0}) breaks.push_back(d * s);
    const double hi = std::min(std::fabs(kappa) + 40.0, 750.0 / c);
    return std::exp(-2.0 * c * kappa) * integrate_adaptive(f, 0.0, hi, 1e-12, breaks);
}

double psi_kappa(double u, double kappa) {
    if (u < 0.0) throw std::invalid_argument("psi_kappa: u < 0");
    if (std::isinf(u)) return normal_sf(kappa);
    const double s = std::sqrt(1.0 + 2.0 * u);
    return normal_sf(kappa) + std::exp(-u * kappa * kappa / (1.0 + 2.0 * u)) / s * std_normal_cdf(kappa / s);
}

double psi_kappa_complement(double u, double kappa) {
    if (u < 0.0) throw std::invalid_argument("psi_kappa_complement: u < 0");
    if (u == 0.0) return 0.0;
    if (std::isinf(u)) return std_normal_cdf(kappa);
    const double s = std::sqrt(1.0 + 2.0 * u);
    const double p = std_normal_cdf(kappa);
    const double m2 = truncated_second_moment(kappa);
    // Moments of X = (kappa - G)_+; consecutive ratios are Laplace continued
    // fractions in the left tail, forward recursion elsewhere.
    double m4, m6, m8;
    if (kappa <= -3.0) {
        const double t = -kappa;
        m4 = m2 * laplace_cf_tail(t, 3.0) * laplace_cf_tail(t, 4.0);
        m6 = m4 * laplace_cf_tail(t, 5.0) * laplace_cf_tail(t, 6.0);
        m8 = m6 * laplace_cf_tail(t, 7.0) * laplace_cf_tail(t, 8.0);
    } else {
        // E[X^{n+1}] = kappa E[X^n] + n E[X^{n-1}]
        const double m1 = kappa * p + normal_pdf(kappa);
        const double m3 = kappa * m2 + 2.0 * m1;
        m4 = kappa * m3 + 3.0 * m2;
        const double m5 = kappa * m4 + 4.0 * m3;
        m6 = kappa * m5 + 5.0 * m4;
        const double m7 = kappa * m6 + 6.0 * m5;
        m8 = kappa * m7 + 7.0 * m6;
    }
    if (u * m4 < 1e-3 * m2) {
        // E[1 - exp(-u X^2)] to fourth order; the closed form would cancel here.
        const double u2 = u * u;
        return u * m2 - 0.5 * u2 * m4 + u2 * u * m6 / 6.0 - u2 * u2 * m8 / 24.0;
    }
    if (kappa < 0.0) {
        const double t = -kappa;
        return normal_pdf(kappa) * (mills_ratio(t) - mills_ratio(t / s) / s);
    }
    return p - std::exp(-u * kappa * kappa / (1.0 + 2.0 * u)) / s * std_normal_cdf(kappa / s);
}

double gauss_max_sq_moment(double mean, double sd, double s) {
    if (sd <= 0.0) {
        const double m = std::max(s, mean);
        return m * m;
    }
    const double t = (s - mean) / sd;
    if (t >= 0.0) {
        // max{s,X}^2 = s^2 + 2 s (X - s)_+ + (X - s)_+^2
        return s * s + 2.0 * s * sd * gauss_tail_moment1(t) + sd * sd * gauss_tail_moment2(t);
    }
    // E[X^2] - E[(s - X)_+^2] + 2 s E[(s - X)_+]
    return mean * mean + sd * sd - sd * sd * gauss_tail_moment2(-t) + 2.0 * s * sd * gauss_tail_moment1(-t);
}

double gauss_relu_mean(double mean, double sd) {
    if (sd <= 0.0) return std::max(mean, 0.0);
    return sd * gauss_tail_moment1(-mean / sd);
}

}  // namespace negperc
