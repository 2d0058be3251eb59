#include "negperc/link_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "negperc/gauss_kernels.hpp"

namespace negperc {

namespace {

constexpr double kYgSpan = 40.0;  // normal_pdf underflows well before this

double logistic_cdf(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

std::vector<double> with_default_breaks(const std::vector<double>& breaks) {
    std::vector<double> out{-8.0, -4.0, 0.0, 4.0, 8.0};
    for (double b : breaks)
        if (std::isfinite(b)) out.push_back(b);
    return out;
}

// Breakpoints for integrands that switch at rho s = kappa and whose tail mass
// sits near s = kappa rho.
std::vector<double> mixture_breaks(double kappa, double rho) {
    std::vector<double> b;
    if (rho != 0.0) {
        b.push_back(kappa / rho);
        b.push_back(kappa * rho);
        b.push_back(kappa * rho - 2.0);
        b.push_back(kappa * rho + 2.0);
    }
    return b;
}

}  // namespace

// ============================================================================
// LinkFunction
// ============================================================================

LinkFunction LinkFunction::logistic(double alpha) {
    if (!(alpha > 0.0) || !std::isfinite(alpha)) throw std::invalid_argument("logistic link: alpha must be positive");
    LinkFunction f;
    f.kind_ = LinkKind::logistic;
    f.alpha_ = alpha;
    return f;
}

LinkFunction LinkFunction::pure_noise() { return LinkFunction(); }

LinkFunction LinkFunction::tabulated(std::vector<double> x, std::vector<double> p, double alpha) {
    if (x.size() < 2 || x.size() != p.size()) throw std::invalid_argument("tabulated link: need >= 2 matching points");
    if (!(alpha > 0.0)) throw std::invalid_argument("tabulated link: alpha must be positive");
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!(p[i] >= 0.0 && p[i] <= 1.0)) throw std::invalid_argument("tabulated link: values outside [0, 1]");
        if (i > 0 && !(x[i] > x[i - 1])) throw std::invalid_argument("tabulated link: x must increase");
        if (i > 0 && p[i] < p[i - 1]) throw std::invalid_argument("tabulated link: not monotone");
    }
    LinkFunction f;
    f.kind_ = LinkKind::tabulated;
    f.alpha_ = alpha;
    f.xs_ = std::move(x);
    f.ps_ = std::move(p);
    return f;
}

std::string LinkFunction::name() const {
    switch (kind_) {
        case LinkKind::logistic: return "logistic";
        case LinkKind::tabulated: return "tabulated";
        case LinkKind::pure_noise: break;
    }
    return "pure_noise";
}

double LinkFunction::operator()(double x) const {
    switch (kind_) {
        case LinkKind::pure_noise: return 0.5;
        case LinkKind::logistic: return logistic_cdf(alpha_ * x);
        case LinkKind::tabulated: break;
    }
    if (x <= xs_.front()) return ps_.front();
    if (x >= xs_.back()) return ps_.back();
    const auto it = std::upper_bound(xs_.begin(), xs_.end(), x);
    const std::size_t i = static_cast<std::size_t>(it - xs_.begin());
    const double w = (x - xs_[i - 1]) / (xs_[i] - xs_[i - 1]);
    return ps_[i - 1] + w * (ps_[i] - ps_[i - 1]);
}

double LinkFunction::label_weight(double s) const {
    switch (kind_) {
        case LinkKind::pure_noise: return 1.0;
        case LinkKind::logistic: return 2.0 * logistic_cdf(alpha_ * s);
        case LinkKind::tabulated: break;
    }
    return (*this)(s) + 1.0 - (*this)(-s);
}

double LinkFunction::tail_ratio(double x) const {
    if (kind_ == LinkKind::pure_noise) return std::numeric_limits<double>::quiet_NaN();
    if (kind_ == LinkKind::logistic) return 1.0 / (1.0 + std::exp(alpha_ * x));
    return label_weight(x) / (2.0 * std::exp(alpha_ * x));
}

// ============================================================================
// Expectations over YG
// ============================================================================

double yg_expectation(const LinkFunction& link, const std::function<double(double)>& f,
                      const std::vector<double>& breaks, double rel_tol) {
    auto integrand = [&](double s) { return link.label_weight(s) * normal_pdf(s) * f(s); };
    return integrate_adaptive(integrand, -kYgSpan, kYgSpan, rel_tol, with_default_breaks(breaks));
}

double yg_expectation_from(const LinkFunction& link, double lower, const std::function<double(double)>& f,
                           const std::vector<double>& breaks, double rel_tol) {
    if (!(lower < kYgSpan)) return 0.0;
    auto integrand = [&](double s) { return link.label_weight(s) * normal_pdf(s) * f(s); };
    return integrate_adaptive(integrand, std::max(lower, -kYgSpan), kYgSpan, rel_tol, with_default_breaks(breaks));
}

// ============================================================================
// Operations
// ============================================================================

double yg_density(double s, const LinkFunction& link) { return link.label_weight(s) * normal_pdf(s); }

double mean_yg(const LinkFunction& link) {
    if (link.kind() == LinkKind::pure_noise) return 0.0;
    return yg_expectation(link, [](double s) { return s; });
}

double mixture_tail(double rho, double r, double t, const LinkFunction& link) {
    if (!(std::fabs(rho) <= 1.0)) throw std::invalid_argument("mixture_tail: |rho| > 1");
    if (!(r >= 0.0)) throw std::invalid_argument("mixture_tail: r < 0");
    const double sd = std::sqrt((1.0 - rho) * (1.0 + rho)) * r;
    if (sd == 0.0) {
        // Point mass in the W direction.
        if (rho == 0.0) return 0.0 < -t ? 1.0 : 0.0;
        const double cut = -t / rho;
        auto dens = [&](double s) { return yg_density(s, link); };
        if (rho > 0.0) {
            if (!(cut > -kYgSpan)) return 0.0;
            return integrate_adaptive(dens, -kYgSpan, std::min(cut, kYgSpan), 1e-12, with_default_breaks({}));
        }
        if (!(cut < kYgSpan)) return 0.0;
        return integrate_adaptive(dens, std::max(cut, -kYgSpan), kYgSpan, 1e-12, with_default_breaks({}));
    }
    auto f = [&](double s) { return std_normal_cdf((-t - rho * s) / sd); };
    std::vector<double> breaks;
    if (rho != 0.0) {
        breaks.push_back(-t / rho);
        const double saddle = -t * rho / (rho * rho + sd * sd);
        for (double d : {-3.0, -1.0, 0.0, 1.0, 3.0}) breaks.push_back(saddle + d);
    }
    return yg_expectation(link, f, breaks, 1e-12);
}

double tail_mixing_factor(double rho, double t, const LinkFunction& link) {
    const double sig = std::sqrt((1.0 - rho) * (1.0 + rho));
    if (sig == 0.0) return 0.5 * (link(-rho * t) + 1.0 - link(rho * t));
    // 1/2 E_U[phi(sig U - rho t) + 1 - phi(sig U + rho t)], U standard normal.
    auto f = [&](double z) { return normal_pdf(z) * (link(sig * z - rho * t) + 1.0 - link(sig * z + rho * t)); };
    return 0.5 * integrate_adaptive(f, -12.0, 12.0, 1e-12, {0.0});
}

double tail_asymptotic(double rho, double t, const LinkFunction& link, double eta0) {
    if (!link.has_signal()) throw std::invalid_argument("tail_asymptotic: link has no tail exponent");
    if (!(t > 0.0)) throw std::invalid_argument("tail_asymptotic: t must be positive");
    if (!(eta0 > 0.0 && eta0 < 0.1)) throw std::invalid_argument("tail_asymptotic: eta0 outside (0, 0.1)");
    if (!(std::fabs(rho) <= 1.0)) throw std::invalid_argument("tail_asymptotic: |rho| > 1");
    const double alpha = link.alpha();
    const double base = std::sqrt(2.0 / std::numbers::pi) / t;
    if (rho >= eta0) return base * std::exp(-0.5 * t * t - alpha * rho * t + 0.5 * (1.0 - rho * rho) * alpha * alpha);
    if (rho <= -eta0) return base * std::exp(-0.5 * t * t);
    return base * std::exp(-0.5 * t * t) * tail_mixing_factor(rho, t, link);
}

double psi_kappa_rho(double u, double kappa, double rho, const LinkFunction& link) {
    if (!(u >= 0.0)) throw std::invalid_argument("psi_kappa_rho: u < 0");
    if (!(std::fabs(rho) <= 1.0)) throw std::invalid_argument("psi_kappa_rho: |rho| > 1");
    if (u == 0.0) return 1.0;
    if (std::isinf(u)) return 1.0 - mixture_tail(rho, 1.0, -kappa, link);
    const double sig = std::sqrt((1.0 - rho) * (1.0 + rho));
    auto f = [&](double s) {
        const double a = kappa - rho * s;
        if (sig == 0.0) return a > 0.0 ? std::exp(-u * a * a) : 1.0;
        return psi_kappa(u * sig * sig, a / sig);
    };
    return yg_expectation(link, f, mixture_breaks(kappa, rho));
}

double psi_kappa_rho_complement(double u, double kappa, double rho, const LinkFunction& link) {
    if (!(u >= 0.0)) throw std::invalid_argument("psi_kappa_rho_complement: u < 0");
    if (!(std::fabs(rho) <= 1.0)) throw std::invalid_argument("psi_kappa_rho_complement: |rho| > 1");
    if (u == 0.0) return 0.0;
    if (std::isinf(u)) return mixture_tail(rho, 1.0, -kappa, link);
    const double sig = std::sqrt((1.0 - rho) * (1.0 + rho));
    auto f = [&](double s) {
        const double a = kappa - rho * s;
        if (sig == 0.0) return a > 0.0 ? -std::expm1(-u * a * a) : 0.0;
        return psi_kappa_complement(u * sig * sig, a / sig);
    };
    return yg_expectation(link, f, mixture_breaks(kappa, rho));
}

double psi_kappa_rho_slope(double kappa, double rho, const LinkFunction& link) {
    if (!(std::fabs(rho) <= 1.0)) throw std::invalid_argument("psi_kappa_rho_slope: |rho| > 1");
    const double sig = std::sqrt((1.0 - rho) * (1.0 + rho));
    auto f = [&](double s) {
        const double a = kappa - rho * s;
        if (sig == 0.0) return a > 0.0 ? a * a : 0.0;
        return sig * sig * gauss_tail_moment2(-a / sig);
    };
    return yg_expectation(link, f, mixture_breaks(kappa, rho));
}

}  // namespace negperc
