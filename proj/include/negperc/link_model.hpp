#pragma once

#include <functional>
#include <string>
#include <vector>

namespace negperc {

enum class LinkKind { logistic, pure_noise, tabulated };

// Monotone link phi(x) = P(Y = +1 | G = x). Immutable once built.
class LinkFunction {
public:
    static LinkFunction logistic(double alpha);
    static LinkFunction pure_noise();
    // Piecewise-linear through (x, p), clamped outside; alpha is the declared tail exponent.
    static LinkFunction tabulated(std::vector<double> x, std::vector<double> p, double alpha);

    LinkKind kind() const { return kind_; }
    double alpha() const { return alpha_; }
    bool has_signal() const { return kind_ != LinkKind::pure_noise; }
    std::string name() const;

    double operator()(double x) const;

    // phi(s) + 1 - phi(-s), so that p_YG(s) = label_weight(s) * normal_pdf(s).
    double label_weight(double s) const;

    // (1 + phi(x) - phi(-x)) / (2 exp(alpha x)); tends to 1 as x -> -inf under the
    // exponential-tail assumption. Heuristic check only.
    double tail_ratio(double x) const;

private:
    LinkFunction() = default;
    LinkKind kind_ = LinkKind::pure_noise;
    double alpha_ = 0.0;
    std::vector<double> xs_, ps_;
};

// (Y, G, W): G, W independent standard normal, P(Y = 1 | G) = link(G).
struct JointLaw {
    LinkFunction link;
};

// ============================================================================
// Expectations over YG
// ============================================================================

// E[f(YG)] by adaptive quadrature over [-40, 40]; extra breakpoints mark
// features of f (kinks, steep transitions).
double yg_expectation(const LinkFunction& link, const std::function<double(double)>& f,
                      const std::vector<double>& breaks = {}, double rel_tol = 1e-11);

// Same, restricted to s >= lower.
double yg_expectation_from(const LinkFunction& link, double lower, const std::function<double(double)>& f,
                           const std::vector<double>& breaks = {}, double rel_tol = 1e-11);

// ============================================================================
// Operations
// ============================================================================

double yg_density(double s, const LinkFunction& link);

// m = E[YG].
double mean_yg(const LinkFunction& link);

// P(rho YG + sqrt(1 - rho^2) r W < -t).
double mixture_tail(double rho, double r, double t, const LinkFunction& link);

// Three-branch asymptotic A_{rho,t} of the left tail above. Rejects pure noise
// (no exponential tail exponent).
double tail_asymptotic(double rho, double t, const LinkFunction& link, double eta0 = 0.05);

// a_{rho,t} in the middle branch of tail_asymptotic.
double tail_mixing_factor(double rho, double t, const LinkFunction& link);

// psi_{kappa,rho}(-u) = E[exp(-u (kappa - rho YG - sqrt(1 - rho^2) W)_+^2)].
double psi_kappa_rho(double u, double kappa, double rho, const LinkFunction& link);

// 1 - psi_{kappa,rho}(-u) with relative accuracy when it is tiny; u = +inf
// gives P(rho YG + sqrt(1 - rho^2) W < kappa).
double psi_kappa_rho_complement(double u, double kappa, double rho, const LinkFunction& link);

// E[(kappa - rho YG - sqrt(1 - rho^2) W)_+^2] = derivative of the complement at u = 0.
double psi_kappa_rho_slope(double kappa, double rho, const LinkFunction& link);

}  // namespace negperc
