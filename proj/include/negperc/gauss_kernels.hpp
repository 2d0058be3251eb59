#pragma once

#include <cmath>
#include <functional>
#include <numbers>
#include <vector>

namespace negperc {

inline constexpr double kInvSqrt2Pi = 0.39894228040143267794;
inline constexpr double kSqrtHalfPi = 1.25331413731550025121;

// ============================================================================
// Quadrature settings
// ============================================================================

// Composite Gauss-Legendre rule on [-halfwidth, halfwidth]; node_count is split
// into panels of kPanelOrder nodes each.
class Quadrature {
public:
    static constexpr int kPanelOrder = 16;

    Quadrature(int node_count = 256, double domain_halfwidth = 10.0);

    int node_count() const { return node_count_; }
    double domain_halfwidth() const { return halfwidth_; }
    const std::vector<double>& nodes() const { return nodes_; }
    const std::vector<double>& weights() const { return weights_; }

    // Integral of f over the truncated domain.
    template <class F>
    double integrate(F&& f) const {
        double acc = 0.0;
        for (std::size_t i = 0; i < nodes_.size(); ++i) acc += weights_[i] * f(nodes_[i]);
        return acc;
    }

    // Same panel layout mapped onto [a, b].
    template <class F>
    double integrate(F&& f, double a, double b) const {
        if (!(b > a)) return 0.0;
        const int panels = node_count_ / kPanelOrder;
        const double width = (b - a) / panels;
        double acc = 0.0;
        for (int p = 0; p < panels; ++p) {
            const double mid = a + (p + 0.5) * width;
            double part = 0.0;
            for (int k = 0; k < kPanelOrder; ++k)
                part += ref_weights_[k] * f(mid + 0.5 * width * ref_nodes_[k]);
            acc += 0.5 * width * part;
        }
        return acc;
    }

    static const Quadrature& standard();

private:
    int node_count_;
    double halfwidth_;
    std::vector<double> ref_nodes_, ref_weights_;
    std::vector<double> nodes_, weights_;
};

// Gauss-Legendre nodes and weights of the given order on [-1, 1].
void gauss_legendre(int order, std::vector<double>& nodes, std::vector<double>& weights);

// Adaptive Gauss-Kronrod integral on [a, b]; infinite limits are allowed.
// Breakpoints inside (a, b) split the interval before refinement.
double integrate_adaptive(const std::function<double(double)>& f, double a, double b,
                          double rel_tol = 1e-13, const std::vector<double>& breaks = {});

// ============================================================================
// Scalar Gaussian functions
// ============================================================================

inline double normal_pdf(double x) { return kInvSqrt2Pi * std::exp(-0.5 * x * x); }

double std_normal_cdf(double x);

// Upper tail 1 - Phi(x), computed without cancellation.
inline double normal_sf(double x) { return std_normal_cdf(-x); }

// log(1 - Phi(x)), finite for all finite x.
double log_normal_sf(double x);

// R(u) = (1 - Phi(u)) / phi(u).
double mills_ratio(double u);

// 1 - u R(u), accurate for large u.
double one_minus_u_mills(double u);

// E[(G - t)_+] and E[(G - t)_+^2] for standard normal G.
double gauss_tail_moment1(double t);
double gauss_tail_moment2(double t);

// E[(kappa - G)_+^2] = (1 + kappa^2) Phi(kappa) + kappa phi(kappa).
double truncated_second_moment(double kappa);

// P(G1 >= a, G2 >= a) for standard bivariate normal with correlation q.
double bivariate_orthant(double q, double a);

// exp(c^2 (1+q)) P_q(min(G1, G2) >= kappa + c (1+q)).
double tilted_pair_moment(double q, double kappa, double c);

// psi_kappa(-u) = E[exp(-u (kappa - G)_+^2)], closed form.
double psi_kappa(double u, double kappa);

// 1 - psi_kappa(-u); a short series in u takes over where the closed form
// would cancel, so relative accuracy holds far below machine epsilon.
// u = +inf gives Phi(kappa).
double psi_kappa_complement(double u, double kappa);

// E[max{s, X}^2] for X ~ N(mean, sd^2); sd = 0 is the point mass.
double gauss_max_sq_moment(double mean, double sd, double s);

// E[X_+] for X ~ N(mean, sd^2).
double gauss_relu_mean(double mean, double sd);

}  // namespace negperc
