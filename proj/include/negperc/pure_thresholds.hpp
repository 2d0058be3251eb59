#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace negperc {

// How the grid condition Psi(q) > Psi(0) is tested.
//   exact:      -log(1 + E(q)) + I(q)/delta > 0
//   linearized: delta * E(q) < I(q)      (log(1+x) <= x, so this is stricter)
// where E(q) = e(q)/e(0) - 1 and I(q) = -log(1 - q^2)/2.
enum class GridCriterion { exact, linearized };

struct LowerBoundOptions {
    int uniform_points = 2001;     // uniform grid over (-1, 1) \ {0}
    int boundary_digits = 12;      // adds +-(1 - 10^-j), j = 1..boundary_digits
    int segment_order = 12;        // Gauss-Legendre order per grid segment in theta = asin(q)
    double curvature_step = 1e-3;  // h in the second central difference
    double rel_width = 1e-3;       // bisection stopping width on delta
    GridCriterion criterion = GridCriterion::linearized;
};

struct LowerBoundDiagnostics {
    double c_star = 0.0;
    double e0 = 0.0;
    double delta_curvature = 0.0;  // largest delta with Psi''(0) > 0
    double delta_grid = 0.0;       // largest delta passing the q-grid test
    double binding_q = 0.0;        // grid point that limits delta_grid
    int grid_size = 0;
    int bisection_steps = 0;
};

struct UpperBoundOptions {
    int c_points = 200;
    double c_min = 1e-4;
    double c_max = 1e6;
    int u_points_per_decade = 24;
    int refine_iters = 60;
    double u_max = 1e16;  // upper end of the u grid (at least 1e12 times its start)
};

struct UpperBoundDiagnostics {
    double c_opt = 0.0;  // 0 when the c -> 0 limit attains the infimum
    double u_opt = 0.0;  // +inf when the sup over u sits at the limit
    double value = 0.0;
};

struct PureThresholdRecord {
    double kappa = 0.0;
    double delta_rs = 0.0;
    double delta_lin = 0.0;
    std::optional<double> delta_lb;  // absent at kappa = 0
    std::optional<double> delta_ub;
    LowerBoundDiagnostics lb_diag;
    UpperBoundDiagnostics ub_diag;
};

// ============================================================================
// Second-moment machinery, shared with the signal model
// ============================================================================

// Sorted grid over (-1,1)\{0}: uniform points plus +-(1 - 10^-j).
std::vector<double> second_moment_q_grid(int uniform_points, int boundary_digits);

// d/dq of tilted_pair_moment(q, kappa, c) for |q| < 1.
double tilted_pair_moment_derivative(double q, double kappa, double c);

// e(q) - e(0) for each q in the sorted grid, integrated from 0 along theta = asin(q).
std::vector<double> tilted_moment_increments(double kappa, double c, const std::vector<double>& q_grid,
                                             int segment_order);

// Largest delta accepted by the curvature test and the grid test, found by
// bisection. excess[i] = e(q_i)/e(0) - 1; excess_h = {E(h), E(-h)}.
double second_moment_delta(const std::vector<double>& q_grid, const std::vector<double>& excess,
                           double excess_plus_h, double excess_minus_h, const LowerBoundOptions& opts,
                           LowerBoundDiagnostics* diag);

// inf over c > 0 of sup over u > 0 of (K_s(c) - c^2/(4u)) / g(u), where
// K_s(c) = cs/(cs + sqrt(c^2 s^2 + 4)) + asinh(cs/2), g(+inf) = g_inf and
// g'(0) = g_slope0. The c -> 0 limit of the inner sup is s^2 / g_slope0.
double upper_bound_inf_sup(const std::function<double(double)>& g, double g_inf, double g_slope0, double s,
                           const UpperBoundOptions& opts, UpperBoundDiagnostics* diag);

// K_s(c) above.
double upper_bound_lhs(double c, double s);

// ============================================================================
// Thresholds of the pure-noise model
// ============================================================================

// Positive root of c (1 - Phi(kappa + c)) = phi(kappa + c).
double c_star(double kappa);

// Psi(q) = -log e(q) - log(1 - q^2) / (2 delta).
double psi_rate(double q, double kappa, double delta);

double delta_lb_pure(double kappa, const LowerBoundOptions& opts = {}, LowerBoundDiagnostics* diag = nullptr);

double delta_ub_pure(double kappa, const UpperBoundOptions& opts = {}, UpperBoundDiagnostics* diag = nullptr);

double delta_lin_pure(double kappa);

double delta_rs(double kappa);

PureThresholdRecord pure_threshold_record(double kappa, const LowerBoundOptions& lb = {},
                                          const UpperBoundOptions& ub = {});

}  // namespace negperc
