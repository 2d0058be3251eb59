#pragma once

#include <vector>

#include "negperc/link_model.hpp"

namespace negperc {

// Z = rho YG + sqrt(1 - rho^2) r W - kappa throughout.

enum class OmegaStatus { strict, boundary, outside };

struct OrderParams {
    double rho = 0.0;
    double r = 0.0;
    double s_star = 0.0;
    double big_m = 0.0;
    OmegaStatus in_omega = OmegaStatus::outside;
};

// ============================================================================
// Scalar quantities
// ============================================================================

// E[Z^2; Z < 0].
double neg_part_second_moment(double rho, double r, double kappa, const LinkFunction& link);

// Membership in Omega: compares (1 - rho^2) r^2 / delta with E[Z^2; Z < 0].
// Differences within tol (relative to the larger side) count as boundary.
OmegaStatus omega_status(double rho, double r, double kappa, double delta, const LinkFunction& link,
                         double tol = 1e-12);

// Nonnegative root of (1 - rho^2) r^2 / delta = E[max{s, -Z}^2]; 0 on the
// boundary. Throws std::domain_error outside Omega.
double s_star(double rho, double r, double kappa, double delta, const LinkFunction& link);

struct BigM {
    double value = 0.0;     // E[(Z + s*)_+] + kappa
    double identity = 0.0;  // rho m + s* + E[(Z + s*)_-]
    double s_star = 0.0;
};

BigM big_m(double rho, double r, double kappa, double delta, const LinkFunction& link);

// ============================================================================
// Maximization and the LP threshold
// ============================================================================

// average_margin: the objective above. random_direction: the LP objective is a
// direction independent of the data, so its value on Omega is rho itself; this
// is the pure-noise program.
enum class MObjective { average_margin, random_direction };

struct MaximizeOptions {
    int rho_points = 101;
    int r_points = 101;
    double arg_tol = 1e-6;  // Nelder-Mead stopping size in (rho, r)
    double tie_tol = 1e-4;  // near-tie diagnostic
    MObjective objective = MObjective::average_margin;
};

struct MaximizeResult {
    OrderParams best;
    double value = 0.0;  // M_*(r_max)
    bool feasible = false;
    bool near_tie = false;  // a non-adjacent grid point within tie_tol of the best
    int feasible_points = 0;
    int strict_points = 0;  // grid points strictly inside Omega
    double max_feasible_r = 0.0;
};

MaximizeResult maximize_m(double kappa, double delta, const LinkFunction& link, double r_max, double rho_lo = -1.0,
                          double rho_hi = 1.0, const MaximizeOptions& opts = {});

struct LinSignalOptions {
    MaximizeOptions grid{41, 41, 1e-6, 1e-4, MObjective::average_margin};
    std::vector<double> r_caps{1.5, 2.0, 4.0, 8.0};
    double r_margin = 1e-4;   // r* > 1 + r_margin witnesses M_*(R) > M_*(1)
    double rel_width = 1e-3;  // bisection stopping width on log delta
};

// Assumes the set of admissible delta is downward closed. Pure noise uses the
// random-direction objective.
double delta_lin_signal(double kappa, const LinkFunction& link, const LinSignalOptions& opts = {});

// The conjunction tested by the bisection, exposed for diagnostics.
bool lin_condition(double kappa, double delta, const LinkFunction& link, const LinSignalOptions& opts);

}  // namespace negperc
