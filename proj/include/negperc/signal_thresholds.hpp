#pragma once

#include <cstdint>
#include <vector>

#include "negperc/link_model.hpp"
#include "negperc/pure_thresholds.hpp"

namespace negperc {

// ============================================================================
// Upper bound and the rho band
// ============================================================================

struct SignalUpperOptions {
    UpperBoundOptions inner{60, 1e-4, 1e6, 8, 40};
    int rho_points = 201;       // grid over [-1, 1]
    int rho_refine_iters = 30;  // golden steps around the grid maximum
};

// Per-rho upper bound. At rho = +-1 the left-hand side vanishes and the limit 0
// is returned.
double delta_ub_signal(double kappa, double rho, const LinkFunction& link, const SignalUpperOptions& opts = {},
                       UpperBoundDiagnostics* diag = nullptr);

struct SignalUpperMax {
    double delta = 0.0;
    double rho = 0.0;  // maximizing rho
};

SignalUpperMax delta_ub_signal_max(double kappa, const LinkFunction& link, const SignalUpperOptions& opts = {});

struct RhoBand {
    double rho_min = -1.0;
    double rho_max = 1.0;
    bool empty = false;  // delta_ub(kappa, rho) < delta on the whole grid
};

RhoBand rho_band(double kappa, double delta, const LinkFunction& link, const SignalUpperOptions& opts = {});

// inf{b >= 0 : exists c > 0 with the feasibility inequality for all t > 0}.
double dee(double a, const UpperBoundOptions& opts = {}, UpperBoundDiagnostics* diag = nullptr);

// int_0^inf 2 t s exp(-t s^2 - s) ds = 1 - v R(v), v = 1/sqrt(2t).
double dee_kernel(double t);

// ============================================================================
// Truncated second moment and the lower bound
// ============================================================================

struct SecondMomentSignalOptions {
    LowerBoundOptions lb{201, 12, 8, 1e-3, 1e-3, GridCriterion::linearized};
    int s_panels = 3;  // composite Gauss-Legendre panels over s >= kappa_t
    int s_order = 8;
};

struct SecondMomentSignalDiagnostics {
    LowerBoundDiagnostics lb;
    std::vector<double> q_grid;
    std::vector<double> excess;  // e(q) - 1 on q_grid
};

// sup of delta for the truncated second moment criterion. Requires
// 0 < rho < 1 and 0 > rho kappa_t > kappa_eff.
double delta_sec(double rho, double kappa_eff, double kappa_t, const LinkFunction& link,
                 const SecondMomentSignalOptions& opts = {}, SecondMomentSignalDiagnostics* diag = nullptr);

struct SignalLowerParams {
    double rho = 0.0;
    double kappa1 = 0.0;
    double kappa2 = 0.0;
    double kappa0 = 0.0;  // kappa / sqrt(1 - rho^2)
    double c = 0.0;       // minimizer of the inf over c (+inf allowed)
};

struct SignalLowerOptions {
    int grid_tuples = 64;
    int random_tuples = 256;
    std::uint64_t seed = 0x5eed5eedULL;
    int rho_points = 101;  // grid for the first branch, which depends on rho only
    SecondMomentSignalOptions sec;
};

struct SignalLowerResult {
    double delta = 0.0;  // 0 when nothing feasible was found
    bool found = false;
    SignalLowerParams params;
    double branch_a = 0.0;  // max{P(.), E[(.)_+^2]} at params.rho
    double branch_b = 0.0;  // 1/delta_sec + inf_c{...} at params
    bool from_branch_a = false;
    int evaluations = 0;
};

// First branch of the minimum: max{P(rho YG + s W <= kappa), E[(kappa0 - rho YG / s - W)_+^2]}.
double signal_lower_branch_a(double kappa, double rho, const LinkFunction& link);

// inf over c >= 0 of the bad-sample term in the second branch; writes the minimizing c.
double signal_lower_bad_term(double kappa, const SignalLowerParams& p, const LinkFunction& link, double* c_arg);

// Second branch at the given parameters.
double signal_lower_branch_b(double kappa, const SignalLowerParams& p, const LinkFunction& link,
                             const SecondMomentSignalOptions& opts = {});

// Budgeted search; any feasible tuple certifies its delta, so the result is a
// valid but possibly loose lower bound.
SignalLowerResult delta_lb_signal(double kappa, const LinkFunction& link, const SignalLowerOptions& opts = {});

// ============================================================================
// Estimation-error predictions (asymptotic, correction factors dropped)
// ============================================================================

struct RhoMaxBound {
    double value = 1.0;
    double moment = 0.0;     // E[(kappa - YG)_+^2]
    bool clamped = false;    // raw value fell below -1
    bool asymptotic = true;
};

RhoMaxBound rho_max_linbound(double kappa, double delta, const LinkFunction& link);

struct ErrorPrediction {
    double e_kappa = 0.0;  // 1/(2 m^2 delta) + delta/delta0
    double delta0 = 0.0;   // kappa^2 exp(alpha |kappa|) / (2 Phi(kappa))
    double m = 0.0;
    bool asymptotic = true;
};

ErrorPrediction error_prediction(double kappa, double delta, const LinkFunction& link);

}  // namespace negperc
