#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "negperc/link_model.hpp"

namespace negperc {

// ============================================================================
// Data
// ============================================================================

enum class DataModel : std::uint8_t { pure_noise = 0, linear_signal = 1 };

struct Dataset {
    Eigen::MatrixXd features;  // n x d, rows x_i
    Eigen::VectorXd labels;    // entries +-1
    DataModel model = DataModel::pure_noise;
    std::optional<LinkFunction> link;  // signal model only
    std::uint64_t seed = 0;

    int n() const { return static_cast<int>(features.rows()); }
    int d() const { return static_cast<int>(features.cols()); }
    // theta* = e_1 in the signal model.
    Eigen::VectorXd theta_star() const;
    // Rows y_i x_i.
    Eigen::MatrixXd signed_features() const;
};

// x_i ~ N(0, I_d). Pure noise: y_i uniform on {-1, +1}. Signal:
// P(y_i = 1 | x_i) = link(<x_i, e_1>). Deterministic given seed.
Dataset sample_dataset(int n, int d, DataModel model, std::uint64_t seed,
                       const std::optional<LinkFunction>& link = std::nullopt);

// min_i y_i <x_i, theta> / |theta|.
double margin(const Eigen::VectorXd& theta, const Dataset& data);

// Pure noise: v ~ Unif(S^{d-1}) from a stream derived from the data seed.
// Signal: v = (1/n) sum_i y_i x_i.
Eigen::VectorXd lp_direction(const Dataset& data);

// Binary snapshot, little-endian:
//   magic "NPDS" | u32 version = 1 | u64 n | u64 d | u8 model | f64 alpha |
//   u64 seed | n x i8 labels | n*d x f64 features, row-major.
// alpha is 0 for pure noise; a logistic link is rebuilt from it on load.
void write_snapshot(std::ostream& out, const Dataset& data);
Dataset read_snapshot(std::istream& in);

// ============================================================================
// Solvers
// ============================================================================

struct SolverReport {
    Eigen::VectorXd theta_hat;
    double norm = 0.0;    // |theta| before normalization
    double margin = 0.0;  // of theta_hat / |theta_hat|
    bool success = false;
    bool converged = false;
    int iterations = 0;
    double duality_gap = 0.0;  // LP
    double grad_norm = 0.0;    // GD
    double feasibility_residual = 0.0;  // max_i (kappa - y_i <x_i, theta>)_+
    bool norm_floor_hit = false;        // GD norm-collapse guard fired
    bool risk_monotone = true;          // full-batch risk never increased
    double wall_ms = 0.0;
};

enum class LpMethod { interior_point, dual_subgradient };

struct LpOptions {
    LpMethod method = LpMethod::interior_point;
    double tol = 1e-6;                // constraint tolerance
    double success_tol = 1e-4;        // scaled by (1 + |kappa|) on margin and norm
    double gap_tol = 1e-6;            // interior point: bound on max(scaled KKT residual, mu-gap)
    int max_iters = 0;                // subgradient: 0 means 20 n
    double step_scale = 0.0;          // subgradient: c in c / sqrt(t); 0 picks 1 / max_i |x_i|
};

// maximize <v, theta> s.t. y_i <x_i, theta> >= kappa, |theta| <= 1.
SolverReport lp_solve(const Dataset& data, double kappa, const Eigen::VectorXd& v, const LpOptions& opts = {});

struct UnconstrainedLp {
    Eigen::VectorXd theta;
    bool unbounded = false;
    bool converged = false;
    bool norm_at_least_one = false;
};

// Same program without the ball constraint; norm blow-up flags unboundedness.
UnconstrainedLp lp_solve_unconstrained(const Dataset& data, double kappa, const Eigen::VectorXd& v,
                                       const LpOptions& opts = {});

// Whether |theta_lin| >= 1 and |theta_hat| = 1 give the same verdict.
bool lp_success_equivalence_check(const Dataset& data, double kappa, const Eigen::VectorXd& v,
                                  const LpOptions& opts = {});

struct GdConfig {
    double eta = 0.05;
    int max_iters = 100000;
    int batch_size = 0;  // 0 = full batch; otherwise without replacement per epoch
    std::uint64_t seed = 1;
    double norm_floor = 1e-3;
    int trajectory_stride = 0;  // record (iteration, risk, margin) every k steps; 0 disables
};

struct GdTrajectoryPoint {
    int iteration = 0;
    double risk = 0.0;
    double margin = 0.0;
};

struct GdResult {
    SolverReport report;
    std::vector<GdTrajectoryPoint> trajectory;
};

// R(theta) = (1/n) sum_i log(1 + exp(-(y_i <x_i, theta> - kappa |theta|))).
double gd_risk(const Eigen::VectorXd& theta, const Dataset& data, double kappa);
Eigen::VectorXd gd_gradient(const Eigen::VectorXd& theta, const Dataset& data, double kappa);

// theta^0 ~ Unif(S^{d-1}); stops as soon as the margin reaches kappa.
GdResult gd_solve(const Dataset& data, double kappa, const GdConfig& config = {});

// ============================================================================
// Margin and radius
// ============================================================================

struct MarginBudget {
    int bisection_steps = 12;
    GdConfig gd{0.05, 20000, 0, 1, 1e-3, 0};
    LpOptions lp;
};

struct MarginEstimate {
    double kappa_hat = 0.0;  // best achieved margin, a certified lower bound on the max margin
    Eigen::VectorXd theta_best;
    int solver_calls = 0;
};

MarginEstimate max_margin_estimate(const Dataset& data, const MarginBudget& budget = {});

struct Radius {
    double outer = 0.0;  // Rd = -1 / kappa_hat
    double inner = 0.0;  // rd = -kappa_hat
};

// Throws std::domain_error for kappa_hat >= 0 (unbounded polytope).
Radius radius_from_margin(double kappa_hat);

}  // namespace negperc
