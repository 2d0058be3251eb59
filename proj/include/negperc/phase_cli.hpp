#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <thread>
#include <vector>

#include "negperc/link_model.hpp"

namespace negperc {

// ============================================================================
// Configuration
// ============================================================================

enum class Command { thresholds, phase_diagram, success_curve, error_curve, heatmap, radius };
enum class Algorithm { lp, gd, sgd };

Command parse_command(const std::string& name);
std::string command_name(Command c);

struct ExperimentConfig {
    Command command = Command::thresholds;
    bool command_declared = false;  // the file carried a command key
    std::vector<double> kappa_grid;
    std::vector<double> delta_grid;         // absolute delta values
    std::vector<double> delta_lin_factors;  // delta = factor / Phi(kappa); used when delta_grid is empty
    std::vector<int> d_list{100};
    int replications = 1;
    Algorithm algorithm = Algorithm::lp;
    std::string link = "pure_noise";  // pure_noise | logistic
    double alpha = 1.0;
    std::uint64_t base_seed = 1;
    std::string output_path = "negperc_out.csv";
    int parallelism = 1;
    bool timing = false;  // wall-clock columns and sidecar field; off keeps reruns byte-identical

    // Solvers.
    std::string lp_method = "interior_point";  // interior_point | subgradient
    double success_tol = 1e-4;
    double gd_eta = 0.05;
    int gd_max_iters = 100000;
    int sgd_batch_size = 1000;
    double gd_norm_floor = 1e-3;
    int margin_bisection_steps = 12;
    int margin_gd_iters = 20000;

    // Threshold evaluation.
    int lb_uniform_points = 2001;
    int ub_c_points = 200;
    int signal_rho_points = 201;
    int signal_lb_grid_tuples = 64;
    int signal_lb_random_tuples = 256;
    int m_rho_points = 101;
    int m_r_points = 101;

    double radius_eps = 0.5;
};

// Flat "key = value" lines; '#' starts a comment; lists are comma or space
// separated. Unknown keys and malformed values throw std::invalid_argument.
ExperimentConfig parse_config(std::istream& in);
ExperimentConfig load_config(const std::string& path);

// Every resolved key, one "key = value" per entry, in a fixed order.
std::vector<std::pair<std::string, std::string>> config_entries(const ExperimentConfig& cfg);

LinkFunction config_link(const ExperimentConfig& cfg);

// ============================================================================
// Output helpers
// ============================================================================

// %.17g, with "NA" for non-finite values.
std::string format_number(double x);

// seed_used = derive_seed(base, {replicate, bits(kappa), bits(delta), d}).
std::uint64_t row_seed(std::uint64_t base, int replicate, double kappa, double delta, int d);

// Runs fn(i) for i in [0, tasks) on up to jobs threads; results keep task
// order, so output never depends on scheduling. fn must not throw.
template <class T>
std::vector<T> parallel_map(int tasks, int jobs, const std::function<T(int)>& fn) {
    std::vector<T> out(static_cast<std::size_t>(std::max(tasks, 0)));
    std::atomic<int> next{0};
    auto worker = [&] {
        for (int i = next++; i < tasks; i = next++) out[static_cast<std::size_t>(i)] = fn(i);
    };
    const int n = std::clamp(jobs, 1, std::max(tasks, 1));
    std::vector<std::thread> pool;
    for (int t = 1; t < n; ++t) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();
    return out;
}

struct ResultRow {
    double kappa = 0.0;
    double delta = 0.0;
    int d = 0;
    int replicate_id = 0;
    bool success = false;
    double margin_achieved = 0.0;
    double wall_ms = 0.0;
    std::uint64_t seed_used = 0;
};

// ============================================================================
// Commands
// ============================================================================

struct RunSummary {
    std::vector<std::string> files;  // written, primary first; the sidecar is last
};

RunSummary run_thresholds(const ExperimentConfig& cfg);
RunSummary run_phase_diagram(const ExperimentConfig& cfg);
RunSummary run_success_curve(const ExperimentConfig& cfg);
RunSummary run_error_curve(const ExperimentConfig& cfg);
RunSummary run_heatmap(const ExperimentConfig& cfg);
RunSummary run_radius(const ExperimentConfig& cfg);

RunSummary run_experiment(const ExperimentConfig& cfg);

}  // namespace negperc
