#include "negperc/phase_cli.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <tuple>

#include "json.hpp"

#include "negperc/erm_solvers.hpp"
#include "negperc/gauss_kernels.hpp"
#include "negperc/lp_asymptotics.hpp"
#include "negperc/pure_thresholds.hpp"
#include "negperc/seeding.hpp"
#include "negperc/signal_thresholds.hpp"

namespace negperc {

namespace {

constexpr const char* kVersion = "1.0.0";
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

std::vector<std::string> split_list(const std::string& v) {
    std::string t = v;
    for (char& ch : t)
        if (ch == ',') ch = ' ';
    std::istringstream is(t);
    std::vector<std::string> out;
    for (std::string tok; is >> tok;) out.push_back(tok);
    return out;
}

double to_double(const std::string& key, const std::string& v) {
    std::size_t pos = 0;
    double x = 0.0;
    try {
        x = std::stod(v, &pos);
    } catch (const std::exception&) {
        pos = 0;
    }
    if (pos != v.size() || !std::isfinite(x)) throw std::invalid_argument("config: bad number for " + key + ": " + v);
    return x;
}

long long to_int(const std::string& key, const std::string& v) {
    std::size_t pos = 0;
    long long x = 0;
    try {
        x = std::stoll(v, &pos);
    } catch (const std::exception&) {
        pos = 0;
    }
    if (pos != v.size()) throw std::invalid_argument("config: bad integer for " + key + ": " + v);
    return x;
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
    std::size_t pos = 0;
    unsigned long long x = 0;
    try {
        x = std::stoull(v, &pos, 0);
    } catch (const std::exception&) {
        pos = 0;
    }
    if (pos != v.size() || v.front() == '-') throw std::invalid_argument("config: bad seed for " + key + ": " + v);
    return x;
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw std::invalid_argument("config: bad boolean for " + key + ": " + v);
}

std::string join(const std::vector<double>& xs) {
    std::string s;
    for (std::size_t i = 0; i < xs.size(); ++i) s += (i ? "," : "") + format_number(xs[i]);
    return s;
}

std::string join(const std::vector<int>& xs) {
    std::string s;
    for (std::size_t i = 0; i < xs.size(); ++i) s += (i ? "," : "") + std::to_string(xs[i]);
    return s;
}

std::string algorithm_name(Algorithm a) {
    switch (a) {
        case Algorithm::lp: return "lp";
        case Algorithm::gd: return "gd";
        case Algorithm::sgd: return "sgd";
    }
    return "lp";
}

void require(bool ok, const std::string& msg) {
    if (!ok) throw std::invalid_argument("config: " + msg);
}

void validate(const ExperimentConfig& c) {
    require(!c.kappa_grid.empty() || c.command == Command::radius, "kappa_grid must be non-empty");
    const bool needs_delta = c.command != Command::thresholds;
    if (needs_delta) require(!c.delta_grid.empty() || !c.delta_lin_factors.empty(), "delta_grid must be non-empty");
    if (c.command == Command::radius) require(!c.delta_grid.empty(), "radius needs an absolute delta_grid");
    require(!c.d_list.empty(), "d_list must be non-empty");
    for (int d : c.d_list) require(d >= 1, "d_list entries must be positive");
    for (double x : c.delta_grid) require(x > 0.0, "delta_grid entries must be positive");
    for (double x : c.delta_lin_factors) require(x > 0.0, "delta_lin_factors entries must be positive");
    require(c.replications >= 1, "replications must be at least 1");
    require(c.parallelism >= 1, "parallelism must be at least 1");
    require(c.link == "pure_noise" || c.link == "logistic", "link must be pure_noise or logistic");
    require(c.alpha > 0.0, "alpha must be positive");
    require(c.lp_method == "interior_point" || c.lp_method == "subgradient", "lp_method must be interior_point or subgradient");
    require(c.gd_eta > 0.0 && c.gd_max_iters >= 1 && c.sgd_batch_size >= 1, "bad gradient descent settings");
}

// ============================================================================
// Writers
// ============================================================================

class CsvFile {
public:
    CsvFile(const std::string& path, const ExperimentConfig& cfg) : path_(path), out_(path, std::ios::binary) {
        if (!out_) throw std::runtime_error("cannot open output file: " + path);
        out_ << "# negperc " << command_name(cfg.command) << " version " << kVersion << '\n';
        for (const auto& [k, v] : config_entries(cfg)) out_ << "# " << k << " = " << v << '\n';
    }
    void row(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << cells[i];
        out_ << '\n';
    }
    const std::string& path() const { return path_; }

private:
    std::string path_;
    std::ofstream out_;
};

std::string with_suffix(const std::string& path, const std::string& suffix) {
    const auto dot = path.rfind('.');
    const auto slash = path.find_last_of('/');
    if (dot != std::string::npos && (slash == std::string::npos || dot > slash) && path.substr(dot) == ".csv")
        return path.substr(0, dot) + suffix;
    return path + suffix;
}

std::string sidecar_path(const ExperimentConfig& cfg) { return with_suffix(cfg.output_path, ".json"); }

void write_sidecar(const ExperimentConfig& cfg, RunSummary& summary, double wall_ms) {
    nlohmann::ordered_json j;
    j["command"] = command_name(cfg.command);
    j["version"] = kVersion;
    nlohmann::ordered_json echo;
    for (const auto& [k, v] : config_entries(cfg)) echo[k] = v;
    j["config"] = echo;
    j["seeds"] = {{"base_seed", cfg.base_seed},
                  {"rule", "splitmix64 chain over (base_seed, replicate_id, bits(kappa), bits(delta), d)"}};
    if (cfg.timing) j["wall_time_ms"] = wall_ms;
    const std::string path = sidecar_path(cfg);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open output file: " + path);
    out << j.dump(2) << '\n';
    summary.files.push_back(path);
}

// ============================================================================
// Shared pieces
// ============================================================================

bool is_signal(const ExperimentConfig& cfg) { return cfg.link != "pure_noise"; }

struct DeltaPoint {
    double delta = 0.0;
    double factor = kNaN;  // set when delta = factor / Phi(kappa)
};

std::vector<DeltaPoint> deltas_for(const ExperimentConfig& cfg, double kappa) {
    std::vector<DeltaPoint> out;
    if (!cfg.delta_grid.empty()) {
        for (double d : cfg.delta_grid) out.push_back({d, kNaN});
    } else {
        for (double f : cfg.delta_lin_factors) out.push_back({f / std_normal_cdf(kappa), f});
    }
    return out;
}

std::vector<double> sorted_unique(std::vector<double> xs) {
    std::sort(xs.begin(), xs.end());
    xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
    return xs;
}

std::vector<int> sorted_unique(std::vector<int> xs) {
    std::sort(xs.begin(), xs.end());
    xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
    return xs;
}

// (kappa, delta) cells in sorted order.
struct Cell {
    double kappa = 0.0;
    DeltaPoint delta;
};

std::vector<Cell> sorted_cells(const ExperimentConfig& cfg) {
    std::vector<Cell> cells;
    for (double k : sorted_unique(cfg.kappa_grid)) {
        auto ds = deltas_for(cfg, k);
        std::sort(ds.begin(), ds.end(), [](const DeltaPoint& a, const DeltaPoint& b) { return a.delta < b.delta; });
        for (const auto& d : ds) cells.push_back({k, d});
    }
    return cells;
}

int sample_size(double delta, int d) { return std::max(1, static_cast<int>(std::lround(delta * d))); }

Dataset make_data(const ExperimentConfig& cfg, int n, int d, std::uint64_t seed) {
    if (is_signal(cfg)) return sample_dataset(n, d, DataModel::linear_signal, seed, config_link(cfg));
    return sample_dataset(n, d, DataModel::pure_noise, seed);
}

LpOptions lp_options(const ExperimentConfig& cfg) {
    LpOptions o;
    o.method = cfg.lp_method == "subgradient" ? LpMethod::dual_subgradient : LpMethod::interior_point;
    o.success_tol = cfg.success_tol;
    return o;
}

GdConfig gd_config(const ExperimentConfig& cfg) {
    GdConfig g;
    g.eta = cfg.gd_eta;
    g.max_iters = cfg.gd_max_iters;
    g.batch_size = cfg.algorithm == Algorithm::sgd ? cfg.sgd_batch_size : 0;
    g.norm_floor = cfg.gd_norm_floor;
    return g;
}

MaximizeOptions m_options(const ExperimentConfig& cfg) {
    MaximizeOptions o;
    o.rho_points = cfg.m_rho_points;
    o.r_points = cfg.m_r_points;
    if (!is_signal(cfg)) o.objective = MObjective::random_direction;
    return o;
}

std::string sanitize(std::string msg) {
    for (char& ch : msg)
        if (ch == ',' || ch == '\n' || ch == '\r') ch = ';';
    return msg;
}

// ============================================================================
// Threshold evaluation per kappa
// ============================================================================

struct ThresholdRow {
    double kappa = 0.0;
    double delta_rs = kNaN, delta_lb = kNaN, delta_ub = kNaN, delta_lin = kNaN;
    double rho_ub = kNaN, rho_lb = kNaN;
    std::string lb_branch = "NA";
    std::string diagnostics = "ok";
};

ThresholdRow thresholds_at(const ExperimentConfig& cfg, double kappa) {
    ThresholdRow row;
    row.kappa = kappa;
    try {
        if (!is_signal(cfg)) {
            LowerBoundOptions lb;
            lb.uniform_points = cfg.lb_uniform_points;
            UpperBoundOptions ub;
            ub.c_points = cfg.ub_c_points;
            const auto rec = pure_threshold_record(kappa, lb, ub);
            row.delta_rs = rec.delta_rs;
            row.delta_lin = rec.delta_lin;
            row.delta_lb = rec.delta_lb.value_or(kNaN);
            row.delta_ub = rec.delta_ub.value_or(kNaN);
            if (!rec.delta_lb) row.diagnostics = kappa == 0.0 ? "bounds_meet_at_zero" : "positive_kappa";
        } else {
            if (!(kappa < 0.0)) throw std::domain_error("signal thresholds need kappa < 0");
            const LinkFunction link = config_link(cfg);
            SignalUpperOptions uo;
            uo.rho_points = cfg.signal_rho_points;
            const auto ub = delta_ub_signal_max(kappa, link, uo);
            row.delta_ub = ub.delta;
            row.rho_ub = ub.rho;
            SignalLowerOptions lo;
            lo.grid_tuples = cfg.signal_lb_grid_tuples;
            lo.random_tuples = cfg.signal_lb_random_tuples;
            const auto lb = delta_lb_signal(kappa, link, lo);
            if (lb.found) {
                row.delta_lb = lb.delta;
                row.rho_lb = lb.params.rho;
                row.lb_branch = lb.from_branch_a ? "a" : "b";
            } else {
                row.diagnostics = "no_feasible_lower_tuple";
            }
            row.delta_lin = delta_lin_signal(kappa, link);
        }
    } catch (const std::exception& e) {
        row.diagnostics = sanitize(e.what());
    }
    return row;
}

}  // namespace

// ============================================================================
// Configuration
// ============================================================================

Command parse_command(const std::string& name) {
    if (name == "thresholds") return Command::thresholds;
    if (name == "phase-diagram") return Command::phase_diagram;
    if (name == "success-curve") return Command::success_curve;
    if (name == "error-curve") return Command::error_curve;
    if (name == "heatmap") return Command::heatmap;
    if (name == "radius") return Command::radius;
    throw std::invalid_argument("unknown command: " + name);
}

std::string command_name(Command c) {
    switch (c) {
        case Command::thresholds: return "thresholds";
        case Command::phase_diagram: return "phase-diagram";
        case Command::success_curve: return "success-curve";
        case Command::error_curve: return "error-curve";
        case Command::heatmap: return "heatmap";
        case Command::radius: return "radius";
    }
    return "thresholds";
}

ExperimentConfig parse_config(std::istream& in) {
    ExperimentConfig c;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto h = line.find('#'); h != std::string::npos) line.erase(h);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config: line " + std::to_string(lineno) + " has no '='");
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        const bool list_key = key == "kappa_grid" || key == "delta_grid" || key == "delta_lin_factors";
        if (val.empty() && !list_key) throw std::invalid_argument("config: empty value for " + key);
        auto reals = [&] {
            std::vector<double> xs;
            for (const auto& t : split_list(val)) xs.push_back(to_double(key, t));
            return xs;
        };
        auto as_int = [&] { return static_cast<int>(to_int(key, val)); };
        if (key == "command") {
            c.command = parse_command(val);
            c.command_declared = true;
        }
        else if (key == "kappa_grid") c.kappa_grid = reals();
        else if (key == "delta_grid") c.delta_grid = reals();
        else if (key == "delta_lin_factors") c.delta_lin_factors = reals();
        else if (key == "d_list") {
            c.d_list.clear();
            for (const auto& t : split_list(val)) c.d_list.push_back(static_cast<int>(to_int(key, t)));
        } else if (key == "replications") c.replications = as_int();
        else if (key == "algorithm") {
            if (val == "lp") c.algorithm = Algorithm::lp;
            else if (val == "gd") c.algorithm = Algorithm::gd;
            else if (val == "sgd") c.algorithm = Algorithm::sgd;
            else throw std::invalid_argument("config: algorithm must be lp, gd or sgd");
        } else if (key == "link") c.link = val;
        else if (key == "alpha") c.alpha = to_double(key, val);
        else if (key == "base_seed") c.base_seed = to_u64(key, val);
        else if (key == "output_path") c.output_path = val;
        else if (key == "parallelism") c.parallelism = as_int();
        else if (key == "timing") c.timing = to_bool(key, val);
        else if (key == "lp_method") c.lp_method = val;
        else if (key == "success_tol") c.success_tol = to_double(key, val);
        else if (key == "gd_eta") c.gd_eta = to_double(key, val);
        else if (key == "gd_max_iters") c.gd_max_iters = as_int();
        else if (key == "sgd_batch_size") c.sgd_batch_size = as_int();
        else if (key == "gd_norm_floor") c.gd_norm_floor = to_double(key, val);
        else if (key == "margin_bisection_steps") c.margin_bisection_steps = as_int();
        else if (key == "margin_gd_iters") c.margin_gd_iters = as_int();
        else if (key == "lb_uniform_points") c.lb_uniform_points = as_int();
        else if (key == "ub_c_points") c.ub_c_points = as_int();
        else if (key == "signal_rho_points") c.signal_rho_points = as_int();
        else if (key == "signal_lb_grid_tuples") c.signal_lb_grid_tuples = as_int();
        else if (key == "signal_lb_random_tuples") c.signal_lb_random_tuples = as_int();
        else if (key == "m_rho_points") c.m_rho_points = as_int();
        else if (key == "m_r_points") c.m_r_points = as_int();
        else if (key == "radius_eps") c.radius_eps = to_double(key, val);
        else throw std::invalid_argument("config: unknown key " + key);
    }
    return c;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read config: " + path);
    return parse_config(in);
}

// output_path and parallelism are left out: neither changes any result.
std::vector<std::pair<std::string, std::string>> config_entries(const ExperimentConfig& c) {
    char seed[32];
    std::snprintf(seed, sizeof seed, "%llu", static_cast<unsigned long long>(c.base_seed));
    return {
        {"command", command_name(c.command)},
        {"kappa_grid", join(c.kappa_grid)},
        {"delta_grid", join(c.delta_grid)},
        {"delta_lin_factors", join(c.delta_lin_factors)},
        {"d_list", join(c.d_list)},
        {"replications", std::to_string(c.replications)},
        {"algorithm", algorithm_name(c.algorithm)},
        {"link", c.link},
        {"alpha", format_number(c.alpha)},
        {"base_seed", seed},
        {"timing", c.timing ? "true" : "false"},
        {"lp_method", c.lp_method},
        {"success_tol", format_number(c.success_tol)},
        {"gd_eta", format_number(c.gd_eta)},
        {"gd_max_iters", std::to_string(c.gd_max_iters)},
        {"sgd_batch_size", std::to_string(c.sgd_batch_size)},
        {"gd_norm_floor", format_number(c.gd_norm_floor)},
        {"margin_bisection_steps", std::to_string(c.margin_bisection_steps)},
        {"margin_gd_iters", std::to_string(c.margin_gd_iters)},
        {"lb_uniform_points", std::to_string(c.lb_uniform_points)},
        {"ub_c_points", std::to_string(c.ub_c_points)},
        {"signal_rho_points", std::to_string(c.signal_rho_points)},
        {"signal_lb_grid_tuples", std::to_string(c.signal_lb_grid_tuples)},
        {"signal_lb_random_tuples", std::to_string(c.signal_lb_random_tuples)},
        {"m_rho_points", std::to_string(c.m_rho_points)},
        {"m_r_points", std::to_string(c.m_r_points)},
        {"radius_eps", format_number(c.radius_eps)},
    };
}

LinkFunction config_link(const ExperimentConfig& cfg) {
    if (cfg.link == "logistic") return LinkFunction::logistic(cfg.alpha);
    return LinkFunction::pure_noise();
}

std::string format_number(double x) {
    if (!std::isfinite(x)) return "NA";
    if (x == 0.0) x = 0.0;
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

std::uint64_t row_seed(std::uint64_t base, int replicate, double kappa, double delta, int d) {
    return derive_seed(base, {static_cast<std::uint64_t>(replicate), double_bits(kappa), double_bits(delta),
                              static_cast<std::uint64_t>(d)});
}

// ============================================================================
// thresholds
// ============================================================================

RunSummary run_thresholds(const ExperimentConfig& cfg) {
    validate(cfg);
    const auto t0 = Clock::now();
    const auto kappas = sorted_unique(cfg.kappa_grid);
    const auto rows = parallel_map<ThresholdRow>(static_cast<int>(kappas.size()), cfg.parallelism,
                                                 [&](int i) { return thresholds_at(cfg, kappas[i]); });
    RunSummary summary;
    CsvFile csv(cfg.output_path, cfg);
    if (!is_signal(cfg)) {
        csv.row({"kappa", "delta_rs", "delta_lb", "delta_ub", "delta_lin", "diagnostics"});
        for (const auto& r : rows)
            csv.row({format_number(r.kappa), format_number(r.delta_rs), format_number(r.delta_lb),
                     format_number(r.delta_ub), format_number(r.delta_lin), r.diagnostics});
    } else {
        csv.row({"kappa", "delta_lb", "delta_ub", "delta_lin", "rho_at_ub", "rho_at_lb", "lb_branch", "diagnostics"});
        for (const auto& r : rows)
            csv.row({format_number(r.kappa), format_number(r.delta_lb), format_number(r.delta_ub),
                     format_number(r.delta_lin), format_number(r.rho_ub), format_number(r.rho_lb), r.lb_branch,
                     r.diagnostics});
    }
    summary.files.push_back(csv.path());
    write_sidecar(cfg, summary, elapsed_ms(t0));
    return summary;
}

// ============================================================================
// phase-diagram
// ============================================================================

RunSummary run_phase_diagram(const ExperimentConfig& cfg) {
    validate(cfg);
    const auto t0 = Clock::now();
    const auto kappas = sorted_unique(cfg.kappa_grid);
    const auto rows = parallel_map<ThresholdRow>(static_cast<int>(kappas.size()), cfg.parallelism,
                                                 [&](int i) { return thresholds_at(cfg, kappas[i]); });
    RunSummary summary;
    CsvFile csv(cfg.output_path, cfg);
    csv.row({"kappa", "delta", "delta_lb", "delta_ub", "delta_lin", "region", "lp_solvable", "diagnostics"});
    for (const auto& r : rows) {
        auto ds = deltas_for(cfg, r.kappa);
        std::sort(ds.begin(), ds.end(), [](const DeltaPoint& a, const DeltaPoint& b) { return a.delta < b.delta; });
        for (const auto& dp : ds) {
            std::string region = "NA";
            if (std::isfinite(r.delta_lb) && std::isfinite(r.delta_ub)) {
                if (dp.delta < r.delta_lb) region = "solvable";
                else if (dp.delta > r.delta_ub) region = "unsolvable";
                else region = "undetermined";
            }
            const std::string lin = std::isfinite(r.delta_lin) ? (dp.delta < r.delta_lin ? "1" : "0") : "NA";
            csv.row({format_number(r.kappa), format_number(dp.delta), format_number(r.delta_lb),
                     format_number(r.delta_ub), format_number(r.delta_lin), region, lin, r.diagnostics});
        }
    }
    summary.files.push_back(csv.path());
    write_sidecar(cfg, summary, elapsed_ms(t0));
    return summary;
}

// ============================================================================
// success-curve
// ============================================================================

namespace {

struct Task {
    Cell cell;
    int d = 0;
    int rep = 0;
};

std::vector<Task> replicate_tasks(const ExperimentConfig& cfg) {
    std::vector<Task> tasks;
    const auto ds = sorted_unique(cfg.d_list);
    for (const auto& cell : sorted_cells(cfg))
        for (int d : ds)
            for (int r = 0; r < cfg.replications; ++r) tasks.push_back({cell, d, r});
    return tasks;
}

struct SolveRow {
    ResultRow row;
    int n = 0;
    bool converged = false;
    int iterations = 0;
    double overlap = kNaN;  // <theta_hat, theta*>
    std::string diagnostics = "ok";
};

SolveRow solve_task(const ExperimentConfig& cfg, const Task& t, Algorithm algorithm) {
    SolveRow s;
    ResultRow& r = s.row;
    r.kappa = t.cell.kappa;
    r.delta = t.cell.delta.delta;
    r.d = t.d;
    r.replicate_id = t.rep;
    r.seed_used = row_seed(cfg.base_seed, t.rep, r.kappa, r.delta, t.d);
    r.margin_achieved = kNaN;
    r.wall_ms = kNaN;
    s.n = sample_size(r.delta, t.d);
    try {
        const Dataset data = make_data(cfg, s.n, t.d, r.seed_used);
        SolverReport rep;
        if (algorithm == Algorithm::lp) {
            rep = lp_solve(data, r.kappa, lp_direction(data), lp_options(cfg));
        } else {
            ExperimentConfig c = cfg;
            c.algorithm = algorithm;
            rep = gd_solve(data, r.kappa, gd_config(c)).report;
        }
        r.success = rep.success;
        r.margin_achieved = rep.margin;
        if (cfg.timing) r.wall_ms = rep.wall_ms;
        s.converged = rep.converged;
        s.iterations = rep.iterations;
        if (rep.theta_hat.size() > 0 && rep.theta_hat.norm() > 0.0) s.overlap = rep.theta_hat[0] / rep.theta_hat.norm();
        if (rep.norm_floor_hit) s.diagnostics = "norm_floor_hit";
        if (!rep.converged && algorithm == Algorithm::lp) s.diagnostics = "not_converged";
    } catch (const std::exception& e) {
        r.success = false;
        s.diagnostics = sanitize(e.what());
    }
    return s;
}

}  // namespace

RunSummary run_success_curve(const ExperimentConfig& cfg) {
    validate(cfg);
    const auto t0 = Clock::now();
    const auto tasks = replicate_tasks(cfg);
    const auto rows = parallel_map<SolveRow>(static_cast<int>(tasks.size()), cfg.parallelism,
                                             [&](int i) { return solve_task(cfg, tasks[i], cfg.algorithm); });
    RunSummary summary;
    const std::string alg = algorithm_name(cfg.algorithm);
    {
        CsvFile csv(cfg.output_path, cfg);
        csv.row({"kappa", "delta", "d", "algorithm", "replications", "success_rate", "ci_halfwidth", "delta_lin_factor"});
        for (std::size_t i = 0; i < rows.size(); i += static_cast<std::size_t>(cfg.replications)) {
            int hits = 0;
            for (int r = 0; r < cfg.replications; ++r) hits += rows[i + r].row.success ? 1 : 0;
            const double p = static_cast<double>(hits) / cfg.replications;
            const double ci = 1.96 * std::sqrt(p * (1.0 - p) / cfg.replications);
            const auto& first = rows[i].row;
            csv.row({format_number(first.kappa), format_number(first.delta), std::to_string(first.d), alg,
                     std::to_string(cfg.replications), format_number(p), format_number(ci),
                     format_number(tasks[i].cell.delta.factor)});
        }
        summary.files.push_back(csv.path());
    }
    {
        CsvFile csv(with_suffix(cfg.output_path, ".rows.csv"), cfg);
        csv.row({"kappa", "delta", "d", "n", "replicate_id", "algorithm", "success", "margin_achieved", "converged",
                 "iterations", "wall_ms", "seed_used", "diagnostics"});
        for (const auto& s : rows) {
            const auto& r = s.row;
            csv.row({format_number(r.kappa), format_number(r.delta), std::to_string(r.d), std::to_string(s.n),
                     std::to_string(r.replicate_id), alg, r.success ? "1" : "0", format_number(r.margin_achieved),
                     s.converged ? "1" : "0", std::to_string(s.iterations), format_number(r.wall_ms),
                     std::to_string(r.seed_used), s.diagnostics});
        }
        summary.files.push_back(csv.path());
    }
    write_sidecar(cfg, summary, elapsed_ms(t0));
    return summary;
}

// ============================================================================
// error-curve
// ============================================================================

namespace {

struct Prediction {
    double rho_star = kNaN, r_star = kNaN, predicted_error = kNaN, e_kappa = kNaN;
    std::string diagnostics = "ok";
};

Prediction predict_cell(const ExperimentConfig& cfg, const Cell& cell) {
    Prediction p;
    const LinkFunction link = config_link(cfg);
    try {
        const auto m = maximize_m(cell.kappa, cell.delta.delta, link, 1.0, -1.0, 1.0, m_options(cfg));
        if (!m.feasible) {
            p.diagnostics = "outside_omega";
            return p;
        }
        p.r_star = m.best.r;
        // Without signal the overlap with any fixed direction vanishes by symmetry.
        p.rho_star = is_signal(cfg) ? m.best.rho : 0.0;
        p.predicted_error = std::sqrt(2.0 * (1.0 - p.rho_star));
        if (m.near_tie) p.diagnostics = "near_tie";
    } catch (const std::exception& e) {
        p.diagnostics = sanitize(e.what());
    }
    if (is_signal(cfg)) {
        try {
            p.e_kappa = error_prediction(cell.kappa, cell.delta.delta, link).e_kappa;
        } catch (const std::exception&) {
            p.e_kappa = kNaN;
        }
    }
    return p;
}

}  // namespace

RunSummary run_error_curve(const ExperimentConfig& cfg) {
    validate(cfg);
    const auto t0 = Clock::now();
    const auto cells = sorted_cells(cfg);
    const auto preds = parallel_map<Prediction>(static_cast<int>(cells.size()), cfg.parallelism,
                                                [&](int i) { return predict_cell(cfg, cells[i]); });
    const auto tasks = replicate_tasks(cfg);
    const auto rows = parallel_map<SolveRow>(static_cast<int>(tasks.size()), cfg.parallelism,
                                             [&](int i) { return solve_task(cfg, tasks[i], Algorithm::lp); });
    RunSummary summary;
    const std::size_t nd = sorted_unique(cfg.d_list).size();
    {
        CsvFile csv(cfg.output_path, cfg);
        csv.row({"kappa", "delta", "d", "rho_star", "r_star", "predicted_error", "e_kappa", "mean_overlap",
                 "se_overlap", "mean_error", "success_rate", "replications", "diagnostics"});
        const auto reps = static_cast<std::size_t>(cfg.replications);
        for (std::size_t i = 0; i < rows.size(); i += reps) {
            const auto& pr = preds[i / (reps * nd)];
            double sum = 0.0, sumsq = 0.0, err = 0.0;
            int valid = 0, hits = 0;
            for (std::size_t r = 0; r < reps; ++r) {
                const double o = rows[i + r].overlap;
                hits += rows[i + r].row.success ? 1 : 0;
                if (!std::isfinite(o)) continue;
                sum += o;
                sumsq += o * o;
                err += std::sqrt(std::max(0.0, 2.0 * (1.0 - o)));
                ++valid;
            }
            const double mean = valid > 0 ? sum / valid : kNaN;
            const double var = valid > 1 ? (sumsq - valid * mean * mean) / (valid - 1) : kNaN;
            const double se = valid > 1 ? std::sqrt(std::max(0.0, var) / valid) : kNaN;
            const auto& first = rows[i].row;
            csv.row({format_number(first.kappa), format_number(first.delta), std::to_string(first.d),
                     format_number(pr.rho_star), format_number(pr.r_star), format_number(pr.predicted_error),
                     format_number(pr.e_kappa), format_number(mean), format_number(se),
                     format_number(valid > 0 ? err / valid : kNaN),
                     format_number(static_cast<double>(hits) / cfg.replications), std::to_string(cfg.replications),
                     pr.diagnostics});
        }
        summary.files.push_back(csv.path());
    }
    {
        CsvFile csv(with_suffix(cfg.output_path, ".rows.csv"), cfg);
        csv.row({"kappa", "delta", "d", "n", "replicate_id", "success", "margin_achieved", "overlap", "wall_ms",
                 "seed_used", "diagnostics"});
        for (const auto& s : rows) {
            const auto& r = s.row;
            csv.row({format_number(r.kappa), format_number(r.delta), std::to_string(r.d), std::to_string(s.n),
                     std::to_string(r.replicate_id), r.success ? "1" : "0", format_number(r.margin_achieved),
                     format_number(s.overlap), format_number(r.wall_ms), std::to_string(r.seed_used), s.diagnostics});
        }
        summary.files.push_back(csv.path());
    }
    write_sidecar(cfg, summary, elapsed_ms(t0));
    return summary;
}

// ============================================================================
// heatmap
// ============================================================================

RunSummary run_heatmap(const ExperimentConfig& cfg) {
    validate(cfg);
    require(!cfg.delta_grid.empty(), "heatmap needs an absolute delta_grid");
    const auto t0 = Clock::now();
    const auto kappas = sorted_unique(cfg.kappa_grid);
    const auto deltas = sorted_unique(cfg.delta_grid);
    const int nk = static_cast<int>(kappas.size()), ndl = static_cast<int>(deltas.size());
    const LinkFunction link = config_link(cfg);
    struct Entry {
        double r = kNaN, rho = kNaN;
    };
    const auto grid = parallel_map<Entry>(nk * ndl, cfg.parallelism, [&](int i) {
        Entry e;
        try {
            const auto m = maximize_m(kappas[i / ndl], deltas[i % ndl], link, 1.0, -1.0, 1.0, m_options(cfg));
            if (m.feasible) {
                e.r = m.best.r;
                e.rho = is_signal(cfg) ? m.best.rho : 0.0;
            }
        } catch (const std::exception&) {
        }
        return e;
    });
    RunSummary summary;
    auto write = [&](const std::string& path, bool r_values) {
        CsvFile csv(path, cfg);
        std::vector<std::string> head{"kappa"};
        for (double d : deltas) head.push_back(format_number(d));
        csv.row(head);
        for (int k = 0; k < nk; ++k) {
            std::vector<std::string> cells{format_number(kappas[k])};
            for (int j = 0; j < ndl; ++j) {
                const auto& e = grid[k * ndl + j];
                cells.push_back(format_number(r_values ? e.r : e.rho));
            }
            csv.row(cells);
        }
        summary.files.push_back(csv.path());
    };
    write(cfg.output_path, true);
    write(with_suffix(cfg.output_path, ".rho.csv"), false);
    write_sidecar(cfg, summary, elapsed_ms(t0));
    return summary;
}

// ============================================================================
// radius
// ============================================================================

RunSummary run_radius(const ExperimentConfig& cfg) {
    validate(cfg);
    const auto t0 = Clock::now();
    struct RTask {
        double delta;
        int d, rep;
    };
    std::vector<RTask> tasks;
    for (double delta : sorted_unique(cfg.delta_grid))
        for (int d : sorted_unique(cfg.d_list))
            for (int r = 0; r < cfg.replications; ++r) tasks.push_back({delta, d, r});
    struct RRow {
        int n = 0;
        double kappa_hat = kNaN, outer = kNaN, inner = kNaN;
        std::uint64_t seed = 0;
        std::string flag = "ok";
    };
    const auto rows = parallel_map<RRow>(static_cast<int>(tasks.size()), cfg.parallelism, [&](int i) {
        const auto& t = tasks[i];
        RRow row;
        row.seed = row_seed(cfg.base_seed, t.rep, 0.0, t.delta, t.d);
        row.n = sample_size(t.delta, t.d);
        try {
            const Dataset data = make_data(cfg, row.n, t.d, row.seed);
            MarginBudget budget;
            budget.bisection_steps = cfg.margin_bisection_steps;
            budget.gd.eta = cfg.gd_eta;
            budget.gd.max_iters = cfg.margin_gd_iters;
            budget.gd.norm_floor = cfg.gd_norm_floor;
            budget.lp = lp_options(cfg);
            const auto est = max_margin_estimate(data, budget);
            row.kappa_hat = est.kappa_hat;
            if (est.kappa_hat < 0.0) {
                const auto rad = radius_from_margin(est.kappa_hat);
                row.outer = rad.outer;
                row.inner = rad.inner;
            } else {
                row.flag = "nonnegative_margin";
            }
        } catch (const std::exception& e) {
            row.flag = sanitize(e.what());
        }
        return row;
    });
    const double a = is_signal(cfg) ? cfg.alpha : 0.0;
    RunSummary summary;
    CsvFile csv(cfg.output_path, cfg);
    csv.row({"delta", "d", "n", "replicate_id", "kappa_hat", "rd_outer", "rd_inner", "duality_product", "predicted",
             "predicted_lo", "predicted_hi", "seed_used", "flag"});
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& t = tasks[i];
        const auto& r = rows[i];
        const double L = 2.0 * std::log(t.delta);
        const bool ok = L > 0.0;
        const double pred = ok ? 1.0 / std::sqrt(L) + a / L : kNaN;
        const double lo = ok ? 1.0 / std::sqrt(L) + (a - cfg.radius_eps) / L : kNaN;
        const double hi = ok ? 1.0 / std::sqrt(L) + (a + cfg.radius_eps) / L : kNaN;
        csv.row({format_number(t.delta), std::to_string(t.d), std::to_string(r.n), std::to_string(t.rep),
                 format_number(r.kappa_hat), format_number(r.outer), format_number(r.inner),
                 format_number(r.outer * r.inner), format_number(pred), format_number(lo), format_number(hi),
                 std::to_string(r.seed), r.flag});
    }
    summary.files.push_back(csv.path());
    write_sidecar(cfg, summary, elapsed_ms(t0));
    return summary;
}

RunSummary run_experiment(const ExperimentConfig& cfg) {
    switch (cfg.command) {
        case Command::thresholds: return run_thresholds(cfg);
        case Command::phase_diagram: return run_phase_diagram(cfg);
        case Command::success_curve: return run_success_curve(cfg);
        case Command::error_curve: return run_error_curve(cfg);
        case Command::heatmap: return run_heatmap(cfg);
        case Command::radius: return run_radius(cfg);
    }
    throw std::invalid_argument("unknown command");
}

}  // namespace negperc
