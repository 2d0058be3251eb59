#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>

#include "negperc/phase_cli.hpp"

using namespace negperc;
namespace fs = std::filesystem;

namespace {

ExperimentConfig parse(const std::string& text) {
    std::istringstream in(text);
    return parse_config(in);
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
}

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("negperc_test_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

}  // namespace

// ============================================================================
// Configuration
// ============================================================================

TEST_CASE("config parsing") {
    const auto c = parse(
        "# comment\n"
        "command = success-curve\n"
        "kappa_grid = -1.5, -2\n"
        "delta_lin_factors = 0.75 1.25\n"
        "d_list = 50\n"
        "replications = 4   # trailing comment\n"
        "algorithm = gd\n"
        "link = logistic\n"
        "alpha = 2\n"
        "base_seed = 17\n"
        "parallelism = 3\n");
    CHECK(c.command == Command::success_curve);
    CHECK(c.command_declared);
    CHECK(c.kappa_grid == std::vector<double>{-1.5, -2.0});
    CHECK(c.delta_lin_factors == std::vector<double>{0.75, 1.25});
    CHECK(c.d_list == std::vector<int>{50});
    CHECK(c.replications == 4);
    CHECK(c.algorithm == Algorithm::gd);
    CHECK(config_link(c).alpha() == 2.0);
    CHECK(c.base_seed == 17);
    CHECK(c.parallelism == 3);
    CHECK_FALSE(parse("kappa_grid = -1\n").command_declared);
}

TEST_CASE("config errors") {
    CHECK_THROWS_AS(parse("bogus_key = 1\n"), std::invalid_argument);
    CHECK_THROWS_AS(parse("replications = two\n"), std::invalid_argument);
    CHECK_THROWS_AS(parse("kappa_grid = -1, x\n"), std::invalid_argument);
    CHECK_THROWS_AS(parse("algorithm = newton\n"), std::invalid_argument);
    CHECK_THROWS_AS(parse("command = plot\n"), std::invalid_argument);
    CHECK_THROWS_AS(parse("no equals sign\n"), std::invalid_argument);
    CHECK_THROWS_AS(parse("replications\n"), std::invalid_argument);
    CHECK(parse("kappa_grid =\n").kappa_grid.empty());
    // Ranges are checked when a command runs.
    const std::string base = "command = success-curve\nkappa_grid = -1\ndelta_grid = 5\n";
    CHECK_THROWS_AS(run_experiment(parse(base + "replications = 0\n")), std::invalid_argument);
    CHECK_THROWS_AS(run_experiment(parse(base + "link = probit\n")), std::invalid_argument);
    CHECK_THROWS_AS(run_experiment(parse("command = success-curve\nkappa_grid = -1\n")), std::invalid_argument);
}

TEST_CASE("config echo parses back to itself") {
    const auto c = parse("command = radius\ndelta_grid = 100 1000\nd_list = 20 40\nalpha = 0.5\nlink = logistic\n");
    std::string text;
    for (const auto& [k, v] : config_entries(c)) text += k + " = " + v + "\n";
    CHECK(config_entries(parse(text)) == config_entries(c));
}

TEST_CASE("commands and numbers") {
    for (auto cmd : {Command::thresholds, Command::phase_diagram, Command::success_curve, Command::error_curve,
                     Command::heatmap, Command::radius})
        CHECK(parse_command(command_name(cmd)) == cmd);
    CHECK(command_name(Command::phase_diagram) == "phase-diagram");
    CHECK(format_number(0.1) == "0.10000000000000001");
    CHECK(format_number(2.0) == "2");
    CHECK(format_number(INFINITY) == "NA");
    CHECK(format_number(NAN) == "NA");
}

TEST_CASE("row seeds separate every coordinate") {
    std::set<std::uint64_t> seen;
    for (int rep = 0; rep < 4; ++rep)
        for (double k : {-1.0, -1.5})
            for (double delta : {10.0, 20.0})
                for (int d : {50, 100}) seen.insert(row_seed(1, rep, k, delta, d));
    CHECK(seen.size() == 32);
    CHECK(row_seed(1, 0, -1.0, 10.0, 50) == row_seed(1, 0, -1.0, 10.0, 50));
    CHECK(row_seed(2, 0, -1.0, 10.0, 50) != row_seed(1, 0, -1.0, 10.0, 50));
}

TEST_CASE("parallel map keeps task order") {
    const std::function<int(int)> sq = [](int i) { return i * i; };
    for (int jobs : {1, 2, 7}) {
        const auto out = parallel_map<int>(20, jobs, sq);
        for (int i = 0; i < 20; ++i) CHECK(out[static_cast<std::size_t>(i)] == i * i);
    }
    CHECK(parallel_map<int>(0, 3, sq).empty());
}

// ============================================================================
// Runs
// ============================================================================

TEST_CASE("success curve output is identical across parallelism") {
    const auto dir = scratch("rerun");
    auto cfg = parse(
        "command = success-curve\nkappa_grid = -1.5\ndelta_lin_factors = 0.75 1.25\nd_list = 30\n"
        "replications = 3\nalgorithm = lp\nbase_seed = 5\n");
    std::vector<std::string> first;
    for (int jobs : {1, 3}) {
        cfg.parallelism = jobs;
        cfg.output_path = (dir / ("run" + std::to_string(jobs) + ".csv")).string();
        const auto sum = run_experiment(cfg);
        REQUIRE(sum.files.size() == 3);
        CHECK(sum.files.back().ends_with(".json"));
        std::vector<std::string> bytes;
        for (const auto& f : sum.files) bytes.push_back(slurp(f));
        if (first.empty()) {
            first = bytes;
        } else {
            CHECK(bytes == first);
        }
    }
    const std::string main = first.front();
    CHECK(main.starts_with("# negperc success-curve"));
    CHECK(main.find("success_rate") != std::string::npos);
    fs::remove_all(dir);
}

TEST_CASE("phase diagram labels regions") {
    const auto dir = scratch("phase");
    auto cfg = parse("command = phase-diagram\nkappa_grid = -1\ndelta_grid = 2 8 20\nd_list = 30\nbase_seed = 2\n");
    cfg.output_path = (dir / "pd.csv").string();
    const auto sum = run_experiment(cfg);
    const std::string out = slurp(sum.files.front());
    CHECK(out.find("solvable") != std::string::npos);
    CHECK(out.find("unsolvable") != std::string::npos);
    fs::remove_all(dir);
}
