#include <cstdio>
#include <exception>
#include <string>

#include "CLI11.hpp"

#include "negperc/phase_cli.hpp"

int main(int argc, char** argv) {
    CLI::App app{"negperc: negative-margin perceptron experiments"};
    app.require_subcommand(1, 1);
    std::string config_path, out;
    int jobs = 0;
    std::string seed;
    for (const char* name : {"thresholds", "phase-diagram", "success-curve", "error-curve", "heatmap", "radius"}) {
        auto* sub = app.add_subcommand(name);
        sub->add_option("--config", config_path, "flat key = value config file")->required()->check(CLI::ExistingFile);
        sub->add_option("--out", out, "primary output CSV; overrides output_path");
        sub->add_option("--jobs", jobs, "worker threads; overrides parallelism")->check(CLI::PositiveNumber);
        sub->add_option("--seed", seed, "base seed; overrides base_seed");
    }
    CLI11_PARSE(app, argc, argv);
    try {
        const std::string command = app.get_subcommands().front()->get_name();
        negperc::ExperimentConfig cfg = negperc::load_config(config_path);
        const negperc::Command cmd = negperc::parse_command(command);
        if (cfg.command_declared && cfg.command != cmd)
            throw std::invalid_argument("config command differs from subcommand " + command);
        cfg.command = cmd;
        if (!out.empty()) cfg.output_path = out;
        if (jobs > 0) cfg.parallelism = jobs;
        if (!seed.empty()) cfg.base_seed = std::stoull(seed, nullptr, 0);
        const auto summary = negperc::run_experiment(cfg);
        for (const auto& f : summary.files) std::printf("%s\n", f.c_str());
    } catch (const std::exception& e) {
        std::fprintf(stderr, "negperc: %s\n", e.what());
        return 1;
    }
    return 0;
}
