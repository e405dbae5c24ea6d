// Command-line front end: every experiment is a config file plus a subcommand.

#include "rdos/harness.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>

namespace fs = std::filesystem;

namespace {

struct Globals {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::size_t parallel = 1;
};

rdos::ExperimentConfig load(const Globals& g)
{
    auto cfg = rdos::load_config(g.config);
    if (g.seed) {
        cfg.seed = *g.seed;
    }
    if (!g.out.empty()) {
        cfg.output = g.out;
    }
    cfg.validate();
    return cfg;
}

int run(const Globals& g, rdos::Pipeline pipeline, bool sweep)
{
    const auto cfg = load(g);
    rdos::RunOptions opts;
    opts.pipeline = pipeline;
    opts.workers = g.parallel;
    opts.out_dir = fs::path(cfg.output);
    const auto res = sweep ? rdos::run_sweep(cfg, opts) : rdos::run_experiment(cfg, opts);
    std::cout << rdos::report({cfg, res.config_hash, res.records, res.sweep});
    std::cout << "\nrecords: " << (fs::path(cfg.output) / "records.jsonl").string() << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Reasoning-level denial-of-service red-teaming harness"};
    app.require_subcommand(1);
    Globals g;

    auto add_run_flags = [&](CLI::App* sub) {
        sub->add_option("--config", g.config, "Experiment config (JSON, comments allowed)")->required();
        sub->add_option("--seed", g.seed, "Override the experiment seed");
        sub->add_option("--out", g.out, "Output directory (overrides the config)");
        sub->add_option("--parallel", g.parallel, "Worker threads")->check(CLI::PositiveNumber);
    };

    auto* trigger = app.add_subcommand("optimize-trigger", "Stage I only: optimize trigger suffixes");
    add_run_flags(trigger);
    auto* payload = app.add_subcommand("optimize-payload", "Stage II only: optimize payloads on a validated trigger");
    add_run_flags(payload);
    auto* full = app.add_subcommand("run", "Full two-stage pipeline with evaluation");
    add_run_flags(full);
    auto* sweep = app.add_subcommand("sweep-defenses", "Filter and monitor parameter sweeps");
    add_run_flags(sweep);

    std::vector<std::string> record_paths;
    auto* rep = app.add_subcommand("report", "Summarize a records.jsonl file");
    rep->add_option("records", record_paths, "Record files")->required()->check(CLI::ExistingFile);

    std::string csv_out;
    auto* conv = app.add_subcommand("export-convergence", "Write Stage I objective traces as CSV");
    conv->add_option("records", record_paths, "Record files")->required()->check(CLI::ExistingFile);
    conv->add_option("--out", csv_out, "CSV path (default: stdout)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*trigger) {
            return run(g, rdos::Pipeline::TriggerOnly, false);
        }
        if (*payload) {
            return run(g, rdos::Pipeline::PayloadOnly, false);
        }
        if (*full) {
            return run(g, rdos::Pipeline::Full, false);
        }
        if (*sweep) {
            return run(g, rdos::Pipeline::Full, true);
        }
        if (*rep) {
            for (const auto& p : record_paths) {
                std::cout << rdos::report(rdos::read_records(p)) << "\n";
            }
            return 0;
        }
        if (*conv) {
            std::vector<rdos::RunRecord> all;
            for (const auto& p : record_paths) {
                auto f = rdos::read_records(p);
                all.insert(all.end(), f.runs.begin(), f.runs.end());
            }
            if (csv_out.empty()) {
                std::cout << rdos::convergence_csv(all);
            } else {
                rdos::export_convergence(all, csv_out);
            }
            return 0;
        }
    } catch (const rdos::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
