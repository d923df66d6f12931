// SPDX-License-Identifier: Apache-2.0
// relreg command line: run, preset, diagnose-rel, plotdata.
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "relreg/core/error.hpp"
#include "relreg/harness/config.hpp"
#include "relreg/harness/harness.hpp"

namespace {

using namespace relreg;

struct Overrides {
    std::optional<std::size_t> seeds;
    std::optional<std::string> out;
    std::optional<std::size_t> jobs;
    std::optional<double> timeout;
    bool verbose = false;
};

void add_overrides(CLI::App* cmd, Overrides& o) {
    cmd->add_option("--seeds", o.seeds, "use seeds 0..N-1 instead of the configured list")->check(CLI::PositiveNumber);
    cmd->add_option("--out", o.out, "output directory");
    cmd->add_option("--jobs", o.jobs, "seeds run in parallel")->check(CLI::PositiveNumber);
    cmd->add_option("--timeout", o.timeout, "per-fit wall-time limit in seconds")->check(CLI::PositiveNumber);
    cmd->add_flag("-v,--verbose", o.verbose, "report progress on stderr");
}

void apply(harness::ExperimentConfig& c, const Overrides& o) {
    if (o.seeds) c.seeds = harness::seed_range(*o.seeds);
    if (o.out) c.output_dir = *o.out;
    if (o.jobs) c.jobs = *o.jobs;
    if (o.timeout) c.timeout_seconds = *o.timeout;
    c.validate();
}

void run_and_write(const harness::ExperimentConfig& c, bool verbose) {
    harness::Progress progress;
    if (verbose) progress = [](const std::string& msg) { std::cerr << msg << '\n'; };
    const harness::ExperimentResult result = harness::run_experiment(c, progress);
    harness::write_outputs(c, result);
    std::cout << harness::format_results(result.rows, harness::Format::markdown, c.name);
    std::cout << "wrote " << (c.output_dir / "results.csv").string() << '\n';
}

int report(const std::string& kind, const std::string& message) {
    const nlohmann::json j{{"error", kind}, {"message", message}};
    std::cerr << j.dump() << '\n';
    return 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Relationship-aware regression experiments"};
    app.require_subcommand(1);

    Overrides run_o, preset_o;
    std::string run_path, preset_name, diag_path, plot_path, plot_out;

    auto* run = app.add_subcommand("run", "run an experiment config");
    run->add_option("config", run_path, "config file")->required();
    add_overrides(run, run_o);

    auto* pre = app.add_subcommand("preset", "run a named preset");
    pre->add_option("name", preset_name, "preset name")->required();
    add_overrides(pre, preset_o);

    auto* diag = app.add_subcommand("diagnose-rel", "KS informativeness test of the relations in a config");
    diag->add_option("config", diag_path, "config file")->required();

    auto* plot = app.add_subcommand("plotdata", "grid predictions for 1-D synthetic datasets");
    plot->add_option("config", plot_path, "config file")->required();
    plot->add_option("--out", plot_out, "output csv (stdout if omitted)");

    auto* list = app.add_subcommand("presets", "list preset names");
    auto* show = app.add_subcommand("show-preset", "print a preset as a config file");
    std::string show_name;
    show->add_option("name", show_name)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        return report("usage", e.what());
    }

    try {
        if (*run) {
            harness::ExperimentConfig c = harness::load_config(run_path);
            apply(c, run_o);
            run_and_write(c, run_o.verbose);
        } else if (*pre) {
            harness::ExperimentConfig c = harness::preset(preset_name);
            apply(c, preset_o);
            run_and_write(c, preset_o.verbose);
        } else if (*diag) {
            std::cout << harness::format_diagnosis(harness::diagnose_relations(harness::load_config(diag_path)));
        } else if (*plot) {
            const std::string csv = harness::format_plot_data(harness::compute_plot_data(harness::load_config(plot_path)));
            if (plot_out.empty()) {
                std::cout << csv;
            } else {
                std::FILE* f = std::fopen(plot_out.c_str(), "wb");
                if (!f) throw IoError("cannot write " + plot_out);
                std::fwrite(csv.data(), 1, csv.size(), f);
                std::fclose(f);
            }
        } else if (*list) {
            for (const auto& n : harness::preset_names()) std::cout << n << '\n';
        } else if (*show) {
            std::cout << harness::config_to_json(harness::preset(show_name)) << '\n';
        }
    } catch (const Error& e) {
        return report(e.kind(), e.what());
    } catch (const std::exception& e) {
        return report("internal", e.what());
    }
    return 0;
}
