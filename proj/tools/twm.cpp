// twm: single runs, parameter sweeps, operational-point search and figure
// data for the two-time weak measurement protocol.

#include "twm/sweep.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <string>
#include <vector>

int main(int argc, char** argv) {
    using namespace twm::cli;

    CLI::App app{"Two-time weak measurement protocol for open quantum batteries"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out;
    std::vector<std::string> sets;
    std::vector<std::string> grids;
    std::optional<double> tol;
    std::optional<unsigned> workers;
    std::string figure;

    app.add_option("--config", config_path, "flat key = value config file")->check(CLI::ExistingFile);
    app.add_option("--out", out, "output path (CSV); stdout when omitted");
    app.add_option("--set", sets, "fix a parameter, key=value (repeatable)");
    app.add_option("--grid", grids, "range a parameter, key=start:stop:count (repeatable)");
    app.add_option("--tol", tol, "residual tolerance for epsilon and W");
    app.add_option("--workers", workers, "worker threads")->check(CLI::PositiveNumber);

    app.add_subcommand("run", "single protocol run with a printed report")->fallthrough();
    app.add_subcommand("sweep", "grid evaluation to CSV")->fallthrough();
    app.add_subcommand("opfind", "operational points to CSV")->fallthrough();
    app.add_subcommand("twoqubit", "two-cell X-state run")->fallthrough();
    auto* fig = app.add_subcommand("figure", "data behind a named figure")->fallthrough();
    fig->add_option("name", figure, "figure name")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfigError;
    }

    try {
        SweepConfig c;
        if (!config_path.empty()) c = load_config(config_path);
        c.mode = app.get_subcommands().front()->get_name();
        if (c.mode == "twoqubit") c.system = "two";
        if (c.mode == "figure") c.figure = figure;
        for (const auto& s : sets) {
            const auto [k, v] = split_assignment(s);
            if (v.find(':') != std::string::npos) throw twm::Error(twm::ErrorKind::InvalidConfig, "use --grid for ranges");
            assign(c, k, v);
        }
        for (const auto& g : grids) {
            const auto [k, v] = split_assignment(g);
            if (!is_parameter(k)) throw twm::Error(twm::ErrorKind::InvalidConfig, "cannot range over '" + k + "'");
            assign(c, k, v);
        }
        if (!out.empty()) c.out = out;
        if (tol) c.tol = *tol;
        if (workers) c.workers = *workers;
        return dispatch(c, std::cout, std::cerr);
    } catch (const twm::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kConfigError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kFailure;
    }
}
