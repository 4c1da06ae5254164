#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "hybridgrid/hybridgrid.hpp"

namespace {

std::vector<double> parse_values(const std::string& csv) {
    std::vector<double> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        out.push_back(std::stod(item));
    }
    if (out.empty()) throw hybridgrid::SchemaError("sweep.values", "no values given");
    return out;
}

int classify_error(const std::exception& e) {
    if (dynamic_cast<const hybridgrid::ParseError*>(&e) ||
        dynamic_cast<const hybridgrid::SchemaError*>(&e) ||
        dynamic_cast<const hybridgrid::ValidationError*>(&e) ||
        dynamic_cast<const hybridgrid::DimensionMismatch*>(&e) ||
        dynamic_cast<const hybridgrid::UnknownSubsystem*>(&e) ||
        dynamic_cast<const hybridgrid::NegativeDelay*>(&e) ||
        dynamic_cast<const hybridgrid::ModeMismatch*>(&e))
        return 2;
    return 3;  // numerical failure
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"hybridgrid - hybrid AC/DC network simulation and certification"};
    app.require_subcommand(1);

    // run
    std::string run_path, run_mode, run_out = "out";
    double run_t_end = -1.0, run_dt = -1.0, run_delay = -1.0;
    int run_jobs = 1;
    auto* run_cmd = app.add_subcommand("run", "run a scenario end to end");
    run_cmd->add_option("scenario", run_path, "scenario JSON file")->required();
    run_cmd->add_option("--mode", run_mode, "primary|dual-droop|secondary");
    run_cmd->add_option("--t-end", run_t_end, "simulation end time [s]");
    run_cmd->add_option("--dt", run_dt, "integration step [s]");
    run_cmd->add_option("--delay", run_delay, "communication delay [s]");
    run_cmd->add_option("--out", run_out, "output directory");
    run_cmd->add_option("--jobs", run_jobs, "worker limit (single runs ignore this)");

    // preset
    std::string preset_name, preset_out;
    auto* preset_cmd = app.add_subcommand("preset", "emit a bundled scenario");
    preset_cmd->add_option("name", preset_name, "preset name (case-study)")->required();
    preset_cmd->add_option("--out", preset_out, "output file (default: stdout)");

    // sweep
    std::string sweep_path, sweep_param, sweep_values, sweep_mode, sweep_out = "out";
    int sweep_jobs = 1;
    auto* sweep_cmd = app.add_subcommand("sweep", "run a scenario over a parameter range");
    sweep_cmd->add_option("scenario", sweep_path, "scenario JSON file")->required();
    sweep_cmd->add_option("--param", sweep_param,
                          "dc_resistance_scale|comm_delay|m|virtual_capacitance")
        ->required();
    sweep_cmd->add_option("--values", sweep_values, "comma-separated values")->required();
    sweep_cmd->add_option("--mode", sweep_mode, "primary|dual-droop|secondary");
    sweep_cmd->add_option("--out", sweep_out, "output directory");
    sweep_cmd->add_option("--jobs", sweep_jobs, "concurrent sweep points");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run_cmd->parsed()) {
            hybridgrid::Scenario sc = hybridgrid::parse_scenario(run_path);
            hybridgrid::RunOptions opts;
            if (!run_mode.empty()) opts.mode = run_mode;
            if (run_t_end > 0.0) opts.t_end = run_t_end;
            if (run_dt > 0.0) opts.dt = run_dt;
            if (run_delay >= 0.0) opts.comm_delay = run_delay;
            opts.out_dir = run_out;
            hybridgrid::RunReport rep = hybridgrid::run_scenario(sc, opts);
            std::cout << "wrote " << run_out << "/ (trajectory.csv, certificate.csv, "
                         "certificate.txt, summary.txt)\n";
            std::ifstream summary(run_out + "/summary.txt");
            std::cout << summary.rdbuf();
            return rep.exit_code;
        }

        if (preset_cmd->parsed()) {
            if (preset_name != "case-study") {
                std::cerr << "unknown preset: " << preset_name << "\n";
                return 2;
            }
            auto doc = hybridgrid::serialize_scenario(hybridgrid::preset_case_study());
            if (preset_out.empty()) {
                std::cout << doc.dump(2) << "\n";
            } else {
                std::ofstream out(preset_out);
                if (!out) {
                    std::cerr << "cannot write " << preset_out << "\n";
                    return 2;
                }
                out << doc.dump(2) << "\n";
                std::cout << "wrote " << preset_out << "\n";
            }
            return 0;
        }

        if (sweep_cmd->parsed()) {
            hybridgrid::Scenario sc = hybridgrid::parse_scenario(sweep_path);
            if (!sweep_mode.empty()) sc.mode = sweep_mode;
            std::vector<double> values = parse_values(sweep_values);
            hybridgrid::RunOptions opts;
            opts.out_dir = sweep_out;
            hybridgrid::SweepReport rep =
                hybridgrid::sweep_scenario(sc, sweep_param, values, opts, sweep_jobs);
            std::filesystem::create_directories(sweep_out);
            hybridgrid::write_sweep_csv(sweep_out + "/sweep.csv", rep);
            if (sweep_param == "dc_resistance_scale") {
                // Companion equilibrium-based report.
                hybridgrid::BuiltScenario b = hybridgrid::build_scenario(sc);
                Eigen::VectorXd p_load = hybridgrid::loads_at(
                    b.net, b.disturbances, sc.sim.t_end);
                hybridgrid::SweepResult eq_sweep =
                    hybridgrid::resistance_sweep(b.net, b.cfg, p_load, values);
                hybridgrid::write_resistance_sweep_csv(sweep_out + "/equilibrium_sweep.csv",
                                                       eq_sweep);
            }
            std::cout << "wrote " << sweep_out << "/sweep.csv\n";
            bool any_numeric = false, any_cert = false;
            for (const auto& r : rep.rows) {
                std::cout << "  " << sweep_param << "=" << r.value << ": "
                          << (r.ok ? (r.cert_pass ? "ok" : "certificate violation") : r.status)
                          << "\n";
                if (!r.ok) any_numeric = true;
                if (r.ok && !r.cert_pass) any_cert = true;
            }
            return any_numeric ? 3 : (any_cert ? 1 : 0);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return classify_error(e);
    }
    return 2;
}
