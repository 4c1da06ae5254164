#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "hybridgrid/certification.hpp"
#include "hybridgrid/dynamics.hpp"
#include "hybridgrid/scenario.hpp"
#include "hybridgrid/steady_state.hpp"

namespace hybridgrid {

inline std::string fmt_e(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12e", v);
    return buf;
}

struct RunOptions {
    std::optional<std::string> mode;
    std::optional<double> t_end;
    std::optional<double> dt;
    std::optional<double> comm_delay;
    std::string out_dir = "out";
    bool write_outputs = true;
};

struct SegmentReport {
    std::size_t begin = 0, end = 0;  ///< sample range [begin, end)
    double t_begin = 0.0, t_end = 0.0;
    EquilibriumPoint eq;
    CertificateReport cert;
};

struct RunReport {
    Trajectory traj;
    StateLayout layout;
    std::vector<SegmentReport> segments;
    Eigen::VectorXd final_omega_bus;  ///< per bus (AC entries meaningful)
    Eigen::VectorXd final_v_bar;      ///< per DC subsystem
    Eigen::VectorXd final_p_gen;      ///< per bus
    double sharing_error = 0.0;
    double peak_vdot_sources = 0.0;  ///< max |dV/dt| over DC source buses
    bool cert_pass = false;
    int exit_code = 3;
};

namespace detail {

inline void write_trajectory_csv(const std::string& path, const ValidatedNetwork& net,
                                 const ControllerConfig& cfg, const Trajectory& traj) {
    std::ofstream out(path);
    out << "t";
    for (const auto& e : net.ac_edges())
        out << ",eta:" << net.bus(e.from).id << "-" << net.bus(e.to).id;
    for (int i = 0; i < net.n_buses(); ++i)
        if (net.bus(i).kind != BusKind::Dc) out << ",omega:" << net.bus(i).id;
    for (int bus : net.dc_buses()) out << ",v:" << net.bus(bus).id;
    if (cfg.mode == ControlMode::Secondary)
        for (int bus : net.comm_nodes()) out << ",xi:" << net.bus(bus).id;
    for (int i = 0; i < net.n_buses(); ++i) out << ",pg:" << net.bus(i).id;
    for (const auto& c : net.converters()) out << ",px:" << c.id;
    for (int k : net.dc_subsystems())
        out << ",vbar:" << net.subsystems()[static_cast<std::size_t>(k)].id;
    out << "\n";
    for (const auto& s : traj.samples) {
        out << fmt_e(s.t);
        for (int e = 0; e < traj.layout.n_eta; ++e)
            out << "," << fmt_e(s.x(traj.layout.eta_offset() + e));
        for (int i = 0; i < net.n_buses(); ++i)
            if (net.bus(i).kind != BusKind::Dc) out << "," << fmt_e(s.omega_bus(i));
        for (int d = 0; d < traj.layout.n_dc; ++d)
            out << "," << fmt_e(s.x(traj.layout.dc_offset() + d));
        if (cfg.mode == ControlMode::Secondary)
            for (int a = 0; a < traj.layout.n_xi; ++a)
                out << "," << fmt_e(s.x(traj.layout.xi_offset() + a));
        for (int i = 0; i < net.n_buses(); ++i) out << "," << fmt_e(s.derived.p_gen(i));
        for (Eigen::Index x = 0; x < s.derived.p_conv.size(); ++x)
            out << "," << fmt_e(s.derived.p_conv(x));
        for (Eigen::Index k = 0; k < s.derived.v_bar.size(); ++k)
            out << "," << fmt_e(s.derived.v_bar(k));
        out << "\n";
    }
}

inline void write_certificate_csv(const std::string& path, const RunReport& rep) {
    std::ofstream out(path);
    bool with_w = false;
    for (const auto& seg : rep.segments)
        if (seg.cert.lyapunov_checked) with_w = true;
    out << "t" << (with_w ? ",w" : "") << ",security_margin,flow_residual,ilc_residual\n";
    for (const auto& seg : rep.segments) {
        for (std::size_t i = 0; i < seg.cert.times.size(); ++i) {
            out << fmt_e(seg.cert.times[i]);
            if (with_w)
                out << ","
                    << fmt_e(seg.cert.lyapunov_checked ? seg.cert.w_series[i] : 0.0);
            out << "," << fmt_e(seg.cert.security_margin_series[i]) << ","
                << fmt_e(seg.cert.flow_residual_series[i]) << ","
                << fmt_e(seg.cert.ilc_residual_series[i]) << "\n";
        }
    }
}

inline std::string certificate_text(const RunReport& rep) {
    std::ostringstream out;
    out << "certificate report\n";
    for (std::size_t k = 0; k < rep.segments.size(); ++k) {
        const auto& seg = rep.segments[k];
        out << "segment " << k << ": t in [" << fmt_e(seg.t_begin) << ", " << fmt_e(seg.t_end)
            << "], equilibrium residual " << fmt_e(seg.eq.residual_norm) << ", newton iterations "
            << seg.eq.iterations << "\n";
        if (seg.cert.lyapunov_checked)
            out << "  " << (seg.cert.lyapunov_ok ? "PASS" : "FAIL")
                << " lyapunov-monotone      max_increase=" << fmt_e(seg.cert.max_increase)
                << "\n";
        else
            out << "  SKIP lyapunov-monotone      (no certificate for dual-droop mode)\n";
        out << "  " << (seg.cert.conservation_ok ? "PASS" : "FAIL")
            << " conservation           flow_residual=" << fmt_e(seg.cert.worst_flow_residual)
            << " ilc_residual=" << fmt_e(seg.cert.worst_ilc_residual) << "\n";
        out << "  " << (seg.cert.security_ok ? "PASS" : "FAIL")
            << " security               worst_margin=" << fmt_e(seg.cert.worst_security_margin)
            << "\n";
        if (seg.cert.terminal_checked)
            out << "  " << (seg.cert.terminal_ok ? "PASS" : "FAIL")
                << " terminal-convergence   gap=" << fmt_e(seg.cert.terminal_gap) << "\n";
        for (const auto& v : seg.cert.violations)
            out << "  violation t=" << fmt_e(v.t) << " " << v.check << " value=" << fmt_e(v.value)
                << "\n";
    }
    out << (rep.cert_pass ? "PASS" : "FAIL") << " overall\n";
    return out.str();
}

inline std::string summary_text(const ValidatedNetwork& net, const ControllerConfig& cfg,
                                const SimSettings& sim, const RunReport& rep) {
    std::ostringstream out;
    out << "mode: " << to_string(cfg.mode) << "\n";
    out << "t_end_s: " << fmt_e(sim.t_end) << "\n";
    out << "dt_s: " << fmt_e(sim.dt) << "\n";
    out << "final omega [rad/s]:\n";
    for (int i = 0; i < net.n_buses(); ++i)
        if (net.bus(i).kind != BusKind::Dc)
            out << "  " << net.bus(i).id << ": " << fmt_e(rep.final_omega_bus(i)) << "\n";
    out << "final v_bar [pu]:\n";
    for (std::size_t k = 0; k < net.dc_subsystems().size(); ++k)
        out << "  " << net.subsystems()[static_cast<std::size_t>(net.dc_subsystems()[k])].id
            << ": " << fmt_e(rep.final_v_bar(static_cast<Eigen::Index>(k))) << "\n";
    out << "power_sharing_error: " << fmt_e(rep.sharing_error) << "\n";
    out << "peak_vdot_sources: " << fmt_e(rep.peak_vdot_sources) << "\n";
    out << "certificate: " << (rep.cert_pass ? "PASS" : "FAIL") << "\n";
    out << "exit: " << rep.exit_code << "\n";
    return out.str();
}

inline bool wants_output(const Scenario& sc, const std::string& target) {
    if (sc.outputs.empty()) return true;
    return std::find(sc.outputs.begin(), sc.outputs.end(), target) != sc.outputs.end();
}

}  // namespace detail

/// Full pipeline: validate -> per-segment Newton equilibrium -> integrate ->
/// certify -> export. A trajectory with load steps is certified per
/// constant-load segment against that segment's own equilibrium; the
/// terminal-convergence check applies to the final segment.
inline RunReport run_scenario(const Scenario& scenario, const RunOptions& opts = {}) {
    Scenario sc = scenario;
    if (opts.mode) sc.mode = *opts.mode;
    if (opts.t_end) sc.sim.t_end = *opts.t_end;
    if (opts.dt) sc.sim.dt = *opts.dt;
    if (opts.comm_delay) sc.comm_delay = *opts.comm_delay;

    BuiltScenario b = build_scenario(sc);
    StateLayout layout = StateLayout::make(b.net, b.cfg.mode);

    RunReport rep;
    rep.layout = layout;
    rep.traj = integrate(b.net, b.cfg, layout.zero(), b.disturbances, b.sim.t_end, b.sim.dt,
                         b.sim.record_every);

    // Constant-load segments: [0, s1), [s1, s2), ..., [sk, N).
    std::vector<std::size_t> bounds{0};
    for (std::size_t s : rep.traj.step_samples)
        if (s != bounds.back()) bounds.push_back(s);
    bounds.push_back(rep.traj.samples.size());

    rep.cert_pass = true;
    for (std::size_t k = 0; k + 1 < bounds.size(); ++k) {
        std::size_t begin = bounds[k], end = bounds[k + 1];
        if (begin >= end) continue;
        SegmentReport seg;
        seg.begin = begin;
        seg.end = end;
        seg.t_begin = rep.traj.samples[begin].t;
        seg.t_end = rep.traj.samples[end - 1].t;
        Eigen::VectorXd p_load = loads_at(b.net, b.disturbances, seg.t_begin);
        SystemState warm = rep.traj.state_at(end - 1);
        seg.eq = find_equilibrium(b.net, b.cfg, p_load, &warm);
        bool final_segment = (k + 2 == bounds.size());
        seg.cert = certify_trajectory(rep.traj, seg.eq, b.net, b.cfg, begin, end, final_segment);
        rep.cert_pass = rep.cert_pass && seg.cert.pass();
        rep.segments.push_back(std::move(seg));
    }

    const auto& last = rep.traj.samples.back();
    rep.final_omega_bus = last.omega_bus;
    rep.final_v_bar = last.derived.v_bar;
    rep.final_p_gen = last.derived.p_gen;

    // Sharing error of the achieved steady state against the optimal dispatch.
    Eigen::VectorXd p_load_final = loads_at(b.net, b.disturbances, last.t);
    SystemState final_state = rep.traj.state_at(rep.traj.samples.size() - 1);
    DispatchSolution dispatch =
        optimal_dispatch(p_load_final, p_u_vector(b.net, final_state), b.cfg.inv_cost);
    rep.sharing_error = power_sharing_error(rep.final_p_gen, dispatch);

    for (const auto& s : rep.traj.samples)
        for (std::size_t d = 0; d < b.net.dc_buses().size(); ++d)
            if (b.net.bus(b.net.dc_buses()[d]).inv_cost > 0.0)
                rep.peak_vdot_sources = std::max(
                    rep.peak_vdot_sources, std::abs(s.v_dot(static_cast<Eigen::Index>(d))));

    rep.exit_code = rep.cert_pass ? 0 : 1;

    if (opts.write_outputs) {
        std::filesystem::create_directories(opts.out_dir);
        if (detail::wants_output(sc, "trajectory_csv"))
            detail::write_trajectory_csv(opts.out_dir + "/trajectory.csv", b.net, b.cfg,
                                         rep.traj);
        if (detail::wants_output(sc, "certificate_csv"))
            detail::write_certificate_csv(opts.out_dir + "/certificate.csv", rep);
        if (detail::wants_output(sc, "certificate_txt")) {
            std::ofstream out(opts.out_dir + "/certificate.txt");
            out << detail::certificate_text(rep);
        }
        if (detail::wants_output(sc, "summary_txt")) {
            std::ofstream out(opts.out_dir + "/summary.txt");
            out << detail::summary_text(b.net, b.cfg, b.sim, rep);
        }
    }
    return rep;
}

struct SweepRow {
    double value = 0.0;
    bool ok = false;
    double omega_max = 0.0;
    double vbar_max = 0.0;
    double sharing_error = 0.0;
    double peak_vdot_src = 0.0;
    bool cert_pass = false;
    std::string status = "ok";
};

struct SweepReport {
    std::string parameter;
    std::vector<SweepRow> rows;
};

/// Applies one sweep parameter value to a scenario copy.
inline Scenario apply_sweep_value(const Scenario& sc, const std::string& param, double value) {
    Scenario out = sc;
    if (param == "dc_resistance_scale") {
        out.network = scale_dc_resistance(sc.network, value);
        // Stiffness grows as resistances shrink; shrink the step with them.
        if (value < 1.0) {
            out.sim.dt = sc.sim.dt * value;
            out.sim.record_every =
                sc.sim.record_every * std::max(1, static_cast<int>(std::lround(1.0 / value)));
        }
    } else if (param == "comm_delay") {
        out.comm_delay = value;
    } else if (param == "m") {
        out.freq_volt_ratio = value;
    } else if (param == "virtual_capacitance") {
        out.virtual_cap.clear();
        for (const auto& bus : sc.network.buses)
            if (bus.kind == BusKind::Dc && bus.inv_cost > 0.0) out.virtual_cap[bus.id] = value;
    } else {
        throw SchemaError("sweep.param",
                          "expected dc_resistance_scale|comm_delay|m|virtual_capacitance");
    }
    return out;
}

/// Runs the scenario once per parameter value; per-point failures are
/// recorded and the sweep continues. Points execute concurrently up to
/// `jobs`, each writing into its own subdirectory.
inline SweepReport sweep_scenario(const Scenario& scenario, const std::string& param,
                                  const std::vector<double>& values, const RunOptions& opts = {},
                                  int jobs = 1) {
    SweepReport report;
    report.parameter = param;
    report.rows.resize(values.size());

    auto run_point = [&](std::size_t i) {
        SweepRow row;
        row.value = values[i];
        try {
            Scenario sc = apply_sweep_value(scenario, param, values[i]);
            RunOptions point_opts = opts;
            point_opts.out_dir = opts.out_dir + "/point_" + std::to_string(i);
            point_opts.write_outputs = opts.write_outputs;
            RunReport r = run_scenario(sc, point_opts);
            row.ok = true;
            row.cert_pass = r.cert_pass;
            row.sharing_error = r.sharing_error;
            row.peak_vdot_src = r.peak_vdot_sources;
            double om = 0.0;
            for (Eigen::Index k = 0; k < r.final_omega_bus.size(); ++k)
                om = std::max(om, std::abs(r.final_omega_bus(k)));
            row.omega_max = om;
            row.vbar_max =
                r.final_v_bar.size() > 0 ? r.final_v_bar.cwiseAbs().maxCoeff() : 0.0;
        } catch (const std::exception& e) {
            row.status = e.what();
        }
        report.rows[i] = std::move(row);
    };

    if (jobs <= 1) {
        for (std::size_t i = 0; i < values.size(); ++i) run_point(i);
    } else {
        std::vector<std::future<void>> inflight;
        for (std::size_t i = 0; i < values.size(); ++i) {
            if (inflight.size() >= static_cast<std::size_t>(jobs)) {
                inflight.front().get();
                inflight.erase(inflight.begin());
            }
            inflight.push_back(std::async(std::launch::async, run_point, i));
        }
        for (auto& f : inflight) f.get();
    }
    return report;
}

inline void write_sweep_csv(const std::string& path, const SweepReport& rep) {
    std::ofstream out(path);
    out << "value,omega_max,vbar_max,sharing_error,peak_vdot_src,cert_pass,status\n";
    for (const auto& r : rep.rows) {
        out << fmt_e(r.value) << "," << fmt_e(r.omega_max) << "," << fmt_e(r.vbar_max) << ","
            << fmt_e(r.sharing_error) << "," << fmt_e(r.peak_vdot_src) << ","
            << (r.cert_pass ? 1 : 0) << "," << (r.ok ? "ok" : r.status) << "\n";
    }
}

/// Equilibrium-based resistance sweep export in the steady-state report
/// format.
inline void write_resistance_sweep_csv(const std::string& path, const SweepResult& sweep) {
    std::ofstream out(path);
    out << "scale,error,omega_max,vbar_max,security_ok\n";
    for (const auto& p : sweep.points) {
        out << fmt_e(p.scale) << "," << fmt_e(p.error) << "," << fmt_e(p.omega_max) << ","
            << fmt_e(p.vbar_max) << "," << (p.security_ok ? 1 : 0) << "\n";
    }
}

}  // namespace hybridgrid
