// End-to-end acceptance suite. Each criterion prints one PASS/FAIL line;
// the process exits nonzero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "hybridgrid/hybridgrid.hpp"

using namespace hybridgrid;

namespace {

int failures = 0;
bool conservation_all_runs = true;
int max_newton_iterations = 0;
std::vector<std::pair<int, std::string>> lines;

void report(int criterion, bool pass, const std::string& detail) {
    lines.emplace_back(criterion, std::string(pass ? "PASS" : "FAIL") + "  criterion " +
                                      std::to_string(criterion) + ": " + detail);
    if (!pass) ++failures;
}

void flush_reports() {
    std::sort(lines.begin(), lines.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    for (const auto& [n, line] : lines) std::printf("%s\n", line.c_str());
}

void track(const RunReport& rep) {
    for (const auto& seg : rep.segments) {
        conservation_all_runs = conservation_all_runs && seg.cert.conservation_ok &&
                                seg.cert.worst_flow_residual < 1e-12 &&
                                seg.cert.worst_ilc_residual == 0.0;
        max_newton_iterations = std::max(max_newton_iterations, seg.eq.iterations);
    }
}

struct TimedRun {
    RunReport rep;
    double seconds = 0.0;
};

TimedRun timed_run(const Scenario& sc, RunOptions opts) {
    opts.write_outputs = false;
    auto t0 = std::chrono::steady_clock::now();
    TimedRun out;
    out.rep = run_scenario(sc, opts);
    out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    track(out.rep);
    return out;
}

bool lyapunov_clean(const RunReport& rep) {
    for (const auto& seg : rep.segments)
        if (!seg.cert.lyapunov_checked || !seg.cert.lyapunov_ok) return false;
    return true;
}

double max_abs_omega(const RunReport& rep) {
    double m = 0.0;
    for (Eigen::Index i = 0; i < rep.final_omega_bus.size(); ++i)
        m = std::max(m, std::abs(rep.final_omega_bus(i)));
    return m;
}

}  // namespace

int main() {
    const std::string dir = HG_SCENARIO_DIR;
    Scenario t1 = parse_scenario(dir + "/t1.json");
    Scenario t1_asym = parse_scenario(dir + "/t1_asym.json");
    Scenario preset = preset_case_study();

    // ---- 1. Primary-controller energy certificate on T1 and the preset. ----
    RunOptions primary_opts;
    primary_opts.mode = "primary";
    TimedRun t1_primary = timed_run(t1, primary_opts);
    TimedRun preset_primary = timed_run(preset, primary_opts);
    {
        bool pass = true;
        std::string detail = "energy non-increasing and terminal match:";
        for (const TimedRun* r : {&t1_primary, &preset_primary}) {
            bool lyap = lyapunov_clean(r->rep);
            double gap = r->rep.segments.back().cert.terminal_gap;
            bool ok = lyap && gap < 1e-6 && r->seconds < 30.0;
            pass = pass && ok;
            char buf[128];
            std::snprintf(buf, sizeof buf, " [W %s, gap %.2e, %.2fs]",
                          lyap ? "monotone" : "INCREASED", gap, r->seconds);
            detail += buf;
        }
        report(1, pass, detail);
    }

    // ---- 2. Sharing error vanishes with the DC line resistance. ----
    const std::vector<double> scales{1.0, 0.1, 0.01, 0.001};
    BuiltScenario asym = build_scenario(t1_asym);
    SweepResult primary_sweep =
        resistance_sweep(asym.net, asym.cfg, asym.net.nominal_load(), scales);
    {
        bool solved = true;
        for (const auto& p : primary_sweep.points) {
            solved = solved && p.solved;
            max_newton_iterations = std::max(max_newton_iterations, p.iterations);
        }
        double last = primary_sweep.points.back().error;
        bool pass = solved && primary_sweep.strictly_decreasing && last < 0.01;
        char buf[160];
        std::snprintf(buf, sizeof buf,
                      "resistance sweep errors %.2e %.2e %.2e %.2e (%s, final < 1%%)",
                      primary_sweep.points[0].error, primary_sweep.points[1].error,
                      primary_sweep.points[2].error, primary_sweep.points[3].error,
                      primary_sweep.strictly_decreasing ? "strictly decreasing"
                                                        : "NOT DECREASING");
        report(2, pass, buf);
    }

    // ---- 3. Dual-droop baseline shares worse at the same droop gains. ----
    {
        Scenario dual = t1_asym;
        dual.mode = "dual-droop";
        BuiltScenario b = build_scenario(dual);
        SweepResult dual_sweep =
            resistance_sweep(b.net, b.cfg, b.net.nominal_load(), scales);
        for (const auto& p : dual_sweep.points)
            if (p.solved) max_newton_iterations = std::max(max_newton_iterations, p.iterations);
        double e_dual = dual_sweep.points.back().error;
        double e_primary = primary_sweep.points.back().error;
        bool pass = dual_sweep.points.back().solved && e_dual >= 2.0 * e_primary;
        char buf[128];
        std::snprintf(buf, sizeof buf, "dual-droop error %.3e vs primary %.3e (factor %.1f)",
                      e_dual, e_primary, e_dual / std::max(e_primary, 1e-300));
        report(3, pass, buf);
    }

    // ---- 4. Secondary control restores frequency/average voltage optimally. ----
    {
        RunOptions sec_opts;
        sec_opts.mode = "secondary";
        TimedRun t1_sec = timed_run(t1, sec_opts);
        RunOptions sec_preset_opts = sec_opts;
        sec_preset_opts.t_end = 40.0;
        TimedRun preset_sec = timed_run(preset, sec_preset_opts);

        bool pass = true;
        std::string detail;
        for (const TimedRun* r : {&t1_sec, &preset_sec}) {
            double omega = max_abs_omega(r->rep);
            double vbar = r->rep.final_v_bar.cwiseAbs().maxCoeff();
            pass = pass && omega < 1e-8 && vbar < 1e-8 && r->rep.sharing_error < 1e-6 &&
                   lyapunov_clean(r->rep);
            char buf[128];
            std::snprintf(buf, sizeof buf, " [|w| %.1e, |vbar| %.1e, share %.1e, W %s]",
                          omega, vbar, r->rep.sharing_error,
                          lyapunov_clean(r->rep) ? "ok" : "INCREASED");
            detail += buf;
        }
        // All nine sources of the preset settle at equal per-source output.
        {
            BuiltScenario b = build_scenario(preset);
            const auto& p = preset_sec.rep.final_p_gen;
            std::vector<double> per_source{p(b.net.bus_index("5"))};
            for (const char* id : {"1", "3", "7", "9"})
                per_source.push_back(p(b.net.bus_index(id)) / 2.0);  // two sources per DC bus
            double lo = per_source[0], hi = per_source[0];
            for (double v : per_source) {
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
            double spread = (hi - lo) / std::max(std::abs(hi), 1e-12);
            pass = pass && spread < 1e-4;
            char buf[64];
            std::snprintf(buf, sizeof buf, " [source spread %.1e]", spread);
            detail += buf;
        }
        report(4, pass, "secondary regulation" + detail);
    }

    // ---- 6. Converter frequencies and DC voltages synchronize (preset). ----
    {
        const auto& last = preset_primary.rep.traj.samples.back();
        double dw = std::abs(last.derived.omega_conv(0) - last.derived.omega_conv(1));
        BuiltScenario b = build_scenario(preset);
        double dv = 0.0;
        for (int k : b.net.dc_subsystems()) {
            const auto& buses = b.net.subsystems()[static_cast<std::size_t>(k)].buses;
            for (std::size_t i = 0; i < buses.size(); ++i)
                for (std::size_t j = i + 1; j < buses.size(); ++j) {
                    double vi = last.x(preset_primary.rep.layout.dc_offset() +
                                       b.net.dc_slot(buses[i]));
                    double vj = last.x(preset_primary.rep.layout.dc_offset() +
                                       b.net.dc_slot(buses[j]));
                    dv = std::max(dv, std::abs(vi - vj));
                }
        }
        bool pass = dw < 1e-6 && dv < 1e-3;
        char buf[128];
        std::snprintf(buf, sizeof buf,
                      "converter frequency gap %.2e rad/s, intra-subsystem dV %.2e pu", dw, dv);
        report(6, pass, buf);
    }

    // ---- 7. Virtual capacitance: same steady state, softer transient. ----
    {
        RunOptions opts;
        opts.mode = "secondary";
        opts.t_end = 60.0;
        Scenario with_cap = t1;
        for (const auto& bus : t1.network.buses)
            if (bus.kind == BusKind::Dc && bus.inv_cost > 0.0)
                with_cap.virtual_cap[bus.id] = 0.5;
        TimedRun base = timed_run(t1, opts);
        TimedRun capped = timed_run(with_cap, opts);
        double dp = (base.rep.final_p_gen - capped.rep.final_p_gen).cwiseAbs().maxCoeff();
        bool pass = dp < 1e-8 &&
                    capped.rep.peak_vdot_sources < base.rep.peak_vdot_sources;
        char buf[128];
        std::snprintf(buf, sizeof buf,
                      "steady-state dP %.2e, peak |dV/dt| %.3f -> %.3f at source buses", dp,
                      base.rep.peak_vdot_sources, capped.rep.peak_vdot_sources);
        report(7, pass, buf);
    }

    // ---- 5. Conservation held at every sample of every run above. ----
    report(5, conservation_all_runs,
           conservation_all_runs
               ? "per-subsystem flow sums < 1e-12 and exact converter losslessness"
               : "a conservation residual exceeded its tolerance");

    // ---- 8. Numerical hygiene: step halving and Newton iteration caps. ----
    {
        RunOptions half = primary_opts;
        half.dt = 5e-4;
        TimedRun t1_half = timed_run(t1, half);
        TimedRun preset_half = timed_run(preset, half);
        double worst = 0.0;
        for (const TimedRun* pair : {&t1_primary, &preset_primary}) {
            const TimedRun& fine = (pair == &t1_primary) ? t1_half : preset_half;
            worst = std::max(worst, (pair->rep.final_omega_bus - fine.rep.final_omega_bus)
                                        .cwiseAbs()
                                        .maxCoeff());
            worst = std::max(worst,
                             (pair->rep.final_v_bar - fine.rep.final_v_bar).cwiseAbs().maxCoeff());
            worst = std::max(worst,
                             std::abs(pair->rep.sharing_error - fine.rep.sharing_error));
        }
        bool pass = worst < 1e-6 && max_newton_iterations <= 25;
        char buf[128];
        std::snprintf(buf, sizeof buf,
                      "dt halving moves metrics by %.2e; max Newton iterations %d", worst,
                      max_newton_iterations);
        report(8, pass, buf);
    }

    flush_reports();
    std::printf("%d/8 criteria passed\n", 8 - failures);
    return failures == 0 ? 0 : 1;
}
