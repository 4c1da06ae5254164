#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <string>
#include <vector>

#include "hybridgrid/controllers.hpp"
#include "hybridgrid/dynamics.hpp"
#include "hybridgrid/errors.hpp"
#include "hybridgrid/network.hpp"
#include "hybridgrid/state.hpp"
#include "hybridgrid/steady_state.hpp"

namespace hybridgrid {

/// Line-energy potential relative to an equilibrium angle profile, evaluated
/// in closed form per edge: B [cos(eta*) - cos(eta) - (eta - eta*) sin(eta*)].
/// Non-negative whenever both angles stay within the security region.
inline double angle_potential(const ValidatedNetwork& net, const Eigen::VectorXd& angle_diff,
                              const Eigen::VectorXd& angle_diff_star) {
    if (angle_diff.size() != static_cast<Eigen::Index>(net.ac_edges().size()) ||
        angle_diff_star.size() != angle_diff.size())
        throw DimensionMismatch("angle_potential input sizes");
    double w = 0.0;
    for (std::size_t e = 0; e < net.ac_edges().size(); ++e) {
        double b = net.ac_edges()[e].weight;
        double eta = angle_diff(static_cast<Eigen::Index>(e));
        double eta_star = angle_diff_star(static_cast<Eigen::Index>(e));
        w += b * (std::cos(eta_star) - std::cos(eta) - (eta - eta_star) * std::sin(eta_star));
    }
    return w;
}

/// Energy function certifying the primary controller: kinetic term over
/// generator inertias, the line potential, and the capacitive term weighted
/// by the frequency/voltage ratio. Zero exactly at the equilibrium.
inline double lyapunov_primary(const ValidatedNetwork& net, const ControllerConfig& cfg,
                               const SystemState& state, const EquilibriumPoint& eq) {
    if (cfg.mode != ControlMode::Primary)
        throw ModeMismatch("lyapunov_primary applies to primary mode");
    Eigen::VectorXd dw = state.omega_gen - eq.state.omega_gen;
    Eigen::VectorXd dv = state.v_dc - eq.state.v_dc;
    double w = 0.5 * dw.dot(net.inertia().cwiseProduct(dw));
    w += angle_potential(net, state.angle_diff, eq.state.angle_diff);
    w += 0.5 * cfg.freq_volt_ratio * dv.dot(net.capacitance().cwiseProduct(dv));
    return w;
}

/// Energy function certifying the secondary controller: kinetic term, line
/// potential, the weighted-average-voltage term, and the consensus term.
inline double lyapunov_secondary(const ValidatedNetwork& net, const ControllerConfig& cfg,
                                 const SystemState& state, const EquilibriumPoint& eq) {
    if (cfg.mode != ControlMode::Secondary)
        throw ModeMismatch("lyapunov_secondary applies to secondary mode");
    double w = 0.5 * state.omega_gen.dot(net.inertia().cwiseProduct(state.omega_gen));
    w += angle_potential(net, state.angle_diff, eq.state.angle_diff);
    Eigen::VectorXd v_bar = weighted_average_voltages(net, state.v_dc);
    w += 0.5 * cfg.freq_volt_ratio * v_bar.squaredNorm();
    Eigen::VectorXd dxi = state.consensus - eq.state.consensus;
    w += 0.5 * dxi.dot(cfg.consensus_tc.cwiseProduct(dxi));
    return w;
}

struct CertificateViolation {
    double t = 0.0;
    std::string check;
    double value = 0.0;
};

/// Machine-checkable certificate evaluated along a trajectory. Checks never
/// abort a run; failures are report entries.
struct CertificateReport {
    std::vector<double> times;
    std::vector<double> w_series;               ///< empty in dual-droop mode
    std::vector<double> security_margin_series;  ///< pi/2 - max |eta| per sample
    std::vector<double> flow_residual_series;    ///< max per-subsystem |sum of inflows|
    std::vector<double> ilc_residual_series;     ///< max |AC-side + DC-side| transfer
    std::vector<CertificateViolation> violations;

    bool lyapunov_checked = false;
    double max_increase = 0.0;  ///< largest positive per-step jump in W (0 if none)
    double worst_security_margin = 0.0;
    double worst_flow_residual = 0.0;
    double worst_ilc_residual = 0.0;
    bool terminal_checked = false;
    double terminal_gap = 0.0;
    bool terminal_ok = true;

    bool lyapunov_ok = true;
    bool conservation_ok = true;
    bool security_ok = true;

    bool pass() const { return lyapunov_ok && conservation_ok && security_ok && terminal_ok; }
};

/// Per-sample security margin: min over edges of pi/2 - |eta|.
inline std::vector<double> check_security(const Trajectory& traj) {
    std::vector<double> margins;
    margins.reserve(traj.samples.size());
    for (const auto& s : traj.samples) {
        Eigen::VectorXd eta = s.x.segment(traj.layout.eta_offset(), traj.layout.n_eta);
        double m = M_PI / 2.0;
        if (eta.size() > 0) m -= eta.cwiseAbs().maxCoeff();
        margins.push_back(m);
    }
    return margins;
}

/// Evaluates the energy certificate, conservation residuals, and security
/// margin over the sample range [begin, end); the terminal-convergence check
/// compares the last sample against the supplied equilibrium.
inline CertificateReport certify_trajectory(const Trajectory& traj, const EquilibriumPoint& eq,
                                            const ValidatedNetwork& net,
                                            const ControllerConfig& cfg, std::size_t begin,
                                            std::size_t end, bool check_terminal = true,
                                            double tol_conv = 1e-6) {
    CertificateReport rep;
    if (end > traj.samples.size() || begin >= end)
        throw DimensionMismatch("certify_trajectory sample range");
    rep.lyapunov_checked = cfg.mode != ControlMode::DualDroop;

    const double flow_tol = 1e-12;
    double prev_w = 0.0;
    bool have_prev = false;
    rep.worst_security_margin = M_PI / 2.0;

    for (std::size_t i = begin; i < end; ++i) {
        const auto& s = traj.samples[i];
        SystemState st = traj.layout.unpack(s.x, s.t);
        rep.times.push_back(s.t);

        if (rep.lyapunov_checked) {
            double w = (cfg.mode == ControlMode::Primary)
                           ? lyapunov_primary(net, cfg, st, eq)
                           : lyapunov_secondary(net, cfg, st, eq);
            rep.w_series.push_back(w);
            if (have_prev) {
                double dw = w - prev_w;
                rep.max_increase = std::max(rep.max_increase, std::max(dw, 0.0));
                if (dw > 1e-9 * (1.0 + prev_w)) {
                    rep.violations.push_back({s.t, "lyapunov-increase", dw});
                    rep.lyapunov_ok = false;
                }
            }
            prev_w = w;
            have_prev = true;
        }

        // Branch flows cancel within each subsystem in a lossless network.
        double worst_flow = 0.0;
        for (const auto& sub : net.subsystems()) {
            double sum = 0.0;
            for (int bus : sub.buses) sum += s.derived.p_flow(bus);
            worst_flow = std::max(worst_flow, std::abs(sum));
        }
        rep.flow_residual_series.push_back(worst_flow);
        rep.worst_flow_residual = std::max(rep.worst_flow_residual, worst_flow);
        if (worst_flow > flow_tol) {
            rep.violations.push_back({s.t, "flow-conservation", worst_flow});
            rep.conservation_ok = false;
        }

        // The DC-side transfer is the exact negation of the AC-side transfer.
        double worst_ilc = 0.0;
        for (Eigen::Index x = 0; x < s.derived.p_conv.size(); ++x) {
            double ac_side = s.derived.p_conv(x);
            double dc_side = -s.derived.p_conv(x);
            worst_ilc = std::max(worst_ilc, std::abs(ac_side + dc_side));
        }
        rep.ilc_residual_series.push_back(worst_ilc);
        rep.worst_ilc_residual = std::max(rep.worst_ilc_residual, worst_ilc);
        if (worst_ilc != 0.0) {
            rep.violations.push_back({s.t, "ilc-losslessness", worst_ilc});
            rep.conservation_ok = false;
        }

        double margin = M_PI / 2.0;
        Eigen::VectorXd eta = s.x.segment(traj.layout.eta_offset(), traj.layout.n_eta);
        if (eta.size() > 0) margin -= eta.cwiseAbs().maxCoeff();
        rep.security_margin_series.push_back(margin);
        rep.worst_security_margin = std::min(rep.worst_security_margin, margin);
        if (margin < 0.0) {
            rep.violations.push_back({s.t, "security", margin});
            rep.security_ok = false;
        }
    }

    if (check_terminal) {
        rep.terminal_checked = true;
        StateLayout sl = traj.layout;
        Eigen::VectorXd x_eq = sl.pack(eq.state);
        rep.terminal_gap = (traj.samples[end - 1].x - x_eq).cwiseAbs().maxCoeff();
        rep.terminal_ok = rep.terminal_gap < tol_conv;
        if (!rep.terminal_ok)
            rep.violations.push_back({traj.samples[end - 1].t, "terminal-convergence",
                                      rep.terminal_gap});
    }
    return rep;
}

inline CertificateReport certify_trajectory(const Trajectory& traj, const EquilibriumPoint& eq,
                                            const ValidatedNetwork& net,
                                            const ControllerConfig& cfg,
                                            bool check_terminal = true, double tol_conv = 1e-6) {
    return certify_trajectory(traj, eq, net, cfg, 0, traj.samples.size(), check_terminal,
                              tol_conv);
}

}  // namespace hybridgrid
