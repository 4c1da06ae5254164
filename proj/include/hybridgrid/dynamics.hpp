#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <vector>

#include "hybridgrid/controllers.hpp"
#include "hybridgrid/delay.hpp"
#include "hybridgrid/errors.hpp"
#include "hybridgrid/network.hpp"
#include "hybridgrid/state.hpp"

namespace hybridgrid {

struct BranchFlows {
    Eigen::VectorXd ac;      ///< per AC edge, in edge orientation [pu]
    Eigen::VectorXd dc;      ///< per DC edge, in edge orientation [pu]
    Eigen::VectorXd inflow;  ///< net inflow per bus [pu]
};

/// Line flows: B sin(eta) on AC edges, G (V_i - V_j) on DC edges, plus the
/// per-bus aggregate with inflow positive.
inline BranchFlows branch_flows(const ValidatedNetwork& net, const Eigen::VectorXd& angle_diff,
                                const Eigen::VectorXd& v_dc) {
    if (angle_diff.size() != static_cast<Eigen::Index>(net.ac_edges().size()) ||
        v_dc.size() != static_cast<Eigen::Index>(net.dc_buses().size()))
        throw DimensionMismatch("branch_flows input sizes");
    BranchFlows f;
    f.ac.resize(angle_diff.size());
    f.dc.resize(static_cast<Eigen::Index>(net.dc_edges().size()));
    f.inflow = Eigen::VectorXd::Zero(net.n_buses());
    for (std::size_t e = 0; e < net.ac_edges().size(); ++e) {
        const auto& edge = net.ac_edges()[e];
        double p = edge.weight * std::sin(angle_diff(static_cast<Eigen::Index>(e)));
        f.ac(static_cast<Eigen::Index>(e)) = p;
        f.inflow(edge.from) -= p;
        f.inflow(edge.to) += p;
    }
    for (std::size_t e = 0; e < net.dc_edges().size(); ++e) {
        const auto& edge = net.dc_edges()[e];
        double p = edge.weight *
                   (v_dc(net.dc_slot(edge.from)) - v_dc(net.dc_slot(edge.to)));
        f.dc(static_cast<Eigen::Index>(e)) = p;
        f.inflow(edge.from) -= p;
        f.inflow(edge.to) += p;
    }
    return f;
}

/// Converter transfers read off the AC-side bus balance (generation there is
/// zero): the AC->DC transfer equals net inflow minus load. The DC-side
/// injection is exactly the negative.
inline Eigen::VectorXd converter_transfers(const ValidatedNetwork& net,
                                           const Eigen::VectorXd& inflow,
                                           const Eigen::VectorXd& p_load) {
    if (inflow.size() != net.n_buses() || p_load.size() != net.n_buses())
        throw DimensionMismatch("converter_transfers input sizes");
    Eigen::VectorXd px(static_cast<Eigen::Index>(net.converters().size()));
    for (std::size_t x = 0; x < net.converters().size(); ++x) {
        int i = net.converters()[x].ac_bus;
        px(static_cast<Eigen::Index>(x)) = inflow(i) - p_load(i);
    }
    return px;
}

/// Communicated quantities as seen by the controllers. Empty v_bar/xi mean
/// "no transport delay": the instantaneous values are computed from the
/// evaluation state, which keeps the undelayed system a plain ODE.
struct ControllerSignals {
    Eigen::VectorXd v_bar;  ///< per DC subsystem (delayed), or empty
    Eigen::VectorXd xi;     ///< per communication node (delayed), or empty
};

struct RhsResult {
    Eigen::VectorXd dx;         ///< packed state derivative
    Eigen::VectorXd omega_bus;  ///< frequency per bus (AC entries meaningful)
    DerivedOutputs derived;
};

/// Closed-loop right-hand side for the selected controller family.
inline RhsResult eval_rhs(const ValidatedNetwork& net, const ControllerConfig& cfg,
                          const StateLayout& layout, const Eigen::VectorXd& x,
                          const Eigen::VectorXd& p_load, const ControllerSignals& sig) {
    const double m = cfg.freq_volt_ratio;
    const auto eta = x.segment(layout.eta_offset(), layout.n_eta);
    const auto omega_gen = x.segment(layout.gen_offset(), layout.n_gen);
    const auto v = x.segment(layout.dc_offset(), layout.n_dc);
    const auto xi = x.segment(layout.xi_offset(), layout.n_xi);
    const auto omega_conv = x.segment(layout.conv_offset(), layout.n_conv);

    RhsResult r;
    r.derived.v_bar = weighted_average_voltages(net, v);
    const Eigen::VectorXd& v_bar_comm = (sig.v_bar.size() > 0) ? sig.v_bar : r.derived.v_bar;
    const auto xi_comm = [&](Eigen::Index a) {
        return (sig.xi.size() > 0) ? sig.xi(a) : xi(a);
    };

    // Bus frequencies: generator buses carry state, converter buses are
    // pinned by the converter law (or carry the regularized dual-droop state).
    r.omega_bus = Eigen::VectorXd::Zero(net.n_buses());
    for (std::size_t s = 0; s < net.gen_buses().size(); ++s)
        r.omega_bus(net.gen_buses()[s]) = omega_gen(static_cast<Eigen::Index>(s));
    r.derived.omega_conv.resize(static_cast<Eigen::Index>(net.converters().size()));
    for (std::size_t c = 0; c < net.converters().size(); ++c) {
        const auto& ilc = net.converters()[c];
        double w = 0.0;
        switch (cfg.mode) {
            case ControlMode::Primary:
                w = ilc_primary_frequency(v(net.dc_slot(ilc.dc_bus)), m);
                break;
            case ControlMode::Secondary:
                w = m * v_bar_comm(net.dc_subsystem_slot(net.subsystem_of(ilc.dc_bus)));
                break;
            case ControlMode::DualDroop:
                w = omega_conv(static_cast<Eigen::Index>(c));
                break;
        }
        r.omega_bus(ilc.ac_bus) = w;
        r.derived.omega_conv(static_cast<Eigen::Index>(c)) = w;
    }

    BranchFlows flows = branch_flows(net, eta, v);
    r.derived.p_flow = flows.inflow;

    // Generation. In secondary mode the virtual-capacitance derivative term
    // is filled in after the voltage derivative is known.
    if (cfg.mode == ControlMode::Secondary) {
        r.derived.p_gen =
            secondary_generation(net, cfg, xi, Eigen::VectorXd::Zero(layout.n_dc));
        r.derived.omega_virtual = virtual_frequency(net, r.omega_bus, r.derived.v_bar, m);
    } else {
        r.derived.p_gen = droop_generation(net, cfg, r.omega_bus, v);
        r.derived.omega_virtual.resize(0);
    }

    // Converter transfers (AC side positive).
    if (cfg.mode == ControlMode::DualDroop) {
        r.derived.p_conv.resize(static_cast<Eigen::Index>(net.converters().size()));
        for (std::size_t c = 0; c < net.converters().size(); ++c) {
            const auto& ilc = net.converters()[c];
            r.derived.p_conv(static_cast<Eigen::Index>(c)) =
                dual_droop_power(omega_conv(static_cast<Eigen::Index>(c)),
                                 v(net.dc_slot(ilc.dc_bus)),
                                 cfg.k_freq(static_cast<Eigen::Index>(c)),
                                 cfg.k_volt(static_cast<Eigen::Index>(c)));
        }
    } else {
        r.derived.p_conv = converter_transfers(net, flows.inflow, p_load);
    }

    r.dx.resize(layout.size());

    // Angle dynamics along every AC edge.
    for (std::size_t e = 0; e < net.ac_edges().size(); ++e) {
        const auto& edge = net.ac_edges()[e];
        r.dx(layout.eta_offset() + static_cast<int>(e)) =
            r.omega_bus(edge.from) - r.omega_bus(edge.to);
    }

    // Swing dynamics at generator buses.
    for (std::size_t s = 0; s < net.gen_buses().size(); ++s) {
        int bus = net.gen_buses()[s];
        double imbalance = r.derived.p_gen(bus) - p_load(bus) + flows.inflow(bus) -
                           net.damping()(static_cast<Eigen::Index>(s)) *
                               omega_gen(static_cast<Eigen::Index>(s));
        r.dx(layout.gen_offset() + static_cast<int>(s)) =
            imbalance / net.inertia()(static_cast<Eigen::Index>(s));
    }

    // Capacitor dynamics at DC buses; converter DC buses receive the AC-side
    // transfer with opposite sign (lossless). A virtual capacitance at a
    // source bus enters the balance through its derivative term; the loop is
    // diagonal, so it is solved exactly: (C + C^V) dV/dt = balance.
    for (std::size_t s = 0; s < net.dc_buses().size(); ++s) {
        int bus = net.dc_buses()[s];
        double imbalance = r.derived.p_gen(bus) - p_load(bus) + flows.inflow(bus);
        int c = net.converter_at_dc(bus);
        if (c >= 0) imbalance += r.derived.p_conv(c);
        double c_total = net.capacitance()(static_cast<Eigen::Index>(s));
        if (cfg.mode == ControlMode::Secondary)
            c_total += cfg.virtual_cap(static_cast<Eigen::Index>(s));
        double v_dot = imbalance / c_total;
        r.dx(layout.dc_offset() + static_cast<int>(s)) = v_dot;
        if (cfg.mode == ControlMode::Secondary &&
            cfg.virtual_cap(static_cast<Eigen::Index>(s)) != 0.0)
            r.derived.p_gen(bus) -= cfg.virtual_cap(static_cast<Eigen::Index>(s)) * v_dot;
    }

    // Consensus dynamics (secondary): neighbor values may be delayed, the
    // node's own value and local measurement are not.
    if (cfg.mode == ControlMode::Secondary) {
        for (std::size_t a = 0; a < net.comm_nodes().size(); ++a) {
            int bus = net.comm_nodes()[a];
            double own = xi(static_cast<Eigen::Index>(a));
            double lap = net.comm_laplacian()(static_cast<Eigen::Index>(a),
                                              static_cast<Eigen::Index>(a)) *
                         own;
            for (int b : net.comm_adjacency()[a]) lap -= xi_comm(b);
            double omega_hat =
                (net.bus(bus).kind == BusKind::Dc)
                    ? m * v_bar_comm(net.dc_subsystem_slot(net.subsystem_of(bus)))
                    : r.omega_bus(bus);
            r.dx(layout.xi_offset() + static_cast<int>(a)) =
                (-lap - cfg.inv_cost(bus) * omega_hat) /
                cfg.consensus_tc(static_cast<Eigen::Index>(a));
        }
    }

    // Regularized converter-angle dynamics (dual-droop): the virtual inertia
    // absorbs the mismatch between the bus balance and the commanded transfer.
    if (cfg.mode == ControlMode::DualDroop) {
        for (std::size_t c = 0; c < net.converters().size(); ++c) {
            int bus = net.converters()[c].ac_bus;
            double imbalance = flows.inflow(bus) - p_load(bus) -
                               r.derived.p_conv(static_cast<Eigen::Index>(c));
            r.dx(layout.conv_offset() + static_cast<int>(c)) = imbalance / cfg.virtual_inertia;
        }
    }

    return r;
}

/// Loads in effect at time t: nominal plus every step whose time is <= t.
inline Eigen::VectorXd loads_at(const ValidatedNetwork& net, const DisturbanceSchedule& sched,
                                double t) {
    Eigen::VectorXd p = net.nominal_load();
    for (const auto& d : sched.steps)
        if (d.time <= t) p(net.bus_index(d.bus)) += d.delta_load;
    return p;
}

/// Spec-facing right-hand side: loads evaluated from the schedule at state.t,
/// communicated signals taken undelayed from the state itself.
inline RhsResult system_rhs(const ValidatedNetwork& net, const ControllerConfig& cfg,
                            const SystemState& state, const DisturbanceSchedule& sched) {
    StateLayout layout = StateLayout::make(net, cfg.mode);
    Eigen::VectorXd x = layout.pack(state);
    ControllerSignals sig;
    return eval_rhs(net, cfg, layout, x, loads_at(net, sched, state.t), sig);
}

/// One recorded sample: state, algebraic outputs, and the state derivative
/// actually used at that grid point.
struct TrajectorySample {
    double t = 0.0;
    Eigen::VectorXd x;
    DerivedOutputs derived;
    Eigen::VectorXd omega_bus;
    Eigen::VectorXd v_dot;  ///< per DC slot
};

struct Trajectory {
    StateLayout layout;
    std::vector<TrajectorySample> samples;
    /// Indices of samples at which a load step was applied (segment starts).
    std::vector<std::size_t> step_samples;

    SystemState state_at(std::size_t i) const {
        return layout.unpack(samples.at(i).x, samples.at(i).t);
    }
};

/// Fixed-step classical Runge-Kutta integration. Load steps are applied at
/// the first grid point at or after their scheduled time; the sample recorded
/// there already sees the new load. Delayed communication signals are
/// refreshed once per step and held across the four stages.
inline Trajectory integrate(const ValidatedNetwork& net, const ControllerConfig& cfg,
                            const SystemState& initial, const DisturbanceSchedule& sched,
                            double t_end, double dt, int record_every = 1) {
    if (!(dt > 0.0)) throw DimensionMismatch("integrate needs dt > 0");
    if (!(t_end > initial.t)) throw DimensionMismatch("integrate needs t_end > initial.t");
    if (record_every < 1) throw DimensionMismatch("record_every must be >= 1");
    sched.validate(net);
    cfg.validate(net);

    StateLayout layout = StateLayout::make(net, cfg.mode);
    Eigen::VectorXd x = layout.pack(initial);
    const double t0 = initial.t;
    const auto n_steps = static_cast<std::size_t>(std::llround((t_end - t0) / dt));

    DelayBuffer vbar_buffer(cfg.comm_delay, dt);
    DelayBuffer xi_buffer(cfg.comm_delay, dt);
    const bool delayed = vbar_buffer.depth() > 0;
    ControllerSignals sig;

    Eigen::VectorXd p_load = net.nominal_load();
    std::size_t next_step = 0;
    // Steps scheduled at or before the start time take effect immediately.
    while (next_step < sched.steps.size() && sched.steps[next_step].time <= t0) {
        p_load(net.bus_index(sched.steps[next_step].bus)) += sched.steps[next_step].delta_load;
        ++next_step;
    }

    Trajectory traj;
    traj.layout = layout;
    traj.samples.reserve(n_steps / static_cast<std::size_t>(record_every) + 2);

    for (std::size_t n = 0; n <= n_steps; ++n) {
        const double t = t0 + static_cast<double>(n) * dt;
        bool stepped = false;
        while (next_step < sched.steps.size() && sched.steps[next_step].time <= t) {
            p_load(net.bus_index(sched.steps[next_step].bus)) +=
                sched.steps[next_step].delta_load;
            ++next_step;
            stepped = true;
        }

        if (delayed) {
            sig.v_bar = vbar_buffer.push(
                weighted_average_voltages(net, x.segment(layout.dc_offset(), layout.n_dc)));
            sig.xi = xi_buffer.push(x.segment(layout.xi_offset(), layout.n_xi));
        }

        RhsResult k1 = eval_rhs(net, cfg, layout, x, p_load, sig);

        if (n % static_cast<std::size_t>(record_every) == 0 || n == n_steps || stepped) {
            TrajectorySample s;
            s.t = t;
            s.x = x;
            s.derived = k1.derived;
            s.omega_bus = k1.omega_bus;
            s.v_dot = k1.dx.segment(layout.dc_offset(), layout.n_dc);
            if (stepped) traj.step_samples.push_back(traj.samples.size());
            traj.samples.push_back(std::move(s));
        }
        if (n == n_steps) break;

        Eigen::VectorXd k2 =
            eval_rhs(net, cfg, layout, x + 0.5 * dt * k1.dx, p_load, sig).dx;
        Eigen::VectorXd k3 = eval_rhs(net, cfg, layout, x + 0.5 * dt * k2, p_load, sig).dx;
        Eigen::VectorXd k4 = eval_rhs(net, cfg, layout, x + dt * k3, p_load, sig).dx;
        x += (dt / 6.0) * (k1.dx + 2.0 * k2 + 2.0 * k3 + k4);

        if (!x.allFinite() || x.cwiseAbs().maxCoeff() > 1e6)
            throw NonFiniteState(t + dt);
    }
    return traj;
}

}  // namespace hybridgrid
