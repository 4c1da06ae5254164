#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <string>
#include <vector>

#include "hybridgrid/errors.hpp"
#include "hybridgrid/network.hpp"

namespace hybridgrid {

enum class ControlMode { Primary, DualDroop, Secondary };

inline std::string to_string(ControlMode m) {
    switch (m) {
        case ControlMode::Primary: return "primary";
        case ControlMode::DualDroop: return "dual-droop";
        case ControlMode::Secondary: return "secondary";
    }
    return "?";
}

/// Dynamic state. `consensus` is populated in secondary mode only and
/// `omega_conv` in dual-droop mode only; both are empty otherwise.
struct SystemState {
    double t = 0.0;
    Eigen::VectorXd angle_diff;  ///< per AC edge [rad]
    Eigen::VectorXd omega_gen;   ///< per AC generator bus [rad/s]
    Eigen::VectorXd v_dc;        ///< per DC bus [pu]
    Eigen::VectorXd consensus;   ///< per communication node (secondary)
    Eigen::VectorXd omega_conv;  ///< per converter [rad/s] (dual-droop)
};

/// Flat packing order: [angle_diff; omega_gen; v_dc; consensus?; omega_conv?].
struct StateLayout {
    int n_eta = 0, n_gen = 0, n_dc = 0, n_xi = 0, n_conv = 0;
    ControlMode mode = ControlMode::Primary;

    static StateLayout make(const ValidatedNetwork& net, ControlMode mode) {
        StateLayout l;
        l.mode = mode;
        l.n_eta = static_cast<int>(net.ac_edges().size());
        l.n_gen = static_cast<int>(net.gen_buses().size());
        l.n_dc = static_cast<int>(net.dc_buses().size());
        l.n_xi = (mode == ControlMode::Secondary) ? static_cast<int>(net.comm_nodes().size()) : 0;
        l.n_conv = (mode == ControlMode::DualDroop) ? static_cast<int>(net.converters().size()) : 0;
        return l;
    }

    int size() const { return n_eta + n_gen + n_dc + n_xi + n_conv; }

    int eta_offset() const { return 0; }
    int gen_offset() const { return n_eta; }
    int dc_offset() const { return n_eta + n_gen; }
    int xi_offset() const { return n_eta + n_gen + n_dc; }
    int conv_offset() const { return n_eta + n_gen + n_dc + n_xi; }

    Eigen::VectorXd pack(const SystemState& s) const {
        if (s.angle_diff.size() != n_eta || s.omega_gen.size() != n_gen ||
            s.v_dc.size() != n_dc || s.consensus.size() != n_xi || s.omega_conv.size() != n_conv)
            throw DimensionMismatch("state vectors do not match the network index maps");
        Eigen::VectorXd x(size());
        x.segment(eta_offset(), n_eta) = s.angle_diff;
        x.segment(gen_offset(), n_gen) = s.omega_gen;
        x.segment(dc_offset(), n_dc) = s.v_dc;
        x.segment(xi_offset(), n_xi) = s.consensus;
        x.segment(conv_offset(), n_conv) = s.omega_conv;
        return x;
    }

    SystemState unpack(const Eigen::VectorXd& x, double t) const {
        if (x.size() != size()) throw DimensionMismatch("packed state has wrong length");
        SystemState s;
        s.t = t;
        s.angle_diff = x.segment(eta_offset(), n_eta);
        s.omega_gen = x.segment(gen_offset(), n_gen);
        s.v_dc = x.segment(dc_offset(), n_dc);
        s.consensus = x.segment(xi_offset(), n_xi);
        s.omega_conv = x.segment(conv_offset(), n_conv);
        return s;
    }

    /// Zero state at t = 0.
    SystemState zero() const {
        SystemState s;
        s.angle_diff = Eigen::VectorXd::Zero(n_eta);
        s.omega_gen = Eigen::VectorXd::Zero(n_gen);
        s.v_dc = Eigen::VectorXd::Zero(n_dc);
        s.consensus = Eigen::VectorXd::Zero(n_xi);
        s.omega_conv = Eigen::VectorXd::Zero(n_conv);
        return s;
    }
};

/// Algebraic quantities evaluated alongside the state.
struct DerivedOutputs {
    Eigen::VectorXd p_gen;       ///< generation per bus [pu]
    Eigen::VectorXd p_conv;      ///< transfer per converter, AC-side positive [pu]
    Eigen::VectorXd p_flow;      ///< net branch inflow per bus [pu]
    Eigen::VectorXd omega_conv;  ///< converter-bus frequency per converter [rad/s]
    Eigen::VectorXd v_bar;       ///< weighted average voltage per DC subsystem [pu]
    Eigen::VectorXd omega_virtual;  ///< per bus [rad/s], secondary mode only
};

struct Disturbance {
    double time = 0.0;
    std::string bus;
    double delta_load = 0.0;  ///< step change in p^L [pu]
};

struct DisturbanceSchedule {
    std::vector<Disturbance> steps;

    void validate(const ValidatedNetwork& net) const {
        double prev = -std::numeric_limits<double>::infinity();
        for (const auto& d : steps) {
            if (d.time < prev)
                throw DimensionMismatch("disturbance times must be nondecreasing");
            prev = d.time;
            (void)net.bus_index(d.bus);
        }
    }
};

/// Dimension and finiteness check against the network's index maps.
inline void validate_state(const SystemState& s, const ValidatedNetwork& net, ControlMode mode) {
    StateLayout l = StateLayout::make(net, mode);
    Eigen::VectorXd x = l.pack(s);  // throws DimensionMismatch on bad sizes
    if (!x.allFinite()) throw NonFiniteState(s.t);
}

}  // namespace hybridgrid
