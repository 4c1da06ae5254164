#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <string>

#include "hybridgrid/errors.hpp"
#include "hybridgrid/network.hpp"
#include "hybridgrid/state.hpp"

namespace hybridgrid {

/// Controller family selector plus all gains. Vectors are indexed by the
/// ValidatedNetwork maps: inv_cost and p_gen_nominal per bus, k_freq/k_volt
/// per converter, consensus_tc per communication node, virtual_cap per DC slot.
struct ControllerConfig {
    ControlMode mode = ControlMode::Primary;
    double freq_volt_ratio = 1.0;    ///< m [(rad/s)/pu-V], shared by all converters
    Eigen::VectorXd inv_cost;        ///< droop gains, diagonal of the inverse cost matrix
    Eigen::VectorXd p_gen_nominal;   ///< nominal dispatch [pu]
    Eigen::VectorXd k_freq;          ///< dual-droop frequency gain per converter [pu s]
    Eigen::VectorXd k_volt;          ///< dual-droop voltage gain per converter [pu/pu-V]
    Eigen::VectorXd consensus_tc;    ///< time constants per communication node [s]
    Eigen::VectorXd virtual_cap;     ///< virtual capacitance per DC slot [pu s]
    double virtual_inertia = 1e-2;   ///< regularization inertia for dual-droop [pu s^2]
    double comm_delay = 0.0;         ///< transport delay on communicated signals [s]

    static ControllerConfig defaults_for(const ValidatedNetwork& net, ControlMode mode) {
        ControllerConfig c;
        c.mode = mode;
        c.inv_cost = net.inv_cost();
        c.p_gen_nominal = Eigen::VectorXd::Zero(net.n_buses());
        c.k_freq = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(net.converters().size()));
        c.k_volt = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(net.converters().size()));
        c.consensus_tc =
            Eigen::VectorXd::Constant(static_cast<Eigen::Index>(net.comm_nodes().size()), 0.1);
        c.virtual_cap = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(net.dc_buses().size()));
        return c;
    }

    void validate(const ValidatedNetwork& net) const {
        const auto nb = static_cast<Eigen::Index>(net.n_buses());
        const auto nx = static_cast<Eigen::Index>(net.converters().size());
        const auto nc = static_cast<Eigen::Index>(net.comm_nodes().size());
        const auto nd = static_cast<Eigen::Index>(net.dc_buses().size());
        if (inv_cost.size() != nb || p_gen_nominal.size() != nb || k_freq.size() != nx ||
            k_volt.size() != nx || consensus_tc.size() != nc || virtual_cap.size() != nd)
            throw DimensionMismatch("controller config does not match the network index maps");
        if (!(freq_volt_ratio > 0.0))
            throw DimensionMismatch("frequency/voltage ratio must be > 0");
        if (!(virtual_inertia > 0.0))
            throw DimensionMismatch("dual-droop regularization inertia must be > 0");
        if (comm_delay < 0.0) throw NegativeDelay();
        if ((consensus_tc.array() <= 0.0).any())
            throw DimensionMismatch("consensus time constants must be > 0");
        if ((virtual_cap.array() < 0.0).any())
            throw DimensionMismatch("virtual capacitance must be >= 0");
        for (int i = 0; i < net.n_buses(); ++i) {
            double q = inv_cost(i);
            if (q < 0.0) throw DimensionMismatch("droop gains must be >= 0");
            if (net.bus(i).kind == BusKind::AcConverter && q != 0.0)
                throw ValidationError(ValidationError::Kind::NonzeroCostAtConverterBus,
                                      net.bus(i).id, "converter buses carry no droop gain");
        }
        // Nominal dispatch must look like a uniform marginal: p_nom = q * zeta.
        double zeta = 0.0;
        bool have = false;
        for (int i = 0; i < net.n_buses(); ++i) {
            double q = inv_cost(i);
            if (q > 0.0) {
                double z = p_gen_nominal(i) / q;
                if (!have) {
                    zeta = z;
                    have = true;
                } else if (std::abs(z - zeta) > 1e-9 * (1.0 + std::abs(zeta))) {
                    throw DimensionMismatch(
                        "nominal dispatch must be proportional to the droop gains");
                }
            } else if (p_gen_nominal(i) != 0.0) {
                throw DimensionMismatch("nominal dispatch must vanish where the droop gain is 0");
            }
        }
    }
};

/// Proportional droop: generators respond to their own frequency deviation,
/// DC sources to m times their own voltage deviation. Converter-bus entries
/// are identically zero. `omega_bus` is indexed per bus; only AC entries are
/// read. Returns generation per bus.
inline Eigen::VectorXd droop_generation(const ValidatedNetwork& net, const ControllerConfig& cfg,
                                        const Eigen::VectorXd& omega_bus,
                                        const Eigen::VectorXd& v_dc) {
    if (cfg.mode == ControlMode::Secondary)
        throw ModeMismatch("droop_generation applies to primary/dual-droop modes");
    if (omega_bus.size() != net.n_buses() ||
        v_dc.size() != static_cast<Eigen::Index>(net.dc_buses().size()))
        throw DimensionMismatch("droop_generation input sizes");
    Eigen::VectorXd p = Eigen::VectorXd::Zero(net.n_buses());
    for (int i = 0; i < net.n_buses(); ++i) {
        switch (net.bus(i).kind) {
            case BusKind::AcGenerator:
                p(i) = -cfg.inv_cost(i) * omega_bus(i) + cfg.p_gen_nominal(i);
                break;
            case BusKind::Dc:
                p(i) = -cfg.inv_cost(i) * cfg.freq_volt_ratio * v_dc(net.dc_slot(i)) +
                       cfg.p_gen_nominal(i);
                break;
            case BusKind::AcConverter:
                break;
        }
    }
    return p;
}

/// Primary converter law: AC-side frequency proportional to the DC-side
/// voltage deviation.
inline double ilc_primary_frequency(double v_dc, double m) { return m * v_dc; }

/// Dual-droop baseline: directly commanded power transfer, AC-side positive.
inline double dual_droop_power(double omega_ac, double v_dc, double k_freq, double k_volt) {
    return k_freq * omega_ac - k_volt * v_dc;
}

/// Capacitance-weighted voltage of every DC subsystem, in dc_subsystems() order.
inline Eigen::VectorXd weighted_average_voltages(const ValidatedNetwork& net,
                                                 const Eigen::VectorXd& v_dc) {
    if (v_dc.size() != static_cast<Eigen::Index>(net.dc_buses().size()))
        throw DimensionMismatch("voltage vector does not match the DC index map");
    Eigen::VectorXd vb = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(net.dc_subsystems().size()));
    for (std::size_t s = 0; s < net.dc_buses().size(); ++s) {
        int bus = net.dc_buses()[s];
        int slot = net.dc_subsystem_slot(net.subsystem_of(bus));
        vb(slot) += net.bus(bus).capacitance * v_dc(static_cast<Eigen::Index>(s));
    }
    return vb;
}

/// Capacitance-weighted voltage of one DC subsystem.
inline double weighted_average_voltage(const ValidatedNetwork& net, const Eigen::VectorXd& v_dc,
                                       const std::string& subsystem_id) {
    int k = net.subsystem_index(subsystem_id);
    int slot = net.dc_subsystem_slot(k);
    if (slot < 0) throw UnknownSubsystem(subsystem_id);
    return weighted_average_voltages(net, v_dc)(slot);
}

/// Network-wide virtual frequency: the bus's own frequency on AC buses, m
/// times the subsystem's weighted average voltage on DC buses.
inline Eigen::VectorXd virtual_frequency(const ValidatedNetwork& net,
                                         const Eigen::VectorXd& omega_bus,
                                         const Eigen::VectorXd& v_bar, double m) {
    if (omega_bus.size() != net.n_buses() ||
        v_bar.size() != static_cast<Eigen::Index>(net.dc_subsystems().size()))
        throw DimensionMismatch("virtual_frequency input sizes");
    Eigen::VectorXd w(net.n_buses());
    for (int i = 0; i < net.n_buses(); ++i) {
        if (net.bus(i).kind == BusKind::Dc)
            w(i) = m * v_bar(net.dc_subsystem_slot(net.subsystem_of(i)));
        else
            w(i) = omega_bus(i);
    }
    return w;
}

/// Consensus update for the synchronizing variable: T xi' = -L xi - Q w_hat,
/// with the Laplacian over communication nodes and the droop gains restricted
/// to those nodes. `omega_hat_nodes` is indexed per communication node.
inline Eigen::VectorXd consensus_rhs(const ValidatedNetwork& net, const ControllerConfig& cfg,
                                     const Eigen::VectorXd& xi,
                                     const Eigen::VectorXd& omega_hat_nodes) {
    if (cfg.mode != ControlMode::Secondary)
        throw ModeMismatch("consensus_rhs applies to secondary mode");
    const auto nc = static_cast<Eigen::Index>(net.comm_nodes().size());
    if (xi.size() != nc || omega_hat_nodes.size() != nc)
        throw DimensionMismatch("consensus_rhs input sizes");
    Eigen::VectorXd q_nodes(nc);
    for (Eigen::Index a = 0; a < nc; ++a)
        q_nodes(a) = cfg.inv_cost(net.comm_nodes()[static_cast<std::size_t>(a)]);
    Eigen::VectorXd rhs =
        -(net.comm_laplacian() * xi) - q_nodes.cwiseProduct(omega_hat_nodes);
    return rhs.cwiseQuotient(cfg.consensus_tc);
}

/// Secondary generation: p^G = Q xi at communication nodes, with an optional
/// virtual-capacitance derivative term at DC source buses. `v_dot` is the
/// voltage derivative per DC slot; the derivative term never moves the
/// steady state.
inline Eigen::VectorXd secondary_generation(const ValidatedNetwork& net,
                                            const ControllerConfig& cfg,
                                            const Eigen::VectorXd& xi,
                                            const Eigen::VectorXd& v_dot) {
    if (cfg.mode != ControlMode::Secondary)
        throw ModeMismatch("secondary_generation applies to secondary mode");
    const auto nc = static_cast<Eigen::Index>(net.comm_nodes().size());
    if (xi.size() != nc || v_dot.size() != static_cast<Eigen::Index>(net.dc_buses().size()))
        throw DimensionMismatch("secondary_generation input sizes");
    Eigen::VectorXd p = Eigen::VectorXd::Zero(net.n_buses());
    for (Eigen::Index a = 0; a < nc; ++a) {
        int bus = net.comm_nodes()[static_cast<std::size_t>(a)];
        p(bus) = cfg.inv_cost(bus) * xi(a);
    }
    for (std::size_t s = 0; s < net.dc_buses().size(); ++s) {
        int bus = net.dc_buses()[s];
        double cv = cfg.virtual_cap(static_cast<Eigen::Index>(s));
        if (cv != 0.0) p(bus) -= cv * v_dot(static_cast<Eigen::Index>(s));
    }
    return p;
}

}  // namespace hybridgrid
