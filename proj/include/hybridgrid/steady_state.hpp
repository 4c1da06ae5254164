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

namespace hybridgrid {

struct DispatchSolution {
    Eigen::VectorXd p_gen_star;  ///< optimal generation per bus [pu]
    double cost = 0.0;           ///< quadratic generation cost at the optimum
    double multiplier = 0.0;     ///< uniform marginal price
};

/// Closed-form solution of the equal-marginal dispatch: every source produces
/// in proportion to its inverse cost, covering total load plus the
/// frequency-dependent term p_u.
inline DispatchSolution optimal_dispatch(const Eigen::VectorXd& p_load,
                                         const Eigen::VectorXd& p_u,
                                         const Eigen::VectorXd& inv_cost) {
    if (p_load.size() != inv_cost.size() || p_u.size() != inv_cost.size())
        throw DimensionMismatch("optimal_dispatch input sizes");
    if ((inv_cost.array() < 0.0).any())
        throw DimensionMismatch("inverse costs must be >= 0");
    const double q_total = inv_cost.sum();
    if (!(q_total > 0.0)) throw AllCostsInfinite();
    const double demand = p_load.sum() + p_u.sum();
    DispatchSolution d;
    d.multiplier = demand / q_total;
    d.p_gen_star = inv_cost * d.multiplier;
    d.cost = 0.0;
    for (Eigen::Index i = 0; i < inv_cost.size(); ++i)
        if (inv_cost(i) > 0.0)
            d.cost += 0.5 * d.p_gen_star(i) * d.p_gen_star(i) / inv_cost(i);
    return d;
}

/// Relative steady-state power-sharing error against a dispatch solution.
inline double power_sharing_error(const Eigen::VectorXd& p_gen_steady,
                                  const DispatchSolution& dispatch) {
    if (p_gen_steady.size() != dispatch.p_gen_star.size())
        throw DimensionMismatch("power_sharing_error input sizes");
    double denom = std::max(dispatch.p_gen_star.norm(), 1e-12);
    return (p_gen_steady - dispatch.p_gen_star).norm() / denom;
}

/// Frequency-dependent demand term per bus: D_j omega_j at generator buses.
inline Eigen::VectorXd p_u_vector(const ValidatedNetwork& net, const SystemState& state) {
    Eigen::VectorXd pu = Eigen::VectorXd::Zero(net.n_buses());
    for (std::size_t s = 0; s < net.gen_buses().size(); ++s)
        pu(net.gen_buses()[s]) = net.damping()(static_cast<Eigen::Index>(s)) *
                                 state.omega_gen(static_cast<Eigen::Index>(s));
    return pu;
}

struct EquilibriumPoint {
    SystemState state;
    double residual_norm = 0.0;  ///< infinity norm of the balance residual [pu]
    bool security_ok = false;    ///< max |eta*| < pi/2
    DerivedOutputs derived;
    int iterations = 0;
};

/// Newton stalled or hit the iteration cap; carries the best iterate found.
class NoConvergence : public std::runtime_error {
public:
    NoConvergence(EquilibriumPoint best, double norm)
        : std::runtime_error("NoConvergence: residual " + std::to_string(norm)),
          best_(std::move(best)),
          norm_(norm) {}

    const EquilibriumPoint& best() const { return best_; }
    double norm() const { return norm_; }

private:
    EquilibriumPoint best_;
    double norm_;
};

namespace detail {

/// Unknown layout for the equilibrium solve: bus angles with one reference
/// pinned per AC subsystem (the lowest-index bus), one synchronous frequency
/// per AC subsystem, all DC voltages, and the consensus variables in
/// secondary mode.
struct EqLayout {
    std::vector<int> ac_subsystems;       // subsystem indices with AC domain
    std::vector<int> ac_subsystem_slot;   // per subsystem, -1 for DC
    std::vector<int> theta_slot;          // per bus, -1 for DC buses and references
    std::vector<int> reference_bus;       // per AC-subsystem slot
    int n_theta = 0, n_sigma = 0, n_v = 0, n_xi = 0;

    static EqLayout make(const ValidatedNetwork& net, ControlMode mode) {
        EqLayout l;
        l.ac_subsystem_slot.assign(net.subsystems().size(), -1);
        for (std::size_t k = 0; k < net.subsystems().size(); ++k) {
            if (net.subsystems()[k].domain != Domain::Ac) continue;
            l.ac_subsystem_slot[k] = static_cast<int>(l.ac_subsystems.size());
            l.ac_subsystems.push_back(static_cast<int>(k));
            l.reference_bus.push_back(
                *std::min_element(net.subsystems()[k].buses.begin(),
                                  net.subsystems()[k].buses.end()));
        }
        l.theta_slot.assign(static_cast<std::size_t>(net.n_buses()), -1);
        for (int i = 0; i < net.n_buses(); ++i) {
            if (net.bus(i).kind == BusKind::Dc) continue;
            int slot = l.ac_subsystem_slot[static_cast<std::size_t>(net.subsystem_of(i))];
            if (l.reference_bus[static_cast<std::size_t>(slot)] == i) continue;
            l.theta_slot[static_cast<std::size_t>(i)] = l.n_theta++;
        }
        l.n_sigma = static_cast<int>(l.ac_subsystems.size());
        l.n_v = static_cast<int>(net.dc_buses().size());
        l.n_xi = (mode == ControlMode::Secondary) ? static_cast<int>(net.comm_nodes().size()) : 0;
        return l;
    }

    int size() const { return n_theta + n_sigma + n_v + n_xi; }
    int sigma_offset() const { return n_theta; }
    int v_offset() const { return n_theta + n_sigma; }
    int xi_offset() const { return n_theta + n_sigma + n_v; }

    double theta_of(const Eigen::VectorXd& z, int bus) const {
        int slot = theta_slot[static_cast<std::size_t>(bus)];
        return slot < 0 ? 0.0 : z(slot);
    }
};

inline Eigen::VectorXd equilibrium_residual(const ValidatedNetwork& net,
                                            const ControllerConfig& cfg, const EqLayout& l,
                                            const Eigen::VectorXd& p_load,
                                            const Eigen::VectorXd& z) {
    const double m = cfg.freq_volt_ratio;
    const auto sigma = z.segment(l.sigma_offset(), l.n_sigma);
    const auto v = z.segment(l.v_offset(), l.n_v);
    const auto xi = z.segment(l.xi_offset(), l.n_xi);

    Eigen::VectorXd eta(static_cast<Eigen::Index>(net.ac_edges().size()));
    for (std::size_t e = 0; e < net.ac_edges().size(); ++e)
        eta(static_cast<Eigen::Index>(e)) =
            l.theta_of(z, net.ac_edges()[e].from) - l.theta_of(z, net.ac_edges()[e].to);
    BranchFlows flows = branch_flows(net, eta, v);
    Eigen::VectorXd v_bar = weighted_average_voltages(net, v);

    auto sigma_of_bus = [&](int bus) {
        return sigma(l.ac_subsystem_slot[static_cast<std::size_t>(net.subsystem_of(bus))]);
    };

    // Generation at the candidate equilibrium.
    Eigen::VectorXd p_gen = Eigen::VectorXd::Zero(net.n_buses());
    if (cfg.mode == ControlMode::Secondary) {
        for (std::size_t a = 0; a < net.comm_nodes().size(); ++a) {
            int bus = net.comm_nodes()[a];
            p_gen(bus) = cfg.inv_cost(bus) * xi(static_cast<Eigen::Index>(a));
        }
    } else {
        for (int i = 0; i < net.n_buses(); ++i) {
            switch (net.bus(i).kind) {
                case BusKind::AcGenerator:
                    p_gen(i) = -cfg.inv_cost(i) * sigma_of_bus(i) + cfg.p_gen_nominal(i);
                    break;
                case BusKind::Dc:
                    p_gen(i) = -cfg.inv_cost(i) * m * v(net.dc_slot(i)) + cfg.p_gen_nominal(i);
                    break;
                case BusKind::AcConverter:
                    break;
            }
        }
    }

    // AC-side converter transfers.
    Eigen::VectorXd p_conv(static_cast<Eigen::Index>(net.converters().size()));
    for (std::size_t x = 0; x < net.converters().size(); ++x) {
        const auto& ilc = net.converters()[x];
        if (cfg.mode == ControlMode::DualDroop)
            p_conv(static_cast<Eigen::Index>(x)) =
                dual_droop_power(sigma_of_bus(ilc.ac_bus), v(net.dc_slot(ilc.dc_bus)),
                                 cfg.k_freq(static_cast<Eigen::Index>(x)),
                                 cfg.k_volt(static_cast<Eigen::Index>(x)));
        else
            p_conv(static_cast<Eigen::Index>(x)) = flows.inflow(ilc.ac_bus) - p_load(ilc.ac_bus);
    }

    Eigen::VectorXd r(l.size());
    int row = 0;
    // Generator bus balances.
    for (std::size_t s = 0; s < net.gen_buses().size(); ++s) {
        int bus = net.gen_buses()[s];
        r(row++) = p_gen(bus) - p_load(bus) + flows.inflow(bus) -
                   net.damping()(static_cast<Eigen::Index>(s)) * sigma_of_bus(bus);
    }
    // Converter conditions.
    for (std::size_t x = 0; x < net.converters().size(); ++x) {
        const auto& ilc = net.converters()[x];
        switch (cfg.mode) {
            case ControlMode::Primary:
                r(row++) = m * v(net.dc_slot(ilc.dc_bus)) - sigma_of_bus(ilc.ac_bus);
                break;
            case ControlMode::Secondary:
                r(row++) = m * v_bar(net.dc_subsystem_slot(net.subsystem_of(ilc.dc_bus))) -
                           sigma_of_bus(ilc.ac_bus);
                break;
            case ControlMode::DualDroop:
                r(row++) = p_conv(static_cast<Eigen::Index>(x)) -
                           (flows.inflow(ilc.ac_bus) - p_load(ilc.ac_bus));
                break;
        }
    }
    // DC bus balances.
    for (std::size_t s = 0; s < net.dc_buses().size(); ++s) {
        int bus = net.dc_buses()[s];
        double bal = p_gen(bus) - p_load(bus) + flows.inflow(bus);
        int c = net.converter_at_dc(bus);
        if (c >= 0) bal += p_conv(c);
        r(row++) = bal;
    }
    // Consensus stationarity.
    if (cfg.mode == ControlMode::Secondary) {
        Eigen::VectorXd lap = net.comm_laplacian() * xi;
        for (std::size_t a = 0; a < net.comm_nodes().size(); ++a) {
            int bus = net.comm_nodes()[a];
            double omega_hat =
                (net.bus(bus).kind == BusKind::Dc)
                    ? m * v_bar(net.dc_subsystem_slot(net.subsystem_of(bus)))
                    : sigma_of_bus(bus);
            r(row++) = -lap(static_cast<Eigen::Index>(a)) - cfg.inv_cost(bus) * omega_hat;
        }
    }
    return r;
}

/// Map a state-space guess onto the equilibrium unknowns: angles are rebuilt
/// from the angle differences along a spanning tree rooted at each reference.
inline Eigen::VectorXd guess_to_unknowns(const ValidatedNetwork& net, const ControllerConfig& cfg,
                                         const EqLayout& l, const SystemState& guess) {
    Eigen::VectorXd z = Eigen::VectorXd::Zero(l.size());
    std::vector<double> theta(static_cast<std::size_t>(net.n_buses()), 0.0);
    std::vector<bool> known(static_cast<std::size_t>(net.n_buses()), false);
    for (int ref : l.reference_bus) known[static_cast<std::size_t>(ref)] = true;
    bool progress = true;
    while (progress) {
        progress = false;
        for (std::size_t e = 0; e < net.ac_edges().size(); ++e) {
            const auto& edge = net.ac_edges()[e];
            double d = guess.angle_diff.size() > 0 ? guess.angle_diff(static_cast<Eigen::Index>(e))
                                                   : 0.0;
            auto f = static_cast<std::size_t>(edge.from);
            auto t = static_cast<std::size_t>(edge.to);
            if (known[f] && !known[t]) {
                theta[t] = theta[f] - d;
                known[t] = true;
                progress = true;
            } else if (known[t] && !known[f]) {
                theta[f] = theta[t] + d;
                known[f] = true;
                progress = true;
            }
        }
    }
    for (int i = 0; i < net.n_buses(); ++i) {
        int slot = l.theta_slot[static_cast<std::size_t>(i)];
        if (slot >= 0) z(slot) = theta[static_cast<std::size_t>(i)];
    }
    for (std::size_t k = 0; k < l.ac_subsystems.size(); ++k) {
        double sum = 0.0;
        int count = 0;
        for (int bus : net.subsystems()[static_cast<std::size_t>(l.ac_subsystems[k])].buses) {
            int s = net.gen_slot(bus);
            if (s >= 0 && guess.omega_gen.size() > 0) {
                sum += guess.omega_gen(s);
                ++count;
            }
        }
        z(l.sigma_offset() + static_cast<int>(k)) = count > 0 ? sum / count : 0.0;
    }
    if (guess.v_dc.size() == static_cast<Eigen::Index>(l.n_v))
        z.segment(l.v_offset(), l.n_v) = guess.v_dc;
    if (cfg.mode == ControlMode::Secondary &&
        guess.consensus.size() == static_cast<Eigen::Index>(l.n_xi))
        z.segment(l.xi_offset(), l.n_xi) = guess.consensus;
    return z;
}

inline EquilibriumPoint assemble_point(const ValidatedNetwork& net, const ControllerConfig& cfg,
                                       const EqLayout& l, const Eigen::VectorXd& p_load,
                                       const Eigen::VectorXd& z, double norm, int iterations) {
    EquilibriumPoint eq;
    eq.iterations = iterations;
    eq.residual_norm = norm;
    StateLayout sl = StateLayout::make(net, cfg.mode);
    eq.state = sl.zero();
    for (std::size_t e = 0; e < net.ac_edges().size(); ++e)
        eq.state.angle_diff(static_cast<Eigen::Index>(e)) =
            l.theta_of(z, net.ac_edges()[e].from) - l.theta_of(z, net.ac_edges()[e].to);
    for (std::size_t s = 0; s < net.gen_buses().size(); ++s) {
        int bus = net.gen_buses()[s];
        eq.state.omega_gen(static_cast<Eigen::Index>(s)) =
            z(l.sigma_offset() + l.ac_subsystem_slot[static_cast<std::size_t>(net.subsystem_of(bus))]);
    }
    eq.state.v_dc = z.segment(l.v_offset(), l.n_v);
    if (cfg.mode == ControlMode::Secondary) eq.state.consensus = z.segment(l.xi_offset(), l.n_xi);
    if (cfg.mode == ControlMode::DualDroop) {
        for (std::size_t c = 0; c < net.converters().size(); ++c) {
            int bus = net.converters()[c].ac_bus;
            eq.state.omega_conv(static_cast<Eigen::Index>(c)) = z(
                l.sigma_offset() +
                l.ac_subsystem_slot[static_cast<std::size_t>(net.subsystem_of(bus))]);
        }
    }
    eq.security_ok = eq.state.angle_diff.size() == 0 ||
                     eq.state.angle_diff.cwiseAbs().maxCoeff() < M_PI / 2.0;

    StateLayout layout = StateLayout::make(net, cfg.mode);
    ControllerSignals sig;
    eq.derived = eval_rhs(net, cfg, layout, layout.pack(eq.state), p_load, sig).derived;
    return eq;
}

}  // namespace detail

/// Damped Newton solve of the closed-loop balance conditions. One reference
/// angle per AC subsystem is pinned to remove the rotational null space; in
/// secondary mode the consensus stationarity conditions are appended. Throws
/// SingularJacobian or NoConvergence (with the best iterate attached); a
/// converged but insecure point (some |eta*| >= pi/2) is returned with
/// security_ok = false rather than rejected.
inline EquilibriumPoint find_equilibrium(const ValidatedNetwork& net, const ControllerConfig& cfg,
                                         const Eigen::VectorXd& p_load,
                                         const SystemState* initial_guess = nullptr) {
    cfg.validate(net);
    if (p_load.size() != net.n_buses())
        throw DimensionMismatch("load vector does not match the bus count");
    detail::EqLayout l = detail::EqLayout::make(net, cfg.mode);
    Eigen::VectorXd z = initial_guess
                            ? detail::guess_to_unknowns(net, cfg, l, *initial_guess)
                            : Eigen::VectorXd::Zero(l.size());

    auto residual = [&](const Eigen::VectorXd& zz) {
        return detail::equilibrium_residual(net, cfg, l, p_load, zz);
    };

    Eigen::VectorXd r = residual(z);
    double norm = r.size() > 0 ? r.cwiseAbs().maxCoeff() : 0.0;
    Eigen::VectorXd best_z = z;
    double best_norm = norm;
    int iter = 0;
    const int max_iter = 100;
    const double tol = 1e-12;

    while (norm >= tol && iter < max_iter) {
        ++iter;
        // Central-difference Jacobian; the system is small and smooth.
        const int n = l.size();
        Eigen::MatrixXd jac(n, n);
        for (int c = 0; c < n; ++c) {
            double h = 1e-6 * std::max(1.0, std::abs(z(c)));
            Eigen::VectorXd zp = z, zm = z;
            zp(c) += h;
            zm(c) -= h;
            jac.col(c) = (residual(zp) - residual(zm)) / (2.0 * h);
        }
        Eigen::FullPivLU<Eigen::MatrixXd> lu(jac);
        if (!lu.isInvertible())
            throw SingularJacobian("equilibrium Jacobian is rank deficient");
        Eigen::VectorXd dz = lu.solve(-r);

        // Halve the step until the residual norm decreases.
        double alpha = 1.0;
        bool accepted = false;
        for (int halvings = 0; halvings <= 30; ++halvings) {
            Eigen::VectorXd z_new = z + alpha * dz;
            Eigen::VectorXd r_new = residual(z_new);
            double n_new = r_new.cwiseAbs().maxCoeff();
            if (n_new < norm) {
                z = z_new;
                r = r_new;
                norm = n_new;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if (norm < best_norm) {
            best_norm = norm;
            best_z = z;
        }
        if (!accepted) break;  // stalled
    }

    // The spec's convergence threshold; typically overshot to ~1e-14.
    if (best_norm >= 1e-10)
        throw NoConvergence(detail::assemble_point(net, cfg, l, p_load, best_z, best_norm, iter),
                            best_norm);
    return detail::assemble_point(net, cfg, l, p_load, best_z, best_norm, iter);
}

/// Dispatch reference for a solved operating point: the frequency-dependent
/// demand is evaluated from the equilibrium itself.
inline DispatchSolution dispatch_reference(const ValidatedNetwork& net,
                                           const ControllerConfig& cfg,
                                           const Eigen::VectorXd& p_load,
                                           const EquilibriumPoint& eq) {
    return optimal_dispatch(p_load, p_u_vector(net, eq.state), cfg.inv_cost);
}

/// Copy of the spec with every DC line resistance scaled by `s` (conductance
/// divided by s).
inline NetworkSpec scale_dc_resistance(const NetworkSpec& spec, double s) {
    if (!(s > 0.0)) throw DimensionMismatch("resistance scale must be > 0");
    NetworkSpec out = spec;
    for (auto& l : out.lines)
        if (l.kind == Domain::Dc) l.conductance /= s;
    return out;
}

struct SweepPoint {
    double scale = 1.0;
    double error = 0.0;      ///< power-sharing error vs. the optimal dispatch
    double omega_max = 0.0;  ///< max |omega*| over AC buses [rad/s]
    double vbar_max = 0.0;   ///< max |v_bar*| over DC subsystems [pu]
    bool security_ok = false;
    bool solved = false;
    int iterations = 0;
    std::string message;
};

struct SweepResult {
    std::vector<SweepPoint> points;
    bool strictly_decreasing = false;  ///< sharing error strictly decreases over solved points
};

/// Equilibrium power sharing as the DC line resistances shrink: solves the
/// operating point for every scale factor and reports the sharing error
/// against the optimal dispatch. Solver failures are recorded per point.
inline SweepResult resistance_sweep(const ValidatedNetwork& net, const ControllerConfig& cfg,
                                    const Eigen::VectorXd& p_load,
                                    const std::vector<double>& scales) {
    SweepResult result;
    const SystemState* warm = nullptr;
    SystemState last;
    for (double s : scales) {
        SweepPoint pt;
        pt.scale = s;
        try {
            ValidatedNetwork scaled = validate_network(scale_dc_resistance(net.spec(), s));
            EquilibriumPoint eq = find_equilibrium(scaled, cfg, p_load, warm);
            pt.solved = true;
            pt.iterations = eq.iterations;
            pt.security_ok = eq.security_ok;
            pt.error = power_sharing_error(eq.derived.p_gen,
                                           dispatch_reference(scaled, cfg, p_load, eq));
            double om = 0.0;
            if (eq.state.omega_gen.size() > 0) om = eq.state.omega_gen.cwiseAbs().maxCoeff();
            if (eq.derived.omega_conv.size() > 0)
                om = std::max(om, eq.derived.omega_conv.cwiseAbs().maxCoeff());
            pt.omega_max = om;
            pt.vbar_max =
                eq.derived.v_bar.size() > 0 ? eq.derived.v_bar.cwiseAbs().maxCoeff() : 0.0;
            last = eq.state;
            warm = &last;
        } catch (const std::exception& e) {
            pt.message = e.what();
        }
        result.points.push_back(pt);
    }
    result.strictly_decreasing = true;
    const SweepPoint* prev = nullptr;
    for (const auto& pt : result.points) {
        if (!pt.solved) {
            result.strictly_decreasing = false;
            continue;
        }
        if (prev && !(pt.error < prev->error)) result.strictly_decreasing = false;
        prev = &pt;
    }
    return result;
}

}  // namespace hybridgrid
