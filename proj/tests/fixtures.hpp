#pragma once

#include <random>
#include <string>

#include "hybridgrid/hybridgrid.hpp"

namespace fixtures {

using namespace hybridgrid;

/// Minimal well-formed hybrid network: one AC generator bus coupled through a
/// single line to a converter bus, one two-bus DC chain behind the converter,
/// sources at a1 and d2.
inline NetworkSpec t1_spec(double q_gen = 1.0, double q_dc = 1.0, double g_dc = 100.0) {
    NetworkSpec s;
    Bus a1;
    a1.id = "a1";
    a1.kind = BusKind::AcGenerator;
    a1.subsystem = "ac1";
    a1.inertia = 0.05;
    a1.damping = 1.0;
    a1.inv_cost = q_gen;
    s.buses.push_back(a1);
    Bus a2;
    a2.id = "a2";
    a2.kind = BusKind::AcConverter;
    a2.subsystem = "ac1";
    s.buses.push_back(a2);
    Bus d1;
    d1.id = "d1";
    d1.kind = BusKind::Dc;
    d1.subsystem = "dc1";
    d1.capacitance = 0.2;
    s.buses.push_back(d1);
    Bus d2;
    d2.id = "d2";
    d2.kind = BusKind::Dc;
    d2.subsystem = "dc1";
    d2.capacitance = 0.2;
    d2.inv_cost = q_dc;
    s.buses.push_back(d2);
    Line ac;
    ac.from = "a1";
    ac.to = "a2";
    ac.kind = Domain::Ac;
    ac.susceptance = 5.0;
    s.lines.push_back(ac);
    Line dc;
    dc.from = "d1";
    dc.to = "d2";
    dc.kind = Domain::Dc;
    dc.conductance = g_dc;
    s.lines.push_back(dc);
    s.converters.push_back(Converter{"ilc1", "a2", "d1"});
    s.comm_edges = {{"a1", "d2"}};
    return s;
}

inline ControllerConfig t1_config(const ValidatedNetwork& net, ControlMode mode) {
    ControllerConfig cfg = ControllerConfig::defaults_for(net, mode);
    cfg.freq_volt_ratio = 1.0;
    cfg.consensus_tc.setConstant(0.01);
    return cfg;
}

/// Closed-form primary equilibrium of T1 under a load L at the converter bus
/// (q_gen = q_dc = 1, D = 1, m = 1): derived by eliminating the balance
/// equations by hand. Returns the synchronous frequency (= V at d1).
inline double t1_primary_sync_freq(double load, double g_dc) {
    return -load * (g_dc + 1.0) / (3.0 * g_dc + 2.0);
}

/// Three AC generator buses in a path, no DC side. Slow dynamics (all
/// eigenvalues within a few rad/s), used where numerical differentiation
/// needs a smooth trajectory.
inline NetworkSpec gentle_spec() {
    NetworkSpec s;
    for (int i = 0; i < 3; ++i) {
        Bus b;
        b.id = "g" + std::to_string(i + 1);
        b.kind = BusKind::AcGenerator;
        b.subsystem = "ac1";
        b.inertia = 1.0;
        b.damping = 1.0;
        b.inv_cost = (i == 1) ? 0.0 : 1.0;
        s.buses.push_back(b);
    }
    Line l1;
    l1.from = "g1";
    l1.to = "g2";
    l1.kind = Domain::Ac;
    l1.susceptance = 1.0;
    s.lines.push_back(l1);
    Line l2;
    l2.from = "g2";
    l2.to = "g3";
    l2.kind = Domain::Ac;
    l2.susceptance = 1.0;
    s.lines.push_back(l2);
    s.comm_edges = {{"g1", "g3"}};
    return s;
}

/// Random connected hybrid network for property checks: a handful of AC and
/// DC subsystems joined by converters, spanning trees plus chords.
inline NetworkSpec random_spec(std::mt19937& rng) {
    std::uniform_int_distribution<int> n_sub(1, 2);
    std::uniform_int_distribution<int> n_bus(2, 5);
    std::uniform_real_distribution<double> weight(0.5, 10.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    NetworkSpec s;
    std::vector<std::string> ac_conv_buses, dc_buses_all;
    int ac_subs = n_sub(rng), dc_subs = n_sub(rng);
    for (int k = 0; k < ac_subs; ++k) {
        std::string sub = "ac" + std::to_string(k + 1);
        int n = n_bus(rng);
        std::vector<std::string> ids;
        for (int i = 0; i < n; ++i) {
            Bus b;
            b.id = sub + "_b" + std::to_string(i + 1);
            b.subsystem = sub;
            // Last bus becomes a converter bus so subsystems can interconnect.
            if (i == n - 1) {
                b.kind = BusKind::AcConverter;
                ac_conv_buses.push_back(b.id);
            } else {
                b.kind = BusKind::AcGenerator;
                b.inertia = 0.1 + unit(rng);
                b.damping = unit(rng);
                b.inv_cost = 0.5 + unit(rng);
            }
            ids.push_back(b.id);
            s.buses.push_back(b);
        }
        for (int i = 1; i < n; ++i) {
            Line l;
            std::uniform_int_distribution<int> parent(0, i - 1);
            l.from = ids[static_cast<std::size_t>(parent(rng))];
            l.to = ids[static_cast<std::size_t>(i)];
            l.kind = Domain::Ac;
            l.susceptance = weight(rng);
            s.lines.push_back(l);
        }
    }
    for (int k = 0; k < dc_subs; ++k) {
        std::string sub = "dc" + std::to_string(k + 1);
        int n = n_bus(rng);
        std::vector<std::string> ids;
        for (int i = 0; i < n; ++i) {
            Bus b;
            b.id = sub + "_b" + std::to_string(i + 1);
            b.subsystem = sub;
            b.kind = BusKind::Dc;
            b.capacitance = 0.1 + unit(rng);
            b.inv_cost = (i == 0) ? 1.0 + unit(rng) : 0.0;
            ids.push_back(b.id);
            dc_buses_all.push_back(b.id);
            s.buses.push_back(b);
        }
        for (int i = 1; i < n; ++i) {
            Line l;
            std::uniform_int_distribution<int> parent(0, i - 1);
            l.from = ids[static_cast<std::size_t>(parent(rng))];
            l.to = ids[static_cast<std::size_t>(i)];
            l.kind = Domain::Dc;
            l.conductance = weight(rng);
            s.lines.push_back(l);
        }
    }
    // Each converter bus pairs with a random DC bus (at most one per DC bus).
    std::vector<std::string> dc_pool = dc_buses_all;
    int x = 0;
    for (const auto& ac : ac_conv_buses) {
        if (dc_pool.empty()) break;
        std::uniform_int_distribution<std::size_t> pick(0, dc_pool.size() - 1);
        std::size_t j = pick(rng);
        s.converters.push_back(Converter{"x" + std::to_string(++x), ac, dc_pool[j]});
        dc_pool.erase(dc_pool.begin() + static_cast<std::ptrdiff_t>(j));
    }
    // Converter buses left unpaired are invalid; demote them to generators.
    for (auto& b : s.buses) {
        if (b.kind != BusKind::AcConverter) continue;
        bool used = false;
        for (const auto& c : s.converters) used = used || c.ac_bus == b.id;
        if (!used) {
            b.kind = BusKind::AcGenerator;
            b.inertia = 0.5;
            b.damping = 0.1;
        }
    }
    // Communication spanning chain over all q > 0 buses.
    std::vector<std::string> sources;
    for (const auto& b : s.buses)
        if (b.inv_cost > 0.0) sources.push_back(b.id);
    for (std::size_t i = 1; i < sources.size(); ++i)
        s.comm_edges.emplace_back(sources[i - 1], sources[i]);
    return s;
}

}  // namespace fixtures
