#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "fixtures.hpp"
#include "hybridgrid/hybridgrid.hpp"

using namespace hybridgrid;
using Catch::Approx;

namespace {

DisturbanceSchedule step_at(double t, const std::string& bus, double delta) {
    DisturbanceSchedule s;
    s.steps.push_back(Disturbance{t, bus, delta});
    return s;
}

}  // namespace

TEST_CASE("branch flows", "[dynamics]") {
    ValidatedNetwork net = validate_network(fixtures::t1_spec());

    SECTION("zero differences carry no power") {
        BranchFlows f = branch_flows(net, Eigen::VectorXd::Zero(1), Eigen::VectorXd::Zero(2));
        REQUIRE(f.ac(0) == 0.0);
        REQUIRE(f.dc(0) == 0.0);
        REQUIRE(f.inflow.cwiseAbs().maxCoeff() == 0.0);
    }
    SECTION("sinusoidal AC flow") {
        NetworkSpec s = fixtures::t1_spec();
        s.lines[0].susceptance = 1.0;
        ValidatedNetwork unit = validate_network(s);
        Eigen::VectorXd eta(1);
        eta << M_PI / 6.0;
        BranchFlows f = branch_flows(unit, eta, Eigen::VectorXd::Zero(2));
        REQUIRE(f.ac(0) == Approx(0.5));
        REQUIRE(f.inflow(unit.bus_index("a1")) == Approx(-0.5));
        REQUIRE(f.inflow(unit.bus_index("a2")) == Approx(0.5));
    }
    SECTION("ohmic DC flow") {
        Eigen::VectorXd v(2);
        v << 0.002, 0.0;
        BranchFlows f = branch_flows(net, Eigen::VectorXd::Zero(1), v);
        REQUIRE(f.dc(0) == Approx(0.2));
    }
}

TEST_CASE("converter transfers", "[dynamics]") {
    ValidatedNetwork net = validate_network(fixtures::t1_spec());
    SECTION("zero load and zero inflow means zero transfer") {
        Eigen::VectorXd px = converter_transfers(net, Eigen::VectorXd::Zero(net.n_buses()),
                                                 Eigen::VectorXd::Zero(net.n_buses()));
        REQUIRE(px(0) == 0.0);
    }
    SECTION("transfer equals inflow minus load at the AC bus") {
        Eigen::VectorXd inflow = Eigen::VectorXd::Zero(net.n_buses());
        Eigen::VectorXd load = Eigen::VectorXd::Zero(net.n_buses());
        inflow(net.bus_index("a2")) = 0.3;
        load(net.bus_index("a2")) = 0.2;
        Eigen::VectorXd px = converter_transfers(net, inflow, load);
        REQUIRE(px(0) == Approx(0.1));
    }
    SECTION("at equilibrium the transfer is the generator surplus") {
        ControllerConfig cfg = fixtures::t1_config(net, ControlMode::Primary);
        Eigen::VectorXd p_load = Eigen::VectorXd::Zero(net.n_buses());
        p_load(net.bus_index("a2")) = 0.2;
        EquilibriumPoint eq = find_equilibrium(net, cfg, p_load);
        double expected = eq.derived.p_gen(net.bus_index("a1")) -
                          net.bus(net.bus_index("a1")).damping * eq.state.omega_gen(0) -
                          p_load(net.bus_index("a2"));
        REQUIRE(eq.derived.p_conv(0) == Approx(expected).margin(1e-12));
    }
}

TEST_CASE("closed-loop right-hand side", "[dynamics]") {
    ValidatedNetwork net = validate_network(fixtures::t1_spec());
    ControllerConfig cfg = fixtures::t1_config(net, ControlMode::Primary);
    StateLayout layout = StateLayout::make(net, ControlMode::Primary);

    SECTION("nominal fixed point") {
        RhsResult r = system_rhs(net, cfg, layout.zero(), DisturbanceSchedule{});
        REQUIRE(r.dx.cwiseAbs().maxCoeff() == 0.0);
    }
    SECTION("swing equation with no flows") {
        NetworkSpec s;
        Bus b;
        b.id = "g";
        b.kind = BusKind::AcGenerator;
        b.subsystem = "ac1";
        b.inertia = 0.25;
        b.damping = 0.0;
        s.buses.push_back(b);
        ValidatedNetwork single = validate_network(s);
        ControllerConfig c = ControllerConfig::defaults_for(single, ControlMode::Primary);
        SystemState st = StateLayout::make(single, ControlMode::Primary).zero();
        RhsResult r = system_rhs(single, c, st, step_at(0.0, "g", 0.1));
        REQUIRE(r.dx(0) == Approx(-0.1 / 0.25));
    }
    SECTION("dimension mismatch is reported") {
        SystemState st = layout.zero();
        st.v_dc.resize(1);
        REQUIRE_THROWS_AS(system_rhs(net, cfg, st, DisturbanceSchedule{}), DimensionMismatch);
    }
    SECTION("vanishes at the Newton equilibrium") {
        Eigen::VectorXd p_load = Eigen::VectorXd::Zero(net.n_buses());
        p_load(net.bus_index("a2")) = 0.2;
        EquilibriumPoint eq = find_equilibrium(net, cfg, p_load);
        RhsResult r = system_rhs(net, cfg, eq.state, step_at(0.0, "a2", 0.2));
        REQUIRE(r.dx.cwiseAbs().maxCoeff() < 1e-10);
    }
}

TEST_CASE("integration", "[dynamics]") {
    ValidatedNetwork net = validate_network(fixtures::t1_spec());
    ControllerConfig cfg = fixtures::t1_config(net, ControlMode::Primary);
    StateLayout layout = StateLayout::make(net, ControlMode::Primary);
    DisturbanceSchedule sched = step_at(1.0, "a2", 0.2);

    SECTION("an equilibrium initial state stays put") {
        Eigen::VectorXd p_load = Eigen::VectorXd::Zero(net.n_buses());
        p_load(net.bus_index("a2")) = 0.2;
        EquilibriumPoint eq = find_equilibrium(net, cfg, p_load);
        SystemState init = eq.state;
        Trajectory traj =
            integrate(net, cfg, init, step_at(0.0, "a2", 0.2), 10.0, 1e-3);
        Eigen::VectorXd x0 = layout.pack(eq.state);
        double drift = 0.0;
        for (const auto& s : traj.samples)
            drift = std::max(drift, (s.x - x0).cwiseAbs().maxCoeff());
        REQUIRE(drift < 1e-9);
    }
    SECTION("load step settles at the hand-derived synchronous frequency") {
        Trajectory traj = integrate(net, cfg, layout.zero(), sched, 10.0, 1e-3);
        double omega_final = traj.samples.back().x(layout.gen_offset());
        double expected = fixtures::t1_primary_sync_freq(0.2, 100.0);
        REQUIRE(omega_final == Approx(expected).margin(1e-6));
        // Large-conductance limit of the same quantity.
        REQUIRE(omega_final == Approx(-1.0 / 15.0).margin(5e-4));
        // Matches the Newton solve.
        Eigen::VectorXd p_load = Eigen::VectorXd::Zero(net.n_buses());
        p_load(net.bus_index("a2")) = 0.2;
        EquilibriumPoint eq = find_equilibrium(net, cfg, p_load);
        REQUIRE((traj.samples.back().x - layout.pack(eq.state)).cwiseAbs().maxCoeff() < 1e-6);
    }
    SECTION("halving the step barely moves the final state") {
        Trajectory a = integrate(net, cfg, layout.zero(), sched, 10.0, 1e-3);
        Trajectory b = integrate(net, cfg, layout.zero(), sched, 10.0, 5e-4);
        REQUIRE((a.samples.back().x - b.samples.back().x).cwiseAbs().maxCoeff() < 1e-6);
    }
    SECTION("zero loads and zero initial deviations stay identically zero") {
        Trajectory traj =
            integrate(net, cfg, layout.zero(), DisturbanceSchedule{}, 2.0, 1e-3);
        for (const auto& s : traj.samples) REQUIRE(s.x.cwiseAbs().maxCoeff() == 0.0);
    }
    SECTION("divergence is reported with its onset time") {
        try {
            integrate(net, cfg, layout.zero(), sched, 10.0, 0.05);
            FAIL("expected NonFiniteState");
        } catch (const NonFiniteState& e) {
            REQUIRE(e.time() > 1.0);
            REQUIRE(e.time() < 10.0);
        }
    }
    SECTION("disturbances apply on the first grid point at or after their time") {
        DisturbanceSchedule off_grid = step_at(1.00049, "a2", 0.2);
        Trajectory traj = integrate(net, cfg, layout.zero(), off_grid, 2.0, 1e-3);
        REQUIRE(traj.step_samples.size() == 1);
        REQUIRE(traj.samples[traj.step_samples[0]].t == Approx(1.001));
        // Up to and excluding that sample the state is untouched.
        REQUIRE(traj.samples[traj.step_samples[0] - 1].x.cwiseAbs().maxCoeff() == 0.0);
    }
    SECTION("nonincreasing schedule times are rejected") {
        DisturbanceSchedule bad;
        bad.steps.push_back(Disturbance{2.0, "a2", 0.1});
        bad.steps.push_back(Disturbance{1.0, "a2", 0.1});
        REQUIRE_THROWS_AS(integrate(net, cfg, layout.zero(), bad, 3.0, 1e-3),
                          DimensionMismatch);
    }
}

TEST_CASE("conservation along trajectories", "[dynamics]") {
    ValidatedNetwork net = validate_network(fixtures::t1_spec());
    ControllerConfig cfg = fixtures::t1_config(net, ControlMode::Primary);
    StateLayout layout = StateLayout::make(net, ControlMode::Primary);
    Trajectory traj =
        integrate(net, cfg, layout.zero(), step_at(1.0, "a2", 0.2), 5.0, 1e-3);

    SECTION("branch flows cancel within each subsystem") {
        for (const auto& s : traj.samples) {
            for (const auto& sub : net.subsystems()) {
                double sum = 0.0;
                for (int bus : sub.buses) sum += s.derived.p_flow(bus);
                REQUIRE(std::abs(sum) < 1e-12);
            }
        }
    }
    SECTION("the DC side sees exactly the negated AC-side transfer") {
        // Reconstruct the converter injection from the recorded voltage
        // derivative and bus balance; it must equal -p_conv bit for bit up to
        // the arithmetic used in the right-hand side.
        int d1 = net.bus_index("d1");
        int slot = net.dc_slot(d1);
        for (const auto& s : traj.samples) {
            double c = net.bus(d1).capacitance;
            double balance = s.derived.p_gen(d1) - 0.0 + s.derived.p_flow(d1);
            double injection = c * s.v_dot(slot) - balance;
            REQUIRE(injection == Approx(s.derived.p_conv(0)).margin(1e-13));
        }
    }
}

TEST_CASE("converter frequency is computed, never integrated", "[dynamics]") {
    ValidatedNetwork net = validate_network(fixtures::t1_spec());
    int a2 = net.bus_index("a2");
    int d1_slot = net.dc_slot(net.bus_index("d1"));

    SECTION("primary: omega at the converter bus equals m V at its partner") {
        ControllerConfig cfg = fixtures::t1_config(net, ControlMode::Primary);
        cfg.freq_volt_ratio = 1.7;
        StateLayout layout = StateLayout::make(net, ControlMode::Primary);
        Trajectory traj =
            integrate(net, cfg, layout.zero(), step_at(1.0, "a2", 0.2), 3.0, 1e-3);
        for (const auto& s : traj.samples) {
            double v = s.x(layout.dc_offset() + d1_slot);
            REQUIRE(s.omega_bus(a2) == 1.7 * v);
            REQUIRE(s.derived.omega_conv(0) == 1.7 * v);
        }
    }
    SECTION("secondary: omega at the converter bus equals m v_bar") {
        ControllerConfig cfg = fixtures::t1_config(net, ControlMode::Secondary);
        StateLayout layout = StateLayout::make(net, ControlMode::Secondary);
        Trajectory traj =
            integrate(net, cfg, layout.zero(), step_at(1.0, "a2", 0.2), 3.0, 1e-3);
        for (const auto& s : traj.samples)
            REQUIRE(s.omega_bus(a2) == cfg.freq_volt_ratio * s.derived.v_bar(0));
    }
}

TEST_CASE("trajectory differences reproduce the right-hand side", "[dynamics][property]") {
    // Fourth-order central differences of the samples against the evaluated
    // derivative; the fixture's dynamics are slow enough that the stencil
    // error stays within the fourth-order budget.
    ValidatedNetwork net = validate_network(fixtures::gentle_spec());
    ControllerConfig cfg = ControllerConfig::defaults_for(net, ControlMode::Primary);
    StateLayout layout = StateLayout::make(net, ControlMode::Primary);
    DisturbanceSchedule sched = step_at(0.0, "g3", 0.3);
    const double dt = 1e-3;
    Trajectory traj = integrate(net, cfg, layout.zero(), sched, 2.0, dt);

    double max_rhs = 0.0;
    for (std::size_t n = 100; n + 100 < traj.samples.size(); n += 97) {
        RhsResult r = system_rhs(net, cfg, traj.state_at(n), sched);
        max_rhs = std::max(max_rhs, r.dx.cwiseAbs().maxCoeff());
        Eigen::VectorXd fd = (-traj.samples[n + 2].x + 8.0 * traj.samples[n + 1].x -
                              8.0 * traj.samples[n - 1].x + traj.samples[n - 2].x) /
                             (12.0 * dt);
        double tol = 10.0 * std::pow(dt, 4) * std::max(1.0, max_rhs);
        REQUIRE((fd - r.dx).cwiseAbs().maxCoeff() < tol);
    }
}

TEST_CASE("transport delay buffer", "[dynamics][delay]") {
    SECTION("zero delay is the identity") {
        DelayBuffer buf(0.0, 1e-3);
        for (int i = 0; i < 5; ++i) {
            double x = 0.1 * i;
            REQUIRE(delayed_signal(buf, x) == x);
        }
    }
    SECTION("constant input passes through after warm-up") {
        DelayBuffer buf(0.2, 1e-3);
        for (int i = 0; i < 500; ++i) REQUIRE(delayed_signal(buf, 3.5) == 3.5);
    }
    SECTION("a unit step arrives one delay later") {
        const double dt = 1e-3, delay = 0.2;
        DelayBuffer buf(delay, dt);
        double step_seen_at = -1.0;
        for (int n = 0; n <= 2000; ++n) {
            double t = n * dt;
            double in = (t >= 1.0) ? 1.0 : 0.0;
            double out = delayed_signal(buf, in);
            if (out > 0.5 && step_seen_at < 0.0) step_seen_at = t;
        }
        REQUIRE(step_seen_at == Approx(1.2).margin(1e-3 + 1e-12));
    }
    SECTION("zero-order hold before the buffer fills") {
        DelayBuffer buf(0.01, 1e-3);
        REQUIRE(delayed_signal(buf, 7.0) == 7.0);
        REQUIRE(delayed_signal(buf, 8.0) == 7.0);
    }
    SECTION("negative delay is rejected") {
        REQUIRE_THROWS_AS(DelayBuffer(-0.1, 1e-3), NegativeDelay);
    }
}

TEST_CASE("delayed secondary run converges", "[dynamics][delay]") {
    ValidatedNetwork net = validate_network(fixtures::t1_spec());
    ControllerConfig cfg = fixtures::t1_config(net, ControlMode::Secondary);
    cfg.comm_delay = 0.01;
    StateLayout layout = StateLayout::make(net, ControlMode::Secondary);
    Trajectory traj =
        integrate(net, cfg, layout.zero(), step_at(1.0, "a2", 0.2), 30.0, 1e-3);
    double omega_final = std::abs(traj.samples.back().x(layout.gen_offset()));
    REQUIRE(omega_final < 1e-6);
}
