#include <catch2/catch_amalgamated.hpp>

#include "fixtures.hpp"
#include "hybridgrid/hybridgrid.hpp"

using namespace hybridgrid;
using Catch::Approx;

namespace {

Scenario bundled_t1() {
    return parse_scenario(std::string(HG_SCENARIO_DIR) + "/t1.json");
}

}  // namespace

TEST_CASE("mode override changes the controller family", "[runner]") {
    Scenario sc = bundled_t1();
    sc.sim.t_end = 0.5;
    RunOptions opts;
    opts.write_outputs = false;
    opts.mode = "secondary";
    RunReport rep = run_scenario(sc, opts);
    REQUIRE(rep.layout.n_xi == 2);
    opts.mode = "dual-droop";
    rep = run_scenario(sc, opts);
    REQUIRE(rep.layout.n_conv == 1);
}

TEST_CASE("resistance-scale sweep shrinks the step with the resistance", "[runner][sweep]") {
    Scenario sc = bundled_t1();
    sc.sim.t_end = 8.0;
    RunOptions opts;
    opts.write_outputs = false;
    SweepReport rep =
        sweep_scenario(sc, "dc_resistance_scale", {1.0, 0.1, 0.01}, opts, 3);
    REQUIRE(rep.rows.size() == 3);
    double prev = 1e9;
    for (const auto& r : rep.rows) {
        REQUIRE(r.ok);
        REQUIRE(r.cert_pass);
        REQUIRE(r.sharing_error < prev);
        prev = r.sharing_error;
    }
}

TEST_CASE("small communication delays still converge", "[runner][sweep]") {
    Scenario sc = bundled_t1();
    sc.mode = "secondary";
    RunOptions opts;
    opts.write_outputs = false;
    SweepReport rep = sweep_scenario(sc, "comm_delay", {0.0, 0.01}, opts, 2);
    for (const auto& r : rep.rows) {
        REQUIRE(r.ok);
        REQUIRE(r.omega_max < 1e-6);
        REQUIRE(r.sharing_error < 1e-5);
    }
    // The energy certificate only covers the undelayed loop.
    REQUIRE(rep.rows[0].cert_pass);
}

TEST_CASE("virtual capacitance softens transients, keeps the steady state",
          "[runner][sweep]") {
    Scenario sc = bundled_t1();
    sc.mode = "secondary";
    RunOptions opts;
    opts.write_outputs = false;
    opts.t_end = 60.0;
    SweepReport rep = sweep_scenario(sc, "virtual_capacitance", {0.0, 0.5}, opts, 2);
    for (const auto& r : rep.rows) {
        REQUIRE(r.ok);
        REQUIRE(r.omega_max < 1e-7);
    }
    REQUIRE(rep.rows[1].peak_vdot_src < rep.rows[0].peak_vdot_src);
    REQUIRE(rep.rows[0].sharing_error == Approx(rep.rows[1].sharing_error).margin(1e-8));  // converged identity
}

TEST_CASE("unknown sweep parameters are rejected", "[runner][sweep]") {
    REQUIRE_THROWS_AS(apply_sweep_value(bundled_t1(), "nonsense", 1.0), SchemaError);
}

TEST_CASE("per-point failures are recorded and the sweep continues", "[runner][sweep]") {
    Scenario sc = bundled_t1();
    sc.sim.t_end = 2.0;
    sc.sim.dt = 0.05;  // far outside the stability region for T1's DC grid
    RunOptions opts;
    opts.write_outputs = false;
    SweepReport rep = sweep_scenario(sc, "m", {1.0}, opts);
    REQUIRE_FALSE(rep.rows[0].ok);
    REQUIRE(rep.rows[0].status.find("NonFiniteState") != std::string::npos);
}
