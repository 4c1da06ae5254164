#pragma once

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "hybridgrid/controllers.hpp"
#include "hybridgrid/errors.hpp"
#include "hybridgrid/network.hpp"
#include "hybridgrid/state.hpp"
#include "hybridgrid/units.hpp"

namespace hybridgrid {

inline constexpr const char* kScenarioSchema = "hybridgrid-scenario/1";

class ParseError : public std::runtime_error {
public:
    ParseError(int line, const std::string& message)
        : std::runtime_error("ParseError(line " + std::to_string(line) + "): " + message),
          line_(line) {}
    int line() const { return line_; }

private:
    int line_;
};

class SchemaError : public std::runtime_error {
public:
    explicit SchemaError(const std::string& path, const std::string& message = "")
        : std::runtime_error("SchemaError(" + path + ")" +
                             (message.empty() ? "" : ": " + message)),
          path_(path) {}
    const std::string& path() const { return path_; }

private:
    std::string path_;
};

struct SimSettings {
    double t_end = 10.0;
    double dt = 1e-3;
    int record_every = 1;
};

/// Declarative experiment description, the unit of CLI work. Maps hold only
/// the entries present in the document; defaults apply when building the
/// runtime objects.
struct Scenario {
    NetworkSpec network;
    std::string mode = "primary";
    double freq_volt_ratio = 1.0;
    std::map<std::string, double> p_gen_nominal;  ///< bus id -> pu
    std::map<std::string, double> k_freq;         ///< converter id -> pu s
    std::map<std::string, double> k_volt;         ///< converter id -> pu per pu-V
    double consensus_tc = 0.1;
    std::map<std::string, double> virtual_cap;  ///< dc bus id -> pu s
    double virtual_inertia = 1e-2;
    double comm_delay = 0.0;
    DisturbanceSchedule disturbances;
    SimSettings sim;
    std::map<std::string, SubsystemBases> bases;  ///< subsystem id -> bases
    std::vector<std::string> outputs;             ///< empty = all targets
};

inline ControlMode mode_from_string(const std::string& s) {
    if (s == "primary") return ControlMode::Primary;
    if (s == "dual-droop") return ControlMode::DualDroop;
    if (s == "secondary") return ControlMode::Secondary;
    throw SchemaError("controllers.mode", "expected primary|dual-droop|secondary, got " + s);
}

/// Runtime objects assembled from a scenario.
struct BuiltScenario {
    ValidatedNetwork net;
    ControllerConfig cfg;
    DisturbanceSchedule disturbances;
    SimSettings sim;
};

inline BuiltScenario build_scenario(const Scenario& sc) {
    BuiltScenario b;
    b.net = validate_network(sc.network);
    b.cfg = ControllerConfig::defaults_for(b.net, mode_from_string(sc.mode));
    b.cfg.freq_volt_ratio = sc.freq_volt_ratio;
    b.cfg.virtual_inertia = sc.virtual_inertia;
    b.cfg.comm_delay = sc.comm_delay;
    b.cfg.consensus_tc.setConstant(sc.consensus_tc);
    for (const auto& [id, val] : sc.p_gen_nominal) {
        if (!b.net.has_bus(id))
            throw SchemaError("controllers.p_g_nom_pu." + id, "not a bus");
        b.cfg.p_gen_nominal(b.net.bus_index(id)) = val;
    }
    auto converter_index = [&](const std::string& id, const char* key) {
        for (std::size_t x = 0; x < b.net.converters().size(); ++x)
            if (b.net.converters()[x].id == id) return static_cast<Eigen::Index>(x);
        throw SchemaError(std::string("controllers.") + key + "." + id, "not a converter");
    };
    for (const auto& [id, val] : sc.k_freq)
        b.cfg.k_freq(converter_index(id, "k_omega_pu_s")) = val;
    for (const auto& [id, val] : sc.k_volt)
        b.cfg.k_volt(converter_index(id, "k_v_pu")) = val;
    for (const auto& [id, val] : sc.virtual_cap) {
        if (!b.net.has_bus(id) || b.net.dc_slot(b.net.bus_index(id)) < 0)
            throw SchemaError("controllers.c_virtual_pu_s." + id, "not a DC bus");
        b.cfg.virtual_cap(b.net.dc_slot(b.net.bus_index(id))) = val;
    }
    b.cfg.validate(b.net);
    b.disturbances = sc.disturbances;
    b.disturbances.validate(b.net);
    b.sim = sc.sim;
    return b;
}

namespace detail {

using json = nlohmann::ordered_json;

inline void expect_object(const json& j, const std::string& path) {
    if (!j.is_object()) throw SchemaError(path, "expected an object");
}

inline void expect_keys(const json& j, const std::string& path,
                        std::initializer_list<const char*> allowed) {
    expect_object(j, path);
    for (const auto& [key, _] : j.items()) {
        bool ok = false;
        for (const char* a : allowed)
            if (key == a) ok = true;
        if (!ok) throw SchemaError(path + "." + key, "unknown key");
    }
}

inline double get_number(const json& j, const std::string& path) {
    if (!j.is_number()) throw SchemaError(path, "expected a number");
    return j.get<double>();
}

inline double require_number(const json& obj, const char* key, const std::string& path) {
    if (!obj.contains(key)) throw SchemaError(path + "." + key, "missing");
    return get_number(obj.at(key), path + "." + key);
}

inline double optional_number(const json& obj, const char* key, const std::string& path,
                              double fallback) {
    if (!obj.contains(key)) return fallback;
    return get_number(obj.at(key), path + "." + key);
}

inline std::string require_string(const json& obj, const char* key, const std::string& path) {
    if (!obj.contains(key) || !obj.at(key).is_string())
        throw SchemaError(path + "." + key, "expected a string");
    return obj.at(key).get<std::string>();
}

inline std::map<std::string, double> number_map(const json& obj, const std::string& path) {
    expect_object(obj, path);
    std::map<std::string, double> out;
    for (const auto& [key, val] : obj.items()) out[key] = get_number(val, path + "." + key);
    return out;
}

inline NetworkSpec parse_network(const json& j) {
    expect_keys(j, "network", {"buses", "lines", "converters", "comm_edges"});
    NetworkSpec spec;
    if (!j.contains("buses") || !j.at("buses").is_array())
        throw SchemaError("network.buses", "expected an array");
    int k = 0;
    for (const auto& bj : j.at("buses")) {
        std::string path = "network.buses[" + std::to_string(k++) + "]";
        expect_keys(bj, path,
                    {"id", "kind", "subsystem", "m_pu_s2", "d_pu_s", "c_pu_s", "q_pu",
                     "p_load_pu"});
        Bus b;
        b.id = require_string(bj, "id", path);
        b.subsystem = require_string(bj, "subsystem", path);
        std::string kind = require_string(bj, "kind", path);
        if (kind == "ac_generator")
            b.kind = BusKind::AcGenerator;
        else if (kind == "ac_converter")
            b.kind = BusKind::AcConverter;
        else if (kind == "dc")
            b.kind = BusKind::Dc;
        else
            throw SchemaError(path + ".kind", "expected ac_generator|ac_converter|dc");
        b.inertia = optional_number(bj, "m_pu_s2", path, 0.0);
        b.damping = optional_number(bj, "d_pu_s", path, 0.0);
        b.capacitance = optional_number(bj, "c_pu_s", path, 0.0);
        b.inv_cost = optional_number(bj, "q_pu", path, 0.0);
        b.load = optional_number(bj, "p_load_pu", path, 0.0);
        if (b.kind == BusKind::AcGenerator && !(b.inertia > 0.0))
            throw SchemaError(path + ".m_pu_s2", "AC generator bus needs m_pu_s2 > 0");
        if (b.damping < 0.0) throw SchemaError(path + ".d_pu_s", "must be >= 0");
        if (b.kind == BusKind::Dc && !(b.capacitance > 0.0))
            throw SchemaError(path + ".c_pu_s", "DC bus needs c_pu_s > 0");
        if (b.capacitance < 0.0) throw SchemaError(path + ".c_pu_s", "must be >= 0");
        if (b.inv_cost < 0.0) throw SchemaError(path + ".q_pu", "must be >= 0");
        spec.buses.push_back(std::move(b));
    }
    k = 0;
    if (j.contains("lines")) {
        if (!j.at("lines").is_array()) throw SchemaError("network.lines", "expected an array");
        for (const auto& lj : j.at("lines")) {
            std::string path = "network.lines[" + std::to_string(k++) + "]";
            expect_keys(lj, path, {"from", "to", "kind", "b_pu", "g_pu"});
            Line l;
            l.from = require_string(lj, "from", path);
            l.to = require_string(lj, "to", path);
            std::string kind = require_string(lj, "kind", path);
            if (kind == "ac") {
                l.kind = Domain::Ac;
                l.susceptance = require_number(lj, "b_pu", path);
                if (!(l.susceptance > 0.0)) throw SchemaError(path + ".b_pu", "must be > 0");
                if (lj.contains("g_pu")) throw SchemaError(path + ".g_pu", "AC lines take b_pu");
            } else if (kind == "dc") {
                l.kind = Domain::Dc;
                l.conductance = require_number(lj, "g_pu", path);
                if (!(l.conductance > 0.0)) throw SchemaError(path + ".g_pu", "must be > 0");
                if (lj.contains("b_pu")) throw SchemaError(path + ".b_pu", "DC lines take g_pu");
            } else {
                throw SchemaError(path + ".kind", "expected ac|dc");
            }
            spec.lines.push_back(std::move(l));
        }
    }
    k = 0;
    if (j.contains("converters")) {
        if (!j.at("converters").is_array())
            throw SchemaError("network.converters", "expected an array");
        for (const auto& cj : j.at("converters")) {
            std::string path = "network.converters[" + std::to_string(k++) + "]";
            expect_keys(cj, path, {"id", "ac_bus", "dc_bus"});
            Converter c;
            c.id = require_string(cj, "id", path);
            c.ac_bus = require_string(cj, "ac_bus", path);
            c.dc_bus = require_string(cj, "dc_bus", path);
            spec.converters.push_back(std::move(c));
        }
    }
    k = 0;
    if (j.contains("comm_edges")) {
        if (!j.at("comm_edges").is_array())
            throw SchemaError("network.comm_edges", "expected an array");
        for (const auto& ej : j.at("comm_edges")) {
            std::string path = "network.comm_edges[" + std::to_string(k++) + "]";
            if (!ej.is_array() || ej.size() != 2 || !ej[0].is_string() || !ej[1].is_string())
                throw SchemaError(path, "expected a pair of bus ids");
            spec.comm_edges.emplace_back(ej[0].get<std::string>(), ej[1].get<std::string>());
        }
    }
    return spec;
}

}  // namespace detail

/// Parses a scenario document. Rejects unknown keys, enforces field-level
/// ranges (SchemaError with the offending path), and validates the network
/// (ValidationError). Malformed JSON raises ParseError with a line number.
inline Scenario parse_scenario_text(const std::string& text) {
    detail::json doc;
    try {
        doc = detail::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        int line = 1;
        for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i)
            if (text[i] == '\n') ++line;
        throw ParseError(line, e.what());
    }

    detail::expect_keys(doc, "$",
                        {"schema", "network", "controllers", "disturbances", "sim", "bases",
                         "outputs"});
    if (detail::require_string(doc, "schema", "$") != kScenarioSchema)
        throw SchemaError("schema", std::string("expected ") + kScenarioSchema);
    if (!doc.contains("network")) throw SchemaError("network", "missing");

    Scenario sc;
    sc.network = detail::parse_network(doc.at("network"));

    if (doc.contains("controllers")) {
        const auto& cj = doc.at("controllers");
        detail::expect_keys(cj, "controllers",
                            {"mode", "m_rad_s_per_pu", "p_g_nom_pu", "k_omega_pu_s", "k_v_pu",
                             "t_xi_s", "c_virtual_pu_s", "m_eps_pu_s2", "comm_delay_s"});
        if (cj.contains("mode")) sc.mode = detail::require_string(cj, "mode", "controllers");
        mode_from_string(sc.mode);
        sc.freq_volt_ratio = detail::optional_number(cj, "m_rad_s_per_pu", "controllers", 1.0);
        if (!(sc.freq_volt_ratio > 0.0))
            throw SchemaError("controllers.m_rad_s_per_pu", "must be > 0");
        if (cj.contains("p_g_nom_pu"))
            sc.p_gen_nominal = detail::number_map(cj.at("p_g_nom_pu"), "controllers.p_g_nom_pu");
        if (cj.contains("k_omega_pu_s"))
            sc.k_freq = detail::number_map(cj.at("k_omega_pu_s"), "controllers.k_omega_pu_s");
        if (cj.contains("k_v_pu"))
            sc.k_volt = detail::number_map(cj.at("k_v_pu"), "controllers.k_v_pu");
        sc.consensus_tc = detail::optional_number(cj, "t_xi_s", "controllers", 0.1);
        if (!(sc.consensus_tc > 0.0)) throw SchemaError("controllers.t_xi_s", "must be > 0");
        if (cj.contains("c_virtual_pu_s")) {
            sc.virtual_cap =
                detail::number_map(cj.at("c_virtual_pu_s"), "controllers.c_virtual_pu_s");
            for (const auto& [id, v] : sc.virtual_cap)
                if (v < 0.0)
                    throw SchemaError("controllers.c_virtual_pu_s." + id, "must be >= 0");
        }
        sc.virtual_inertia = detail::optional_number(cj, "m_eps_pu_s2", "controllers", 1e-2);
        if (!(sc.virtual_inertia > 0.0))
            throw SchemaError("controllers.m_eps_pu_s2", "must be > 0");
        sc.comm_delay = detail::optional_number(cj, "comm_delay_s", "controllers", 0.0);
        if (sc.comm_delay < 0.0) throw SchemaError("controllers.comm_delay_s", "must be >= 0");
    }

    if (doc.contains("disturbances")) {
        if (!doc.at("disturbances").is_array())
            throw SchemaError("disturbances", "expected an array");
        int k = 0;
        for (const auto& dj : doc.at("disturbances")) {
            std::string path = "disturbances[" + std::to_string(k++) + "]";
            detail::expect_keys(dj, path, {"t_s", "bus", "delta_p_load_pu"});
            Disturbance d;
            d.time = detail::require_number(dj, "t_s", path);
            d.bus = detail::require_string(dj, "bus", path);
            d.delta_load = detail::require_number(dj, "delta_p_load_pu", path);
            if (d.time < 0.0) throw SchemaError(path + ".t_s", "must be >= 0");
            sc.disturbances.steps.push_back(std::move(d));
        }
    }

    if (doc.contains("sim")) {
        const auto& sj = doc.at("sim");
        detail::expect_keys(sj, "sim", {"t_end_s", "dt_s", "record_every"});
        sc.sim.t_end = detail::optional_number(sj, "t_end_s", "sim", sc.sim.t_end);
        sc.sim.dt = detail::optional_number(sj, "dt_s", "sim", sc.sim.dt);
        double re = detail::optional_number(sj, "record_every", "sim",
                                            static_cast<double>(sc.sim.record_every));
        sc.sim.record_every = static_cast<int>(re);
        if (!(sc.sim.t_end > 0.0)) throw SchemaError("sim.t_end_s", "must be > 0");
        if (!(sc.sim.dt > 0.0)) throw SchemaError("sim.dt_s", "must be > 0");
        if (sc.sim.record_every < 1) throw SchemaError("sim.record_every", "must be >= 1");
    }

    if (doc.contains("bases")) {
        detail::expect_object(doc.at("bases"), "bases");
        for (const auto& [key, bj] : doc.at("bases").items()) {
            std::string path = "bases." + key;
            detail::expect_keys(bj, path, {"s_base_va", "v_base_v"});
            SubsystemBases b;
            b.s_base_va = detail::require_number(bj, "s_base_va", path);
            b.v_base_v = detail::require_number(bj, "v_base_v", path);
            if (!(b.s_base_va > 0.0)) throw SchemaError(path + ".s_base_va", "must be > 0");
            if (!(b.v_base_v > 0.0)) throw SchemaError(path + ".v_base_v", "must be > 0");
            sc.bases[key] = b;
        }
    }

    if (doc.contains("outputs")) {
        if (!doc.at("outputs").is_array()) throw SchemaError("outputs", "expected an array");
        for (const auto& oj : doc.at("outputs")) {
            if (!oj.is_string()) throw SchemaError("outputs", "expected strings");
            sc.outputs.push_back(oj.get<std::string>());
        }
    }

    // Cross references and structural validation.
    for (const auto& d : sc.disturbances.steps) {
        bool found = false;
        for (const auto& b : sc.network.buses)
            if (b.id == d.bus) found = true;
        if (!found) throw SchemaError("disturbances", "unknown bus " + d.bus);
    }
    (void)build_scenario(sc);
    return sc;
}

inline Scenario parse_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError(0, "cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_scenario_text(ss.str());
}

inline nlohmann::ordered_json serialize_scenario(const Scenario& sc) {
    using detail::json;
    json doc;
    doc["schema"] = kScenarioSchema;
    json buses = json::array();
    for (const auto& b : sc.network.buses) {
        json bj;
        bj["id"] = b.id;
        switch (b.kind) {
            case BusKind::AcGenerator: bj["kind"] = "ac_generator"; break;
            case BusKind::AcConverter: bj["kind"] = "ac_converter"; break;
            case BusKind::Dc: bj["kind"] = "dc"; break;
        }
        bj["subsystem"] = b.subsystem;
        if (b.kind == BusKind::AcGenerator) {
            bj["m_pu_s2"] = b.inertia;
            bj["d_pu_s"] = b.damping;
        }
        if (b.kind == BusKind::Dc) bj["c_pu_s"] = b.capacitance;
        if (b.inv_cost != 0.0) bj["q_pu"] = b.inv_cost;
        if (b.load != 0.0) bj["p_load_pu"] = b.load;
        buses.push_back(bj);
    }
    doc["network"]["buses"] = buses;
    json lines = json::array();
    for (const auto& l : sc.network.lines) {
        json lj;
        lj["from"] = l.from;
        lj["to"] = l.to;
        lj["kind"] = (l.kind == Domain::Ac) ? "ac" : "dc";
        if (l.kind == Domain::Ac)
            lj["b_pu"] = l.susceptance;
        else
            lj["g_pu"] = l.conductance;
        lines.push_back(lj);
    }
    doc["network"]["lines"] = lines;
    json convs = json::array();
    for (const auto& c : sc.network.converters)
        convs.push_back({{"id", c.id}, {"ac_bus", c.ac_bus}, {"dc_bus", c.dc_bus}});
    doc["network"]["converters"] = convs;
    json comm = json::array();
    for (const auto& [a, b] : sc.network.comm_edges) comm.push_back(json::array({a, b}));
    doc["network"]["comm_edges"] = comm;

    json cj;
    cj["mode"] = sc.mode;
    cj["m_rad_s_per_pu"] = sc.freq_volt_ratio;
    if (!sc.p_gen_nominal.empty()) cj["p_g_nom_pu"] = sc.p_gen_nominal;
    if (!sc.k_freq.empty()) cj["k_omega_pu_s"] = sc.k_freq;
    if (!sc.k_volt.empty()) cj["k_v_pu"] = sc.k_volt;
    cj["t_xi_s"] = sc.consensus_tc;
    if (!sc.virtual_cap.empty()) cj["c_virtual_pu_s"] = sc.virtual_cap;
    cj["m_eps_pu_s2"] = sc.virtual_inertia;
    cj["comm_delay_s"] = sc.comm_delay;
    doc["controllers"] = cj;

    json dist = json::array();
    for (const auto& d : sc.disturbances.steps)
        dist.push_back({{"t_s", d.time}, {"bus", d.bus}, {"delta_p_load_pu", d.delta_load}});
    doc["disturbances"] = dist;

    doc["sim"] = {{"t_end_s", sc.sim.t_end},
                  {"dt_s", sc.sim.dt},
                  {"record_every", sc.sim.record_every}};
    if (!sc.bases.empty()) {
        json bj;
        for (const auto& [id, b] : sc.bases)
            bj[id] = {{"s_base_va", b.s_base_va}, {"v_base_v", b.v_base_v}};
        doc["bases"] = bj;
    }
    if (!sc.outputs.empty()) doc["outputs"] = sc.outputs;
    return doc;
}

/// Per-unit translation of the two-DC-subsystem case study: a 4 MVA machine
/// on a three-bus AC ring segment flanked by two interlinking converters,
/// each feeding a three-bus DC chain with two source buses, equal-cost droop
/// across all nine sources, and a +/-3.6 MW load-step pair.
inline Scenario preset_case_study() {
    const SubsystemBases bases{4.0e6, 6000.0};
    const double omega_base = 2.0 * M_PI * 50.0;
    const double g_line = units::conductance_pu(0.01, bases);             // 0.01 ohm DC lines
    const double b_line = units::susceptance_pu(omega_base * 1e-4, bases);  // 0.1 mH AC lines
    const double load_60ohm = units::power_pu(6000.0 * 6000.0 / 60.0, bases);
    const double load_1mw = units::power_pu(1.0e6, bases);
    const double step_pu = units::power_pu(3.6e6, bases);
    // 250 mF at every DC bus keeps the fastest grid mode inside the explicit
    // integrator's stability region at dt = 1e-3; converter buses add their
    // 300 mF DC-link capacitance on top.
    const double c_bus = units::capacitance_pu_s(0.25, bases);
    const double c_conv = c_bus + units::capacitance_pu_s(0.30, bases);
    const double machine_m = 2.0 * 1.0 / omega_base;  // H = 1 s
    // Includes the machine's proportional control action; the secondary
    // layer dissipates only through this term.
    const double machine_d = 0.25;
    const double q_source = 0.25;  // equal marginal cost per source; DC buses host two

    Scenario sc;
    sc.mode = "primary";
    sc.freq_volt_ratio = units::freq_volt_ratio_per_pu(0.002, bases);
    sc.consensus_tc = 0.01;
    sc.virtual_inertia = 1e-2;

    auto dc_bus = [&](const std::string& id, const std::string& sub, double cap, double q) {
        Bus b;
        b.id = id;
        b.kind = BusKind::Dc;
        b.subsystem = sub;
        b.capacitance = cap;
        b.inv_cost = q;
        b.load = load_60ohm;
        return b;
    };
    sc.network.buses.push_back(dc_bus("1", "dc1", c_bus, 2.0 * q_source));
    sc.network.buses.push_back(dc_bus("2", "dc1", c_bus, 0.0));
    sc.network.buses.push_back(dc_bus("3", "dc1", c_conv, 2.0 * q_source));
    {
        Bus b;
        b.id = "4";
        b.kind = BusKind::AcConverter;
        b.subsystem = "ac1";
        b.load = load_60ohm;
        sc.network.buses.push_back(b);
        b = Bus{};
        b.id = "5";
        b.kind = BusKind::AcGenerator;
        b.subsystem = "ac1";
        b.inertia = machine_m;
        b.damping = machine_d;
        b.inv_cost = q_source;
        b.load = load_1mw;
        sc.network.buses.push_back(b);
        b = Bus{};
        b.id = "6";
        b.kind = BusKind::AcConverter;
        b.subsystem = "ac1";
        b.load = load_60ohm;
        sc.network.buses.push_back(b);
    }
    sc.network.buses.push_back(dc_bus("7", "dc2", c_conv, 2.0 * q_source));
    sc.network.buses.push_back(dc_bus("8", "dc2", c_bus, 0.0));
    sc.network.buses.push_back(dc_bus("9", "dc2", c_bus, 2.0 * q_source));

    auto line = [&](const std::string& a, const std::string& b, Domain d) {
        Line l;
        l.from = a;
        l.to = b;
        l.kind = d;
        if (d == Domain::Ac)
            l.susceptance = b_line;
        else
            l.conductance = g_line;
        return l;
    };
    sc.network.lines.push_back(line("1", "2", Domain::Dc));
    sc.network.lines.push_back(line("2", "3", Domain::Dc));
    sc.network.lines.push_back(line("4", "5", Domain::Ac));
    sc.network.lines.push_back(line("5", "6", Domain::Ac));
    sc.network.lines.push_back(line("7", "8", Domain::Dc));
    sc.network.lines.push_back(line("8", "9", Domain::Dc));

    sc.network.converters.push_back(Converter{"ilc1", "4", "3"});
    sc.network.converters.push_back(Converter{"ilc2", "6", "7"});

    sc.network.comm_edges = {{"1", "3"}, {"3", "5"}, {"5", "7"}, {"7", "9"}};

    // Dual-droop comparison gains: 2 MW/(rad/s) and 4 kW/V.
    const double k_freq = units::droop_pu_s(2.0e6, bases);
    const double k_volt = units::voltage_gain_pu(4.0e3, bases);
    sc.k_freq = {{"ilc1", k_freq}, {"ilc2", k_freq}};
    sc.k_volt = {{"ilc1", k_volt}, {"ilc2", k_volt}};

    // Nominal dispatch covers the nominal loads at nominal frequency.
    const double total_load = 6.0 * load_60ohm + 2.0 * load_60ohm + load_1mw;
    const double q_total = 9.0 * q_source;
    for (const char* id : {"1", "3", "7", "9"})
        sc.p_gen_nominal[id] = 2.0 * q_source * total_load / q_total;
    sc.p_gen_nominal["5"] = q_source * total_load / q_total;

    sc.disturbances.steps.push_back(Disturbance{1.0, "3", step_pu});
    sc.disturbances.steps.push_back(Disturbance{13.0, "7", -step_pu});

    sc.sim.t_end = 25.0;
    sc.sim.dt = 1e-3;
    sc.sim.record_every = 1;
    sc.bases = {{"ac1", bases}, {"dc1", bases}, {"dc2", bases}};
    return sc;
}

}  // namespace hybridgrid
