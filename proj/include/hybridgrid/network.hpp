#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hybridgrid/errors.hpp"

namespace hybridgrid {

enum class BusKind { AcGenerator, AcConverter, Dc };
enum class Domain { Ac, Dc };

/// A network bus. Per-unit deviation model: loads and generation are power
/// deviations, voltages are per-unit deviations, frequencies are rad/s
/// deviations from nominal.
struct Bus {
    std::string id;
    BusKind kind = BusKind::AcGenerator;
    std::string subsystem;
    double inertia = 0.0;      ///< M_j [pu s^2], AC generator buses only, > 0
    double damping = 0.0;      ///< D_j [pu s], AC generator buses only, >= 0
    double capacitance = 0.0;  ///< C_j [pu s], DC buses only, > 0
    double inv_cost = 0.0;     ///< droop gain / inverse cost q_j [pu s], >= 0, 0 at converter buses
    double load = 0.0;         ///< nominal load p^L_j [pu]
};

struct Line {
    std::string from, to;
    Domain kind = Domain::Ac;
    double susceptance = 0.0;  ///< B_ij [pu], AC lines, > 0
    double conductance = 0.0;  ///< G_ij [pu], DC lines, > 0
};

/// Interlinking converter joining one AC converter bus to one DC bus.
struct Converter {
    std::string id, ac_bus, dc_bus;
};

struct NetworkSpec {
    std::vector<Bus> buses;
    std::vector<Line> lines;
    std::vector<Converter> converters;
    /// Undirected communication links between controllable buses.
    std::vector<std::pair<std::string, std::string>> comm_edges;
};

struct Subsystem {
    std::string id;
    Domain domain = Domain::Ac;
    std::vector<int> buses;  ///< bus indices, input order
};

/// Edge with resolved endpoints. Orientation is taken from input order; a
/// positive flow on edge (i -> j) is power moving from bus i to bus j.
struct NetworkEdge {
    int from = -1, to = -1;
    int subsystem = -1;
    double weight = 0.0;  ///< B_ij for AC edges, G_ij for DC edges
};

struct ConverterView {
    std::string id;
    int ac_bus = -1, dc_bus = -1;
};

class ValidatedNetwork;
inline ValidatedNetwork validate_network(const NetworkSpec& spec);

/// Immutable topology handle with contiguous index maps: one angle slot per AC
/// edge, one frequency slot per AC generator bus, one voltage slot per DC bus,
/// one consensus slot per communication node. Safe to share across threads.
class ValidatedNetwork {
public:
    /// Empty handle; fill via validate_network.
    ValidatedNetwork() = default;

    const NetworkSpec& spec() const { return spec_; }

    int n_buses() const { return static_cast<int>(spec_.buses.size()); }
    const Bus& bus(int i) const { return spec_.buses.at(static_cast<std::size_t>(i)); }
    int bus_index(const std::string& id) const {
        auto it = bus_index_.find(id);
        if (it == bus_index_.end()) throw DimensionMismatch("unknown bus id: " + id);
        return it->second;
    }
    bool has_bus(const std::string& id) const { return bus_index_.count(id) > 0; }

    const std::vector<Subsystem>& subsystems() const { return subsystems_; }
    int subsystem_of(int bus) const { return subsystem_of_[static_cast<std::size_t>(bus)]; }
    int subsystem_index(const std::string& id) const {
        for (std::size_t k = 0; k < subsystems_.size(); ++k)
            if (subsystems_[k].id == id) return static_cast<int>(k);
        throw UnknownSubsystem(id);
    }

    const std::vector<NetworkEdge>& ac_edges() const { return ac_edges_; }
    const std::vector<NetworkEdge>& dc_edges() const { return dc_edges_; }

    const std::vector<int>& gen_buses() const { return gen_buses_; }
    const std::vector<int>& dc_buses() const { return dc_buses_; }
    /// Slot of `bus` in the generator (omega) index map, -1 if not a generator bus.
    int gen_slot(int bus) const { return gen_slot_[static_cast<std::size_t>(bus)]; }
    /// Slot of `bus` in the DC (voltage) index map, -1 if not a DC bus.
    int dc_slot(int bus) const { return dc_slot_[static_cast<std::size_t>(bus)]; }

    const std::vector<ConverterView>& converters() const { return converters_; }
    /// Converter index attached at an AC converter bus, -1 if none.
    int converter_at_ac(int bus) const { return conv_at_ac_[static_cast<std::size_t>(bus)]; }
    /// Converter index attached at a DC bus, -1 if none.
    int converter_at_dc(int bus) const { return conv_at_dc_[static_cast<std::size_t>(bus)]; }

    /// Communication nodes: buses with inv_cost > 0 plus any bus named in
    /// comm_edges, ordered by bus index.
    const std::vector<int>& comm_nodes() const { return comm_nodes_; }
    int comm_slot(int bus) const { return comm_slot_[static_cast<std::size_t>(bus)]; }
    /// Adjacency among communication nodes, by comm slot.
    const std::vector<std::vector<int>>& comm_adjacency() const { return comm_adjacency_; }

    /// DC subsystem indices (into subsystems()), order of first appearance.
    const std::vector<int>& dc_subsystems() const { return dc_subsystems_; }
    /// Slot of subsystem `k` in the DC-subsystem (v_bar) index map, -1 if AC.
    int dc_subsystem_slot(int subsystem) const {
        return dc_subsystem_slot_[static_cast<std::size_t>(subsystem)];
    }

    /// Bus-by-edge incidence matrix of an AC subsystem: the column of edge
    /// (i -> j) carries +1 at row i and -1 at row j. Rows follow the
    /// subsystem's bus list, columns its AC edges in input order.
    Eigen::MatrixXd incidence_matrix(const std::string& subsystem_id) const {
        int k = subsystem_index_checked(subsystem_id, Domain::Ac);
        const auto& sub = subsystems_[static_cast<std::size_t>(k)];
        std::map<int, int> local;
        for (std::size_t r = 0; r < sub.buses.size(); ++r) local[sub.buses[r]] = static_cast<int>(r);
        std::vector<const NetworkEdge*> edges;
        for (const auto& e : ac_edges_)
            if (e.subsystem == k) edges.push_back(&e);
        Eigen::MatrixXd a = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(sub.buses.size()),
                                                  static_cast<Eigen::Index>(edges.size()));
        for (std::size_t c = 0; c < edges.size(); ++c) {
            a(local.at(edges[c]->from), static_cast<Eigen::Index>(c)) = 1.0;
            a(local.at(edges[c]->to), static_cast<Eigen::Index>(c)) = -1.0;
        }
        return a;
    }

    /// Conductance-weighted graph Laplacian of a DC subsystem: symmetric,
    /// positive semidefinite, zero row sums.
    Eigen::MatrixXd dc_conductance_matrix(const std::string& subsystem_id) const {
        int k = subsystem_index_checked(subsystem_id, Domain::Dc);
        const auto& sub = subsystems_[static_cast<std::size_t>(k)];
        std::map<int, int> local;
        for (std::size_t r = 0; r < sub.buses.size(); ++r) local[sub.buses[r]] = static_cast<int>(r);
        Eigen::MatrixXd g = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(sub.buses.size()),
                                                  static_cast<Eigen::Index>(sub.buses.size()));
        for (const auto& e : dc_edges_) {
            if (e.subsystem != k) continue;
            int i = local.at(e.from), j = local.at(e.to);
            g(i, i) += e.weight;
            g(j, j) += e.weight;
            g(i, j) -= e.weight;
            g(j, i) -= e.weight;
        }
        return g;
    }

    /// Unweighted Laplacian of the communication graph over comm_nodes():
    /// degree on the diagonal, -1 on communication edges.
    const Eigen::MatrixXd& comm_laplacian() const { return comm_laplacian_; }

    // Cached parameter vectors.
    const Eigen::VectorXd& nominal_load() const { return nominal_load_; }  ///< per bus
    const Eigen::VectorXd& inv_cost() const { return inv_cost_; }          ///< per bus
    const Eigen::VectorXd& inertia() const { return inertia_; }            ///< per gen slot
    const Eigen::VectorXd& damping() const { return damping_; }            ///< per gen slot
    const Eigen::VectorXd& capacitance() const { return capacitance_; }    ///< per dc slot

private:
    friend ValidatedNetwork validate_network(const NetworkSpec& spec);

    int subsystem_index_checked(const std::string& id, Domain want) const {
        for (std::size_t k = 0; k < subsystems_.size(); ++k) {
            if (subsystems_[k].id == id) {
                if (subsystems_[k].domain != want) throw UnknownSubsystem(id);
                return static_cast<int>(k);
            }
        }
        throw UnknownSubsystem(id);
    }

    NetworkSpec spec_;
    std::map<std::string, int> bus_index_;
    std::vector<Subsystem> subsystems_;
    std::vector<int> subsystem_of_;
    std::vector<NetworkEdge> ac_edges_, dc_edges_;
    std::vector<int> gen_buses_, dc_buses_;
    std::vector<int> gen_slot_, dc_slot_;
    std::vector<ConverterView> converters_;
    std::vector<int> conv_at_ac_, conv_at_dc_;
    std::vector<int> comm_nodes_;
    std::vector<int> comm_slot_;
    std::vector<std::vector<int>> comm_adjacency_;
    std::vector<int> dc_subsystems_;
    std::vector<int> dc_subsystem_slot_;
    Eigen::MatrixXd comm_laplacian_;
    Eigen::VectorXd nominal_load_, inv_cost_, inertia_, damping_, capacitance_;
};

namespace detail {

/// Connected-components check over an edge list; returns the first node not
/// reachable from nodes[0], or -1 if connected.
inline int first_unreachable(const std::vector<int>& nodes,
                             const std::vector<std::pair<int, int>>& edges) {
    if (nodes.empty()) return -1;
    std::map<int, std::vector<int>> adj;
    for (int n : nodes) adj[n];
    for (const auto& [a, b] : edges) {
        adj[a].push_back(b);
        adj[b].push_back(a);
    }
    std::map<int, bool> seen;
    std::vector<int> stack{nodes.front()};
    seen[nodes.front()] = true;
    while (!stack.empty()) {
        int n = stack.back();
        stack.pop_back();
        for (int m : adj[n]) {
            if (!seen[m]) {
                seen[m] = true;
                stack.push_back(m);
            }
        }
    }
    for (int n : nodes)
        if (!seen[n]) return n;
    return -1;
}

}  // namespace detail

/// Validates the structural invariants of a NetworkSpec and builds the index
/// maps. Pure: re-validating an already valid spec returns an equal handle.
inline ValidatedNetwork validate_network(const NetworkSpec& spec) {
    ValidatedNetwork net;
    net.spec_ = spec;
    const int n = static_cast<int>(spec.buses.size());
    if (n == 0) throw ValidationError(ValidationError::Kind::BadField, "", "network has no buses");

    // Bus-level field invariants.
    for (int i = 0; i < n; ++i) {
        const Bus& b = spec.buses[static_cast<std::size_t>(i)];
        if (b.id.empty())
            throw ValidationError(ValidationError::Kind::BadField, b.id, "bus id must be non-empty");
        if (net.bus_index_.count(b.id))
            throw ValidationError(ValidationError::Kind::BadField, b.id, "duplicate bus id");
        net.bus_index_[b.id] = i;
        if (b.subsystem.empty())
            throw ValidationError(ValidationError::Kind::BadField, b.id, "bus needs a subsystem id");
        if (b.inv_cost < 0.0)
            throw ValidationError(ValidationError::Kind::BadField, b.id, "inv_cost must be >= 0");
        switch (b.kind) {
            case BusKind::AcGenerator:
                if (b.inertia <= 0.0)
                    throw ValidationError(ValidationError::Kind::BadField, b.id,
                                          "AC generator bus needs inertia > 0");
                if (b.damping < 0.0)
                    throw ValidationError(ValidationError::Kind::BadField, b.id,
                                          "damping must be >= 0");
                if (b.capacitance != 0.0)
                    throw ValidationError(ValidationError::Kind::BadField, b.id,
                                          "capacitance is a DC-bus field");
                break;
            case BusKind::AcConverter:
                if (b.inv_cost != 0.0)
                    throw ValidationError(ValidationError::Kind::NonzeroCostAtConverterBus, b.id,
                                          "converter buses carry no generation");
                if (b.inertia != 0.0 || b.damping != 0.0 || b.capacitance != 0.0)
                    throw ValidationError(ValidationError::Kind::BadField, b.id,
                                          "converter buses carry no inertia/damping/capacitance");
                break;
            case BusKind::Dc:
                if (b.capacitance <= 0.0)
                    throw ValidationError(ValidationError::Kind::BadField, b.id,
                                          "DC bus needs capacitance > 0");
                if (b.inertia != 0.0 || b.damping != 0.0)
                    throw ValidationError(ValidationError::Kind::BadField, b.id,
                                          "inertia/damping are AC-generator fields");
                break;
        }
    }

    // Subsystems, in order of first appearance; uniform domain within each.
    net.subsystem_of_.assign(static_cast<std::size_t>(n), -1);
    for (int i = 0; i < n; ++i) {
        const Bus& b = spec.buses[static_cast<std::size_t>(i)];
        Domain d = (b.kind == BusKind::Dc) ? Domain::Dc : Domain::Ac;
        int k = -1;
        for (std::size_t s = 0; s < net.subsystems_.size(); ++s)
            if (net.subsystems_[s].id == b.subsystem) k = static_cast<int>(s);
        if (k < 0) {
            k = static_cast<int>(net.subsystems_.size());
            net.subsystems_.push_back(Subsystem{b.subsystem, d, {}});
        } else if (net.subsystems_[static_cast<std::size_t>(k)].domain != d) {
            throw ValidationError(ValidationError::Kind::MixedDomainSubsystem, b.id,
                                  "subsystem " + b.subsystem + " mixes AC and DC buses");
        }
        net.subsystems_[static_cast<std::size_t>(k)].buses.push_back(i);
        net.subsystem_of_[static_cast<std::size_t>(i)] = k;
    }
    for (std::size_t k = 0; k < net.subsystems_.size(); ++k) {
        if (net.subsystems_[k].domain == Domain::Dc) {
            net.dc_subsystem_slot_.push_back(static_cast<int>(net.dc_subsystems_.size()));
            net.dc_subsystems_.push_back(static_cast<int>(k));
        } else {
            net.dc_subsystem_slot_.push_back(-1);
        }
    }

    // Lines: endpoints must exist, share a subsystem, and match domain.
    for (const Line& l : spec.lines) {
        if (!net.bus_index_.count(l.from) || !net.bus_index_.count(l.to))
            throw ValidationError(ValidationError::Kind::BadField, l.from + "-" + l.to,
                                  "line endpoint is not a bus");
        int i = net.bus_index_.at(l.from), j = net.bus_index_.at(l.to);
        if (i == j)
            throw ValidationError(ValidationError::Kind::BadField, l.from, "self-loop line");
        const Bus& bi = spec.buses[static_cast<std::size_t>(i)];
        const Bus& bj = spec.buses[static_cast<std::size_t>(j)];
        Domain di = (bi.kind == BusKind::Dc) ? Domain::Dc : Domain::Ac;
        Domain dj = (bj.kind == BusKind::Dc) ? Domain::Dc : Domain::Ac;
        if (di != l.kind || dj != l.kind || bi.subsystem != bj.subsystem)
            throw ValidationError(ValidationError::Kind::MixedDomainLine, l.from + "-" + l.to,
                                  "line endpoints must share a subsystem of matching domain");
        if (l.kind == Domain::Ac) {
            if (l.susceptance <= 0.0)
                throw ValidationError(ValidationError::Kind::BadField, l.from + "-" + l.to,
                                      "AC line needs susceptance > 0");
            net.ac_edges_.push_back(NetworkEdge{i, j, net.subsystem_of_[static_cast<std::size_t>(i)],
                                                l.susceptance});
        } else {
            if (l.conductance <= 0.0)
                throw ValidationError(ValidationError::Kind::BadField, l.from + "-" + l.to,
                                      "DC line needs conductance > 0");
            net.dc_edges_.push_back(NetworkEdge{i, j, net.subsystem_of_[static_cast<std::size_t>(i)],
                                                l.conductance});
        }
    }

    // Index maps for generator and DC buses.
    net.gen_slot_.assign(static_cast<std::size_t>(n), -1);
    net.dc_slot_.assign(static_cast<std::size_t>(n), -1);
    for (int i = 0; i < n; ++i) {
        switch (spec.buses[static_cast<std::size_t>(i)].kind) {
            case BusKind::AcGenerator:
                net.gen_slot_[static_cast<std::size_t>(i)] = static_cast<int>(net.gen_buses_.size());
                net.gen_buses_.push_back(i);
                break;
            case BusKind::Dc:
                net.dc_slot_[static_cast<std::size_t>(i)] = static_cast<int>(net.dc_buses_.size());
                net.dc_buses_.push_back(i);
                break;
            case BusKind::AcConverter:
                break;
        }
    }

    // Converters.
    net.conv_at_ac_.assign(static_cast<std::size_t>(n), -1);
    net.conv_at_dc_.assign(static_cast<std::size_t>(n), -1);
    for (const Converter& c : spec.converters) {
        if (!net.bus_index_.count(c.ac_bus) || !net.bus_index_.count(c.dc_bus))
            throw ValidationError(ValidationError::Kind::DanglingConverter, c.id,
                                  "converter endpoint is not a bus");
        int a = net.bus_index_.at(c.ac_bus), d = net.bus_index_.at(c.dc_bus);
        if (spec.buses[static_cast<std::size_t>(a)].kind != BusKind::AcConverter)
            throw ValidationError(ValidationError::Kind::DanglingConverter, c.id,
                                  "ac_bus must be an AC converter bus");
        if (spec.buses[static_cast<std::size_t>(d)].kind != BusKind::Dc)
            throw ValidationError(ValidationError::Kind::DanglingConverter, c.id,
                                  "dc_bus must be a DC bus");
        if (net.subsystem_of_[static_cast<std::size_t>(a)] ==
            net.subsystem_of_[static_cast<std::size_t>(d)])
            throw ValidationError(ValidationError::Kind::DanglingConverter, c.id,
                                  "converter must join two different subsystems");
        if (net.conv_at_ac_[static_cast<std::size_t>(a)] != -1)
            throw ValidationError(ValidationError::Kind::DanglingConverter, c.ac_bus,
                                  "AC converter bus referenced by more than one converter");
        int idx = static_cast<int>(net.converters_.size());
        net.conv_at_ac_[static_cast<std::size_t>(a)] = idx;
        net.conv_at_dc_[static_cast<std::size_t>(d)] = idx;
        net.converters_.push_back(ConverterView{c.id, a, d});
    }
    for (int i = 0; i < n; ++i) {
        if (spec.buses[static_cast<std::size_t>(i)].kind == BusKind::AcConverter &&
            net.conv_at_ac_[static_cast<std::size_t>(i)] == -1)
            throw ValidationError(ValidationError::Kind::DanglingConverter,
                                  spec.buses[static_cast<std::size_t>(i)].id,
                                  "AC converter bus has no converter attached");
    }

    // Per-subsystem connectivity.
    for (const auto& sub : net.subsystems_) {
        std::vector<std::pair<int, int>> edges;
        const auto& pool = (sub.domain == Domain::Ac) ? net.ac_edges_ : net.dc_edges_;
        int k = net.subsystem_of_[static_cast<std::size_t>(sub.buses.front())];
        for (const auto& e : pool)
            if (e.subsystem == k) edges.emplace_back(e.from, e.to);
        int bad = detail::first_unreachable(sub.buses, edges);
        if (bad >= 0)
            throw ValidationError(ValidationError::Kind::DisconnectedSubsystem,
                                  spec.buses[static_cast<std::size_t>(bad)].id,
                                  "subsystem " + sub.id + " is not connected");
    }

    // Communication graph: all q > 0 buses plus edge endpoints; must be connected.
    std::vector<bool> is_comm(static_cast<std::size_t>(n), false);
    for (int i = 0; i < n; ++i)
        if (spec.buses[static_cast<std::size_t>(i)].inv_cost > 0.0)
            is_comm[static_cast<std::size_t>(i)] = true;
    std::vector<std::pair<int, int>> comm_pairs;
    for (const auto& [a, b] : spec.comm_edges) {
        if (!net.bus_index_.count(a) || !net.bus_index_.count(b))
            throw ValidationError(ValidationError::Kind::BadField, a + "-" + b,
                                  "comm edge endpoint is not a bus");
        int i = net.bus_index_.at(a), j = net.bus_index_.at(b);
        if (i == j)
            throw ValidationError(ValidationError::Kind::BadField, a, "comm self-loop");
        is_comm[static_cast<std::size_t>(i)] = true;
        is_comm[static_cast<std::size_t>(j)] = true;
        comm_pairs.emplace_back(i, j);
    }
    net.comm_slot_.assign(static_cast<std::size_t>(n), -1);
    for (int i = 0; i < n; ++i) {
        if (is_comm[static_cast<std::size_t>(i)]) {
            net.comm_slot_[static_cast<std::size_t>(i)] = static_cast<int>(net.comm_nodes_.size());
            net.comm_nodes_.push_back(i);
        }
    }
    {
        int bad = detail::first_unreachable(net.comm_nodes_, comm_pairs);
        if (bad >= 0)
            throw ValidationError(ValidationError::Kind::DisconnectedCommGraph,
                                  spec.buses[static_cast<std::size_t>(bad)].id,
                                  "communication graph is not connected");
    }
    const int nc = static_cast<int>(net.comm_nodes_.size());
    net.comm_adjacency_.assign(static_cast<std::size_t>(nc), {});
    net.comm_laplacian_ = Eigen::MatrixXd::Zero(nc, nc);
    {
        std::vector<std::pair<int, int>> dedup;
        for (const auto& [i, j] : comm_pairs) {
            int si = net.comm_slot_[static_cast<std::size_t>(i)];
            int sj = net.comm_slot_[static_cast<std::size_t>(j)];
            std::pair<int, int> key{std::min(si, sj), std::max(si, sj)};
            if (std::find(dedup.begin(), dedup.end(), key) != dedup.end()) continue;
            dedup.push_back(key);
            net.comm_adjacency_[static_cast<std::size_t>(si)].push_back(sj);
            net.comm_adjacency_[static_cast<std::size_t>(sj)].push_back(si);
            net.comm_laplacian_(si, si) += 1.0;
            net.comm_laplacian_(sj, sj) += 1.0;
            net.comm_laplacian_(si, sj) -= 1.0;
            net.comm_laplacian_(sj, si) -= 1.0;
        }
    }

    // Cached parameter vectors.
    net.nominal_load_.resize(n);
    net.inv_cost_.resize(n);
    for (int i = 0; i < n; ++i) {
        net.nominal_load_(i) = spec.buses[static_cast<std::size_t>(i)].load;
        net.inv_cost_(i) = spec.buses[static_cast<std::size_t>(i)].inv_cost;
    }
    net.inertia_.resize(static_cast<Eigen::Index>(net.gen_buses_.size()));
    net.damping_.resize(static_cast<Eigen::Index>(net.gen_buses_.size()));
    for (std::size_t s = 0; s < net.gen_buses_.size(); ++s) {
        net.inertia_(static_cast<Eigen::Index>(s)) =
            spec.buses[static_cast<std::size_t>(net.gen_buses_[s])].inertia;
        net.damping_(static_cast<Eigen::Index>(s)) =
            spec.buses[static_cast<std::size_t>(net.gen_buses_[s])].damping;
    }
    net.capacitance_.resize(static_cast<Eigen::Index>(net.dc_buses_.size()));
    for (std::size_t s = 0; s < net.dc_buses_.size(); ++s)
        net.capacitance_(static_cast<Eigen::Index>(s)) =
            spec.buses[static_cast<std::size_t>(net.dc_buses_[s])].capacitance;

    return net;
}

}  // namespace hybridgrid
