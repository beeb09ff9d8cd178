#pragma once

// Radial low-voltage network model.
//
// Buses and branches are stored in index form. Every branch is oriented from
// the upstream bus (towards the slack) to the downstream bus, so a non-slack
// bus owns exactly one parent branch. Feeders are the subtrees hanging off
// the slack bus.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <map>
#include <optional>
#include <queue>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "lvse/error.hpp"

namespace lvse {

inline constexpr double kNominalPhaseVoltage = 231.0; // V, line-to-neutral
inline constexpr double kMinReactance = 0.001;        // ohm

enum class BusKind { slack, load, junction };
enum class Area { rural, urban };
enum class Quality { good, medium, poor };

inline std::string_view to_string(BusKind k) {
    switch (k) {
    case BusKind::slack: return "slack";
    case BusKind::load: return "load";
    case BusKind::junction: return "junction";
    }
    return "?";
}

inline std::string_view to_string(Area a) { return a == Area::rural ? "rural" : "urban"; }

inline std::string_view to_string(Quality q) {
    switch (q) {
    case Quality::good: return "good";
    case Quality::medium: return "medium";
    case Quality::poor: return "poor";
    }
    return "?";
}

inline BusKind parse_bus_kind(std::string_view s) {
    if (s == "slack") return BusKind::slack;
    if (s == "load") return BusKind::load;
    if (s == "junction") return BusKind::junction;
    throw ParseError("unknown bus kind '" + std::string(s) + "'");
}

inline Area parse_area(std::string_view s) {
    if (s == "rural") return Area::rural;
    if (s == "urban") return Area::urban;
    throw ParseError("unknown area '" + std::string(s) + "'");
}

inline Quality parse_quality(std::string_view s) {
    if (s == "good") return Quality::good;
    if (s == "medium") return Quality::medium;
    if (s == "poor") return Quality::poor;
    throw ParseError("unknown equipment level '" + std::string(s) + "'");
}

struct Bus {
    std::string id;
    BusKind kind = BusKind::load;
    bool has_ncp = false;
    double nominal_voltage = kNominalPhaseVoltage;
    double annual_energy_proxy = 0.0; // kWh/year
    int household_units = 0;
};

struct Branch {
    std::string id;
    std::string from_bus;
    std::string to_bus;
    double resistance = 0.0;    // ohm
    double reactance = 0.0;     // ohm
    double thermal_limit = 0.0; // A
    double length = 0.0;        // m
};

struct Transformer {
    double rating_kva = 0.0;
    std::string lv_bus;
    double oltc_target = 1.0;      // p.u., power-flow side
    double se_slack_voltage = 1.0; // p.u., estimator side
};

/// Cable impedance row of a grid file's equipment table.
struct CableType {
    Quality level = Quality::good;
    std::string name;
    double r_ohm_per_km = 0.0;
    double x_ohm_per_km = 0.0;
};

/// One row of the equipment-quality parameterisation.
struct EquipmentLevel {
    Quality level = Quality::good;
    Area area = Area::rural;
    double transformer_rating_kva = 0.0;
    double cable_thermal_limit_a = 0.0;
    std::string cable;
    double r_ohm_per_km = 0.0;
    double x_ohm_per_km = 0.0;
};

struct EquipmentRating {
    double transformer_kva;
    double thermal_limit_a;
    const char* cable;
};

/// Transformer rating and cable ampacity per quality level and area.
inline EquipmentRating equipment_rating(Quality q, Area a) {
    if (a == Area::rural) {
        switch (q) {
        case Quality::good: return {400.0, 270.0, "NAYY 4x150"};
        case Quality::medium: return {250.0, 242.0, "NAYY 4x120"};
        case Quality::poor: return {160.0, 142.0, "NAYY 4x50"};
        }
    } else {
        switch (q) {
        case Quality::good: return {630.0, 357.0, "NAYY 4x240"};
        case Quality::medium: return {400.0, 270.0, "NAYY 4x150"};
        case Quality::poor: return {250.0, 242.0, "NAYY 4x120"};
        }
    }
    throw DomainError("unknown equipment level/area combination");
}

class GridNetwork {
public:
    GridNetwork() = default;

    /// Validates the topology, orients branches away from the slack and
    /// clamps reactances to the minimum.
    GridNetwork(std::string name, Area area, std::vector<Bus> buses, std::vector<Branch> branches,
                Transformer transformer, std::vector<CableType> cables = {})
        : name_(std::move(name)), area_(area), buses_(std::move(buses)), branches_(std::move(branches)),
          transformer_(std::move(transformer)), cables_(std::move(cables)) {
        index_and_validate();
    }

    const std::string& name() const { return name_; }
    Area area() const { return area_; }
    const std::vector<Bus>& buses() const { return buses_; }
    const std::vector<Branch>& branches() const { return branches_; }
    const Transformer& transformer() const { return transformer_; }
    const std::vector<CableType>& cable_types() const { return cables_; }

    std::size_t bus_count() const { return buses_.size(); }
    std::size_t branch_count() const { return branches_.size(); }
    std::size_t slack() const { return slack_; }

    std::size_t bus_index(std::string_view id) const {
        auto it = bus_lookup_.find(std::string(id));
        if (it == bus_lookup_.end()) throw DomainError("unknown bus '" + std::string(id) + "'");
        return it->second;
    }
    std::size_t branch_index(std::string_view id) const {
        auto it = branch_lookup_.find(std::string(id));
        if (it == branch_lookup_.end()) throw DomainError("unknown branch '" + std::string(id) + "'");
        return it->second;
    }

    /// Upstream and downstream bus of a branch (after orientation).
    std::size_t upstream(std::size_t branch) const { return up_[branch]; }
    std::size_t downstream(std::size_t branch) const { return down_[branch]; }

    /// Branch feeding a bus; empty for the slack.
    std::optional<std::size_t> parent_branch(std::size_t bus) const {
        if (bus == slack_) return std::nullopt;
        return parent_branch_[bus];
    }
    const std::vector<std::size_t>& child_branches(std::size_t bus) const { return children_[bus]; }

    /// Buses in breadth-first order from the slack (slack first).
    const std::vector<std::size_t>& bfs_order() const { return bfs_; }

    /// Branches on the path from the slack to `bus`, ordered slack-side first.
    std::vector<std::size_t> path_to(std::size_t bus) const {
        std::vector<std::size_t> path;
        while (bus != slack_) {
            const auto b = parent_branch_[bus];
            path.push_back(b);
            bus = up_[b];
        }
        std::reverse(path.begin(), path.end());
        return path;
    }

    /// Feeder groups: bus indices of each subtree rooted at a slack branch,
    /// in the order the slack branches appear in the file.
    const std::vector<std::vector<std::size_t>>& feeders() const { return feeders_; }
    /// Feeder index of a non-slack bus.
    std::size_t feeder_of(std::size_t bus) const { return feeder_of_[bus]; }

    /// Non-slack buses that host a network connection point.
    std::vector<std::size_t> ncp_buses() const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < buses_.size(); ++i)
            if (buses_[i].has_ncp) out.push_back(i);
        return out;
    }
    /// Non-slack buses of kind `load` (with or without NCP).
    std::vector<std::size_t> load_buses() const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < buses_.size(); ++i)
            if (buses_[i].kind == BusKind::load) out.push_back(i);
        return out;
    }
    int total_household_units() const {
        int n = 0;
        for (const auto& b : buses_) n += b.has_ncp ? b.household_units : 0;
        return n;
    }

    // Copy-with-modification helpers; the receiver is left untouched.
    GridNetwork with_transformer(Transformer t) const {
        GridNetwork g = *this;
        g.transformer_ = std::move(t);
        return g;
    }
    GridNetwork with_branches(std::vector<Branch> branches) const {
        return GridNetwork(name_, area_, buses_, std::move(branches), transformer_, cables_);
    }
    GridNetwork with_annual_energy(const std::vector<double>& energy_kwh) const {
        if (energy_kwh.size() != buses_.size()) throw DomainError("annual energy vector size mismatch");
        GridNetwork g = *this;
        for (std::size_t i = 0; i < buses_.size(); ++i) {
            if (energy_kwh[i] < 0.0) throw DomainError("annual energy must be non-negative");
            g.buses_[i].annual_energy_proxy = energy_kwh[i];
        }
        return g;
    }

private:
    void index_and_validate() {
        if (buses_.empty()) throw TopologyError("network has no buses");
        bus_lookup_.clear();
        branch_lookup_.clear();
        std::optional<std::size_t> slack;
        for (std::size_t i = 0; i < buses_.size(); ++i) {
            const auto& b = buses_[i];
            if (!bus_lookup_.emplace(b.id, i).second) throw TopologyError("duplicate bus id '" + b.id + "'");
            if (b.kind == BusKind::slack) {
                if (slack) throw TopologyError("more than one slack bus");
                slack = i;
            }
            if (b.has_ncp && b.kind != BusKind::load)
                throw TopologyError("bus '" + b.id + "' has an NCP but is not a load bus");
            if (b.annual_energy_proxy < 0.0) throw TopologyError("negative annual energy at '" + b.id + "'");
            if (b.nominal_voltage <= 0.0) throw TopologyError("non-positive nominal voltage at '" + b.id + "'");
        }
        if (!slack) throw TopologyError("missing slack bus");
        slack_ = *slack;
        if (transformer_.lv_bus.empty()) transformer_.lv_bus = buses_[slack_].id;
        if (transformer_.lv_bus != buses_[slack_].id)
            throw TopologyError("transformer LV bus must be the slack bus");
        if (transformer_.rating_kva <= 0.0) throw TopologyError("transformer rating must be positive");
        if (branches_.size() + 1 != buses_.size())
            throw TopologyError("non-radial topology: branch count must equal bus count - 1");

        const std::size_t n = buses_.size();
        std::vector<std::vector<std::pair<std::size_t, std::size_t>>> adj(n); // (neighbour, branch)
        for (std::size_t k = 0; k < branches_.size(); ++k) {
            auto& br = branches_[k];
            if (!branch_lookup_.emplace(br.id, k).second) throw TopologyError("duplicate branch id '" + br.id + "'");
            auto f = bus_lookup_.find(br.from_bus);
            auto t = bus_lookup_.find(br.to_bus);
            if (f == bus_lookup_.end() || t == bus_lookup_.end())
                throw TopologyError("branch '" + br.id + "' references an unknown bus");
            if (f->second == t->second) throw TopologyError("branch '" + br.id + "' is a self loop");
            if (br.thermal_limit <= 0.0) throw TopologyError("branch '" + br.id + "' needs a positive thermal limit");
            if (br.resistance < 0.0) throw TopologyError("branch '" + br.id + "' has negative resistance");
            br.reactance = std::max(br.reactance, kMinReactance);
            adj[f->second].emplace_back(t->second, k);
            adj[t->second].emplace_back(f->second, k);
        }

        up_.assign(branches_.size(), n);
        down_.assign(branches_.size(), n);
        parent_branch_.assign(n, branches_.size());
        children_.assign(n, {});
        feeder_of_.assign(n, 0);
        feeders_.clear();
        bfs_.clear();
        std::vector<bool> seen(n, false);
        std::queue<std::size_t> q;
        q.push(slack_);
        seen[slack_] = true;
        while (!q.empty()) {
            const auto u = q.front();
            q.pop();
            bfs_.push_back(u);
            for (auto [v, k] : adj[u]) {
                if (seen[v]) {
                    if (k != parent_branch_[u]) throw TopologyError("non-radial topology: cycle detected");
                    continue;
                }
                seen[v] = true;
                up_[k] = u;
                down_[k] = v;
                parent_branch_[v] = k;
                children_[u].push_back(k);
                if (u == slack_) {
                    feeder_of_[v] = feeders_.size();
                    feeders_.emplace_back();
                } else {
                    feeder_of_[v] = feeder_of_[u];
                }
                feeders_[feeder_of_[v]].push_back(v);
                q.push(v);
            }
        }
        if (bfs_.size() != n) throw TopologyError("network is not connected");
        // Keep branch orientation in the stored records consistent with the tree.
        for (std::size_t k = 0; k < branches_.size(); ++k) {
            auto& br = branches_[k];
            if (bus_lookup_.at(br.from_bus) != up_[k]) std::swap(br.from_bus, br.to_bus);
        }
    }

    std::string name_;
    Area area_ = Area::rural;
    std::vector<Bus> buses_;
    std::vector<Branch> branches_;
    Transformer transformer_;
    std::vector<CableType> cables_;

    std::size_t slack_ = 0;
    std::unordered_map<std::string, std::size_t> bus_lookup_;
    std::unordered_map<std::string, std::size_t> branch_lookup_;
    std::vector<std::size_t> up_, down_, parent_branch_, feeder_of_, bfs_;
    std::vector<std::vector<std::size_t>> children_;
    std::vector<std::vector<std::size_t>> feeders_;
};

/// Feeder partition of a network; one vector of bus ids per feeder.
inline std::vector<std::vector<std::string>> derive_feeders(const GridNetwork& net) {
    std::vector<std::vector<std::string>> out;
    for (const auto& f : net.feeders()) {
        auto& ids = out.emplace_back();
        for (auto b : f) ids.push_back(net.buses()[b].id);
    }
    return out;
}

/// Combines the rating row with the network's cable table.
inline EquipmentLevel equipment_level(const GridNetwork& net, Quality q) {
    const auto rating = equipment_rating(q, net.area());
    for (const auto& c : net.cable_types()) {
        if (c.level == q) {
            return EquipmentLevel{q, net.area(), rating.transformer_kva, rating.thermal_limit_a, c.name,
                                  c.r_ohm_per_km, c.x_ohm_per_km};
        }
    }
    throw DomainError("grid file has no cable impedance for level '" + std::string(to_string(q)) + "'");
}

/// Re-parameterises transformer rating, cable ampacity and per-length impedance.
inline GridNetwork apply_equipment_level(const GridNetwork& net, const EquipmentLevel& level) {
    if (level.area != net.area()) throw DomainError("equipment level area does not match the network");
    const auto expected = equipment_rating(level.level, level.area);
    if (level.transformer_rating_kva != expected.transformer_kva ||
        level.cable_thermal_limit_a != expected.thermal_limit_a)
        throw DomainError("equipment level does not match the rating table");
    auto branches = net.branches();
    for (auto& br : branches) {
        const double km = br.length / 1000.0;
        br.resistance = level.r_ohm_per_km * km;
        br.reactance = level.x_ohm_per_km * km;
        br.thermal_limit = level.cable_thermal_limit_a;
    }
    auto t = net.transformer();
    t.rating_kva = level.transformer_rating_kva;
    return net.with_branches(std::move(branches)).with_transformer(std::move(t));
}

inline GridNetwork apply_equipment_level(const GridNetwork& net, Quality q) {
    return apply_equipment_level(net, equipment_level(net, q));
}

namespace detail {

template <class T>
T json_get(const nlohmann::json& j, const char* key, const std::string& where) {
    auto it = j.find(key);
    if (it == j.end()) throw ParseError(where + ": missing field '" + key + "'");
    try {
        return it->get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(where + ": bad field '" + key + "': " + e.what());
    }
}

template <class T>
T json_get_or(const nlohmann::json& j, const char* key, T fallback) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return fallback;
    try {
        return it->get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("bad field '") + key + "': " + e.what());
    }
}

} // namespace detail

inline GridNetwork network_from_json(const nlohmann::json& doc) {
    using detail::json_get;
    using detail::json_get_or;
    if (!doc.is_object()) throw ParseError("grid document must be a JSON object");
    const auto name = json_get_or<std::string>(doc, "name", "");
    const auto area = parse_area(json_get<std::string>(doc, "area", "grid"));
    const double vn = json_get_or<double>(doc, "nominal_voltage_v", kNominalPhaseVoltage);

    std::vector<Bus> buses;
    for (const auto& jb : json_get<nlohmann::json>(doc, "buses", "grid")) {
        Bus b;
        b.id = json_get<std::string>(jb, "id", "bus");
        b.kind = parse_bus_kind(json_get<std::string>(jb, "kind", "bus " + b.id));
        b.has_ncp = json_get_or<bool>(jb, "has_ncp", false);
        b.nominal_voltage = json_get_or<double>(jb, "nominal_voltage_v", vn);
        b.annual_energy_proxy = json_get_or<double>(jb, "annual_energy_kwh", 0.0);
        b.household_units = json_get_or<int>(jb, "household_units", b.has_ncp ? 1 : 0);
        buses.push_back(std::move(b));
    }
    std::vector<Branch> branches;
    for (const auto& jl : json_get<nlohmann::json>(doc, "branches", "grid")) {
        Branch br;
        br.id = json_get<std::string>(jl, "id", "branch");
        const auto where = "branch " + br.id;
        br.from_bus = json_get<std::string>(jl, "from", where);
        br.to_bus = json_get<std::string>(jl, "to", where);
        br.resistance = json_get<double>(jl, "r_ohm", where);
        br.reactance = json_get<double>(jl, "x_ohm", where);
        br.thermal_limit = json_get<double>(jl, "thermal_limit_a", where);
        br.length = json_get_or<double>(jl, "length_m", 0.0);
        branches.push_back(std::move(br));
    }
    const auto& jt = json_get<nlohmann::json>(doc, "transformer", "grid");
    Transformer t;
    t.rating_kva = json_get<double>(jt, "rating_kva", "transformer");
    t.lv_bus = json_get_or<std::string>(jt, "lv_bus", "");
    t.oltc_target = json_get_or<double>(jt, "oltc_target_pu", 1.0);
    t.se_slack_voltage = json_get_or<double>(jt, "se_slack_voltage_pu", 1.0);

    std::vector<CableType> cables;
    if (auto it = doc.find("equipment_levels"); it != doc.end()) {
        for (const auto& je : *it) {
            CableType c;
            c.level = parse_quality(json_get<std::string>(je, "level", "equipment level"));
            c.name = json_get_or<std::string>(je, "cable", "");
            c.r_ohm_per_km = json_get<double>(je, "r_ohm_per_km", "equipment level");
            c.x_ohm_per_km = json_get<double>(je, "x_ohm_per_km", "equipment level");
            const auto rating = equipment_rating(c.level, area);
            const double kva = json_get_or<double>(je, "transformer_kva", rating.transformer_kva);
            const double amp = json_get_or<double>(je, "thermal_limit_a", rating.thermal_limit_a);
            if (kva != rating.transformer_kva || amp != rating.thermal_limit_a)
                throw ParseError("equipment level '" + std::string(to_string(c.level)) +
                                 "' disagrees with the rating table");
            cables.push_back(std::move(c));
        }
    }
    return GridNetwork(name, area, std::move(buses), std::move(branches), std::move(t), std::move(cables));
}

/// Reads and validates a grid file.
inline GridNetwork load_network(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open grid file '" + path + "'");
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError("grid file '" + path + "': " + e.what());
    }
    return network_from_json(doc);
}

inline nlohmann::json network_to_json(const GridNetwork& net) {
    nlohmann::json doc;
    doc["name"] = net.name();
    doc["area"] = to_string(net.area());
    auto& jb = doc["buses"] = nlohmann::json::array();
    for (const auto& b : net.buses()) {
        jb.push_back({{"id", b.id},
                      {"kind", to_string(b.kind)},
                      {"has_ncp", b.has_ncp},
                      {"nominal_voltage_v", b.nominal_voltage},
                      {"household_units", b.household_units},
                      {"annual_energy_kwh", b.annual_energy_proxy}});
    }
    auto& jl = doc["branches"] = nlohmann::json::array();
    for (const auto& br : net.branches()) {
        jl.push_back({{"id", br.id},
                      {"from", br.from_bus},
                      {"to", br.to_bus},
                      {"r_ohm", br.resistance},
                      {"x_ohm", br.reactance},
                      {"thermal_limit_a", br.thermal_limit},
                      {"length_m", br.length}});
    }
    const auto& t = net.transformer();
    doc["transformer"] = {{"rating_kva", t.rating_kva},
                          {"lv_bus", t.lv_bus},
                          {"oltc_target_pu", t.oltc_target},
                          {"se_slack_voltage_pu", t.se_slack_voltage}};
    auto& je = doc["equipment_levels"] = nlohmann::json::array();
    for (const auto& c : net.cable_types()) {
        const auto rating = equipment_rating(c.level, net.area());
        je.push_back({{"level", to_string(c.level)},
                      {"transformer_kva", rating.transformer_kva},
                      {"thermal_limit_a", rating.thermal_limit_a},
                      {"cable", c.name},
                      {"r_ohm_per_km", c.r_ohm_per_km},
                      {"x_ohm_per_km", c.x_ohm_per_km}});
    }
    return doc;
}

} // namespace lvse
