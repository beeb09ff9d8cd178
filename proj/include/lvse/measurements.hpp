#pragma once

// Estimator input for one snapshot: smart-meter placement, noisy real
// measurements, K1/K2/K3 pseudo-measurements and the slack reference.
//
// Powers are per-phase watts/vars in the load convention (consumption
// positive).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "lvse/error.hpp"
#include "lvse/grid_model.hpp"
#include "lvse/power_flow.hpp"

namespace lvse {

enum class ConstellationKind { K1, K2, K3 };

inline std::string_view to_string(ConstellationKind k) {
    switch (k) {
    case ConstellationKind::K1: return "K1";
    case ConstellationKind::K2: return "K2";
    case ConstellationKind::K3: return "K3";
    }
    return "?";
}

inline ConstellationKind parse_constellation(std::string_view s) {
    if (s == "K1") return ConstellationKind::K1;
    if (s == "K2") return ConstellationKind::K2;
    if (s == "K3") return ConstellationKind::K3;
    throw DomainError("unknown constellation '" + std::string(s) + "'");
}

struct Constellation {
    ConstellationKind kind = ConstellationKind::K3;

    double pseudo_sigma() const {
        switch (kind) {
        case ConstellationKind::K1: return 0.15;
        case ConstellationKind::K2: return 0.25;
        case ConstellationKind::K3: return 0.40;
        }
        return 0.40;
    }
};

inline constexpr double kSigmaReal = 0.017;
inline constexpr double kSigmaSlack = 0.005;
inline constexpr double kPseudoCosPhi = 0.95;
inline constexpr double kSigmaFloorW = 1.0;

enum class PlacementKind { power_first, consumption_first, random };

inline std::string_view to_string(PlacementKind k) {
    switch (k) {
    case PlacementKind::power_first: return "power_first";
    case PlacementKind::consumption_first: return "consumption_first";
    case PlacementKind::random: return "random";
    }
    return "?";
}

inline PlacementKind parse_placement(std::string_view s) {
    if (s == "power_first") return PlacementKind::power_first;
    if (s == "consumption_first") return PlacementKind::consumption_first;
    if (s == "random") return PlacementKind::random;
    throw DomainError("unknown placement strategy '" + std::string(s) + "'");
}

struct PlacementStrategy {
    PlacementKind kind = PlacementKind::power_first;
    std::uint64_t seed = 0;
};

/// Metered buses (sorted bus indices) among the NCP buses.
/// `apparent_power` holds |S_i| per bus and is only read by power_first.
inline std::vector<std::size_t> place_smgw(const GridNetwork& net, std::size_t n_real, const PlacementStrategy& strategy,
                                           const std::vector<double>& apparent_power = {}) {
    auto ncp = net.ncp_buses();
    if (n_real > ncp.size())
        throw DomainError("n_real " + std::to_string(n_real) + " exceeds " + std::to_string(ncp.size()) + " NCP buses");
    auto by_key = [&](auto key) {
        std::sort(ncp.begin(), ncp.end(), [&](std::size_t a, std::size_t b) {
            const double ka = key(a), kb = key(b);
            if (ka != kb) return ka > kb;
            return net.buses()[a].id < net.buses()[b].id;
        });
    };
    switch (strategy.kind) {
    case PlacementKind::power_first:
        if (apparent_power.size() != net.bus_count()) throw DomainError("power_first placement needs |S| per bus");
        by_key([&](std::size_t b) { return apparent_power[b]; });
        break;
    case PlacementKind::consumption_first:
        by_key([&](std::size_t b) { return net.buses()[b].annual_energy_proxy; });
        break;
    case PlacementKind::random: {
        std::sort(ncp.begin(), ncp.end(), [&](auto a, auto b) { return net.buses()[a].id < net.buses()[b].id; });
        std::seed_seq seq{static_cast<std::uint32_t>(strategy.seed), static_cast<std::uint32_t>(strategy.seed >> 32), 0x9e37u};
        std::mt19937_64 rng(seq);
        std::shuffle(ncp.begin(), ncp.end(), rng);
        break;
    }
    }
    ncp.resize(n_real);
    std::sort(ncp.begin(), ncp.end());
    return ncp;
}

/// w_i = E_a,i / sum of E_a over `subset`, for i in subset.
inline std::vector<double> compute_weights(const GridNetwork& net, const std::vector<std::size_t>& subset) {
    double total = 0.0;
    for (auto b : subset) total += net.buses()[b].annual_energy_proxy;
    if (!(total > 0.0)) throw DomainError("weight subset has zero total consumption");
    std::vector<double> w;
    w.reserve(subset.size());
    for (auto b : subset) w.push_back(net.buses()[b].annual_energy_proxy / total);
    return w;
}

/// Non-slack buses of kind load; the node set the weights refer to.
inline std::vector<std::size_t> weight_nodes(const GridNetwork& net) { return net.load_buses(); }

/// Profile-only pseudo active power per bus (W per phase):
/// f_H0(t) * E_a,i / 8760 h.
inline std::vector<double> pseudo_k3(const GridNetwork& net, double h0_value) {
    std::vector<double> p(net.bus_count(), 0.0);
    for (auto b : weight_nodes(net)) p[b] = h0_value * net.buses()[b].annual_energy_proxy / kHoursPerYear * 1000.0 / 3.0;
    return p;
}

namespace detail {

/// Distributes `total - sum(real over metered members)` over the unmetered
/// members of `group` in proportion to their weights.
inline void distribute_residual(const GridNetwork& net, const std::vector<std::size_t>& group, double total,
                                const std::vector<double>& real, const std::vector<bool>& metered,
                                const std::vector<double>& weight, std::vector<double>& out) {
    double residual = total;
    double wsum = 0.0;
    bool any_unmetered = false;
    for (auto b : group) {
        if (metered[b])
            residual -= real[b];
        else {
            wsum += weight[b];
            any_unmetered = true;
        }
    }
    // Unmetered buses without consumption (non-NCP buses once every NCP of
    // the group is metered) receive zero.
    if (!any_unmetered || !(wsum > 0.0)) return;
    for (auto b : group)
        if (!metered[b]) out[b] = residual / wsum * weight[b];
    (void)net;
}

inline std::vector<double> bus_weights(const GridNetwork& net) {
    std::vector<double> w(net.bus_count(), 0.0);
    const auto nodes = weight_nodes(net);
    const auto ws = compute_weights(net, nodes);
    for (std::size_t k = 0; k < nodes.size(); ++k) w[nodes[k]] = ws[k];
    return w;
}

} // namespace detail

/// Transformer-total pseudo active power per bus (W per phase). `real`
/// holds the metered values (indexed by bus), `metered` the membership.
inline std::vector<double> pseudo_k2(double p_trafo, const std::vector<double>& real, const std::vector<bool>& metered,
                                     const GridNetwork& net) {
    std::vector<double> out(net.bus_count(), 0.0);
    detail::distribute_residual(net, weight_nodes(net), p_trafo, real, metered, detail::bus_weights(net), out);
    return out;
}

/// Feeder-total pseudo active power per bus; `p_feeder` per feeder index.
inline std::vector<double> pseudo_k1(const std::vector<double>& p_feeder, const std::vector<double>& real,
                                     const std::vector<bool>& metered, const GridNetwork& net) {
    if (p_feeder.size() != net.feeders().size()) throw DomainError("one feeder power per feeder required");
    std::vector<double> out(net.bus_count(), 0.0);
    const auto w = detail::bus_weights(net);
    for (std::size_t f = 0; f < net.feeders().size(); ++f) {
        std::vector<std::size_t> group;
        for (auto b : net.feeders()[f])
            if (net.buses()[b].kind == BusKind::load) group.push_back(b);
        detail::distribute_residual(net, group, p_feeder[f], real, metered, w, out);
    }
    return out;
}

/// Grid and feeder totals: the sum of positive node active powers.
inline double total_positive_power(const std::vector<cplx>& load, const std::vector<std::size_t>& buses) {
    double s = 0.0;
    for (auto b : buses) s += std::max(0.0, load[b].real());
    return s;
}

struct PowerMeasurement {
    std::size_t bus = 0;
    double p = 0.0; // W per phase, consumption positive
    double q = 0.0;
    double sigma_p = 0.0;
    double sigma_q = 0.0;
    bool real = false;
};

struct VoltageMeasurement {
    std::size_t bus = 0;
    double magnitude = 1.0; // p.u.
    double sigma = 0.0;     // p.u.
};

struct MeasurementSet {
    Constellation constellation;
    std::vector<PowerMeasurement> power; // one per non-slack bus, ascending bus index
    std::vector<VoltageMeasurement> voltage;
    double slack_voltage = 1.0;
    double slack_sigma = kSigmaSlack;
    std::optional<double> p_trafo;
    std::vector<double> p_feeder;
};

/// Derives an independent stream seed from a base seed and an index.
inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
    std::uint64_t z = a * 0x9E3779B97F4A7C15ull + b + 0x632BE59BD9B4E019ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

struct MeasurementOptions {
    double sigma_real = kSigmaReal;
    double sigma_voltage = kSigmaReal;
    double sigma_slack = kSigmaSlack;
    bool noise = true;            // false: exact real measurements (sigma kept for weighting)
    bool noisy_totals = false;    // noise on P_trafo / P_feeder
    std::uint64_t seed = 0;
    std::optional<double> slack_voltage; // default: transformer se_slack_voltage
};

namespace detail {

inline double sigma_of(double value, double rel) { return std::max(std::abs(value) * rel, kSigmaFloorW); }

} // namespace detail

/// Noisy (P, Q) of metered buses, indexed by bus; zero elsewhere.
inline std::pair<std::vector<double>, std::vector<double>> synthesize_real(const SnapshotState& st,
                                                                           const std::vector<std::size_t>& metered,
                                                                           double sigma, std::mt19937_64& rng) {
    if (!st.converged) throw DomainError("real measurements need a converged snapshot");
    std::normal_distribution<double> n01(0.0, 1.0);
    std::vector<double> p(st.load.size(), 0.0), q(st.load.size(), 0.0);
    for (auto b : metered) {
        p[b] = st.load[b].real() * (1.0 + sigma * n01(rng));
        q[b] = st.load[b].imag() * (1.0 + sigma * n01(rng));
    }
    return {p, q};
}

/// Assembles the complete estimator input for one snapshot.
inline MeasurementSet build_measurements(const GridNetwork& net, const SnapshotState& st, Constellation c,
                                         const std::vector<std::size_t>& metered, double h0_value,
                                         const MeasurementOptions& opt = {}) {
    if (!st.converged) throw DomainError("measurements need a converged snapshot");
    std::seed_seq seq{static_cast<std::uint32_t>(opt.seed), static_cast<std::uint32_t>(opt.seed >> 32), 0x6d65u};
    std::mt19937_64 rng(seq);
    std::normal_distribution<double> n01(0.0, 1.0);

    std::vector<bool> is_metered(net.bus_count(), false);
    for (auto b : metered) {
        if (!net.buses()[b].has_ncp) throw DomainError("smart meters can only sit at NCP buses");
        is_metered[b] = true;
    }
    auto [p_real, q_real] = synthesize_real(st, metered, opt.noise ? opt.sigma_real : 0.0, rng);

    MeasurementSet m;
    m.constellation = c;
    m.slack_voltage = opt.slack_voltage.value_or(net.transformer().se_slack_voltage);
    m.slack_sigma = opt.sigma_slack;

    const auto loads = weight_nodes(net);
    std::vector<double> p_pseudo;
    switch (c.kind) {
    case ConstellationKind::K3: p_pseudo = pseudo_k3(net, h0_value); break;
    case ConstellationKind::K2: {
        double total = total_positive_power(st.load, loads);
        if (opt.noisy_totals) total *= 1.0 + opt.sigma_real * n01(rng);
        m.p_trafo = total;
        p_pseudo = pseudo_k2(total, p_real, is_metered, net);
        break;
    }
    case ConstellationKind::K1: {
        for (const auto& f : net.feeders()) {
            double total = total_positive_power(st.load, f);
            if (opt.noisy_totals) total *= 1.0 + opt.sigma_real * n01(rng);
            m.p_feeder.push_back(total);
        }
        p_pseudo = pseudo_k1(m.p_feeder, p_real, is_metered, net);
        break;
    }
    }
    const double tan_pseudo = std::tan(std::acos(kPseudoCosPhi));
    for (std::size_t b = 0; b < net.bus_count(); ++b) {
        if (b == net.slack()) continue;
        PowerMeasurement pm;
        pm.bus = b;
        if (is_metered[b]) {
            pm.real = true;
            pm.p = p_real[b];
            pm.q = q_real[b];
            pm.sigma_p = detail::sigma_of(st.load[b].real(), opt.sigma_real);
            pm.sigma_q = detail::sigma_of(st.load[b].imag(), opt.sigma_real);
            VoltageMeasurement vm;
            vm.bus = b;
            const double v = std::abs(st.voltage[b]);
            vm.magnitude = v * (1.0 + (opt.noise ? opt.sigma_voltage * n01(rng) : 0.0));
            vm.sigma = opt.sigma_voltage * v;
            m.voltage.push_back(vm);
        } else {
            pm.p = p_pseudo[b];
            pm.q = p_pseudo[b] * tan_pseudo;
            pm.sigma_p = detail::sigma_of(pm.p, c.pseudo_sigma());
            pm.sigma_q = detail::sigma_of(pm.q, c.pseudo_sigma());
        }
        m.power.push_back(pm);
    }
    return m;
}

/// Full-coverage input: every non-slack bus metered with its true (P, Q)
/// and voltage magnitude. Used by the verification harnesses.
inline MeasurementSet full_coverage_measurements(const GridNetwork& net, const SnapshotState& st,
                                                 std::optional<double> slack_voltage = std::nullopt,
                                                 double sigma = kSigmaReal) {
    MeasurementSet m;
    m.constellation = {ConstellationKind::K2};
    m.slack_voltage = slack_voltage.value_or(net.transformer().se_slack_voltage);
    for (std::size_t b = 0; b < net.bus_count(); ++b) {
        if (b == net.slack()) continue;
        m.power.push_back({b, st.load[b].real(), st.load[b].imag(), detail::sigma_of(st.load[b].real(), sigma),
                           detail::sigma_of(st.load[b].imag(), sigma), true});
        const double v = std::abs(st.voltage[b]);
        m.voltage.push_back({b, v, sigma * v});
    }
    return m;
}

inline nlohmann::json measurements_to_json(const GridNetwork& net, const MeasurementSet& m) {
    nlohmann::json j;
    j["constellation"] = to_string(m.constellation.kind);
    j["pseudo_sigma"] = m.constellation.pseudo_sigma();
    j["slack"] = {{"voltage_pu", m.slack_voltage}, {"sigma_pu", m.slack_sigma}};
    if (m.p_trafo) j["p_trafo_w"] = *m.p_trafo;
    if (!m.p_feeder.empty()) j["p_feeder_w"] = m.p_feeder;
    auto& jp = j["power"] = nlohmann::json::array();
    for (const auto& p : m.power)
        jp.push_back({{"bus", net.buses()[p.bus].id},
                      {"type", p.real ? "real" : "pseudo"},
                      {"p_w", p.p},
                      {"q_var", p.q},
                      {"sigma_p_w", p.sigma_p},
                      {"sigma_q_var", p.sigma_q}});
    auto& jv = j["voltage"] = nlohmann::json::array();
    for (const auto& v : m.voltage)
        jv.push_back({{"bus", net.buses()[v.bus].id}, {"v_pu", v.magnitude}, {"sigma_pu", v.sigma}});
    return j;
}

} // namespace lvse
