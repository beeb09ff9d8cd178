#pragma once

// Congestion detection, root-cause classification, aggregation and
// stratified sampling of congested periods.

#include <algorithm>
#include <array>
#include <cstddef>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "lvse/grid_model.hpp"
#include "lvse/power_flow.hpp"
#include "lvse/stats.hpp"
#include "lvse/time_grid.hpp"

namespace lvse {

inline constexpr double kLoadingLimit = 100.0;
inline constexpr double kLoadingGreyLimit = 110.0;
inline constexpr double kVoltageLow = 0.95;
inline constexpr double kVoltageHigh = 1.05;
inline constexpr double kVoltageLowGrey = 0.90;
inline constexpr double kVoltageHighGrey = 1.10;

enum class Trigger : unsigned { thermal_overload = 1, undervoltage = 2, overvoltage = 4, non_convergence = 8 };
enum class Severity { grey, hard };
enum class RootCause { load_side, generation_side, combined, not_converged };

inline std::string_view to_string(Severity s) { return s == Severity::grey ? "grey" : "hard"; }
inline std::string_view to_string(RootCause r) {
    switch (r) {
    case RootCause::load_side: return "load_side";
    case RootCause::generation_side: return "generation_side";
    case RootCause::combined: return "combined";
    case RootCause::not_converged: return "not_converged";
    }
    return "?";
}

enum class ElementKind { transformer, line, bus };

struct ElementViolation {
    ElementKind kind = ElementKind::line;
    std::size_t index = 0; // branch or bus index; 0 for the transformer
    double value = 0.0;    // loading in % or voltage in p.u.
};

struct CongestionEvent {
    std::size_t step = 0;
    unsigned triggers = 0;
    Severity severity = Severity::grey;
    RootCause root_cause = RootCause::load_side;
    std::vector<ElementViolation> elements;

    bool has(Trigger t) const { return (triggers & static_cast<unsigned>(t)) != 0; }
};

/// Cheap per-step test on the summary; equivalent to classify_period
/// returning an event.
inline bool is_congested(const StepSummary& s) {
    return !s.converged || s.trafo_loading > kLoadingLimit || s.max_line_loading > kLoadingLimit ||
           s.min_v < kVoltageLow || s.max_v > kVoltageHigh;
}

/// Root cause from the triggers and the step's generation-load balance.
inline RootCause classify_root_cause(const CongestionEvent& ev, double pv_generation_w, double demand_w) {
    if (ev.has(Trigger::non_convergence)) return RootCause::not_converged;
    const bool generation_dominant = pv_generation_w > demand_w;
    bool load = ev.has(Trigger::undervoltage);
    bool gen = ev.has(Trigger::overvoltage);
    if (ev.has(Trigger::thermal_overload)) (generation_dominant ? gen : load) = true;
    if (load && gen) return RootCause::combined;
    return gen ? RootCause::generation_side : RootCause::load_side;
}

inline RootCause classify_root_cause(const CongestionEvent& ev, const InjectionSet& inj) {
    return classify_root_cause(ev, inj.pv_generation_w, inj.demand_w);
}

/// Event for a congested period, or nothing. Violations are strict
/// inequalities; the grey band is closed at 110 % / 0.90 / 1.10 p.u.
inline std::optional<CongestionEvent> classify_period(const SnapshotState& st, const GridNetwork& net, std::size_t step,
                                                      double pv_generation_w = 0.0, double demand_w = 0.0) {
    CongestionEvent ev;
    ev.step = step;
    if (!st.converged) {
        ev.triggers = static_cast<unsigned>(Trigger::non_convergence);
        ev.severity = Severity::hard;
        ev.root_cause = RootCause::not_converged;
        return ev;
    }
    bool hard = false;
    if (st.trafo_loading > kLoadingLimit) {
        ev.triggers |= static_cast<unsigned>(Trigger::thermal_overload);
        ev.elements.push_back({ElementKind::transformer, 0, st.trafo_loading});
        hard |= st.trafo_loading > kLoadingGreyLimit;
    }
    for (std::size_t k = 0; k < net.branch_count(); ++k) {
        const double l = st.line_loading(net, k);
        if (l > kLoadingLimit) {
            ev.triggers |= static_cast<unsigned>(Trigger::thermal_overload);
            ev.elements.push_back({ElementKind::line, k, l});
            hard |= l > kLoadingGreyLimit;
        }
    }
    for (std::size_t b = 0; b < net.bus_count(); ++b) {
        const double v = std::abs(st.voltage[b]);
        if (v < kVoltageLow) {
            ev.triggers |= static_cast<unsigned>(Trigger::undervoltage);
            ev.elements.push_back({ElementKind::bus, b, v});
            hard |= v < kVoltageLowGrey;
        } else if (v > kVoltageHigh) {
            ev.triggers |= static_cast<unsigned>(Trigger::overvoltage);
            ev.elements.push_back({ElementKind::bus, b, v});
            hard |= v > kVoltageHighGrey;
        }
    }
    if (ev.triggers == 0) return std::nullopt;
    ev.severity = hard ? Severity::hard : Severity::grey;
    ev.root_cause = classify_root_cause(ev, pv_generation_w, demand_w);
    return ev;
}

inline std::optional<CongestionEvent> classify_period(const RetainedStep& r, const GridNetwork& net) {
    return classify_period(r.state, net, r.step, r.injections.pv_generation_w, r.injections.demand_w);
}

struct CongestionSummary {
    std::size_t total_steps = kStepsPerYear;
    std::size_t events = 0;
    std::size_t grey = 0;
    std::size_t hard = 0;
    std::map<RootCause, std::size_t> by_cause;
    std::array<std::size_t, 12> monthly{};
    std::array<std::size_t, 12> monthly_load{};       // load-side + combined
    std::array<std::size_t, 12> monthly_generation{}; // generation-side + combined
    std::array<std::size_t, 12> monthly_not_converged{};
    std::array<long, 24> hourly_load{};               // load-side, positive
    std::array<long, 24> hourly_generation{};         // generation-side, reported negative
    std::array<std::array<std::size_t, 24>, 12> heatmap{};
    std::map<std::string, std::size_t> element_violations; // "trafo", "line:<id>", "bus:<id>"
    double max_trafo_loading = 0.0;
    double max_line_loading = 0.0;
    double min_voltage = 0.0;
    double max_voltage = 0.0;
    std::array<double, 3> trafo_loading_quantiles{}; // p50, p95, p99 over converged steps

    double share_pct() const { return total_steps ? 100.0 * double(events) / double(total_steps) : 0.0; }
};

inline CongestionSummary aggregate(const std::vector<CongestionEvent>& events, const std::vector<StepSummary>& steps,
                                   const GridNetwork& net) {
    CongestionSummary s;
    if (!steps.empty()) s.total_steps = steps.size();
    s.events = events.size();
    for (const auto& e : events) {
        (e.severity == Severity::grey ? s.grey : s.hard) += 1;
        s.by_cause[e.root_cause] += 1;
        const auto m = month_of_step(e.step);
        const auto h = hour_of_step(e.step);
        s.monthly[m] += 1;
        s.heatmap[m][h] += 1;
        switch (e.root_cause) {
        case RootCause::load_side:
            s.monthly_load[m] += 1;
            s.hourly_load[h] += 1;
            break;
        case RootCause::generation_side:
            s.monthly_generation[m] += 1;
            s.hourly_generation[h] -= 1;
            break;
        case RootCause::combined:
            s.monthly_load[m] += 1;
            s.monthly_generation[m] += 1;
            s.hourly_load[h] += 1;
            s.hourly_generation[h] -= 1;
            break;
        case RootCause::not_converged: s.monthly_not_converged[m] += 1; break;
        }
        for (const auto& el : e.elements) {
            switch (el.kind) {
            case ElementKind::transformer: s.element_violations["trafo"] += 1; break;
            case ElementKind::line: s.element_violations["line:" + net.branches()[el.index].id] += 1; break;
            case ElementKind::bus: s.element_violations["bus:" + net.buses()[el.index].id] += 1; break;
            }
        }
    }
    std::vector<double> trafo;
    bool first = true;
    for (const auto& st : steps) {
        if (!st.converged) continue;
        trafo.push_back(st.trafo_loading);
        s.max_trafo_loading = std::max(s.max_trafo_loading, st.trafo_loading);
        s.max_line_loading = std::max(s.max_line_loading, st.max_line_loading);
        s.min_voltage = first ? st.min_v : std::min(s.min_voltage, st.min_v);
        s.max_voltage = first ? st.max_v : std::max(s.max_voltage, st.max_v);
        first = false;
    }
    s.trafo_loading_quantiles = {percentile(trafo, 50), percentile(trafo, 95), percentile(trafo, 99)};
    return s;
}

inline nlohmann::json summary_to_json(const CongestionSummary& s) {
    nlohmann::json j;
    j["total_steps"] = s.total_steps;
    j["events"] = s.events;
    j["share_pct"] = s.share_pct();
    j["grey"] = s.grey;
    j["hard"] = s.hard;
    for (auto rc : {RootCause::load_side, RootCause::generation_side, RootCause::combined, RootCause::not_converged}) {
        auto it = s.by_cause.find(rc);
        j["root_cause"][std::string(to_string(rc))] = it == s.by_cause.end() ? 0 : it->second;
    }
    j["monthly"] = s.monthly;
    j["monthly_load"] = s.monthly_load;
    j["monthly_generation"] = s.monthly_generation;
    j["monthly_not_converged"] = s.monthly_not_converged;
    j["hourly_load"] = s.hourly_load;
    j["hourly_generation"] = s.hourly_generation;
    j["element_violations"] = s.element_violations;
    j["extremes"] = {{"max_trafo_loading_pct", s.max_trafo_loading},
                     {"max_line_loading_pct", s.max_line_loading},
                     {"min_voltage_pu", s.min_voltage},
                     {"max_voltage_pu", s.max_voltage},
                     {"trafo_loading_p50", s.trafo_loading_quantiles[0]},
                     {"trafo_loading_p95", s.trafo_loading_quantiles[1]},
                     {"trafo_loading_p99", s.trafo_loading_quantiles[2]}};
    return j;
}

/// Month x hour event-count matrix as CSV.
inline std::string heatmap_csv(const CongestionSummary& s) {
    std::string out = "month";
    for (int h = 0; h < 24; ++h) out += ",h" + std::to_string(h);
    out += "\n";
    for (int m = 0; m < 12; ++m) {
        out += std::to_string(m + 1);
        for (int h = 0; h < 24; ++h) out += "," + std::to_string(s.heatmap[m][h]);
        out += "\n";
    }
    return out;
}

inline constexpr std::size_t kStrataLines = 5;

/// Stratified sample of up to k congested steps.
///
/// Candidates are converged congested steps. Strata: four right-closed
/// quartile bins of transformer loading times the five most frequent
/// bottleneck lines (highest-loaded line of the step) plus one residual
/// group. Allocation is proportional by largest remainder; inside a stratum
/// the picks are evenly spaced in temporal order.
inline std::vector<std::size_t> stratified_sample(const std::vector<StepSummary>& events, std::size_t k) {
    std::vector<const StepSummary*> cand;
    for (const auto& e : events)
        if (e.converged) cand.push_back(&e);
    std::sort(cand.begin(), cand.end(), [](auto a, auto b) { return a->step < b->step; });
    std::vector<std::size_t> out;
    if (k == 0 || cand.empty()) return out;
    if (k >= cand.size()) {
        for (auto c : cand) out.push_back(c->step);
        return out;
    }
    std::vector<double> loading;
    for (auto c : cand) loading.push_back(c->trafo_loading);
    const std::array<double, 3> q{percentile(loading, 25), percentile(loading, 50), percentile(loading, 75)};

    std::map<std::size_t, std::size_t> freq;
    for (auto c : cand) freq[c->max_line] += 1;
    std::vector<std::pair<std::size_t, std::size_t>> ranked(freq.begin(), freq.end());
    std::stable_sort(ranked.begin(), ranked.end(), [](auto a, auto b) { return a.second > b.second; });
    std::vector<std::size_t> top;
    for (std::size_t i = 0; i < std::min(kStrataLines, ranked.size()); ++i) top.push_back(ranked[i].first);

    constexpr std::size_t groups = kStrataLines + 1;
    std::vector<std::vector<std::size_t>> strata(4 * groups);
    for (auto c : cand) {
        std::size_t bin = 3;
        for (std::size_t j = 0; j < 3; ++j)
            if (c->trafo_loading <= q[j]) {
                bin = j;
                break;
            }
        const auto it = std::find(top.begin(), top.end(), c->max_line);
        const auto g = it == top.end() ? kStrataLines : static_cast<std::size_t>(it - top.begin());
        strata[bin * groups + g].push_back(c->step);
    }

    const double n = double(cand.size());
    std::vector<std::size_t> alloc(strata.size());
    std::vector<std::pair<double, std::size_t>> rem;
    std::size_t used = 0;
    for (std::size_t s = 0; s < strata.size(); ++s) {
        const double quota = double(k) * double(strata[s].size()) / n;
        alloc[s] = static_cast<std::size_t>(std::floor(quota));
        used += alloc[s];
        rem.emplace_back(quota - double(alloc[s]), s);
    }
    std::stable_sort(rem.begin(), rem.end(), [](auto a, auto b) { return a.first > b.first; });
    for (std::size_t i = 0; used < k && i < rem.size(); ++i) {
        alloc[rem[i].second] += 1;
        ++used;
    }
    for (std::size_t s = 0; s < strata.size(); ++s) {
        const auto& st = strata[s];
        const auto a = std::min(alloc[s], st.size());
        for (std::size_t i = 0; i < a; ++i) {
            const auto pos = static_cast<std::size_t>(std::floor((double(i) + 0.5) * double(st.size()) / double(a)));
            out.push_back(st[std::min(pos, st.size() - 1)]);
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

} // namespace lvse
