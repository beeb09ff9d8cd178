#pragma once

// Per-scenario result files: the all-steps results stream and the
// congested-step snapshot store (both gzip CSV).
//
// Store rows, one record kind per leading tag:
//   meta,<key>,<value>
//   energy,<bus_id>,<E_a kWh>
//   step,<step>,<converged>,<iterations>,<trafo_%>,<min_v>,<max_v>,<max_line_%>,<max_line_id>,<pv_w>,<demand_w>,<h0>
//   bus,<step>,<bus_id>,<v_re>,<v_im>,<p_w>,<q_var>
//   branch,<step>,<branch_id>,<i_re>,<i_im>

#include <map>
#include <string>
#include <vector>

#include "lvse/grid_model.hpp"
#include "lvse/io.hpp"
#include "lvse/power_flow.hpp"
#include "lvse/scenario.hpp"

namespace lvse {

inline constexpr std::string_view kStoreMagic = "# lvse snapshot store v1";

inline fs::path results_path(const fs::path& dir, const std::string& label) { return dir / (label + ".results.csv.gz"); }
inline fs::path store_path(const fs::path& dir, const std::string& label) { return dir / (label + ".snapshots.csv.gz"); }

/// Summary stream for every step of a run.
inline void write_results(const fs::path& path, const std::vector<StepSummary>& summaries) {
    GzWriter w(path);
    w.line("step,converged,trafo_loading_pct,min_v_pu,max_v_pu,max_line_loading_pct");
    for (const auto& s : summaries) {
        std::string row = std::to_string(s.step) + (s.converged ? ",1," : ",0,");
        if (s.converged)
            row += fmt_num(s.trafo_loading) + "," + fmt_num(s.min_v) + "," + fmt_num(s.max_v) + "," +
                   fmt_num(s.max_line_loading);
        else
            row += ",,,";
        w.line(row);
    }
    w.commit();
}

struct ResultRow {
    std::size_t step = 0;
    bool converged = false;
    double trafo_loading = 0.0, min_v = 0.0, max_v = 0.0, max_line_loading = 0.0;
};

inline std::vector<ResultRow> read_results(const fs::path& path) {
    std::vector<ResultRow> rows;
    bool header = true;
    for_each_gz_line(path, [&](std::string_view line) {
        if (header) {
            header = false;
            return;
        }
        if (line.empty()) return;
        const auto c = split_csv(line);
        if (c.size() != 6) throw ParseError("results row needs 6 fields: " + std::string(line));
        ResultRow r;
        r.step = static_cast<std::size_t>(parse_int(c[0], "step"));
        r.converged = c[1] == "1";
        if (r.converged) {
            r.trafo_loading = parse_double(c[2], "trafo_loading_pct");
            r.min_v = parse_double(c[3], "min_v_pu");
            r.max_v = parse_double(c[4], "max_v_pu");
            r.max_line_loading = parse_double(c[5], "max_line_loading_pct");
        }
        rows.push_back(r);
    });
    return rows;
}

struct StoredStep {
    StepSummary summary;
    double h0 = 0.0; // unit-mean reference profile value at the step
    SnapshotState state;
};

struct SnapshotStore {
    std::map<std::string, std::string> meta;
    std::vector<double> energy; // E_a per bus index
    std::vector<StoredStep> steps;

    std::string get(const std::string& key) const {
        auto it = meta.find(key);
        if (it == meta.end()) throw ParseError("snapshot store lacks meta '" + key + "'");
        return it->second;
    }
    std::string label() const { return get("label"); }
    Quality level() const { return parse_quality(get("level")); }
    Area area() const { return parse_area(get("area")); }
};

inline std::map<std::string, std::string> scenario_meta(const ScenarioSpec& s, const GridNetwork& net, std::size_t steps) {
    return {{"scenario_id", std::to_string(s.scenario_id)},
            {"label", s.label()},
            {"area", std::string(to_string(s.area))},
            {"year", std::to_string(s.year)},
            {"pathway", s.pathway ? std::string(to_string(*s.pathway)) : std::string("CurrentState")},
            {"level", std::string(to_string(s.level))},
            {"seed", std::to_string(s.seed)},
            {"grid", net.name()},
            {"buses", std::to_string(net.bus_count())},
            {"steps", std::to_string(steps)}};
}

inline void write_store(const fs::path& path, const GridNetwork& net, const std::map<std::string, std::string>& meta,
                        const std::vector<RetainedStep>& retained, const std::vector<StepSummary>& summaries,
                        const std::vector<double>& h0) {
    GzWriter w(path);
    w.line(kStoreMagic);
    for (const auto& [k, v] : meta) w.line("meta," + k + "," + v);
    for (std::size_t b = 0; b < net.bus_count(); ++b)
        w.line("energy," + net.buses()[b].id + "," + fmt_num(net.buses()[b].annual_energy_proxy));
    for (const auto& r : retained) {
        const auto& s = summaries.at(r.step);
        const auto& st = r.state;
        w.line("step," + std::to_string(r.step) + (st.converged ? ",1," : ",0,") + std::to_string(st.iterations) + "," +
               fmt_num(s.trafo_loading) + "," + fmt_num(s.min_v) + "," + fmt_num(s.max_v) + "," +
               fmt_num(s.max_line_loading) + "," + (net.branch_count() ? net.branches()[s.max_line].id : "") + "," +
               fmt_num(s.pv_generation_w) + "," + fmt_num(s.demand_w) + "," + fmt_num(h0.at(r.step)));
        if (!st.converged) continue;
        const std::string prefix = std::to_string(r.step) + ",";
        for (std::size_t b = 0; b < net.bus_count(); ++b)
            w.line("bus," + prefix + net.buses()[b].id + "," + fmt_num(st.voltage[b].real()) + "," +
                   fmt_num(st.voltage[b].imag()) + "," + fmt_num(st.load[b].real()) + "," + fmt_num(st.load[b].imag()));
        for (std::size_t k = 0; k < net.branch_count(); ++k)
            w.line("branch," + prefix + net.branches()[k].id + "," + fmt_num(st.branch_current[k].real()) + "," +
                   fmt_num(st.branch_current[k].imag()));
    }
    w.commit();
}

/// Reads a store written for `net` (any equipment level of the same grid).
inline SnapshotStore read_store(const fs::path& path, const GridNetwork& net) {
    SnapshotStore out;
    out.energy.assign(net.bus_count(), 0.0);
    std::map<std::size_t, std::size_t> pos; // step -> index in out.steps
    bool first = true;
    auto at_step = [&](const std::string& s) -> StoredStep& {
        const auto step = static_cast<std::size_t>(parse_int(s, "step"));
        auto it = pos.find(step);
        if (it == pos.end()) throw ParseError("record for undeclared step " + s);
        return out.steps[it->second];
    };
    for_each_gz_line(path, [&](std::string_view line) {
        if (first) {
            if (line != kStoreMagic) throw ParseError("not a snapshot store: " + path.string());
            first = false;
            return;
        }
        if (line.empty()) return;
        const auto c = split_csv(line);
        const auto& tag = c[0];
        if (tag == "meta" && c.size() >= 3) {
            out.meta[c[1]] = c[2];
        } else if (tag == "energy" && c.size() == 3) {
            out.energy[net.bus_index(c[1])] = parse_double(c[2], "energy");
        } else if (tag == "step" && c.size() == 12) {
            StoredStep s;
            s.summary.step = static_cast<std::size_t>(parse_int(c[1], "step"));
            s.summary.converged = c[2] == "1";
            s.state.converged = s.summary.converged;
            s.state.iterations = static_cast<int>(parse_int(c[3], "iterations"));
            s.summary.trafo_loading = parse_double(c[4], "trafo_loading");
            s.state.trafo_loading = s.summary.trafo_loading;
            s.summary.min_v = parse_double(c[5], "min_v");
            s.summary.max_v = parse_double(c[6], "max_v");
            s.summary.max_line_loading = parse_double(c[7], "max_line_loading");
            s.summary.max_line = c[8].empty() ? 0 : net.branch_index(c[8]);
            s.summary.pv_generation_w = parse_double(c[9], "pv_w");
            s.summary.demand_w = parse_double(c[10], "demand_w");
            s.h0 = parse_double(c[11], "h0");
            if (s.state.converged) {
                s.state.voltage.assign(net.bus_count(), cplx{});
                s.state.load.assign(net.bus_count(), cplx{});
                s.state.branch_current.assign(net.branch_count(), cplx{});
            }
            pos[s.summary.step] = out.steps.size();
            out.steps.push_back(std::move(s));
        } else if (tag == "bus" && c.size() == 7) {
            auto& s = at_step(c[1]);
            const auto b = net.bus_index(c[2]);
            s.state.voltage.at(b) = {parse_double(c[3], "v_re"), parse_double(c[4], "v_im")};
            s.state.load.at(b) = {parse_double(c[5], "p_w"), parse_double(c[6], "q_var")};
        } else if (tag == "branch" && c.size() == 5) {
            auto& s = at_step(c[1]);
            s.state.branch_current.at(net.branch_index(c[2])) = {parse_double(c[3], "i_re"), parse_double(c[4], "i_im")};
        } else {
            throw ParseError("malformed snapshot store row: " + std::string(line));
        }
    });
    if (first) throw ParseError("empty snapshot store: " + path.string());
    if (out.get("buses") != std::to_string(net.bus_count())) throw ParseError("snapshot store grid does not match");
    return out;
}

/// The network a store was simulated on: equipment level and E_a restored.
inline GridNetwork store_network(const GridNetwork& base, const SnapshotStore& store) {
    return apply_equipment_level(base, store.level()).with_annual_energy(store.energy);
}

} // namespace lvse
