#pragma once

// Batch pipeline behind the command-line tool: scenario simulation,
// estimator sweeps and report assembly.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lvse/config.hpp"
#include "lvse/congestion.hpp"
#include "lvse/io.hpp"
#include "lvse/measurements.hpp"
#include "lvse/metrics.hpp"
#include "lvse/power_flow.hpp"
#include "lvse/profiles.hpp"
#include "lvse/scenario.hpp"
#include "lvse/snapshot_store.hpp"
#include "lvse/state_estimation.hpp"
#include "lvse/stats.hpp"
#include "lvse/verification.hpp"

namespace lvse {

using Log = std::function<void(const std::string&)>;

inline unsigned thread_count(const RunConfig& c) { return c.threads ? c.threads : default_threads(); }

inline ProfileSet profile_source(const RunConfig& c) {
    return c.profile_dir ? load_profiles(*c.profile_dir) : synthesize_profiles(c.profile_seed);
}

inline PathwayTable pathway_source(const RunConfig& c) {
    return c.pathway_file ? load_pathways(c.pathway_file->string()) : builtin_pathways();
}

inline std::vector<CatalogEntry> selected_scenarios(const RunConfig& c) {
    if (c.scenarios.empty()) return scenario_catalog();
    std::vector<CatalogEntry> out;
    for (int id : c.scenarios) out.push_back(catalog_entry(id));
    return out;
}

// ---------------------------------------------------------------- simulate

struct ScenarioRun {
    ScenarioSpec spec;
    GridNetwork net;
    TimeseriesResult result;
    std::vector<CongestionEvent> events;
    CongestionSummary summary;
};

/// Simulates one scenario at one equipment level in memory.
inline ScenarioRun run_scenario(const GridNetwork& base, const CatalogEntry& entry, Quality level, std::uint64_t seed,
                                const ProfileSet& profiles, const PathwayTable& table, unsigned threads,
                                std::size_t steps = kStepsPerYear) {
    ScenarioRun r;
    r.spec = build_scenario(entry, base, level, seed, table, &profiles);
    r.net = scenario_network(base, r.spec, profiles);
    r.result = run_timeseries(r.net, r.spec, profiles, is_congested, threads, steps);
    for (const auto& k : r.result.retained)
        if (auto ev = classify_period(k, r.net)) r.events.push_back(std::move(*ev));
    r.summary = aggregate(r.events, r.result.summaries, r.net);
    return r;
}

inline std::string events_csv(const std::vector<CongestionEvent>& events) {
    std::string out = "step,month,hour,severity,root_cause,thermal_overload,undervoltage,overvoltage,non_convergence,elements\n";
    for (const auto& e : events) {
        out += std::to_string(e.step) + "," + std::to_string(month_of_step(e.step) + 1) + "," +
               std::to_string(hour_of_step(e.step)) + "," + std::string(to_string(e.severity)) + "," +
               std::string(to_string(e.root_cause)) + "," + (e.has(Trigger::thermal_overload) ? "1," : "0,") +
               (e.has(Trigger::undervoltage) ? "1," : "0,") + (e.has(Trigger::overvoltage) ? "1," : "0,") +
               (e.has(Trigger::non_convergence) ? "1," : "0,") + std::to_string(e.elements.size()) + "\n";
    }
    return out;
}

/// Writes the per-scenario outputs; returns the index row.
inline nlohmann::json write_scenario_outputs(const fs::path& dir, const ScenarioRun& r, const ProfileSet& profiles,
                                             double seconds) {
    const auto label = r.spec.label();
    write_results(results_path(dir, label), r.result.summaries);
    write_store(store_path(dir, label), r.net, scenario_meta(r.spec, r.net, r.result.summaries.size()), r.result.retained,
                r.result.summaries, profiles.h0_shape());
    auto summary = summary_to_json(r.summary);
    summary["scenario"] = scenario_to_json(r.spec);
    write_text_atomic(dir / (label + ".summary.json"), summary.dump(1) + "\n");
    write_text_atomic(dir / (label + ".heatmap.csv"), heatmap_csv(r.summary));
    write_text_atomic(dir / (label + ".events.csv"), events_csv(r.events));
    auto cause = [&](RootCause c) {
        auto it = r.summary.by_cause.find(c);
        return it == r.summary.by_cause.end() ? std::size_t{0} : it->second;
    };
    return {{"scenario_id", r.spec.scenario_id},
            {"label", label},
            {"area", to_string(r.spec.area)},
            {"year", r.spec.year},
            {"pathway", r.spec.pathway ? std::string(to_string(*r.spec.pathway)) : std::string("CurrentState")},
            {"level", to_string(r.spec.level)},
            {"steps", r.result.summaries.size()},
            {"events", r.summary.events},
            {"share_pct", r.summary.share_pct()},
            {"grey", r.summary.grey},
            {"hard", r.summary.hard},
            {"load_side", cause(RootCause::load_side)},
            {"generation_side", cause(RootCause::generation_side)},
            {"combined", cause(RootCause::combined)},
            {"not_converged", cause(RootCause::not_converged)},
            {"max_trafo_loading_pct", r.summary.max_trafo_loading},
            {"max_line_loading_pct", r.summary.max_line_loading},
            {"min_voltage_pu", r.summary.min_voltage},
            {"max_voltage_pu", r.summary.max_voltage},
            {"seconds", seconds}};
}

inline const std::vector<std::string> kIndexColumns{
    "scenario_id", "label", "area", "year", "pathway", "level", "steps", "events", "share_pct", "grey", "hard",
    "load_side", "generation_side", "combined", "not_converged", "max_trafo_loading_pct", "max_line_loading_pct",
    "min_voltage_pu", "max_voltage_pu"};

inline std::string json_cell(const nlohmann::json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number_float()) return fmt_num(v.get<double>());
    return v.dump();
}

inline std::string table_csv(const std::vector<nlohmann::json>& rows, const std::vector<std::string>& cols) {
    std::string out;
    for (std::size_t i = 0; i < cols.size(); ++i) out += (i ? "," : "") + cols[i];
    out += "\n";
    for (const auto& r : rows) {
        for (std::size_t i = 0; i < cols.size(); ++i) out += (i ? "," : "") + (r.contains(cols[i]) ? json_cell(r[cols[i]]) : "");
        out += "\n";
    }
    return out;
}

/// Simulates every selected scenario x level; the index is rewritten after
/// each run so an interrupted batch keeps its finished part.
inline std::vector<nlohmann::json> cmd_simulate(const RunConfig& cfg, const Log& log = {}) {
    const auto entries = selected_scenarios(cfg);
    bool need_rural = false, need_urban = false;
    for (const auto& e : entries) (e.area == Area::rural ? need_rural : need_urban) = true;
    validate_config(cfg, need_rural, need_urban);
    std::optional<GridNetwork> rural, urban;
    if (need_rural) rural = load_network(cfg.grid_rural);
    if (need_urban) urban = load_network(cfg.grid_urban);
    const auto profiles = profile_source(cfg);
    const auto table = pathway_source(cfg);
    fs::create_directories(cfg.output);
    std::vector<nlohmann::json> index;
    for (const auto& e : entries) {
        const auto& base = e.area == Area::rural ? *rural : *urban;
        for (auto level : cfg.levels) {
            const auto t0 = std::chrono::steady_clock::now();
            const auto run = run_scenario(base, e, level, cfg.seed, profiles, table, thread_count(cfg), cfg.steps);
            const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            index.push_back(write_scenario_outputs(cfg.output, run, profiles, sec));
            write_text_atomic(cfg.output / "simulation_index.csv", table_csv(index, kIndexColumns));
            if (log)
                log(run.spec.label() + ": " + std::to_string(run.summary.events) + " congested steps (" +
                    fmt_fixed(run.summary.share_pct(), 2) + " %), peak transformer " +
                    fmt_fixed(run.summary.max_trafo_loading, 1) + " %");
        }
    }
    nlohmann::json j = index;
    write_text_atomic(cfg.output / "simulation_index.json", j.dump(1) + "\n");
    return index;
}

// ------------------------------------------------------------------- sweep

/// One congested period as seen by the estimator sweep.
struct SweepPeriod {
    std::size_t step = 0;
    const SnapshotState* state = nullptr;
    double h0 = 0.0;
};

struct SweepPoint {
    ConstellationKind constellation = ConstellationKind::K2;
    std::size_t n_real = 0;
    PlacementKind strategy = PlacementKind::power_first;
    std::vector<std::uint64_t> seeds;
    std::vector<std::vector<double>> eps; // per seed, per period (%)
    std::vector<double> fv, fi;           // pooled over seeds and periods (%)
    AlarmCounts alarms;

    /// Median over periods, averaged over placement seeds.
    double eps_median() const {
        double s = 0.0;
        for (const auto& e : eps) s += median(e);
        return eps.empty() ? 0.0 : s / double(eps.size());
    }
    double eps_quantile(double q) const {
        double s = 0.0;
        for (const auto& e : eps) s += percentile(e, q);
        return eps.empty() ? 0.0 : s / double(eps.size());
    }
    double eps_mean() const {
        double s = 0.0;
        for (const auto& e : eps) s += mean(e);
        return eps.empty() ? 0.0 : s / double(eps.size());
    }
    double fv_p99() const { return fv.empty() ? 0.0 : percentile(fv, 99); }
    double fi_p99() const { return fi.empty() ? 0.0 : percentile(fi, 99); }
};

struct SweepOptions {
    MeasurementOptions measurement;
    EstimatorConfig estimator{.uncertainty = false};
    std::uint64_t noise_seed = 0;
    unsigned threads = 1;
};

/// Evaluates one constellation x penetration x strategy point over the
/// given periods. Measurement noise depends only on (noise seed, step), so
/// every sweep point sees the same noise realisation per period.
inline SweepPoint evaluate_sweep_point(const GridNetwork& net, const std::vector<SweepPeriod>& periods,
                                       ConstellationKind c, std::size_t n_real, PlacementKind strategy,
                                       const std::vector<std::uint64_t>& seeds, const SweepOptions& opt = {}) {
    SweepPoint p;
    p.constellation = c;
    p.n_real = n_real;
    p.strategy = strategy;
    p.seeds = strategy == PlacementKind::random ? seeds : std::vector<std::uint64_t>{0};
    if (p.seeds.empty()) throw ConfigError("random placement needs at least one seed");
    const std::size_t np = periods.size();
    std::vector<PeriodAccuracy> acc(p.seeds.size() * np);
    parallel_for(acc.size(), opt.threads, [&](std::size_t i, unsigned) {
        const auto& per = periods[i % np];
        const auto seed = p.seeds[i / np];
        std::vector<double> apparent(net.bus_count());
        for (std::size_t b = 0; b < net.bus_count(); ++b) apparent[b] = std::abs(per.state->load[b]);
        const auto metered = place_smgw(net, n_real, {strategy, seed}, apparent);
        auto mo = opt.measurement;
        mo.seed = mix_seed(opt.noise_seed, per.step);
        const auto meas = build_measurements(net, *per.state, {c}, metered, per.h0, mo);
        acc[i] = evaluate_period(net, *per.state, estimate(net, meas, opt.estimator));
    });
    p.eps.assign(p.seeds.size(), {});
    for (std::size_t i = 0; i < acc.size(); ++i) {
        p.eps[i / np].push_back(acc[i].eps_bar);
        p.fv.insert(p.fv.end(), acc[i].fv.begin(), acc[i].fv.end());
        p.fi.insert(p.fi.end(), acc[i].fi.begin(), acc[i].fi.end());
        p.alarms += acc[i].alarms;
    }
    return p;
}

inline nlohmann::json sweep_row(const std::string& label, const SnapshotStore* store, Area area, std::size_t n_lv,
                                std::size_t periods, const SweepPoint& p) {
    nlohmann::json r{{"label", label},
                     {"area", to_string(area)},
                     {"constellation", to_string(p.constellation)},
                     {"n_real", p.n_real},
                     {"rho_pct", 100.0 * double(p.n_real) / double(n_lv)},
                     {"strategy", to_string(p.strategy)},
                     {"seeds", p.seeds.size()},
                     {"periods", periods},
                     {"eps_median_pct", p.eps_median()},
                     {"eps_q25_pct", p.eps_quantile(25)},
                     {"eps_q75_pct", p.eps_quantile(75)},
                     {"eps_mean_pct", p.eps_mean()},
                     {"fv_p99_pct", p.fv_p99()},
                     {"fi_p99_pct", p.fi_p99()},
                     {"tnr_pct", p.alarms.tnr()},
                     {"false_alarms", p.alarms.fp},
                     {"true_alarms", p.alarms.tp}};
    if (auto t = p.alarms.tpr()) r["tpr_pct"] = *t;
    if (store) {
        r["scenario_id"] = std::stoi(store->get("scenario_id"));
        r["level"] = store->get("level");
        r["year"] = std::stoi(store->get("year"));
        r["pathway"] = store->get("pathway");
    }
    return r;
}

inline const std::vector<std::string> kAccuracyColumns{
    "scenario_id", "label", "area", "level", "year", "pathway", "constellation", "n_real", "rho_pct", "strategy",
    "seeds", "periods", "eps_median_pct", "eps_q25_pct", "eps_q75_pct", "eps_mean_pct", "fv_p99_pct", "fi_p99_pct",
    "tnr_pct", "false_alarms", "true_alarms", "tpr_pct"};

/// Snapshot stores in the output directory, filtered by the selection.
inline std::vector<fs::path> selected_stores(const RunConfig& cfg) {
    if (!fs::is_directory(cfg.output)) throw Error("output directory not found: " + cfg.output.string());
    std::set<int> ids(cfg.scenarios.begin(), cfg.scenarios.end());
    std::set<std::string> levels;
    for (auto l : cfg.levels) levels.insert(std::string(to_string(l)));
    std::vector<fs::path> out;
    for (const auto& e : fs::directory_iterator(cfg.output)) {
        const auto name = e.path().filename().string();
        const std::string suffix = ".snapshots.csv.gz";
        if (name.size() <= suffix.size() || name.compare(name.size() - suffix.size(), suffix.size(), suffix) != 0) continue;
        // Label: S<id>_<area>_<year>_<pathway>_<level>
        const auto stem = name.substr(0, name.size() - suffix.size());
        const auto us = stem.find('_');
        const auto last = stem.rfind('_');
        if (stem.empty() || stem[0] != 'S' || us == std::string::npos) continue;
        const int id = std::atoi(stem.substr(1, us - 1).c_str());
        if (!ids.empty() && !ids.count(id)) continue;
        if (!levels.count(stem.substr(last + 1))) continue;
        out.push_back(e.path());
    }
    std::sort(out.begin(), out.end());
    return out;
}

/// Runs the configured sweep over every stored congested scenario.
inline std::vector<nlohmann::json> cmd_sweep(const RunConfig& cfg, const Log& log = {}) {
    const auto stores = selected_stores(cfg);
    if (stores.empty()) throw Error("no snapshot store in " + cfg.output.string() + "; run simulate first");
    std::map<Area, std::optional<GridNetwork>> grids;
    std::vector<nlohmann::json> rows;
    std::string periods_csv = "label,constellation,n_real,strategy,seed,step,eps_pct\n";
    SweepOptions opt;
    opt.noise_seed = cfg.noise_seed;
    opt.threads = thread_count(cfg);
    for (const auto& path : stores) {
        // The store's area decides the grid; peek at it with the rural grid
        // only when the label says so.
        const auto name = path.filename().string();
        const Area area = name.find("_urban_") != std::string::npos ? Area::urban : Area::rural;
        auto& grid = grids[area];
        if (!grid) {
            validate_config(cfg, area == Area::rural, area == Area::urban);
            grid = load_network(area == Area::rural ? cfg.grid_rural : cfg.grid_urban);
            validate_penetrations(cfg, *grid);
        }
        const auto store = read_store(path, *grid);
        const auto net = store_network(*grid, store);
        std::vector<StepSummary> summaries;
        std::map<std::size_t, const StoredStep*> by_step;
        for (const auto& s : store.steps) {
            summaries.push_back(s.summary);
            by_step[s.summary.step] = &s;
        }
        const auto sample = stratified_sample(summaries, cfg.periods);
        if (sample.empty()) {
            if (log) log(store.label() + ": no converged congested period, skipped");
            continue;
        }
        std::vector<SweepPeriod> periods;
        for (auto s : sample) periods.push_back({s, &by_step.at(s)->state, by_step.at(s)->h0});
        const auto n_lv = net.ncp_buses().size();
        for (auto c : cfg.constellations)
            for (auto n : cfg.penetrations(area))
                for (auto strat : cfg.strategies) {
                    const auto p = evaluate_sweep_point(net, periods, c, n, strat, cfg.random_seeds, opt);
                    rows.push_back(sweep_row(store.label(), &store, area, n_lv, periods.size(), p));
                    for (std::size_t si = 0; si < p.eps.size(); ++si)
                        for (std::size_t k = 0; k < periods.size(); ++k)
                            periods_csv += store.label() + "," + std::string(to_string(c)) + "," + std::to_string(n) +
                                           "," + std::string(to_string(strat)) + "," + std::to_string(p.seeds[si]) +
                                           "," + std::to_string(periods[k].step) + "," + fmt_num(p.eps[si][k]) + "\n";
                }
        if (log) log(store.label() + ": " + std::to_string(periods.size()) + " periods evaluated");
        write_text_atomic(cfg.output / "accuracy.csv", table_csv(rows, kAccuracyColumns));
    }
    write_text_atomic(cfg.output / "accuracy.csv", table_csv(rows, kAccuracyColumns));
    write_text_atomic(cfg.output / "accuracy_periods.csv", periods_csv);
    nlohmann::json j = rows;
    write_text_atomic(cfg.output / "accuracy.json", j.dump(1) + "\n");
    return rows;
}

// ------------------------------------------------------------------ report

namespace detail {

inline std::vector<std::map<std::string, std::string>> read_csv_table(const fs::path& path) {
    std::vector<std::map<std::string, std::string>> rows;
    std::istringstream in(read_text(path));
    std::string line;
    std::vector<std::string> header;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto cells = split_csv(line);
        if (header.empty()) {
            header = std::move(cells);
            continue;
        }
        if (cells.size() != header.size()) throw ParseError("ragged row in " + path.string());
        auto& r = rows.emplace_back();
        for (std::size_t i = 0; i < header.size(); ++i) r[header[i]] = cells[i];
    }
    return rows;
}

} // namespace detail

/// Constellation error ratios at one penetration: per scenario (ratio of
/// medians) and pooled (ratio of medians over all periods of all scenarios).
inline nlohmann::json constellation_ratios(const std::vector<std::map<std::string, std::string>>& periods,
                                           const std::string& strategy) {
    // key: n_real/area-free grouping by label
    std::map<std::string, std::map<std::string, std::map<std::string, std::vector<double>>>> by; // n -> label -> c
    for (const auto& r : periods) {
        if (r.at("strategy") != strategy) continue;
        by[r.at("n_real")][r.at("label")][r.at("constellation")].push_back(parse_double(r.at("eps_pct"), "eps_pct"));
    }
    nlohmann::json out = nlohmann::json::array();
    for (const auto& [n, labels] : by) {
        std::map<std::string, std::vector<double>> pooled;
        for (const auto& [label, cs] : labels) {
            nlohmann::json row{{"label", label}, {"n_real", std::stoi(n)}, {"aggregation", "per_scenario"}};
            for (const auto& [c, v] : cs) {
                row["median_" + c] = median(v);
                pooled[c].insert(pooled[c].end(), v.begin(), v.end());
            }
            for (const char* d : {"K2", "K1"})
                if (cs.count("K3") && cs.count(d) && median(cs.at(d)) > 0.0)
                    row[std::string("ratio_K3_") + d] = median(cs.at("K3")) / median(cs.at(d));
            out.push_back(row);
        }
        nlohmann::json row{{"label", "pooled"}, {"n_real", std::stoi(n)}, {"aggregation", "pooled"}};
        for (const auto& [c, v] : pooled) row["median_" + c] = median(v);
        for (const char* d : {"K2", "K1"})
            if (pooled.count("K3") && pooled.count(d) && median(pooled.at(d)) > 0.0)
                row[std::string("ratio_K3_") + d] = median(pooled.at("K3")) / median(pooled.at(d));
        out.push_back(row);
    }
    return out;
}

/// Collects simulation and sweep outputs of a run directory into
/// report.json plus CSV tables.
inline nlohmann::json cmd_report(const RunConfig& cfg, const Log& log = {}) {
    const auto& dir = cfg.output;
    if (!fs::is_directory(dir)) throw Error("output directory not found: " + dir.string());
    nlohmann::json rep;
    bool any = false;
    if (fs::exists(dir / "simulation_index.csv")) {
        any = true;
        const auto idx = detail::read_csv_table(dir / "simulation_index.csv");
        std::map<std::string, std::pair<int, int>> congested_by_level; // level -> (congested, total)
        nlohmann::json scen = nlohmann::json::array();
        for (const auto& r : idx) {
            auto& c = congested_by_level[r.at("level")];
            c.second += 1;
            c.first += parse_int(r.at("events"), "events") > 0 ? 1 : 0;
            nlohmann::json j;
            for (const auto& [k, v] : r) j[k] = v;
            scen.push_back(j);
        }
        rep["scenarios"] = scen;
        for (const auto& [lvl, c] : congested_by_level)
            rep["congested_scenarios"][lvl] = {{"congested", c.first}, {"total", c.second}};
        // Year-round monthly and hourly profiles summed over all scenarios.
        std::array<long, 12> monthly_load{}, monthly_gen{};
        std::array<long, 24> hourly_load{}, hourly_gen{};
        for (const auto& r : idx) {
            const auto p = dir / (r.at("label") + ".summary.json");
            if (!fs::exists(p)) continue;
            const auto s = nlohmann::json::parse(read_text(p));
            for (int m = 0; m < 12; ++m) {
                monthly_load[m] += s["monthly_load"][m].get<long>();
                monthly_gen[m] += s["monthly_generation"][m].get<long>();
            }
            for (int h = 0; h < 24; ++h) {
                hourly_load[h] += s["hourly_load"][h].get<long>();
                hourly_gen[h] += s["hourly_generation"][h].get<long>();
            }
        }
        rep["monthly_load"] = monthly_load;
        rep["monthly_generation"] = monthly_gen;
        rep["hourly_load"] = hourly_load;
        rep["hourly_generation"] = hourly_gen;
        std::vector<nlohmann::json> rows;
        for (const auto& j : scen) rows.push_back(j);
        write_text_atomic(dir / "report_congestion.csv", table_csv(rows, kIndexColumns));
    }
    if (fs::exists(dir / "accuracy.csv")) {
        any = true;
        const auto acc = detail::read_csv_table(dir / "accuracy.csv");
        // Median over scenarios of per-scenario medians, per level, area,
        // constellation and penetration.
        std::map<std::tuple<std::string, std::string, std::string, std::string, std::string>, std::vector<double>> eps, fv, fi;
        std::map<std::tuple<std::string, std::string, std::string, std::string, std::string>, long> false_alarms;
        for (const auto& r : acc) {
            const auto key = std::make_tuple(r.at("area"), r.at("level"), r.at("constellation"), r.at("n_real"), r.at("strategy"));
            eps[key].push_back(parse_double(r.at("eps_median_pct"), "eps"));
            fv[key].push_back(parse_double(r.at("fv_p99_pct"), "fv"));
            fi[key].push_back(parse_double(r.at("fi_p99_pct"), "fi"));
            false_alarms[key] += parse_int(r.at("false_alarms"), "false_alarms");
        }
        std::vector<nlohmann::json> rows;
        for (const auto& [key, v] : eps) {
            const auto& [area, level, c, n, strat] = key;
            rows.push_back({{"area", area},
                            {"level", level},
                            {"constellation", c},
                            {"n_real", std::stoi(n)},
                            {"strategy", strat},
                            {"scenarios", v.size()},
                            {"eps_median_pct", median(v)},
                            {"eps_iqr_pct", iqr(v)},
                            {"fv_p99_median_pct", median(fv.at(key))},
                            {"fi_p99_median_pct", median(fi.at(key))},
                            {"false_alarms", false_alarms.at(key)}});
        }
        rep["accuracy"] = rows;
        write_text_atomic(dir / "report_accuracy.csv",
                          table_csv(rows, {"area", "level", "constellation", "n_real", "strategy", "scenarios",
                                           "eps_median_pct", "eps_iqr_pct", "fv_p99_median_pct", "fi_p99_median_pct",
                                           "false_alarms"}));
    }
    if (fs::exists(dir / "accuracy_periods.csv")) {
        const auto periods = detail::read_csv_table(dir / "accuracy_periods.csv");
        std::set<std::string> strategies;
        for (const auto& r : periods) strategies.insert(r.at("strategy"));
        std::vector<nlohmann::json> rows;
        for (const auto& s : strategies) {
            auto ratios = constellation_ratios(periods, s);
            for (auto& r : ratios) {
                r["strategy"] = s;
                rows.push_back(r);
            }
        }
        rep["constellation_ratios"] = rows;
        write_text_atomic(dir / "report_ratios.csv",
                          table_csv(rows, {"label", "aggregation", "strategy", "n_real", "median_K3", "median_K2",
                                           "median_K1", "ratio_K3_K2", "ratio_K3_K1"}));
    }
    if (!any) throw Error("nothing to report in " + dir.string() + "; run simulate or sweep first");
    write_text_atomic(dir / "report.json", rep.dump(1) + "\n");
    if (log) log("report written to " + (dir / "report.json").string());
    return rep;
}

// ------------------------------------------------------------------ verify

struct VerifyOptions {
    bool perturb_jacobian = false;
    std::size_t solver_cases = 100;
    std::size_t balance_configurations = 1000;
    std::size_t coverage_runs = 1000;
};

/// Runs every verification check; writes verify.json into the output
/// directory when one is configured.
inline std::vector<CheckResult> cmd_verify(const RunConfig& cfg, const VerifyOptions& vo = {}, const Log& log = {}) {
    validate_config(cfg, true, false);
    if (!fs::exists(cfg.grid_minimal)) throw ConfigError("minimal grid file not found: " + cfg.grid_minimal.string());
    const auto rural = load_network(cfg.grid_rural);
    const auto minimal = load_network(cfg.grid_minimal);
    const auto medium = apply_equipment_level(rural, Quality::medium);
    const auto poor = apply_equipment_level(rural, Quality::poor);
    MirrorOptions mo;
    mo.estimator.perturb_jacobian = vo.perturb_jacobian;
    std::vector<CheckResult> out;
    auto run = [&](const std::string& name, auto&& fn) {
        out.push_back(timed_check(name, fn));
        if (log) log(std::string(out.back().passed ? "PASS " : "FAIL ") + name + ": " + out.back().detail);
    };
    run("eight_step_fixture", [&] { return check_fixture(medium); });
    run("minimal_network", [&] { return check_minimal_network(minimal, mo.estimator); });
    run("full_coverage", [&] { return check_full_coverage(rural, mo.estimator); });
    run("mirror_table", [&] { return check_mirror_table(medium, mo); });
    run("slack_offset", [&] { return check_slack_offset(poor, mo); });
    run("solver_agreement", [&] { return check_solver_agreement(vo.solver_cases); });
    run("pseudo_balance", [&] { return check_pseudo_balance(rural, vo.balance_configurations); });
    run("uq_coverage", [&] { return check_uq_coverage(vo.coverage_runs); });
    run("metric_units", [] { return check_metric_units(); });
    if (!cfg.output.empty()) {
        nlohmann::json j;
        j["perturb_jacobian"] = vo.perturb_jacobian;
        j["passed"] = std::all_of(out.begin(), out.end(), [](const auto& c) { return c.passed; });
        for (const auto& c : out) j["checks"].push_back(to_json(c));
        write_text_atomic(cfg.output / "verify.json", j.dump(1) + "\n");
    }
    return out;
}

} // namespace lvse
