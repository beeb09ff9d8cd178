#pragma once

// Verification harnesses: the eight-step fixture, minimal-network and
// full-coverage estimator tests, the mirror table, the slack-offset check,
// solver cross-agreement and the pseudo-measurement balance identities.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lvse/congestion.hpp"
#include "lvse/grid_model.hpp"
#include "lvse/io.hpp"
#include "lvse/measurements.hpp"
#include "lvse/metrics.hpp"
#include "lvse/power_flow.hpp"
#include "lvse/state_estimation.hpp"
#include "lvse/stats.hpp"

namespace lvse {

enum class ExpectedOutcome { no_congestion, generation_side, load_side, combined, not_converged };

inline std::string_view to_string(ExpectedOutcome o) {
    switch (o) {
    case ExpectedOutcome::no_congestion: return "no_congestion";
    case ExpectedOutcome::generation_side: return "generation_side";
    case ExpectedOutcome::load_side: return "load_side";
    case ExpectedOutcome::combined: return "combined";
    case ExpectedOutcome::not_converged: return "not_converged";
    }
    return "?";
}

inline ExpectedOutcome outcome_of(const std::optional<CongestionEvent>& ev) {
    if (!ev) return ExpectedOutcome::no_congestion;
    switch (ev->root_cause) {
    case RootCause::generation_side: return ExpectedOutcome::generation_side;
    case RootCause::load_side: return ExpectedOutcome::load_side;
    case RootCause::combined: return ExpectedOutcome::combined;
    case RootCause::not_converged: break;
    }
    return ExpectedOutcome::not_converged;
}

struct FixtureStep {
    std::string name;
    InjectionSet injections;
    ExpectedOutcome expected;
};

/// NCP buses ordered by decreasing path resistance from the slack.
inline std::vector<std::size_t> remote_ncp_buses(const GridNetwork& net) {
    std::vector<std::pair<double, std::size_t>> r;
    for (auto b : net.ncp_buses()) {
        double sum = 0.0;
        for (auto k : net.path_to(b)) sum += net.branches()[k].resistance;
        r.push_back({-sum, b});
    }
    std::sort(r.begin(), r.end());
    std::vector<std::size_t> out;
    for (auto& [_, b] : r) out.push_back(b);
    return out;
}

/// Eight synthetic periods on a network (the rural reference at medium
/// equipment in the bundled suite). Loads scale with the transformer
/// rating so the outcomes hold for any NCP count.
inline std::vector<FixtureStep> verification_fixture(const GridNetwork& net) {
    const auto ncp = net.ncp_buses();
    const auto remote = remote_ncp_buses(net);
    const std::size_t n_remote = std::min<std::size_t>(8, remote.size());
    const double share_w = net.transformer().rating_kva * 1000.0 / 3.0 / double(ncp.size()); // per NCP and phase
    auto uniform = [&](InjectionSet& inj, DeviceClass c, double factor) {
        for (auto b : ncp) inj.add(b, c, factor * share_w);
    };
    auto at_remote = [&](InjectionSet& inj, DeviceClass c, double w) {
        for (std::size_t i = 0; i < n_remote; ++i) inj.add(remote[i], c, w);
    };
    const double pv_w = -0.85 * 11.5e3 / 3.0;
    const double ev_w = 3.0 * 3.68e3 / 3.0;
    std::vector<FixtureStep> steps;
    {
        InjectionSet inj(net.bus_count());
        uniform(inj, DeviceClass::household, 0.15);
        steps.push_back({"night base load", std::move(inj), ExpectedOutcome::no_congestion});
    }
    {
        InjectionSet inj(net.bus_count());
        uniform(inj, DeviceClass::household, 0.35);
        uniform(inj, DeviceClass::pv, -0.2);
        steps.push_back({"moderate midday", std::move(inj), ExpectedOutcome::no_congestion});
    }
    {
        InjectionSet inj(net.bus_count());
        uniform(inj, DeviceClass::household, 0.05);
        at_remote(inj, DeviceClass::pv, 2.0 * pv_w);
        steps.push_back({"remote PV surplus", std::move(inj), ExpectedOutcome::generation_side});
    }
    {
        InjectionSet inj(net.bus_count());
        uniform(inj, DeviceClass::household, 1.04);
        steps.push_back({"transformer grey overload", std::move(inj), ExpectedOutcome::load_side});
    }
    {
        InjectionSet inj(net.bus_count());
        uniform(inj, DeviceClass::household, 0.3);
        at_remote(inj, DeviceClass::ev_private, 2.0 * ev_w);
        steps.push_back({"remote EV charging", std::move(inj), ExpectedOutcome::load_side});
    }
    {
        InjectionSet inj(net.bus_count());
        uniform(inj, DeviceClass::household, 1.2);
        uniform(inj, DeviceClass::heat_pump, 0.6);
        steps.push_back({"winter evening peak", std::move(inj), ExpectedOutcome::load_side});
    }
    {
        InjectionSet inj(net.bus_count());
        uniform(inj, DeviceClass::household, 40.0);
        steps.push_back({"pathological load", std::move(inj), ExpectedOutcome::not_converged});
    }
    {
        InjectionSet inj(net.bus_count());
        uniform(inj, DeviceClass::household, 1.5);
        uniform(inj, DeviceClass::pv, -1.5);
        steps.push_back({"balanced PV and load", std::move(inj), ExpectedOutcome::no_congestion});
    }
    return steps;
}

struct CheckResult {
    std::string name;
    bool passed = false;
    std::string detail;
    double seconds = 0.0;
    nlohmann::json data;
};

inline nlohmann::json to_json(const CheckResult& c) {
    return {{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}, {"seconds", c.seconds}, {"data", c.data}};
}

template <class Fn>
CheckResult timed_check(const std::string& name, Fn&& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    CheckResult r;
    try {
        r = fn();
    } catch (const std::exception& e) {
        r.passed = false;
        r.detail = std::string("exception: ") + e.what();
    }
    r.name = name;
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return r;
}

struct FixtureOutcome {
    std::string name;
    ExpectedOutcome expected, observed;
    bool converged = false;
    double trafo_loading = 0.0, min_v = 0.0, max_v = 0.0;
};

inline std::vector<FixtureOutcome> run_fixture(const GridNetwork& net) {
    std::vector<FixtureOutcome> out;
    NewtonRaphsonSolver solver(net);
    const auto steps = verification_fixture(net);
    for (std::size_t i = 0; i < steps.size(); ++i) {
        const auto& f = steps[i];
        const auto st = solver.solve(f.injections);
        const auto ev = classify_period(st, net, i, f.injections.pv_generation_w, f.injections.demand_w);
        const auto s = summarize(net, st, i, f.injections);
        out.push_back({f.name, f.expected, outcome_of(ev), st.converged, s.trafo_loading, s.min_v, s.max_v});
    }
    return out;
}

inline CheckResult check_fixture(const GridNetwork& net) {
    CheckResult r;
    const auto rows = run_fixture(net);
    r.passed = rows.size() == 8;
    for (const auto& o : rows) {
        const bool ok = o.expected == o.observed;
        r.passed &= ok;
        r.data.push_back({{"step", o.name},
                          {"expected", to_string(o.expected)},
                          {"observed", to_string(o.observed)},
                          {"converged", o.converged},
                          {"trafo_loading_pct", o.trafo_loading},
                          {"min_v_pu", o.min_v},
                          {"max_v_pu", o.max_v}});
    }
    r.detail = r.passed ? "8/8 outcomes reproduced" : "fixture outcome mismatch";
    return r;
}

/// Max and mean |v_est - v_true| / |v_true| over non-slack buses, in %.
struct VoltageErrorStats {
    double max_pct = 0.0, mean_pct = 0.0;
};

inline VoltageErrorStats relative_voltage_error(const GridNetwork& net, const SnapshotState& truth,
                                                const EstimationResult& est) {
    VoltageErrorStats s;
    std::size_t n = 0;
    for (std::size_t b = 0; b < net.bus_count(); ++b) {
        if (b == net.slack()) continue;
        const double e = 100.0 * std::abs(std::abs(est.voltage[b]) - std::abs(truth.voltage[b])) / std::abs(truth.voltage[b]);
        s.max_pct = std::max(s.max_pct, e);
        s.mean_pct += e;
        ++n;
    }
    if (n) s.mean_pct /= double(n);
    return s;
}

/// Uniform load at every NCP: `fraction` of the transformer rating split
/// evenly, household ZIP.
inline InjectionSet uniform_load(const GridNetwork& net, double fraction) {
    InjectionSet inj(net.bus_count());
    const auto ncp = net.ncp_buses();
    const double w = fraction * net.transformer().rating_kva * 1000.0 / 3.0 / double(ncp.size());
    for (auto b : ncp) inj.add(b, DeviceClass::household, w);
    return inj;
}

/// Exact full-coverage estimate of a solved snapshot (matched slack).
inline VoltageErrorStats full_coverage_error(const GridNetwork& net, const SnapshotState& st, const EstimatorConfig& cfg) {
    const auto meas = full_coverage_measurements(net, st, net.transformer().oltc_target);
    return relative_voltage_error(net, st, estimate(net, meas, cfg));
}

inline CheckResult check_minimal_network(const GridNetwork& three_bus, const EstimatorConfig& cfg) {
    CheckResult r;
    InjectionSet inj(three_bus.bus_count());
    for (auto b : three_bus.ncp_buses()) inj.add(b, DeviceClass::household, 4000.0);
    const auto st = solve_newton_raphson(three_bus, inj);
    if (!st.converged) throw DomainError("minimal network power flow did not converge");
    const auto e = full_coverage_error(three_bus, st, cfg);
    r.passed = e.max_pct < 1e-4;
    r.data = {{"max_error_pct", e.max_pct}, {"mean_error_pct", e.mean_pct}};
    r.detail = "max voltage error " + fmt_num(e.max_pct) + " %";
    return r;
}

inline CheckResult check_full_coverage(const GridNetwork& net, const EstimatorConfig& cfg) {
    CheckResult r;
    const auto st = solve_newton_raphson(net, uniform_load(net, 0.3));
    if (!st.converged) throw DomainError("30 % load power flow did not converge");
    const auto e = full_coverage_error(net, st, cfg);
    r.passed = e.mean_pct <= 1e-3 && e.max_pct <= 2e-3;
    r.data = {{"max_error_pct", e.max_pct}, {"mean_error_pct", e.mean_pct}};
    r.detail = "mean " + fmt_num(e.mean_pct) + " %, max " + fmt_num(e.max_pct) + " %";
    return r;
}

/// High-stress snapshot simulated at `oltc` and estimated against the
/// network's estimator slack, then with matched slack.
struct SlackOffsetResult {
    double trafo_loading = 0.0, min_v = 0.0;
    double mismatched = 0.0, matched = 0.0;
};

inline SlackOffsetResult slack_offset(const GridNetwork& net, double oltc, double load_fraction, const MirrorOptions& opt) {
    auto t = net.transformer();
    t.oltc_target = oltc;
    const auto sim = net.with_transformer(t);
    const auto inj = uniform_load(sim, load_fraction);
    const auto st = solve_newton_raphson(sim, inj);
    if (!st.converged) throw DomainError("slack-offset snapshot did not converge");
    SlackOffsetResult r;
    const auto s = summarize(sim, st, 0, inj);
    r.trafo_loading = s.trafo_loading;
    r.min_v = s.min_v;
    r.mismatched = mirror_deviation(sim, st, sim.transformer().se_slack_voltage, opt);
    r.matched = mirror_deviation(sim, st, oltc, opt);
    return r;
}

inline CheckResult check_slack_offset(const GridNetwork& rural_poor, const MirrorOptions& opt) {
    CheckResult r;
    const auto s = slack_offset(rural_poor, 1.025, 1.6, opt);
    r.passed = s.mismatched >= 0.1 && s.mismatched <= 0.5 && s.matched < kMirrorLimit;
    r.data = {{"trafo_loading_pct", s.trafo_loading},
              {"min_v_pu", s.min_v},
              {"mismatched_deviation_pct", s.mismatched},
              {"matched_deviation_pct", s.matched}};
    r.detail = "mismatched " + fmt_num(s.mismatched) + " %, matched " + fmt_num(s.matched) + " %";
    return r;
}

/// Mirror table over the converged fixture periods: once with the slack as
/// bundled (must pass) and once simulated at OLTC 1.025 against an
/// estimator slack of 1.0 (rows may be flagged, none may fail).
inline CheckResult check_mirror_table(const GridNetwork& net, const MirrorOptions& opt) {
    CheckResult r;
    r.passed = true;
    auto table = [&](const GridNetwork& g, const char* label, bool require_pass) {
        std::vector<std::pair<std::size_t, SnapshotState>> snaps;
        NewtonRaphsonSolver solver(g);
        const auto fx = verification_fixture(g);
        for (std::size_t i = 0; i < fx.size(); ++i) {
            auto st = solver.solve(fx[i].injections);
            if (st.converged) snaps.emplace_back(i, std::move(st));
        }
        for (const auto& row : run_mirror_test(g, snaps, opt)) {
            const bool ok = require_pass ? row.status == MirrorStatus::pass : row.status != MirrorStatus::fail;
            r.passed &= ok;
            nlohmann::json j{{"table", label},
                             {"step", fx[row.step].name},
                             {"deviation_pct", row.deviation},
                             {"status", to_string(row.status)}};
            if (row.matched_deviation) j["matched_deviation_pct"] = *row.matched_deviation;
            r.data.push_back(j);
        }
    };
    table(net, "matched", true);
    auto t = net.transformer();
    t.oltc_target = 1.025;
    t.se_slack_voltage = 1.0;
    table(net.with_transformer(t), "mismatched", false);
    r.detail = r.passed ? "all rows pass or flagged" : "mirror row failed";
    return r;
}

/// Random radial network: a tree grown by attaching each new bus to a
/// uniformly chosen existing bus.
inline GridNetwork random_radial_network(std::mt19937_64& rng, std::size_t n_buses) {
    if (n_buses < 2) throw DomainError("a radial network needs at least two buses");
    std::uniform_real_distribution<double> len(20.0, 120.0);
    std::vector<Bus> buses;
    std::vector<Branch> branches;
    buses.push_back({"b0", BusKind::slack, false, kNominalPhaseVoltage, 0.0, 0});
    for (std::size_t i = 1; i < n_buses; ++i) {
        buses.push_back({"b" + std::to_string(i), BusKind::load, true, kNominalPhaseVoltage, kHouseholdAnnualKwh, 1});
        std::uniform_int_distribution<std::size_t> parent(0, i - 1);
        const double m = len(rng);
        branches.push_back({"l" + std::to_string(i), "b" + std::to_string(parent(rng)), "b" + std::to_string(i),
                            0.206e-3 * m, 0.080e-3 * m, 270.0, m});
    }
    return GridNetwork("random radial", Area::rural, std::move(buses), std::move(branches), Transformer{400.0, "b0", 1.0, 1.0});
}

/// Random mixed injections: household load at every bus, PV and EV at some.
inline InjectionSet random_injections(std::mt19937_64& rng, const GridNetwork& net, double scale = 1.0) {
    InjectionSet inj(net.bus_count());
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (auto b : net.ncp_buses()) {
        inj.add(b, DeviceClass::household, scale * 2000.0 * u(rng));
        if (u(rng) < 0.3) inj.add(b, DeviceClass::pv, -scale * 3000.0 * u(rng));
        if (u(rng) < 0.2) inj.add(b, DeviceClass::ev_private, scale * 1227.0);
    }
    return inj;
}

struct CrossAgreement {
    std::size_t cases = 0;
    double max_voltage_diff = 0.0; // p.u.
    double max_current_diff = 0.0; // A
};

/// Newton-Raphson against the sweep oracle on feasible random networks.
inline CrossAgreement solver_cross_agreement(std::size_t cases, std::uint64_t seed, std::size_t max_buses = 50) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> size(3, max_buses);
    CrossAgreement out;
    while (out.cases < cases) {
        const auto net = random_radial_network(rng, size(rng));
        const auto inj = random_injections(rng, net);
        const auto nr = solve_newton_raphson(net, inj);
        const auto sw = solve_sweep_oracle(net, inj);
        if (!nr.converged || !sw.converged) continue;
        for (std::size_t b = 0; b < net.bus_count(); ++b)
            out.max_voltage_diff = std::max(out.max_voltage_diff, std::abs(nr.voltage[b] - sw.voltage[b]));
        for (std::size_t k = 0; k < net.branch_count(); ++k)
            out.max_current_diff = std::max(out.max_current_diff, std::abs(nr.branch_current[k] - sw.branch_current[k]));
        ++out.cases;
    }
    return out;
}

inline CheckResult check_solver_agreement(std::size_t cases = 100, std::uint64_t seed = 2024) {
    CheckResult r;
    const auto a = solver_cross_agreement(cases, seed);
    r.passed = a.cases == cases && a.max_voltage_diff < 1e-8 && a.max_current_diff < 1e-6;
    r.data = {{"cases", a.cases}, {"max_voltage_diff_pu", a.max_voltage_diff}, {"max_current_diff_a", a.max_current_diff}};
    r.detail = std::to_string(a.cases) + " cases, max |dV| " + fmt_num(a.max_voltage_diff) + " p.u.";
    return r;
}

struct BalanceCheck {
    std::size_t configurations = 0;
    double max_k2_error = 0.0;  // relative
    double max_k1_error = 0.0;  // relative, worst feeder
    double max_single_feeder_diff = 0.0; // relative |K1 - K2|
};

/// Randomised metering patterns and totals on `net` (and a single-feeder
/// network for the K1 = K2 identity).
inline BalanceCheck pseudo_balance(const GridNetwork& net, std::size_t configurations, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    BalanceCheck out;
    const auto loads = weight_nodes(net);
    std::vector<std::size_t> chain_ids;
    auto rel = [](double got, double want) { return std::abs(got - want) / std::max(1.0, std::abs(want)); };
    for (std::size_t c = 0; c < configurations; ++c) {
        // Random E_a on every NCP, random metering and real values.
        std::vector<double> ea(net.bus_count(), 0.0);
        for (auto b : net.ncp_buses()) ea[b] = 500.0 + 9500.0 * u(rng);
        const auto g = net.with_annual_energy(ea);
        std::vector<bool> metered(g.bus_count(), false);
        std::vector<double> real(g.bus_count(), 0.0);
        const double rho = u(rng);
        for (auto b : g.ncp_buses())
            if (u(rng) < rho) {
                metered[b] = true;
                real[b] = -2000.0 + 8000.0 * u(rng);
            }
        // K2: total minus metered equals the sum of pseudos.
        const double p_trafo = 1e5 * u(rng);
        const auto k2 = pseudo_k2(p_trafo, real, metered, g);
        double metered_sum = 0.0, pseudo_sum = 0.0;
        bool any_unmetered = false;
        for (auto b : loads) {
            if (metered[b]) metered_sum += real[b];
            else {
                pseudo_sum += k2[b];
                any_unmetered |= g.buses()[b].has_ncp;
            }
        }
        if (any_unmetered) out.max_k2_error = std::max(out.max_k2_error, rel(pseudo_sum, p_trafo - metered_sum));
        // K1: the same identity per feeder.
        std::vector<double> p_feeder;
        for (std::size_t f = 0; f < g.feeders().size(); ++f) p_feeder.push_back(2e4 * u(rng));
        const auto k1 = pseudo_k1(p_feeder, real, metered, g);
        for (std::size_t f = 0; f < g.feeders().size(); ++f) {
            double ms = 0.0, ps = 0.0;
            bool unmetered = false;
            for (auto b : g.feeders()[f]) {
                if (g.buses()[b].kind != BusKind::load) continue;
                if (metered[b]) ms += real[b];
                else {
                    ps += k1[b];
                    unmetered |= g.buses()[b].has_ncp;
                }
            }
            if (unmetered) out.max_k1_error = std::max(out.max_k1_error, rel(ps, p_feeder[f] - ms));
        }
        // Single feeder: K1 with the feeder total equals K2.
        const auto chain = random_radial_network(rng, 2 + c % 20);
        std::vector<Branch> brs = chain.branches();
        for (std::size_t k = 0; k < brs.size(); ++k) {
            brs[k].from_bus = k == 0 ? "b0" : "b" + std::to_string(k);
            brs[k].to_bus = "b" + std::to_string(k + 1);
        }
        const auto line = chain.with_branches(std::move(brs));
        std::vector<double> lea(line.bus_count(), 0.0);
        std::vector<bool> lm(line.bus_count(), false);
        std::vector<double> lreal(line.bus_count(), 0.0);
        for (auto b : line.ncp_buses()) {
            lea[b] = 500.0 + 9500.0 * u(rng);
            if (u(rng) < 0.4) {
                lm[b] = true;
                lreal[b] = 5000.0 * u(rng);
            }
        }
        const auto lg = line.with_annual_energy(lea);
        const double total = 5e4 * u(rng);
        const auto a = pseudo_k2(total, lreal, lm, lg);
        const auto b1 = pseudo_k1({total}, lreal, lm, lg);
        for (std::size_t b = 0; b < lg.bus_count(); ++b)
            out.max_single_feeder_diff = std::max(out.max_single_feeder_diff, rel(b1[b], a[b]));
        ++out.configurations;
    }
    return out;
}

inline CheckResult check_pseudo_balance(const GridNetwork& net, std::size_t configurations = 1000,
                                        std::uint64_t seed = 11) {
    CheckResult r;
    const auto b = pseudo_balance(net, configurations, seed);
    r.passed = b.max_k2_error <= 1e-12 && b.max_k1_error <= 1e-12 && b.max_single_feeder_diff <= 1e-12;
    r.data = {{"configurations", b.configurations},
              {"max_k2_rel_error", b.max_k2_error},
              {"max_k1_rel_error", b.max_k1_error},
              {"max_single_feeder_rel_diff", b.max_single_feeder_diff}};
    r.detail = "K2 " + fmt_num(b.max_k2_error) + ", K1 " + fmt_num(b.max_k1_error) + ", K1-K2 " +
               fmt_num(b.max_single_feeder_diff);
    return r;
}

struct CoverageResult {
    std::size_t runs = 0;
    double current_coverage = 0.0; // %, branch-current real/imaginary parts
    double voltage_coverage = 0.0; // %, non-slack bus magnitudes
};

/// Fixed 10-bus test network for the interval calibration check.
inline GridNetwork calibration_network() {
    std::mt19937_64 rng(10);
    return random_radial_network(rng, 10);
}

/// Empirical coverage of the 95 % intervals over `runs` noise realisations
/// of full real metering at a fixed operating point.
inline CoverageResult uq_coverage(const GridNetwork& net, std::size_t runs, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const auto truth = solve_newton_raphson(net, random_injections(rng, net, 2.0));
    if (!truth.converged) throw DomainError("calibration snapshot did not converge");
    const auto ncp = net.ncp_buses();
    CoverageResult out;
    std::size_t hit_i = 0, n_i = 0, hit_v = 0, n_v = 0;
    for (std::size_t r = 0; r < runs; ++r) {
        MeasurementOptions mo;
        mo.seed = mix_seed(seed, r);
        const auto meas = build_measurements(net, truth, {ConstellationKind::K2}, ncp, 1.0, mo);
        const auto est = estimate(net, meas);
        for (std::size_t k = 0; k < net.branch_count(); ++k) {
            const cplx d = est.branch_current[k] - truth.branch_current[k];
            hit_i += std::abs(d.real()) <= kZ95 * est.current_sigma_re[k];
            hit_i += std::abs(d.imag()) <= kZ95 * est.current_sigma_im[k];
            n_i += 2;
        }
        for (std::size_t b = 0; b < net.bus_count(); ++b) {
            if (b == net.slack()) continue;
            hit_v += std::abs(std::abs(est.voltage[b]) - std::abs(truth.voltage[b])) <= est.voltage_ci[b];
            ++n_v;
        }
    }
    out.runs = runs;
    out.current_coverage = 100.0 * double(hit_i) / double(n_i);
    out.voltage_coverage = 100.0 * double(hit_v) / double(n_v);
    return out;
}

inline CheckResult check_uq_coverage(std::size_t runs = 1000, std::uint64_t seed = 5) {
    CheckResult r;
    const auto c = uq_coverage(calibration_network(), runs, seed);
    r.passed = c.current_coverage >= 93.0 && c.current_coverage <= 97.0;
    r.data = {{"runs", c.runs}, {"current_coverage_pct", c.current_coverage}, {"voltage_coverage_pct", c.voltage_coverage}};
    r.detail = "current coverage " + fmt_fixed(c.current_coverage, 2) + " %, voltage " + fmt_fixed(c.voltage_coverage, 2) + " %";
    return r;
}

/// Metric functions against hand-computed values on small vectors.
inline CheckResult check_metric_units() {
    CheckResult r;
    auto rel = [](double a, double b) { return std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(b)); };
    std::vector<double> hundred;
    for (int i = 1; i <= 100; ++i) hundred.push_back(i);
    std::vector<double> est(10, 50.0), truth(10, 50.0);
    est[3] = 120.0;
    const std::vector<std::pair<std::string, bool>> cases{
        {"f_v", rel(f_v(225.0, 231.0, 231.0), 600.0 / 231.0)},
        {"f_i", rel(f_i(100.0, 120.0, 200.0), 10.0)},
        {"eps_bar", rel(mean_norm_voltage_error({1.01, 0.99}, {1.0, 1.0}), 1.0)},
        {"eps_bar_offset", rel(mean_norm_voltage_error({1.02, 0.97}, {1.0, 0.95}), 2.0)},
        {"p99", rel(percentile(hundred, 99.0), 99.01)},
        {"tnr", rel(tnr(est, truth), 90.0)},
        {"tnr_no_alarm", rel(tnr(truth, truth), 100.0)},
    };
    r.passed = true;
    for (const auto& [name, ok] : cases) {
        r.passed &= ok;
        r.data[name] = ok;
    }
    r.detail = r.passed ? "hand values reproduced" : "metric mismatch";
    return r;
}

} // namespace lvse
