#include <gtest/gtest.h>

#include "lvse/power_flow.hpp"
#include "lvse/verification.hpp"
#include "test_util.hpp"

using namespace lvse;

namespace {

InjectionSet households(const GridNetwork& net, double p_w) {
    InjectionSet inj(net.bus_count());
    for (std::size_t b = 0; b < net.bus_count(); ++b)
        if (b != net.slack()) inj.add(b, DeviceClass::household, p_w);
    return inj;
}

double min_voltage(const SnapshotState& st) {
    double m = 1e9;
    for (auto v : st.voltage) m = std::min(m, std::abs(v));
    return m;
}

} // namespace

TEST(PowerFlow, ZipEvaluation) {
    const auto h = builtin_zip(DeviceClass::household);
    EXPECT_NEAR(evaluate_zip(cplx(1000.0, 0.0), h, 0.95).real(), 975.5, 1e-9);
    EXPECT_NEAR(evaluate_zip(cplx(1000.0, 200.0), h, 1.0).real(), 1000.0, 1e-12);
    EXPECT_NEAR(evaluate_zip(cplx(1000.0, 200.0), h, 1.0).imag(), 200.0, 1e-12);
    EXPECT_THROW(evaluate_zip(cplx(1.0, 0.0), h, 0.0), DomainError);
}

TEST(PowerFlow, ReactivePowerFollowsPowerFactor) {
    EXPECT_DOUBLE_EQ(reactive_from_pf(1000.0, 1.0), 0.0);
    const double q = reactive_from_pf(1000.0, 0.98);
    EXPECT_NEAR(1000.0 / std::hypot(1000.0, q), 0.98, 1e-12);
    EXPECT_LT(reactive_from_pf(-1000.0, 0.95), 0.0);
}

TEST(PowerFlow, ZeroLoadGivesFlatProfile) {
    const auto net = test::chain(5);
    const auto st = solve_newton_raphson(net, InjectionSet(net.bus_count()));
    ASSERT_TRUE(st.converged);
    for (auto v : st.voltage) EXPECT_NEAR(std::abs(v - cplx(1.0, 0.0)), 0.0, 1e-14);
    for (auto i : st.branch_current) EXPECT_NEAR(std::abs(i), 0.0, 1e-10);
    EXPECT_NEAR(st.trafo_loading, 0.0, 1e-10);
}

TEST(PowerFlow, SingleConstantPowerLoadMatchesFixedPoint) {
    const auto net = test::chain(1, 0.1, 0.05);
    InjectionSet inj(net.bus_count());
    inj.load[1][static_cast<std::size_t>(DeviceClass::pv)] = cplx(10000.0, 0.0);
    const auto st = solve_newton_raphson(net, inj);
    ASSERT_TRUE(st.converged);

    // V = Vs - Z conj(S / V), iterated in volts.
    const cplx z(0.1, 0.05), vs(kNominalPhaseVoltage, 0.0), s(10000.0, 0.0);
    cplx v = vs;
    for (int it = 0; it < 200; ++it) v = vs - z * std::conj(s / v);
    EXPECT_NEAR(std::abs(st.voltage[1] * kNominalPhaseVoltage - v), 0.0, 1e-6);
    EXPECT_NEAR(std::abs(st.branch_current[0] - std::conj(s / v)), 0.0, 1e-6);
}

TEST(PowerFlow, ThreeBusNewtonMatchesOracle) {
    const auto net = load_network(test::three_bus_path());
    const auto inj = households(net, 2000.0);
    const auto nr = solve_newton_raphson(net, inj);
    const auto sw = solve_sweep_oracle(net, inj);
    ASSERT_TRUE(nr.converged);
    ASSERT_TRUE(sw.converged);
    for (std::size_t b = 0; b < net.bus_count(); ++b) EXPECT_LT(std::abs(nr.voltage[b] - sw.voltage[b]), 1e-8);
}

TEST(PowerFlow, RandomNetworksAgreeWithOracle) {
    const auto a = solver_cross_agreement(20, 77);
    EXPECT_EQ(a.cases, 20u);
    EXPECT_LT(a.max_voltage_diff, 1e-8);
    EXPECT_LT(a.max_current_diff, 1e-6);
}

TEST(PowerFlow, PowerBalance) {
    const auto net = load_network(test::rural_path());
    const auto inj = households(net, 1500.0);
    const auto st = solve_newton_raphson(net, inj);
    ASSERT_TRUE(st.converged);
    cplx i_slack{};
    for (auto k : net.child_branches(net.slack())) i_slack += st.branch_current[k];
    const cplx s_slack = st.voltage[net.slack()] * kNominalPhaseVoltage * std::conj(i_slack);
    cplx drawn{}, losses{};
    for (auto s : st.load) drawn += s;
    for (std::size_t k = 0; k < net.branch_count(); ++k) {
        const auto& br = net.branches()[k];
        losses += cplx(br.resistance, br.reactance) * std::norm(st.branch_current[k]);
    }
    EXPECT_NEAR(std::abs(s_slack - drawn - losses) / std::abs(s_slack), 0.0, 1e-9);
}

TEST(PowerFlow, SlackHeldAtOltcTarget) {
    auto net = load_network(test::rural_path());
    const auto st = solve_newton_raphson(net, households(net, 500.0));
    EXPECT_NEAR(std::abs(st.voltage[net.slack()] - cplx(net.transformer().oltc_target, 0.0)), 0.0, 1e-15);
}

TEST(PowerFlow, ExtremeLoadDoesNotConverge) {
    const auto net = test::chain(3, 0.5, 0.1);
    const auto inj = households(net, 1.0e6);
    EXPECT_FALSE(solve_newton_raphson(net, inj).converged);
}

TEST(PowerFlow, DoublingLoadLowersVoltage) {
    const auto net = load_network(test::rural_path());
    const auto a = solve_newton_raphson(net, households(net, 800.0));
    const auto b = solve_newton_raphson(net, households(net, 1600.0));
    ASSERT_TRUE(a.converged && b.converged);
    for (std::size_t i = 0; i < net.bus_count(); ++i) EXPECT_LE(std::abs(b.voltage[i]), std::abs(a.voltage[i]) + 1e-15);
    EXPECT_GT(b.trafo_loading, a.trafo_loading);
    EXPECT_LT(min_voltage(b), min_voltage(a));
}

TEST(PowerFlow, GenerationRaisesVoltage) {
    const auto net = test::chain(4);
    InjectionSet inj(net.bus_count());
    for (std::size_t b = 1; b < net.bus_count(); ++b) inj.add(b, DeviceClass::pv, -3000.0);
    const auto st = solve_newton_raphson(net, inj);
    ASSERT_TRUE(st.converged);
    for (std::size_t b = 1; b < net.bus_count(); ++b) EXPECT_GT(std::abs(st.voltage[b]), 1.0);
    EXPECT_DOUBLE_EQ(inj.pv_generation_w, 12000.0);
    EXPECT_DOUBLE_EQ(inj.demand_w, 0.0);
}

TEST(PowerFlow, SolverIsDeterministic) {
    const auto net = load_network(test::urban_path());
    const auto inj = households(net, 1200.0);
    const auto a = solve_newton_raphson(net, inj), b = solve_newton_raphson(net, inj);
    EXPECT_EQ(a.voltage, b.voltage);
    EXPECT_EQ(a.iterations, b.iterations);
}

TEST(PowerFlow, SummaryReportsExtremes) {
    const auto net = test::chain(3);
    const auto inj = households(net, 4000.0);
    const auto st = solve_newton_raphson(net, inj);
    const auto s = summarize(net, st, 7, inj);
    EXPECT_EQ(s.step, 7u);
    EXPECT_TRUE(s.converged);
    EXPECT_DOUBLE_EQ(s.min_v, min_voltage(st));
    EXPECT_DOUBLE_EQ(s.max_v, 1.0);
    EXPECT_EQ(s.max_line, 0u);
    EXPECT_DOUBLE_EQ(s.max_line_loading, st.line_loading(net, 0));
    EXPECT_DOUBLE_EQ(s.demand_w, 12000.0);
}

TEST(PowerFlow, TimeseriesWithoutLoadHasNoCongestion) {
    const auto net = load_network(test::rural_path());
    const auto r = run_timeseries(
        net, [&](std::size_t) { return InjectionSet(net.bus_count()); }, 96,
        [](const StepSummary& s) { return s.min_v < 0.95; }, 2);
    ASSERT_EQ(r.summaries.size(), 96u);
    EXPECT_TRUE(r.retained.empty());
    for (const auto& s : r.summaries) {
        EXPECT_TRUE(s.converged);
        EXPECT_NEAR(s.min_v, 1.0, 1e-12);
    }
}

TEST(PowerFlow, TimeseriesIndependentOfThreadCount) {
    const auto net = load_network(test::rural_path());
    auto source = [&](std::size_t s) { return households(net, 200.0 * double(s % 10)); };
    auto keep = [](const StepSummary& s) { return s.step % 3 == 0; };
    const auto a = run_timeseries(net, source, 40, keep, 1);
    const auto b = run_timeseries(net, source, 40, keep, 3);
    ASSERT_EQ(a.retained.size(), b.retained.size());
    for (std::size_t s = 0; s < 40; ++s) EXPECT_EQ(a.summaries[s].min_v, b.summaries[s].min_v);
    for (std::size_t i = 0; i < a.retained.size(); ++i) EXPECT_EQ(a.retained[i].step, b.retained[i].step);
}
