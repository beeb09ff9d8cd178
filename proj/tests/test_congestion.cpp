#include <gtest/gtest.h>

#include "lvse/congestion.hpp"
#include "test_util.hpp"

using namespace lvse;

namespace {

// Two-line chain with a 100 A limit on both lines.
GridNetwork two_line() {
    std::vector<Bus> buses{test::slack_bus(), test::load_bus("B1"), test::load_bus("B2")};
    std::vector<Branch> branches{test::line("L1", "S", "B1", 0.02, 0.008, 100.0),
                                 test::line("L2", "B1", "B2", 0.02, 0.008, 100.0)};
    return GridNetwork("two_line", Area::rural, buses, branches, Transformer{400.0, "S", 1.0, 1.0});
}

SnapshotState state(double v2, double i1 = 50.0, double trafo = 40.0) {
    SnapshotState st;
    st.converged = true;
    st.voltage = {cplx(1.0, 0.0), cplx(0.5 * (1.0 + v2), 0.0), cplx(v2, 0.0)};
    st.branch_current = {cplx(i1, 0.0), cplx(10.0, 0.0)};
    st.trafo_loading = trafo;
    return st;
}

StepSummary summary_at(std::size_t step, double trafo, std::size_t line) {
    StepSummary s;
    s.step = step;
    s.converged = true;
    s.trafo_loading = trafo;
    s.max_line = line;
    return s;
}

} // namespace

TEST(Congestion, LimitsAreStrict) {
    const auto net = two_line();
    EXPECT_FALSE(classify_period(state(0.95), net, 0).has_value());
    EXPECT_FALSE(classify_period(state(1.05), net, 0).has_value());
    EXPECT_FALSE(classify_period(state(1.0, 100.0), net, 0).has_value());
    EXPECT_FALSE(classify_period(state(1.0, 50.0, 100.0), net, 0).has_value());
    EXPECT_TRUE(classify_period(state(0.9499), net, 0).has_value());
    EXPECT_TRUE(classify_period(state(1.0501), net, 0).has_value());
    EXPECT_TRUE(classify_period(state(1.0, 100.01), net, 0).has_value());
    EXPECT_TRUE(classify_period(state(1.0, 50.0, 100.01), net, 0).has_value());
}

TEST(Congestion, SeverityBands) {
    const auto net = two_line();
    EXPECT_EQ(classify_period(state(0.90), net, 0)->severity, Severity::grey);
    EXPECT_EQ(classify_period(state(0.8999), net, 0)->severity, Severity::hard);
    EXPECT_EQ(classify_period(state(1.10), net, 0)->severity, Severity::grey);
    EXPECT_EQ(classify_period(state(1.1001), net, 0)->severity, Severity::hard);
    EXPECT_EQ(classify_period(state(1.0, 110.0), net, 0)->severity, Severity::grey);
    EXPECT_EQ(classify_period(state(1.0, 110.5), net, 0)->severity, Severity::hard);
    EXPECT_EQ(classify_period(state(1.0, 50.0, 115.0), net, 0)->severity, Severity::hard);
}

TEST(Congestion, ElementsAreListed) {
    const auto net = two_line();
    const auto ev = classify_period(state(0.93, 120.0, 105.0), net, 3);
    ASSERT_TRUE(ev);
    EXPECT_TRUE(ev->has(Trigger::thermal_overload));
    EXPECT_TRUE(ev->has(Trigger::undervoltage));
    EXPECT_FALSE(ev->has(Trigger::overvoltage));
    // trafo, line L1, bus B1 (0.965) is fine, bus B2
    ASSERT_EQ(ev->elements.size(), 3u);
    EXPECT_EQ(ev->elements[0].kind, ElementKind::transformer);
    EXPECT_EQ(ev->elements[1].kind, ElementKind::line);
    EXPECT_EQ(ev->elements[2].index, 2u);
}

TEST(Congestion, NonConvergenceIsHard) {
    SnapshotState st;
    st.converged = false;
    const auto ev = classify_period(st, two_line(), 9);
    ASSERT_TRUE(ev);
    EXPECT_EQ(ev->severity, Severity::hard);
    EXPECT_EQ(ev->root_cause, RootCause::not_converged);
}

TEST(Congestion, RootCauseRules) {
    const auto net = two_line();
    EXPECT_EQ(classify_period(state(0.93), net, 0, 0.0, 5000.0)->root_cause, RootCause::load_side);
    EXPECT_EQ(classify_period(state(1.07), net, 0, 9000.0, 1000.0)->root_cause, RootCause::generation_side);
    // Overload counts towards whichever side dominates the step.
    EXPECT_EQ(classify_period(state(1.0, 130.0), net, 0, 9000.0, 1000.0)->root_cause, RootCause::generation_side);
    EXPECT_EQ(classify_period(state(1.0, 130.0), net, 0, 1000.0, 9000.0)->root_cause, RootCause::load_side);
    EXPECT_EQ(classify_period(state(1.07, 130.0), net, 0, 1000.0, 9000.0)->root_cause, RootCause::combined);
    EXPECT_EQ(classify_period(state(0.93, 130.0), net, 0, 9000.0, 1000.0)->root_cause, RootCause::combined);
}

TEST(Congestion, SummaryTestMatchesClassification) {
    const auto net = test::chain(4, 0.2, 0.05);
    for (double p : {0.0, 2000.0, 6000.0, 12000.0, -8000.0}) {
        InjectionSet inj(net.bus_count());
        for (std::size_t b = 1; b < net.bus_count(); ++b) inj.add(b, p < 0 ? DeviceClass::pv : DeviceClass::household, p);
        const auto st = solve_newton_raphson(net, inj);
        EXPECT_EQ(is_congested(summarize(net, st, 0, inj)), classify_period(st, net, 0).has_value()) << p;
    }
}

TEST(Congestion, ShareAndMonthlyConservation) {
    const auto net = two_line();
    std::vector<CongestionEvent> events;
    for (std::size_t i = 0; i < 350; ++i) {
        CongestionEvent e;
        e.step = i * 100;
        e.root_cause = i % 3 == 0 ? RootCause::combined : (i % 3 == 1 ? RootCause::load_side : RootCause::generation_side);
        e.severity = i % 2 ? Severity::grey : Severity::hard;
        events.push_back(e);
    }
    const auto s = aggregate(events, {}, net);
    EXPECT_EQ(s.total_steps, kStepsPerYear);
    EXPECT_NEAR(s.share_pct(), 1.0, 0.05);
    EXPECT_EQ(s.grey + s.hard, 350u);
    std::size_t monthly = 0, heat = 0;
    for (int m = 0; m < 12; ++m) {
        monthly += s.monthly[m];
        for (int h = 0; h < 24; ++h) heat += s.heatmap[m][h];
    }
    EXPECT_EQ(monthly, 350u);
    EXPECT_EQ(heat, 350u);
    long load = 0, gen = 0;
    for (int h = 0; h < 24; ++h) {
        load += s.hourly_load[h];
        gen += s.hourly_generation[h];
        EXPECT_LE(s.hourly_generation[h], 0);
    }
    EXPECT_EQ(load, long(s.by_cause.at(RootCause::load_side) + s.by_cause.at(RootCause::combined)));
    EXPECT_EQ(-gen, long(s.by_cause.at(RootCause::generation_side) + s.by_cause.at(RootCause::combined)));
}

TEST(Congestion, WinterEveningPeakIsLoadSide) {
    const auto net = apply_equipment_level(load_network(test::rural_path()), Quality::poor);
    const std::size_t step = 15 * 96 + 18 * 4; // 16 January, 18:00
    InjectionSet inj(net.bus_count());
    for (std::size_t b = 0; b < net.bus_count(); ++b)
        if (net.buses()[b].kind == BusKind::load) {
            inj.add(b, DeviceClass::household, 500.0);
            inj.add(b, DeviceClass::heat_pump, 600.0);
        }
    const auto st = solve_newton_raphson(net, inj);
    const auto ev = classify_period(st, net, step, inj.pv_generation_w, inj.demand_w);
    ASSERT_TRUE(st.converged);
    ASSERT_TRUE(ev);
    EXPECT_EQ(ev->root_cause, RootCause::load_side);
    const auto s = aggregate({*ev}, {}, net);
    EXPECT_EQ(s.monthly[0], 1u);
    EXPECT_EQ(s.heatmap[0][18], 1u);
    EXPECT_EQ(s.hourly_load[18], 1);
}

TEST(Congestion, SampleKeepsAllWhenFewerThanK) {
    std::vector<StepSummary> ev;
    for (std::size_t i = 0; i < 12; ++i) ev.push_back(summary_at(i * 7, 90.0 + double(i), i % 3));
    const auto s = stratified_sample(ev, 50);
    ASSERT_EQ(s.size(), 12u);
    for (std::size_t i = 0; i < 12; ++i) EXPECT_EQ(s[i], i * 7);
    EXPECT_TRUE(stratified_sample(ev, 0).empty());
}

TEST(Congestion, SampleSkipsNonConverged) {
    std::vector<StepSummary> ev{summary_at(1, 101, 0), summary_at(2, 101, 0)};
    ev[1].converged = false;
    EXPECT_EQ(stratified_sample(ev, 5), std::vector<std::size_t>{1});
}

TEST(Congestion, SampleIsProportionalAndDistinct) {
    std::vector<StepSummary> ev;
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> load(80.0, 160.0);
    for (std::size_t i = 0; i < 1000; ++i) ev.push_back(summary_at(i * 3, load(rng), i % 10 < 6 ? 4 : i % 10));
    const auto s = stratified_sample(ev, 50);
    ASSERT_EQ(s.size(), 50u);
    EXPECT_TRUE(std::is_sorted(s.begin(), s.end()));
    EXPECT_EQ(std::adjacent_find(s.begin(), s.end()), s.end());

    std::vector<double> loads;
    for (const auto& e : ev) loads.push_back(e.trafo_loading);
    const double median = percentile(loads, 50);
    std::size_t line4 = 0, low = 0;
    for (auto step : s) {
        const auto& e = ev[step / 3];
        line4 += e.max_line == 4;
        low += e.trafo_loading <= median;
    }
    EXPECT_NEAR(double(line4), 30.0, 4.0);
    EXPECT_NEAR(double(low), 25.0, 4.0);
    EXPECT_EQ(stratified_sample(ev, 50), s);
}
