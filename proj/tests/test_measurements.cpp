#include <gtest/gtest.h>

#include <numeric>

#include "lvse/measurements.hpp"
#include "test_util.hpp"

using namespace lvse;

namespace {

GridNetwork two_bus(double e1, double e2) {
    std::vector<Bus> buses{test::slack_bus(), test::load_bus("A", e1), test::load_bus("B", e2)};
    std::vector<Branch> branches{test::line("L1", "S", "A"), test::line("L2", "A", "B")};
    return GridNetwork("two", Area::rural, buses, branches, Transformer{400.0, "S", 1.0, 1.0});
}

std::vector<bool> mask(const GridNetwork& net, const std::vector<std::size_t>& metered) {
    std::vector<bool> m(net.bus_count(), false);
    for (auto b : metered) m[b] = true;
    return m;
}

double sum_over(const std::vector<double>& x, const std::vector<std::size_t>& buses) {
    double s = 0.0;
    for (auto b : buses) s += x[b];
    return s;
}

SnapshotState loaded_state(const GridNetwork& net, double p_w) {
    InjectionSet inj(net.bus_count());
    for (auto b : net.load_buses()) inj.add(b, DeviceClass::household, p_w);
    return solve_newton_raphson(net, inj);
}

} // namespace

TEST(Measurements, Weights) {
    const auto even = two_bus(3500, 3500);
    auto w = compute_weights(even, {1, 2});
    EXPECT_DOUBLE_EQ(w[0], 0.5);
    EXPECT_DOUBLE_EQ(w[1], 0.5);
    const auto skew = two_bus(7000, 3500);
    w = compute_weights(skew, {1, 2});
    EXPECT_NEAR(w[0], 2.0 / 3.0, 1e-15);
    EXPECT_NEAR(w[1], 1.0 / 3.0, 1e-15);
    EXPECT_DOUBLE_EQ(compute_weights(skew, {2})[0], 1.0);
    EXPECT_THROW(compute_weights(skew, {0}), DomainError);
}

TEST(Measurements, ProfileOnlyPseudo) {
    const auto net = two_bus(8760, 4380);
    const auto p = pseudo_k3(net, 1.5);
    EXPECT_DOUBLE_EQ(p[0], 0.0);
    EXPECT_NEAR(p[1], 1.5 * 1000.0 / 3.0, 1e-12);
    EXPECT_NEAR(p[2], 0.75 * 1000.0 / 3.0, 1e-12);
    const auto zero = pseudo_k3(net, 0.0);
    EXPECT_EQ(zero, std::vector<double>(3, 0.0));
}

TEST(Measurements, TransformerResidualSplit) {
    // 100 W total, one bus metered at 40 W, two equal unmetered buses.
    std::vector<Bus> buses{test::slack_bus(), test::load_bus("A"), test::load_bus("B"), test::load_bus("C")};
    std::vector<Branch> br{test::line("L1", "S", "A"), test::line("L2", "A", "B"), test::line("L3", "A", "C")};
    const GridNetwork net("t", Area::rural, buses, br, Transformer{400.0, "S", 1.0, 1.0});
    std::vector<double> real(4, 0.0);
    real[1] = 40.0;
    const auto p = pseudo_k2(100.0, real, mask(net, {1}), net);
    EXPECT_DOUBLE_EQ(p[1], 0.0);
    EXPECT_DOUBLE_EQ(p[2], 30.0);
    EXPECT_DOUBLE_EQ(p[3], 30.0);
}

TEST(Measurements, TransformerBalanceOnRural) {
    const auto net = load_network(test::rural_path());
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(0.0, 3000.0);
    const auto metered = place_smgw(net, 30, {PlacementKind::random, 4});
    std::vector<double> real(net.bus_count(), 0.0);
    for (auto b : metered) real[b] = u(rng);
    const auto p = pseudo_k2(150000.0, real, mask(net, metered), net);
    std::vector<double> combined = p;
    for (auto b : metered) combined[b] = real[b];
    EXPECT_NEAR(sum_over(combined, net.load_buses()), 150000.0, 1e-8);
}

TEST(Measurements, FeederResidualMatchesTransformerOnSingleFeeder) {
    const auto net = test::chain(6);
    ASSERT_EQ(net.feeders().size(), 1u);
    std::vector<double> real(net.bus_count(), 0.0);
    real[2] = 500.0;
    real[5] = 250.0;
    const auto m = mask(net, {2, 5});
    const auto k1 = pseudo_k1({4000.0}, real, m, net);
    const auto k2 = pseudo_k2(4000.0, real, m, net);
    for (std::size_t b = 0; b < net.bus_count(); ++b) EXPECT_NEAR(k1[b], k2[b], 1e-12);
    EXPECT_THROW(pseudo_k1({1.0, 2.0}, real, m, net), DomainError);
}

TEST(Measurements, FeederBalancePerFeeder) {
    const auto net = test::star(3, 3);
    std::vector<double> feeder{900.0, 1800.0, 2700.0};
    std::vector<double> real(net.bus_count(), 0.0);
    real[1] = 100.0;
    const auto p = pseudo_k1(feeder, real, mask(net, {1}), net);
    for (std::size_t f = 0; f < 3; ++f) {
        double s = 0.0;
        for (auto b : net.feeders()[f]) s += b == 1 ? real[b] : p[b];
        EXPECT_NEAR(s, feeder[f], 1e-9);
    }
}

TEST(Measurements, FullyMeteredFeederGetsNoPseudo) {
    const auto net = test::star(2, 2);
    std::vector<double> real(net.bus_count(), 0.0);
    std::vector<std::size_t> metered = net.feeders()[0];
    for (auto b : metered) real[b] = 50.0;
    const auto p = pseudo_k1({300.0, 400.0}, real, mask(net, metered), net);
    for (auto b : net.feeders()[0]) EXPECT_DOUBLE_EQ(p[b], 0.0);
    EXPECT_NEAR(sum_over(p, net.feeders()[1]), 400.0, 1e-12);
}

TEST(Measurements, NoiseFreeMeasurementsAreExact) {
    const auto net = test::chain(4);
    const auto st = loaded_state(net, 1000.0);
    std::mt19937_64 rng(1);
    const auto [p, q] = synthesize_real(st, {1, 3}, 0.0, rng);
    EXPECT_EQ(p[1], st.load[1].real());
    EXPECT_EQ(q[3], st.load[3].imag());
    EXPECT_EQ(p[2], 0.0);
}

TEST(Measurements, NoiseStandardDeviation) {
    SnapshotState st;
    st.converged = true;
    st.load = {cplx{}, cplx(1000.0, 0.0)};
    std::mt19937_64 rng(42);
    std::vector<double> x;
    for (int i = 0; i < 100000; ++i) x.push_back(synthesize_real(st, {1}, kSigmaReal, rng).first[1]);
    const double mean = std::accumulate(x.begin(), x.end(), 0.0) / double(x.size());
    double var = 0.0;
    for (double v : x) var += (v - mean) * (v - mean);
    const double sd = std::sqrt(var / double(x.size() - 1));
    EXPECT_NEAR(sd, 17.0, 0.34);
    EXPECT_NEAR(mean, 1000.0, 0.5);
}

TEST(Measurements, SameSeedSameNoise) {
    const auto net = load_network(test::rural_path());
    const auto st = loaded_state(net, 800.0);
    const auto metered = place_smgw(net, 20, {PlacementKind::random, 1});
    MeasurementOptions opt;
    opt.seed = 99;
    const auto a = build_measurements(net, st, {ConstellationKind::K2}, metered, 1.0, opt);
    const auto b = build_measurements(net, st, {ConstellationKind::K2}, metered, 1.0, opt);
    opt.seed = 100;
    const auto c = build_measurements(net, st, {ConstellationKind::K2}, metered, 1.0, opt);
    ASSERT_EQ(a.power.size(), b.power.size());
    bool differs = false;
    for (std::size_t i = 0; i < a.power.size(); ++i) {
        EXPECT_EQ(a.power[i].p, b.power[i].p);
        differs |= a.power[i].p != c.power[i].p;
    }
    EXPECT_TRUE(differs);
}

TEST(Measurements, MeasurementSetShape) {
    const auto net = load_network(test::rural_path());
    const auto st = loaded_state(net, 800.0);
    for (std::size_t n : {std::size_t(0), std::size_t(16), std::size_t(109)})
        for (auto k : {ConstellationKind::K1, ConstellationKind::K2, ConstellationKind::K3}) {
            const auto metered = place_smgw(net, n, {PlacementKind::consumption_first, 0});
            const auto m = build_measurements(net, st, {k}, metered, 1.0);
            EXPECT_EQ(m.power.size(), net.bus_count() - 1);
            EXPECT_EQ(m.voltage.size(), n);
            std::size_t real = 0;
            for (const auto& p : m.power) {
                real += p.real;
                EXPECT_GE(p.sigma_p, kSigmaFloorW);
                if (!p.real) EXPECT_NEAR(p.sigma_p, std::max(std::abs(p.p) * m.constellation.pseudo_sigma(), 1.0), 1e-9);
            }
            EXPECT_EQ(real, n);
            EXPECT_EQ(m.p_trafo.has_value(), k == ConstellationKind::K2);
            EXPECT_EQ(m.p_feeder.size(), k == ConstellationKind::K1 ? net.feeders().size() : 0u);
        }
}

TEST(Measurements, NoiseFreeTotalsBalance) {
    const auto net = load_network(test::urban_path());
    const auto st = loaded_state(net, 1200.0);
    const auto metered = place_smgw(net, 10, {PlacementKind::random, 3});
    MeasurementOptions opt;
    opt.noise = false;
    const auto m = build_measurements(net, st, {ConstellationKind::K2}, metered, 1.0, opt);
    double s = 0.0;
    for (const auto& p : m.power) s += p.p;
    EXPECT_NEAR(s, *m.p_trafo, 1e-6);
    EXPECT_NEAR(*m.p_trafo, total_positive_power(st.load, net.load_buses()), 1e-9);
}

TEST(Measurements, PlacementBounds) {
    const auto net = load_network(test::rural_path());
    EXPECT_TRUE(place_smgw(net, 0, {PlacementKind::random, 1}).empty());
    EXPECT_EQ(place_smgw(net, 109, {PlacementKind::consumption_first, 0}), net.ncp_buses());
    EXPECT_THROW(place_smgw(net, 110, {PlacementKind::random, 1}), DomainError);
    EXPECT_THROW(place_smgw(net, 3, {PlacementKind::power_first, 0}), DomainError);
}

TEST(Measurements, PlacementTieBreakById) {
    const auto net = test::chain(12); // equal consumption everywhere
    const auto m = place_smgw(net, 3, {PlacementKind::consumption_first, 0});
    std::vector<std::string> ids;
    for (auto b : m) ids.push_back(net.buses()[b].id);
    std::sort(ids.begin(), ids.end());
    EXPECT_EQ(ids, (std::vector<std::string>{"B1", "B10", "B11"}));
}

TEST(Measurements, PowerFirstPicksLargestLoads) {
    const auto net = test::chain(5);
    std::vector<double> s{0.0, 10.0, 50.0, 20.0, 50.0, 5.0};
    const auto m = place_smgw(net, 3, {PlacementKind::power_first, 0}, s);
    EXPECT_EQ(m, (std::vector<std::size_t>{2, 3, 4}));
}

TEST(Measurements, RandomPlacementPartitionsNcps) {
    const auto net = load_network(test::rural_path());
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto m = place_smgw(net, 40, {PlacementKind::random, seed});
        EXPECT_EQ(m, place_smgw(net, 40, {PlacementKind::random, seed}));
        EXPECT_EQ(std::set<std::size_t>(m.begin(), m.end()).size(), 40u);
        for (auto b : m) EXPECT_TRUE(net.buses()[b].has_ncp);
    }
    EXPECT_NE(place_smgw(net, 40, {PlacementKind::random, 1}), place_smgw(net, 40, {PlacementKind::random, 2}));
}

TEST(Measurements, MeterOnlyAtNcp) {
    const auto net = load_network(test::rural_path());
    const auto st = loaded_state(net, 500.0);
    std::size_t junction = net.bus_count();
    for (std::size_t b = 0; b < net.bus_count(); ++b)
        if (!net.buses()[b].has_ncp && b != net.slack()) junction = b;
    if (junction == net.bus_count()) GTEST_SKIP();
    EXPECT_THROW(build_measurements(net, st, {ConstellationKind::K3}, {junction}, 1.0), DomainError);
}

TEST(Measurements, SeedMixingSeparatesStreams) {
    std::set<std::uint64_t> seen;
    for (std::uint64_t a = 0; a < 50; ++a)
        for (std::uint64_t b = 0; b < 50; ++b) seen.insert(mix_seed(a, b));
    EXPECT_EQ(seen.size(), 2500u);
}
