#include <gtest/gtest.h>

#include <set>

#include "lvse/grid_model.hpp"
#include "test_util.hpp"

using namespace lvse;

TEST(GridModel, ThreeBusChainHasOneFeeder) {
    const auto net = load_network(test::three_bus_path());
    EXPECT_EQ(net.bus_count(), 3u);
    EXPECT_EQ(net.branch_count(), 2u);
    ASSERT_EQ(net.feeders().size(), 1u);
    EXPECT_EQ(net.feeders()[0].size(), 2u);
}

TEST(GridModel, RuralReferenceFeeders) {
    const auto net = load_network(test::rural_path());
    EXPECT_EQ(net.feeders().size(), 9u);
    std::size_t total = 0, lo = 1000, hi = 0;
    for (const auto& f : net.feeders()) {
        total += f.size();
        lo = std::min(lo, f.size());
        hi = std::max(hi, f.size());
    }
    EXPECT_EQ(total, 127u);
    EXPECT_EQ(lo, 1u);
    EXPECT_EQ(hi, 29u);
    EXPECT_EQ(net.ncp_buses().size(), 109u);
}

TEST(GridModel, UrbanReferenceFeeders) {
    const auto net = load_network(test::urban_path());
    EXPECT_EQ(net.feeders().size(), 7u);
    std::size_t lo = 1000, hi = 0;
    for (const auto& f : net.feeders()) {
        lo = std::min(lo, f.size());
        hi = std::max(hi, f.size());
    }
    EXPECT_EQ(lo, 1u);
    EXPECT_EQ(hi, 18u);
    EXPECT_EQ(net.ncp_buses().size(), 53u);
}

TEST(GridModel, EquipmentLevelsFollowRatingTable) {
    const auto net = load_network(test::rural_path());
    const auto good = apply_equipment_level(net, Quality::good);
    EXPECT_DOUBLE_EQ(good.transformer().rating_kva, 400.0);
    for (const auto& br : good.branches()) EXPECT_DOUBLE_EQ(br.thermal_limit, 270.0);
    const auto poor = apply_equipment_level(net, Quality::poor);
    EXPECT_DOUBLE_EQ(poor.transformer().rating_kva, 160.0);
    for (const auto& br : poor.branches()) EXPECT_DOUBLE_EQ(br.thermal_limit, 142.0);
    EXPECT_EQ(poor.bus_count(), net.bus_count());
}

TEST(GridModel, EquipmentLevelIsIdempotent) {
    const auto net = load_network(test::urban_path());
    for (auto q : {Quality::good, Quality::medium, Quality::poor}) {
        const auto once = apply_equipment_level(net, q);
        const auto twice = apply_equipment_level(once, q);
        EXPECT_EQ(network_to_json(once), network_to_json(twice));
    }
}

TEST(GridModel, StarGivesSingletonFeeders) {
    const auto net = test::star(4);
    ASSERT_EQ(net.feeders().size(), 4u);
    for (const auto& f : net.feeders()) EXPECT_EQ(f.size(), 1u);
}

TEST(GridModel, FeedersPartitionNonSlackBuses) {
    for (const auto& net : {load_network(test::rural_path()), load_network(test::urban_path()), test::star(3, 4)}) {
        std::set<std::size_t> seen;
        for (const auto& f : net.feeders())
            for (auto b : f) EXPECT_TRUE(seen.insert(b).second);
        EXPECT_EQ(seen.size(), net.bus_count() - 1);
        EXPECT_FALSE(seen.count(net.slack()));
        EXPECT_EQ(net.branch_count(), net.bus_count() - 1);
    }
}

TEST(GridModel, FeederOfBusIsItsSlackAdjacentBranch) {
    const auto net = load_network(test::rural_path());
    for (std::size_t f = 0; f < net.feeders().size(); ++f)
        for (auto b : net.feeders()[f]) {
            const auto path = net.path_to(b);
            ASSERT_FALSE(path.empty());
            EXPECT_EQ(net.upstream(path.front()), net.slack());
            EXPECT_EQ(net.feeder_of(b), f);
        }
}

TEST(GridModel, ReactanceIsClamped) {
    auto net = test::chain(2, 0.01, 0.0);
    for (const auto& br : net.branches()) EXPECT_GE(br.reactance, kMinReactance);
    for (const auto& br : load_network(test::rural_path()).branches()) EXPECT_GE(br.reactance, kMinReactance);
}

namespace {

nlohmann::json three_bus_doc() {
    return nlohmann::json::parse(read_text(test::three_bus_path()));
}

} // namespace

TEST(GridModel, RejectsMeshedTopology) {
    auto doc = three_bus_doc();
    doc["branches"].push_back({{"id", "L3"}, {"from", "S"}, {"to", "B"}, {"r_ohm", 0.01}, {"x_ohm", 0.01}, {"thermal_limit_a", 270}});
    EXPECT_THROW(network_from_json(doc), TopologyError);
}

TEST(GridModel, RejectsMissingSlack) {
    auto doc = three_bus_doc();
    doc["buses"][0]["kind"] = "load";
    EXPECT_THROW(network_from_json(doc), Error);
}

TEST(GridModel, RejectsDuplicateIds) {
    auto doc = three_bus_doc();
    doc["buses"][2]["id"] = "A";
    EXPECT_THROW(network_from_json(doc), Error);
}

TEST(GridModel, RejectsDisconnectedBus) {
    auto doc = three_bus_doc();
    doc["buses"].push_back({{"id", "C"}, {"kind", "load"}, {"has_ncp", true}});
    EXPECT_THROW(network_from_json(doc), Error);
}

TEST(GridModel, ParseErrorOnMalformedJson) {
    const auto p = fs::temp_directory_path() / "lvse_bad_grid.json";
    write_text_atomic(p, "{ not json");
    EXPECT_THROW(load_network(p.string()), ParseError);
    fs::remove(p);
}

TEST(GridModel, JsonRoundTrip) {
    const auto net = load_network(test::rural_path());
    const auto back = network_from_json(network_to_json(net));
    EXPECT_EQ(network_to_json(back), network_to_json(net));
}
