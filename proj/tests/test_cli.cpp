#include <gtest/gtest.h>

#include <cstdlib>
#include <sstream>
#include <sys/wait.h>

#include "lvse/config.hpp"
#include "lvse/io.hpp"
#include "test_util.hpp"

using namespace lvse;

namespace {

int run_cli(const std::string& args, const fs::path& log) {
    const std::string cmd = std::string(LVSE_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

RunConfig parse(const std::string& text) {
    std::istringstream in(text);
    return parse_config(in);
}

class Workspace : public ::testing::Test {
protected:
    void SetUp() override {
        const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
        dir = fs::temp_directory_path() / ("lvse_cli_" + std::string(info->name()) + "_" + std::to_string(::getpid()));
        fs::remove_all(dir);
        fs::create_directories(dir);
    }
    void TearDown() override { fs::remove_all(dir); }

    fs::path write_config(const std::string& name, const std::string& body) {
        const auto p = dir / name;
        write_text_atomic(p, body);
        return p;
    }

    fs::path dir;
};

const char* kSmallRun = R"(# one scenario, short horizon
scenarios = 24
levels = medium
steps = 2000
seed = 3
threads = 1
constellations = K3, K2, K1
penetration.rural = 0, 16, 109
periods = 12
)";

} // namespace

TEST(Config, DefaultsAndOverrides) {
    const auto c = parse("scenarios = 1-3, 24\nlevels = poor\nsteps = 96\nstrategies = random, power_first\n"
                         "random_seeds = 0-2\nperiods = 20 # trailing comment\n");
    EXPECT_EQ(c.scenarios, (std::vector<int>{1, 2, 3, 24}));
    EXPECT_EQ(c.levels, (std::vector<Quality>{Quality::poor}));
    EXPECT_EQ(c.steps, 96u);
    EXPECT_EQ(c.strategies.size(), 2u);
    EXPECT_EQ(c.random_seeds, (std::vector<std::uint64_t>{0, 1, 2}));
    EXPECT_EQ(c.periods, 20u);
    const auto d = parse("");
    EXPECT_TRUE(d.scenarios.empty());
    EXPECT_EQ(d.steps, kStepsPerYear);
    EXPECT_EQ(d.penetration_rural, (std::vector<std::size_t>{0, 8, 16, 32, 90, 109}));
}

TEST(Config, RejectsBadInput) {
    EXPECT_THROW(parse("seed = 1\nseed = 2\n"), ConfigError);
    EXPECT_THROW(parse("colour = blue\n"), ConfigError);
    EXPECT_THROW(parse("scenarios = 27\n"), ConfigError);
    EXPECT_THROW(parse("scenarios = 0\n"), ConfigError);
    EXPECT_THROW(parse("steps = 0\n"), ConfigError);
    EXPECT_THROW(parse("steps = 35041\n"), ConfigError);
    EXPECT_THROW(parse("seed = -1\n"), ConfigError);
    EXPECT_THROW(parse("levels = excellent\n"), ConfigError);
    EXPECT_THROW(parse("constellations = K4\n"), ConfigError);
    EXPECT_THROW(parse("just a line\n"), ConfigError);
    EXPECT_THROW(load_config("/nonexistent/run.conf"), ConfigError);
}

TEST(Config, PenetrationAboveNcpCountRejected) {
    const auto rural = load_network(test::rural_path());
    EXPECT_NO_THROW(validate_penetrations(parse("penetration.rural = 109\n"), rural));
    EXPECT_THROW(validate_penetrations(parse("penetration.rural = 110\n"), rural), ConfigError);
}

TEST(Config, ExampleConfigParses) {
    const auto c = load_config(fs::path(LVSE_DEFAULT_DATA_DIR).parent_path() / "configs" / "example.conf");
    EXPECT_NO_THROW(validate_config(c, true, true));
}

TEST_F(Workspace, UsageErrorsExitTwo) {
    EXPECT_EQ(run_cli("", dir / "log"), 2);
    EXPECT_EQ(run_cli("frobnicate", dir / "log"), 2);
    EXPECT_EQ(run_cli("simulate --no-such-flag", dir / "log"), 2);
    EXPECT_EQ(run_cli("simulate -c " + (dir / "missing.conf").string(), dir / "log"), 2);
    const auto bad = write_config("bad.conf", "seed = 1\nseed = 1\n");
    EXPECT_EQ(run_cli("simulate -c " + bad.string(), dir / "log"), 2);
    const auto unknown = write_config("unknown.conf", "mystery = 4\n");
    EXPECT_EQ(run_cli("verify -c " + unknown.string(), dir / "log"), 2);
    const auto no_grid = write_config("nogrid.conf", "grid.rural = nowhere.json\nscenarios = 24\n");
    EXPECT_EQ(run_cli("simulate -c " + no_grid.string() + " -o " + (dir / "o").string(), dir / "log"), 2);
}

TEST_F(Workspace, VerifyPasses) {
    EXPECT_EQ(run_cli("verify -o " + dir.string(), dir / "log"), 0);
    const auto j = nlohmann::json::parse(read_text(dir / "verify.json"));
    EXPECT_TRUE(j["passed"].get<bool>());
    EXPECT_EQ(j["checks"].size(), 9u);
}

TEST_F(Workspace, FaultInjectionFailsMirrorCheck) {
    EXPECT_EQ(run_cli("verify --perturb-jacobian -o " + dir.string(), dir / "log"), 1);
    const auto j = nlohmann::json::parse(read_text(dir / "verify.json"));
    EXPECT_FALSE(j["passed"].get<bool>());
    bool mirror_failed = false;
    for (const auto& c : j["checks"])
        if (c["name"] == "mirror_table") mirror_failed = !c["passed"].get<bool>();
    EXPECT_TRUE(mirror_failed);
    EXPECT_NE(read_text(dir / "log").find("FAIL mirror_table"), std::string::npos);
}

TEST_F(Workspace, SweepWithoutStoreFails) {
    fs::create_directories(dir / "empty");
    EXPECT_EQ(run_cli("sweep -o " + (dir / "empty").string(), dir / "log"), 1);
    EXPECT_EQ(run_cli("report -o " + (dir / "empty").string(), dir / "log"), 1);
}

TEST_F(Workspace, EndToEndIsDeterministic) {
    const auto conf = write_config("run.conf", kSmallRun);
    for (const char* out : {"a", "b"}) {
        const auto o = (dir / out).string();
        ASSERT_EQ(run_cli("simulate -c " + conf.string() + " -o " + o, dir / "log"), 0) << read_text(dir / "log");
        ASSERT_EQ(run_cli("sweep -c " + conf.string() + " -o " + o, dir / "log"), 0) << read_text(dir / "log");
        ASSERT_EQ(run_cli("report -c " + conf.string() + " -o " + o, dir / "log"), 0) << read_text(dir / "log");
    }
    const std::string label = "S24_rural_2045_FederalGovernment_medium";
    for (const auto& f : {std::string("simulation_index.csv"), std::string("accuracy.csv"),
                          std::string("accuracy_periods.csv"), std::string("report_congestion.csv"),
                          std::string("report_accuracy.csv"), std::string("report_ratios.csv"), label + ".events.csv",
                          label + ".heatmap.csv", label + ".results.csv.gz", label + ".snapshots.csv.gz"}) {
        ASSERT_TRUE(fs::exists(dir / "a" / f)) << f;
        EXPECT_EQ(read_text(dir / "a" / f), read_text(dir / "b" / f)) << f;
    }

    const auto index = nlohmann::json::parse(read_text(dir / "a" / "simulation_index.json"));
    ASSERT_EQ(index.size(), 1u);
    EXPECT_EQ(index[0]["steps"], 2000);
    const auto acc = nlohmann::json::parse(read_text(dir / "a" / "accuracy.json"));
    ASSERT_EQ(acc.size(), 9u); // 3 constellations x 3 penetrations
    const std::size_t events = index[0]["events"].get<std::size_t>();
    for (const auto& r : acc) EXPECT_EQ(r["periods"].get<std::size_t>(), std::min<std::size_t>(events, 12));
    // Full metering makes the constellations indistinguishable.
    std::vector<double> full;
    for (const auto& r : acc)
        if (r["n_real"] == 109) full.push_back(r["eps_median_pct"].get<double>());
    ASSERT_EQ(full.size(), 3u);
    EXPECT_NEAR(full[0], full[1], 1e-9);
    EXPECT_NEAR(full[1], full[2], 1e-9);
}

TEST_F(Workspace, SeedOverrideChangesAssignment) {
    const auto conf = write_config("run.conf", "scenarios = 24\nlevels = medium\nsteps = 200\nthreads = 1\n");
    ASSERT_EQ(run_cli("simulate -c " + conf.string() + " -o " + (dir / "a").string() + " -s 1", dir / "log"), 0);
    ASSERT_EQ(run_cli("simulate -c " + conf.string() + " -o " + (dir / "b").string() + " -s 2", dir / "log"), 0);
    const std::string f = "S24_rural_2045_FederalGovernment_medium.summary.json";
    const auto a = nlohmann::json::parse(read_text(dir / "a" / f))["scenario"];
    const auto b = nlohmann::json::parse(read_text(dir / "b" / f))["scenario"];
    EXPECT_EQ(a["seed"], 1);
    EXPECT_EQ(b["seed"], 2);
    EXPECT_NE(a["assignments"], b["assignments"]);
}
