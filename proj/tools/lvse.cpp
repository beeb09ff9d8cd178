// lvse: scenario simulation, estimator sweeps, verification and reports.

#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "lvse/pipeline.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitCheckFailed = 1;
constexpr int kExitUsage = 2;

struct Overrides {
    std::string config;
    std::string output;
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> threads;
};

lvse::RunConfig resolve(const Overrides& o) {
    auto cfg = o.config.empty() ? lvse::RunConfig{} : lvse::load_config(o.config);
    if (!o.output.empty()) cfg.output = o.output;
    if (o.seed) cfg.seed = *o.seed;
    if (o.threads) cfg.threads = *o.threads;
    return cfg;
}

void add_common(CLI::App* cmd, Overrides& o) {
    cmd->add_option("-c,--config", o.config, "Run configuration (key = value file)")->check(CLI::ExistingFile);
    cmd->add_option("-o,--output", o.output, "Output directory");
    cmd->add_option("-s,--seed", o.seed, "Scenario seed");
    cmd->add_option("-j,--threads", o.threads, "Worker threads (0: all cores)");
}

void log_line(const std::string& s) { std::cerr << s << '\n'; }

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Low-voltage grid scenario simulation and state-estimation benchmark"};
    app.require_subcommand(1);
    Overrides o;
    auto* simulate = app.add_subcommand("simulate", "Simulate scenarios and store congested steps");
    auto* sweep = app.add_subcommand("sweep", "Evaluate the estimator over stored congested periods");
    auto* verify = app.add_subcommand("verify", "Run the verification checks");
    auto* report = app.add_subcommand("report", "Collect simulation and sweep outputs into a report");
    for (auto* c : {simulate, sweep, verify, report}) add_common(c, o);
    lvse::VerifyOptions vo;
    verify->add_flag("--perturb-jacobian", vo.perturb_jacobian, "Fault injection: corrupt one estimator Jacobian entry");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        auto cfg = resolve(o);
        if (simulate->parsed()) {
            lvse::cmd_simulate(cfg, log_line);
        } else if (sweep->parsed()) {
            lvse::cmd_sweep(cfg, log_line);
        } else if (report->parsed()) {
            lvse::cmd_report(cfg, log_line);
        } else if (verify->parsed()) {
            const auto checks = lvse::cmd_verify(cfg, vo, log_line);
            const bool ok = std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.passed; });
            std::cerr << (ok ? "all checks passed" : "verification failed") << '\n';
            return ok ? kExitOk : kExitCheckFailed;
        }
    } catch (const lvse::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitCheckFailed;
    }
    return kExitOk;
}
