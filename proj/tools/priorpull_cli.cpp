#include "priorpull/config.hpp"
#include "priorpull/error.hpp"
#include "priorpull/orchestrator.hpp"

#include <CLI11.hpp>

#include <iostream>

using namespace priorpull;

namespace {

struct Common {
    std::string config;
    bool offline = false;
    std::size_t concurrency = 0;
    std::string out;
};

void add_common(CLI::App* cmd, Common& c, bool offline_flag = true) {
    cmd->add_option("--config", c.config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
    if (offline_flag) cmd->add_flag("--offline", c.offline, "forbid network calls; cache and mock only");
    cmd->add_option("--concurrency", c.concurrency, "maximum in-flight model requests")->check(CLI::PositiveNumber);
    cmd->add_option("--out", c.out, "output directory (default: the config's out_dir)");
}

int run_experiment(const Common& c, OrchestratorOptions opt) {
    const auto cfg = validate_config(c.config);
    opt.offline = opt.offline || c.offline;
    if (c.concurrency > 0) opt.concurrency = c.concurrency;
    if (!c.out.empty()) opt.out_dir = c.out;
    opt.log = &std::cerr;
    const auto result = orchestrate(cfg, opt);
    for (const auto& f : result.failures) std::cerr << "error: " << f << '\n';
    for (const auto& r : result.reports) std::cout << r.string() << '\n';
    return result.exit_status;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"priorpull: measure how strongly in-context learning is pulled towards task priors"};
    app.require_subcommand(1);

    Common c;
    auto* validate = app.add_subcommand("validate", "check a config and report every problem");
    validate->add_option("--config", c.config, "experiment config (JSON)")->required();

    auto* run = app.add_subcommand("run", "execute all runs and emit every configured report");
    auto* score = app.add_subcommand("score", "performance and improvement-over-prior reports");
    auto* pull_cmd = app.add_subcommand("pull", "prior pull report");
    auto* consistency_cmd = app.add_subcommand("consistency", "pairwise consistency and similarity matrices");
    auto* proxy = app.add_subcommand("proxy", "proxy performance of prior-prompt runs");
    auto* report = app.add_subcommand("report", "reports from persisted runs only; never calls the model");
    auto* replay = app.add_subcommand("replay", "rebuild runs from cached transcripts (offline) and re-analyse");
    for (auto* cmd : {run, score, pull_cmd, consistency_cmd, proxy}) add_common(cmd, c);
    add_common(report, c, false);
    add_common(replay, c, false);

    CLI11_PARSE(app, argc, argv);

    try {
        if (validate->parsed()) {
            const auto cfg = validate_config(c.config);
            std::cout << "ok " << cfg.name << " digest " << cfg.digest << '\n';
            return 0;
        }
        OrchestratorOptions opt;
        if (score->parsed()) opt.analyses = {"performance", "improvement"};
        if (pull_cmd->parsed()) opt.analyses = {"pull"};
        if (consistency_cmd->parsed()) opt.analyses = {"consistency"};
        if (proxy->parsed()) opt.analyses = {"proxy"};
        if (report->parsed()) opt.persisted_only = true;
        if (replay->parsed()) {
            opt.offline = true;
            opt.reuse_runs = false;
        }
        return run_experiment(c, opt);
    } catch (const ConfigError& e) {
        std::cerr << "invalid config " << c.config << ":\n";
        for (const auto& p : e.problems()) std::cerr << "  - " << p << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }
}
