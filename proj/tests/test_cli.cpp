#include "fixtures.hpp"

#include <nlohmann/json.hpp>

#include <gtest/gtest.h>

#include <cstdio>
#include <fstream>
#include <sys/wait.h>

using fixtures::TempDir;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    int status = -1;
    std::string out;
    std::string err;
};

Outcome cli(const std::string& args, const TempDir& dir) {
    const auto err_path = dir / "stderr.txt";
    const std::string cmd = std::string("\"") + PRIORPULL_CLI + "\" " + args + " 2>\"" + err_path.string() + "\"";
    Outcome o;
    FILE* pipe = ::popen(cmd.c_str(), "r");
    if (pipe == nullptr) return o;
    char buf[4096];
    std::size_t n;
    while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) o.out.append(buf, n);
    const int raw = ::pclose(pipe);
    o.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    o.err = fixtures::read_text(err_path);
    return o;
}

// The toy config with every path made absolute and cache/out under `dir`.
fs::path toy_config(const TempDir& dir, const nlohmann::json& overrides = nlohmann::json::object()) {
    const auto root = fixtures::kSourceDir;
    std::ifstream in(root / "configs" / "toy_mock.json");
    auto doc = nlohmann::json::parse(in);
    doc["dataset"]["taxonomy"] = (root / "data/toy/taxonomy.txt").string();
    for (const char* s : {"train", "dev", "test"})
        doc["dataset"]["splits"][s] = (root / "data/toy" / (std::string(s) + ".jsonl")).string();
    doc["template"] = (root / "templates/default.txt").string();
    doc["cache_dir"] = (dir / "cache").string();
    doc["out_dir"] = (dir / "out").string();
    doc.merge_patch(overrides);
    const auto path = dir / "config.json";
    fixtures::write_text(path, doc.dump(2));
    return path;
}

std::map<std::string, std::string> tree(const fs::path& root) {
    std::map<std::string, std::string> files;
    for (const auto& e : fs::recursive_directory_iterator(root))
        if (e.is_regular_file()) files[fs::relative(e.path(), root).string()] = fixtures::read_text(e.path());
    return files;
}

} // namespace

TEST(Cli, ValidateShippedConfig) {
    TempDir dir;
    const auto o = cli("validate --config \"" + (fixtures::kSourceDir / "configs/toy_mock.json").string() + "\"", dir);
    EXPECT_EQ(o.status, 0) << o.err;
    EXPECT_EQ(o.out.rfind("ok toy-mock digest ", 0), 0u) << o.out;
}

TEST(Cli, InvalidConfigListsEveryProblem) {
    TempDir dir;
    const auto cfg = toy_config(dir, {{"runs", 0}, {"endpoint", {{"mock", {{"lambda", 2}}}}}});
    const auto o = cli("validate --config \"" + cfg.string() + "\"", dir);
    EXPECT_EQ(o.status, 2);
    EXPECT_NE(o.err.find("runs"), std::string::npos) << o.err;
    EXPECT_NE(o.err.find("lambda"), std::string::npos) << o.err;
}

TEST(Cli, UsageErrors) {
    TempDir dir;
    EXPECT_NE(cli("", dir).status, 0);
    EXPECT_NE(cli("run", dir).status, 0);
    EXPECT_NE(cli("run --config /no/such/file.json", dir).status, 0);
    EXPECT_EQ(cli("--help", dir).status, 0);
}

TEST(Cli, RunThenReplayAndReport) {
    TempDir dir;
    const auto cfg = toy_config(dir, {{"k", {5}}});
    const auto run = cli("run --offline --concurrency 2 --config \"" + cfg.string() + "\"", dir);
    ASSERT_EQ(run.status, 0) << run.err;
    EXPECT_NE(run.out.find("pull.json"), std::string::npos) << run.out;
    const auto reports = tree(dir / "out" / "reports");

    const auto replay = cli("replay --config \"" + cfg.string() + "\" --out \"" + (dir / "replayed").string() + "\"", dir);
    ASSERT_EQ(replay.status, 0) << replay.err;
    EXPECT_EQ(tree(dir / "replayed" / "reports"), reports);

    const auto pull = cli("pull --config \"" + cfg.string() + "\" --out \"" + (dir / "pull-only").string() + "\"", dir);
    ASSERT_EQ(pull.status, 0) << pull.err;
    EXPECT_TRUE(fs::exists(dir / "pull-only" / "reports" / "pull.json"));
    EXPECT_FALSE(fs::exists(dir / "pull-only" / "reports" / "proxy.json"));

    const auto report = cli("report --config \"" + cfg.string() + "\"", dir);
    EXPECT_EQ(report.status, 0) << report.err;
    EXPECT_EQ(tree(dir / "out" / "reports"), reports);

    const auto empty = cli("report --config \"" + cfg.string() + "\" --out \"" + (dir / "nothing").string() + "\"", dir);
    EXPECT_NE(empty.status, 0);
}
