#include "fixtures.hpp"

#include "priorpull/config.hpp"
#include "priorpull/error.hpp"

#include <gtest/gtest.h>

#include <fstream>

using namespace priorpull;

namespace {

const std::filesystem::path kConfigs = fixtures::kSourceDir / "configs";

nlohmann::json toy() {
    std::ifstream in(kConfigs / "toy_mock.json");
    return nlohmann::json::parse(in);
}

std::vector<std::string> problems_of(const nlohmann::json& doc) {
    try {
        parse_config(doc, kConfigs);
    } catch (const ConfigError& e) {
        return e.problems();
    }
    return {};
}

bool mentions(const std::vector<std::string>& problems, std::initializer_list<const char*> needles) {
    for (const auto& p : problems) {
        bool all = true;
        for (const char* n : needles) all = all && p.find(n) != std::string::npos;
        if (all) return true;
    }
    return false;
}

std::string dump(const std::vector<std::string>& v) {
    std::string s;
    for (const auto& p : v) s += p + "\n";
    return s;
}

} // namespace

TEST(Config, ShippedToyConfigValidates) {
    const auto cfg = validate_config(kConfigs / "toy_mock.json");
    EXPECT_EQ(cfg.name, "toy-mock");
    EXPECT_EQ(cfg.runs, 3u);
    EXPECT_EQ(cfg.k_values, (std::vector<std::size_t>{5, 15, 25}));
    EXPECT_EQ(cfg.digest.size(), 64u);
    EXPECT_EQ(cfg.endpoint.kind, EndpointKind::mock);
    EXPECT_DOUBLE_EQ(cfg.endpoint.mock.lambda, 0.5);
}

TEST(Config, ExampleHttpConfigOnlyLacksUserData) {
    try {
        validate_config(kConfigs / "semeval_openai.example.json");
    } catch (const ConfigError& e) {
        for (const auto& p : e.problems()) EXPECT_NE(p.find("file not found"), std::string::npos) << p;
    }
}

TEST(Config, UnknownSchemeNamesFieldAndAllowedValues) {
    auto doc = toy();
    doc["experiments"][1]["scheme"] = "nearest";
    const auto p = problems_of(doc);
    ASSERT_FALSE(p.empty());
    EXPECT_TRUE(mentions(p, {"experiments[1].scheme", "nearest", "icl", "cossim", "prior_prompt", "zero_shot"})) << dump(p);
}

TEST(Config, AbsentEmbeddingStoreWithCossim) {
    auto doc = toy();
    doc["embeddings"] = "../data/toy/no-such-embeddings.jsonl";
    auto p = problems_of(doc);
    EXPECT_TRUE(mentions(p, {"embeddings", "no-such-embeddings.jsonl"})) << dump(p);

    doc = toy();
    doc["endpoint"] = {{"name", "remote"}, {"kind", "http_chat"}, {"base_url", "http://localhost:1"}, {"model_id", "m"}};
    p = problems_of(doc);
    EXPECT_TRUE(mentions(p, {"cossim", "embedding"})) << dump(p);
    doc["endpoint"]["embedding_model"] = "embedder";
    EXPECT_TRUE(problems_of(doc).empty()) << dump(problems_of(doc));
}

TEST(Config, CollectsEveryProblem) {
    auto doc = toy();
    doc["endpoint"]["mock"]["lambda"] = 1.5;
    doc["endpoint"]["temperature"] = 0.7;
    doc["experiments"][0]["k"] = nlohmann::json::array({0});
    doc["runs"] = 0;
    doc["colour"] = "blue";
    doc["analyses"].push_back("vibes");
    doc["dataset"]["splits"]["train"] = "../data/toy/missing.jsonl";
    const auto p = problems_of(doc);
    EXPECT_TRUE(mentions(p, {"lambda"})) << dump(p);
    EXPECT_TRUE(mentions(p, {"temperature"})) << dump(p);
    EXPECT_TRUE(mentions(p, {"k = 0", "icl"})) << dump(p);
    EXPECT_TRUE(mentions(p, {"runs"})) << dump(p);
    EXPECT_TRUE(mentions(p, {"colour"})) << dump(p);
    EXPECT_TRUE(mentions(p, {"vibes"})) << dump(p);
    EXPECT_TRUE(mentions(p, {"missing.jsonl"})) << dump(p);
    EXPECT_GE(p.size(), 7u);
}

TEST(Config, HttpEndpointNeedsUrlAndModel) {
    auto doc = toy();
    doc["endpoint"] = {{"name", "remote"}, {"kind", "http_chat"}, {"embedding_model", "e"}};
    const auto p = problems_of(doc);
    EXPECT_TRUE(mentions(p, {"base_url"})) << dump(p);
    EXPECT_TRUE(mentions(p, {"model_id"})) << dump(p);
}

TEST(Config, PriorPromptNeedsTraindevSplitWhenPoolDiffers) {
    auto doc = toy();
    doc["traindev_pool_split"] = "train";
    EXPECT_TRUE(mentions(problems_of(doc), {"traindev_pool_split"}));
    doc = toy();
    doc["dataset"]["splits"].erase("test");
    EXPECT_TRUE(mentions(problems_of(doc), {"test"}));
    doc["experiments"].erase(6);
    EXPECT_TRUE(problems_of(doc).empty()) << dump(problems_of(doc));
}

TEST(Config, DigestTracksResultsNotPlumbing) {
    const auto base = parse_config(toy(), kConfigs);
    auto doc = toy();
    doc["concurrency"] = 1;
    doc["out_dir"] = "/tmp/elsewhere";
    EXPECT_EQ(parse_config(doc, kConfigs).digest, base.digest);
    doc["base_seed"] = 1;
    EXPECT_NE(parse_config(doc, kConfigs).digest, base.digest);
}

TEST(Config, MalformedJsonIsAConfigError) {
    fixtures::TempDir dir;
    fixtures::write_text(dir / "bad.json", "{ \"name\": ");
    EXPECT_THROW(validate_config(dir / "bad.json"), ConfigError);
}
