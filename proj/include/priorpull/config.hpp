#pragma once

#include "priorpull/corpus.hpp"
#include "priorpull/model.hpp"
#include "priorpull/prompt.hpp"
#include "priorpull/sampling.hpp"

#include <nlohmann/json.hpp>

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace priorpull {

struct SubsampleSpec {
    Split split = Split::dev;
    std::size_t n = 0;
    std::uint64_t seed = 0;
};

struct DatasetSpec {
    std::string name;
    DatasetFormat format = DatasetFormat::jsonl;
    std::optional<std::filesystem::path> taxonomy;
    std::map<Split, std::filesystem::path> splits;
    std::optional<std::filesystem::path> pooling_map;
    std::optional<std::filesystem::path> cluster_taxonomy;
    std::optional<SubsampleSpec> subsample;
};

struct ExperimentSpec {
    SamplingScheme scheme;
    std::optional<std::vector<std::size_t>> k;  // overrides the config-wide list
};

inline const std::vector<std::string> kAnalysisNames{"performance", "improvement", "pull", "consistency", "proxy"};

struct ExperimentConfig {
    std::string name;
    DatasetSpec dataset;
    ModelEndpoint endpoint;
    std::optional<std::filesystem::path> template_path;  // default template when absent
    LabelFormat label_format = LabelFormat::json_object;
    std::vector<std::size_t> k_values{5, 15, 25};
    std::size_t runs = 3;
    std::uint64_t base_seed = 0;
    std::vector<ExperimentSpec> experiments;
    std::vector<std::string> analyses = kAnalysisNames;
    Split eval_split = Split::dev;
    Split pool_split = Split::train;
    Split traindev_pool_split = Split::test;
    RetrievalOrder retrieval_order = RetrievalOrder::most_similar_last;
    std::optional<std::filesystem::path> embeddings;
    SchemeKind pull_prior = SchemeKind::prior_independent;
    std::size_t concurrency = 4;
    std::filesystem::path cache_dir = ".priorpull-cache";
    std::filesystem::path out_dir = "out";

    // Digest of the result-relevant configuration (concurrency and output
    // locations excluded); embedded in every report.
    std::string digest;
    nlohmann::ordered_json resolved;
};

/// Parses and checks a config document. Relative paths resolve against
/// `base_dir`. Every problem is collected into one ConfigError.
ExperimentConfig parse_config(const nlohmann::json& document, const std::filesystem::path& base_dir);

ExperimentConfig validate_config(const std::filesystem::path& path);

} // namespace priorpull
