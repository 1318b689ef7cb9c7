#pragma once

#include "priorpull/corpus.hpp"
#include "priorpull/metrics.hpp"
#include "priorpull/model.hpp"
#include "priorpull/prompt.hpp"
#include "priorpull/sampling.hpp"

#include <nlohmann/json.hpp>

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace priorpull {

/// Everything that determines one run's predictions.
struct RunManifest {
    std::string dataset;
    SamplingScheme scheme;
    std::size_t k = 0;
    std::size_t run_index = 0;
    std::uint64_t base_seed = 0;
    std::string endpoint;     // cache model id of the endpoint
    std::string template_ref; // "sha256:<digest>" of the template text
    LabelFormat label_format = LabelFormat::json_object;
    std::vector<Split> eval_splits{Split::dev};
    Split pool_split = Split::train;
    bool traindev = false;  // evaluation also covers the demonstration pool of prior-prompt runs
    RetrievalOrder retrieval_order = RetrievalOrder::most_similar_last;
    std::optional<std::string> label_source_run;  // run id supplying prompt labels
    std::size_t max_output_tokens = 128;

    friend bool operator==(const RunManifest&, const RunManifest&) = default;
};

nlohmann::ordered_json to_json(const RunManifest& manifest);
RunManifest manifest_from_json(const nlohmann::json& j);

struct ParseDiagnostics {
    std::size_t clean = 0;
    std::size_t fuzzy_matched = 0;
    std::size_t partial = 0;
    std::size_t unparseable = 0;
    std::vector<std::string> unparseable_ids;

    friend bool operator==(const ParseDiagnostics&, const ParseDiagnostics&) = default;
};

struct PredictionSet {
    RunManifest manifest;
    PredictionMap predictions;
    ParseDiagnostics diagnostics;

    friend bool operator==(const PredictionSet&, const PredictionSet&) = default;
};

nlohmann::ordered_json to_json(const PredictionSet& set);
PredictionSet prediction_set_from_json(const nlohmann::json& j, const EmotionTaxonomy& taxonomy);
void save_prediction_set(const std::filesystem::path& path, const PredictionSet& set);
PredictionSet load_prediction_set(const std::filesystem::path& path, const EmotionTaxonomy& taxonomy);

// Seed driving text selection for `query` in this run. Same-examples runs
// (sedl, prior-prompt) use the run-0 seed so texts stay fixed across runs.
std::uint64_t query_text_seed(const RunManifest& manifest, const std::string& query_id);

/// Demonstrations shown to `query` under the manifest's scheme.
std::vector<Demonstration> select_demonstrations(const RunManifest& manifest, const LabeledExample& query,
                                                 const MultilabelDataset& pool, const PredictionMap* label_source,
                                                 const EmbeddingStore* embeddings);

struct RunInputs {
    const MultilabelDataset& eval;
    const MultilabelDataset& pool;
    const PromptTemplate& prompt_template;
    ModelClient& model;
    const PredictionMap* label_source = nullptr;
    const EmbeddingStore* embeddings = nullptr;
    std::size_t concurrency = 1;
};

/// Samples, renders, completes (through the cache) and parses every
/// evaluation example. Results are keyed by id, so worker scheduling does not
/// affect the output.
PredictionSet execute_run(const RunManifest& manifest, const RunInputs& inputs);

// Scores predictions against gold; predictions outside `reference` are ignored.
MetricTriple performance(const PredictionSet& predictions, const MultilabelDataset& reference);

struct ImprovementCell {
    std::optional<double> jaccard;  // nullopt when the best prior scores 0
    std::optional<double> micro_f1;
    std::optional<double> macro_f1;
};

struct ImprovementReport {
    MetricTriple best;  // per metric, over every prior group and k
    std::string best_jaccard_source;
    std::string best_micro_f1_source;
    std::string best_macro_f1_source;
    std::map<std::size_t, ImprovementCell> by_k;  // percentages
};

/// Percentage improvement of ICL over the best prior, chosen per metric.
ImprovementReport improvement_over_prior(const std::map<std::size_t, MetricTriple>& icl_performance,
                                         const std::map<std::string, MetricTriple>& prior_performance);

struct PullReport {
    std::size_t k = 0;
    std::string icl_group;
    std::string prior_group;
    MetricStats sim_to_ground_truth;
    MetricStats sim_to_prior;
    MetricTriple pull;  // mean sim_to_prior - mean sim_to_ground_truth
};

/// ICL runs compared to gold (one value per run) and to the prior runs (every
/// icl x prior pair). Prior runs and gold are restricted to the ICL ids.
PullReport pull(std::span<const PredictionSet> icl_runs, std::span<const PredictionSet> prior_runs,
                const MultilabelDataset& gold, bool allow_cross_shot = false);

struct PairwiseSimilarity {
    std::string config_a;
    std::string config_b;
    std::size_t pairs = 0;
    MetricStats stats;
};

/// Within one group: every unordered pair. Across two groups: every cross pair.
PairwiseSimilarity consistency(std::span<const PredictionSet> group_a,
                               std::optional<std::span<const PredictionSet>> group_b = std::nullopt);

/// Performance of prior-reinforced runs measured against the prior dataset
/// that labelled their prompts.
MetricStats proxy_performance(std::span<const PredictionSet> reinforced_runs, const PredictionSet& prior_dataset);

// Pairs each reinforced run with its own label-source run from `sources`.
MetricStats proxy_performance(std::span<const PredictionSet> reinforced_runs,
                              std::span<const PredictionSet> sources);

/// Prior runs restricted to the demonstration pool, for use as prior-prompt
/// label sources. Throws AnalysisError naming missing pool ids.
std::vector<PredictionSet> build_prior_dataset(std::span<const PredictionSet> prior_runs,
                                               const MultilabelDataset& pool);

// Runs restricted to `ids` (e.g. the evaluation split of a traindev run).
PredictionSet restricted(const PredictionSet& set, const std::set<std::string>& ids);

// ---- report serialization --------------------------------------------------

nlohmann::ordered_json to_json(const MetricTriple& triple);
nlohmann::ordered_json to_json(const MetricStats& stats);
nlohmann::ordered_json to_json(const ImprovementReport& report);
nlohmann::ordered_json to_json(const PullReport& report);
nlohmann::ordered_json to_json(const PairwiseSimilarity& similarity);

enum class MetricName { jaccard, micro_f1, macro_f1 };
std::string_view to_string(MetricName metric);
double get(const MetricTriple& triple, MetricName metric);

// "mean±std" with three decimals.
std::string format_cell(const MetricStats& stats, MetricName metric);

/// Square matrix CSV: first row and column hold group names, cells hold
/// mean±std of the chosen metric; missing pairs are left empty.
void write_similarity_matrix(std::ostream& out, const std::vector<std::string>& groups,
                             const std::map<std::pair<std::string, std::string>, MetricStats>& cells,
                             MetricName metric);

} // namespace priorpull
