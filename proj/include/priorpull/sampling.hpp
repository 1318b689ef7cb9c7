#pragma once

#include "priorpull/corpus.hpp"
#include "priorpull/metrics.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace priorpull {

/// One prompt demonstration. `shown_labels` is what the prompt displays,
/// which may be gold, randomized, or a prior prediction.
struct Demonstration {
    std::string example_id;
    std::string text;
    LabelSet shown_labels;

    friend bool operator==(const Demonstration&, const Demonstration&) = default;
};

enum class SchemeKind { icl, cossim, prior_independent, prior_uniform, prior_prompt, zero_shot };
std::string_view to_string(SchemeKind kind);
SchemeKind parse_scheme_kind(std::string_view name);

// The prior-prediction dataset (D_0, D_k^I or D_k^U) that labels a prior-prompt run.
struct LabelSourceRef {
    SchemeKind kind = SchemeKind::prior_independent;  // prior_independent, prior_uniform or zero_shot
    std::size_t k = 0;
    bool sedl = false;

    friend bool operator==(const LabelSourceRef&, const LabelSourceRef&) = default;
};

struct SamplingScheme {
    SchemeKind kind = SchemeKind::icl;
    bool sedl = false;  // same examples, different labels
    std::optional<LabelSourceRef> label_source;

    // Throws SamplingError when the combination is meaningless.
    void validate() const;

    friend bool operator==(const SamplingScheme&, const SamplingScheme&) = default;
};

enum class LabelMode { independent, uniform };

// Where the most similar retrieved demonstration sits in the prompt.
enum class RetrievalOrder { most_similar_last, most_similar_first };
std::string_view to_string(RetrievalOrder order);
RetrievalOrder parse_retrieval_order(std::string_view name);

class EmbeddingStore {
public:
    void add(const std::string& id, std::vector<double> vector);
    const std::vector<double>& at(const std::string& id) const;
    bool contains(const std::string& id) const { return vectors_.count(id) != 0; }
    std::size_t dimension() const noexcept { return dimension_; }
    std::size_t size() const noexcept { return vectors_.size(); }
    const std::map<std::string, std::vector<double>>& entries() const noexcept { return vectors_; }

private:
    std::map<std::string, std::vector<double>> vectors_;
    std::size_t dimension_ = 0;
};

// JSONL rows of {"id": string, "vector": [number]}.
EmbeddingStore load_embeddings(const std::filesystem::path& path);
void save_embeddings(const std::filesystem::path& path, const EmbeddingStore& store);

// Seed for the "labels" stream of a demonstration list.
std::uint64_t label_seed(std::uint64_t seed, std::size_t run_index);

/// Ground-truth ICL: k distinct pool examples, uniformly without replacement,
/// shown with their gold labels. `exclude` never appears.
std::vector<Demonstration> sample_icl(const MultilabelDataset& pool, std::size_t k, std::uint64_t seed,
                                      std::optional<std::string_view> exclude = std::nullopt);

/// Texts as `sample_icl`; each slot shows the complete gold set of an
/// independently drawn pool example.
std::vector<Demonstration> sample_prior_independent(const MultilabelDataset& pool, std::size_t k, std::uint64_t seed,
                                                    std::optional<std::string_view> exclude = std::nullopt);

/// Texts as `sample_icl`; each taxonomy label shown with probability 1/2.
std::vector<Demonstration> sample_prior_uniform(const MultilabelDataset& pool, std::size_t k, std::uint64_t seed,
                                                std::optional<std::string_view> exclude = std::nullopt);

/// Same examples, different labels: texts depend on `base_seed` only, labels
/// on (`base_seed`, `run_index`). Run 0 equals the non-sedl variant.
std::vector<Demonstration> sample_sedl(const MultilabelDataset& pool, std::size_t k, std::uint64_t base_seed,
                                       std::size_t run_index, LabelMode mode,
                                       std::optional<std::string_view> exclude = std::nullopt);

/// Texts as `sample_icl`; labels are `label_source`'s prediction for each
/// sampled example.
std::vector<Demonstration> sample_prior_prompt(const MultilabelDataset& pool, std::size_t k, std::uint64_t seed,
                                               const PredictionMap& label_source,
                                               std::optional<std::string_view> exclude = std::nullopt);

double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b);

/// The k pool examples most cosine-similar to the query (query excluded),
/// ties broken by ascending id, shown with gold labels.
std::vector<Demonstration> retrieve_similar(const LabeledExample& query, const MultilabelDataset& pool,
                                            const EmbeddingStore& store, std::size_t k,
                                            RetrievalOrder order = RetrievalOrder::most_similar_last);

} // namespace priorpull
