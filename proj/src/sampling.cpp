#include "priorpull/sampling.hpp"

#include "priorpull/error.hpp"
#include "priorpull/hashing.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>

namespace priorpull {

std::string_view to_string(SchemeKind kind) {
    switch (kind) {
    case SchemeKind::icl: return "icl";
    case SchemeKind::cossim: return "cossim";
    case SchemeKind::prior_independent: return "prior_independent";
    case SchemeKind::prior_uniform: return "prior_uniform";
    case SchemeKind::prior_prompt: return "prior_prompt";
    case SchemeKind::zero_shot: return "zero_shot";
    }
    return "icl";
}

SchemeKind parse_scheme_kind(std::string_view name) {
    for (auto kind : {SchemeKind::icl, SchemeKind::cossim, SchemeKind::prior_independent, SchemeKind::prior_uniform,
                      SchemeKind::prior_prompt, SchemeKind::zero_shot})
        if (to_string(kind) == name) return kind;
    throw SamplingError("unknown scheme '" + std::string(name) +
                        "' (allowed: icl, cossim, prior_independent, prior_uniform, prior_prompt, zero_shot)");
}

std::string_view to_string(RetrievalOrder order) {
    return order == RetrievalOrder::most_similar_last ? "most_similar_last" : "most_similar_first";
}

RetrievalOrder parse_retrieval_order(std::string_view name) {
    if (name == "most_similar_last") return RetrievalOrder::most_similar_last;
    if (name == "most_similar_first") return RetrievalOrder::most_similar_first;
    throw SamplingError("unknown retrieval order '" + std::string(name) +
                        "' (allowed: most_similar_last, most_similar_first)");
}

void SamplingScheme::validate() const {
    if (sedl && kind != SchemeKind::prior_independent && kind != SchemeKind::prior_uniform &&
        kind != SchemeKind::prior_prompt)
        throw SamplingError("sedl only applies to prior_independent, prior_uniform and prior_prompt schemes");
    if (kind == SchemeKind::prior_prompt && !label_source) throw SamplingError("prior_prompt requires a label source");
    if (kind != SchemeKind::prior_prompt && label_source)
        throw SamplingError("only prior_prompt takes a label source");
    if (label_source) {
        const auto src = label_source->kind;
        if (src != SchemeKind::prior_independent && src != SchemeKind::prior_uniform && src != SchemeKind::zero_shot)
            throw SamplingError("label source must be prior_independent, prior_uniform or zero_shot");
        if (src == SchemeKind::zero_shot && (label_source->k != 0 || label_source->sedl))
            throw SamplingError("a zero_shot label source has k = 0 and no sedl");
        if (src != SchemeKind::zero_shot && label_source->k == 0)
            throw SamplingError("a task-recognition label source needs k > 0");
        if (sedl != label_source->sedl)
            throw SamplingError("prior_prompt sedl must match the sedl flag of its label source");
    }
}

// ---- EmbeddingStore --------------------------------------------------------

void EmbeddingStore::add(const std::string& id, std::vector<double> vector) {
    if (vector.empty()) throw SamplingError("embedding for '" + id + "' is empty");
    if (dimension_ == 0) dimension_ = vector.size();
    if (vector.size() != dimension_)
        throw SamplingError("embedding for '" + id + "' has dimension " + std::to_string(vector.size()) +
                            ", expected " + std::to_string(dimension_));
    vectors_[id] = std::move(vector);
}

const std::vector<double>& EmbeddingStore::at(const std::string& id) const {
    auto it = vectors_.find(id);
    if (it == vectors_.end()) throw SamplingError("missing embedding for '" + id + "'");
    return it->second;
}

EmbeddingStore load_embeddings(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw SamplingError("cannot open embedding store " + path.string());
    EmbeddingStore store;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            auto row = nlohmann::json::parse(line);
            store.add(row.at("id").get<std::string>(), row.at("vector").get<std::vector<double>>());
        } catch (const nlohmann::json::exception& e) {
            throw SamplingError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return store;
}

void save_embeddings(const std::filesystem::path& path, const EmbeddingStore& store) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw SamplingError("cannot write " + path.string());
    for (const auto& [id, vector] : store.entries()) {
        nlohmann::ordered_json row;
        row["id"] = id;
        row["vector"] = vector;
        out << row.dump() << '\n';
    }
}

// ---- sampling --------------------------------------------------------------

namespace {

std::vector<std::size_t> candidates(const MultilabelDataset& pool, std::optional<std::string_view> exclude) {
    std::vector<std::size_t> out;
    out.reserve(pool.size());
    for (std::size_t i = 0; i < pool.size(); ++i)
        if (!exclude || pool[i].id != *exclude) out.push_back(i);
    return out;
}

// Partial Fisher-Yates over the candidate indices; the first k positions are
// the draw, in draw order.
std::vector<std::size_t> draw_texts(const MultilabelDataset& pool, std::size_t k, std::uint64_t seed,
                                    std::optional<std::string_view> exclude) {
    auto idx = candidates(pool, exclude);
    if (k > idx.size())
        throw SamplingError("pool has " + std::to_string(idx.size()) + " eligible examples, need " + std::to_string(k));
    Rng rng(stable_hash("texts", seed));
    for (std::size_t i = 0; i < k; ++i) {
        auto j = i + static_cast<std::size_t>(uniform_below(rng, idx.size() - i));
        std::swap(idx[i], idx[j]);
    }
    idx.resize(k);
    return idx;
}

std::vector<Demonstration> with_gold(const MultilabelDataset& pool, const std::vector<std::size_t>& picks) {
    std::vector<Demonstration> out;
    out.reserve(picks.size());
    for (auto i : picks) out.push_back({pool[i].id, pool[i].text, pool[i].gold});
    return out;
}

void relabel(std::vector<Demonstration>& demos, const MultilabelDataset& pool, std::uint64_t labels_seed,
             LabelMode mode, std::optional<std::string_view> exclude) {
    Rng rng(labels_seed);
    if (mode == LabelMode::independent) {
        const auto source = candidates(pool, exclude);
        for (auto& d : demos) d.shown_labels = pool[source[uniform_below(rng, source.size())]].gold;
        return;
    }
    const std::size_t labels = pool.taxonomy().size();
    const std::uint64_t mask = labels >= 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << labels) - 1;
    for (auto& d : demos) d.shown_labels = LabelSet::from_bits(rng() & mask);
}

} // namespace

std::uint64_t label_seed(std::uint64_t seed, std::size_t run_index) {
    return stable_hash("labels", seed, static_cast<std::uint64_t>(run_index));
}

std::vector<Demonstration> sample_icl(const MultilabelDataset& pool, std::size_t k, std::uint64_t seed,
                                      std::optional<std::string_view> exclude) {
    return with_gold(pool, draw_texts(pool, k, seed, exclude));
}

std::vector<Demonstration> sample_prior_independent(const MultilabelDataset& pool, std::size_t k, std::uint64_t seed,
                                                    std::optional<std::string_view> exclude) {
    return sample_sedl(pool, k, seed, 0, LabelMode::independent, exclude);
}

std::vector<Demonstration> sample_prior_uniform(const MultilabelDataset& pool, std::size_t k, std::uint64_t seed,
                                                std::optional<std::string_view> exclude) {
    return sample_sedl(pool, k, seed, 0, LabelMode::uniform, exclude);
}

std::vector<Demonstration> sample_sedl(const MultilabelDataset& pool, std::size_t k, std::uint64_t base_seed,
                                       std::size_t run_index, LabelMode mode,
                                       std::optional<std::string_view> exclude) {
    auto demos = sample_icl(pool, k, base_seed, exclude);
    relabel(demos, pool, label_seed(base_seed, run_index), mode, exclude);
    return demos;
}

std::vector<Demonstration> sample_prior_prompt(const MultilabelDataset& pool, std::size_t k, std::uint64_t seed,
                                               const PredictionMap& label_source,
                                               std::optional<std::string_view> exclude) {
    if (!(label_source.taxonomy() == pool.taxonomy()))
        throw SamplingError("label source taxonomy differs from the pool taxonomy");
    auto demos = sample_icl(pool, k, seed, exclude);
    for (auto& d : demos) {
        auto it = label_source.entries().find(d.example_id);
        if (it == label_source.entries().end())
            throw SamplingError("label source has no prediction for sampled example '" + d.example_id + "'");
        d.shown_labels = it->second;
    }
    return demos;
}

double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw SamplingError("embedding dimensions differ");
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) throw SamplingError("zero-norm embedding vector");
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

std::vector<Demonstration> retrieve_similar(const LabeledExample& query, const MultilabelDataset& pool,
                                            const EmbeddingStore& store, std::size_t k, RetrievalOrder order) {
    const auto& q = store.at(query.id);
    if (std::all_of(q.begin(), q.end(), [](double v) { return v == 0.0; }))
        throw SamplingError("zero-norm embedding vector for query '" + query.id + "'");
    struct Scored {
        double score;
        std::size_t index;
    };
    std::vector<Scored> scored;
    scored.reserve(pool.size());
    for (std::size_t i = 0; i < pool.size(); ++i) {
        if (pool[i].id == query.id) continue;
        try {
            scored.push_back({cosine_similarity(q, store.at(pool[i].id)), i});
        } catch (const SamplingError& e) {
            throw SamplingError(std::string(e.what()) + " (example '" + pool[i].id + "')");
        }
    }
    if (k > scored.size())
        throw SamplingError("pool has " + std::to_string(scored.size()) + " eligible examples, need " + std::to_string(k));
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(k), scored.end(),
                      [&](const Scored& a, const Scored& b) {
                          if (a.score != b.score) return a.score > b.score;
                          return pool[a.index].id < pool[b.index].id;
                      });
    scored.resize(k);
    if (order == RetrievalOrder::most_similar_last) std::reverse(scored.begin(), scored.end());
    std::vector<Demonstration> out;
    out.reserve(k);
    for (const auto& s : scored) out.push_back({pool[s.index].id, pool[s.index].text, pool[s.index].gold});
    return out;
}

} // namespace priorpull
