#include "priorpull/analysis.hpp"

#include "priorpull/error.hpp"
#include "priorpull/hashing.hpp"
#include "priorpull/naming.hpp"

#include <cstdio>
#include <fstream>
#include <ostream>

namespace priorpull {

// ---- manifests -------------------------------------------------------------

nlohmann::ordered_json to_json(const RunManifest& m) {
    nlohmann::ordered_json j;
    j["run_name"] = run_name(m);
    j["run_id"] = run_id(m);
    j["dataset"] = m.dataset;
    j["scheme"] = to_string(m.scheme.kind);
    j["sedl"] = m.scheme.sedl;
    if (m.scheme.label_source) {
        j["label_source"] = {{"scheme", to_string(m.scheme.label_source->kind)},
                             {"k", m.scheme.label_source->k},
                             {"sedl", m.scheme.label_source->sedl}};
    } else {
        j["label_source"] = nullptr;
    }
    j["k"] = m.k;
    j["run_index"] = m.run_index;
    j["base_seed"] = m.base_seed;
    j["endpoint"] = m.endpoint;
    j["template"] = m.template_ref;
    j["label_format"] = to_string(m.label_format);
    nlohmann::ordered_json splits = nlohmann::ordered_json::array();
    for (auto s : m.eval_splits) splits.push_back(to_string(s));
    j["eval_splits"] = splits;
    j["pool_split"] = to_string(m.pool_split);
    j["traindev"] = m.traindev;
    j["retrieval_order"] = to_string(m.retrieval_order);
    j["label_source_run"] = m.label_source_run ? nlohmann::ordered_json(*m.label_source_run) : nlohmann::ordered_json();
    j["max_output_tokens"] = m.max_output_tokens;
    return j;
}

RunManifest manifest_from_json(const nlohmann::json& j) {
    try {
        RunManifest m;
        m.dataset = j.at("dataset").get<std::string>();
        m.scheme.kind = parse_scheme_kind(j.at("scheme").get<std::string>());
        m.scheme.sedl = j.at("sedl").get<bool>();
        if (!j.at("label_source").is_null()) {
            const auto& src = j["label_source"];
            m.scheme.label_source = LabelSourceRef{parse_scheme_kind(src.at("scheme").get<std::string>()),
                                                   src.at("k").get<std::size_t>(), src.at("sedl").get<bool>()};
        }
        m.k = j.at("k").get<std::size_t>();
        m.run_index = j.at("run_index").get<std::size_t>();
        m.base_seed = j.at("base_seed").get<std::uint64_t>();
        m.endpoint = j.at("endpoint").get<std::string>();
        m.template_ref = j.at("template").get<std::string>();
        m.label_format = parse_label_format(j.at("label_format").get<std::string>());
        m.eval_splits.clear();
        for (const auto& s : j.at("eval_splits")) m.eval_splits.push_back(parse_split(s.get<std::string>()));
        m.pool_split = parse_split(j.at("pool_split").get<std::string>());
        m.traindev = j.at("traindev").get<bool>();
        m.retrieval_order = parse_retrieval_order(j.at("retrieval_order").get<std::string>());
        if (!j.at("label_source_run").is_null()) m.label_source_run = j["label_source_run"].get<std::string>();
        m.max_output_tokens = j.at("max_output_tokens").get<std::size_t>();
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw AnalysisError(std::string("malformed run manifest: ") + e.what());
    }
}

nlohmann::ordered_json to_json(const PredictionSet& set) {
    nlohmann::ordered_json j;
    j["manifest"] = to_json(set.manifest);
    j["taxonomy"] = set.predictions.taxonomy().labels();
    nlohmann::ordered_json preds = nlohmann::ordered_json::object();
    for (const auto& [id, labels] : set.predictions.entries())
        preds[id] = label_names(set.predictions.taxonomy(), labels);
    j["predictions"] = preds;
    const auto& d = set.diagnostics;
    j["diagnostics"] = {{"clean", d.clean},
                        {"fuzzy_matched", d.fuzzy_matched},
                        {"partial", d.partial},
                        {"unparseable", d.unparseable},
                        {"unparseable_ids", d.unparseable_ids}};
    return j;
}

PredictionSet prediction_set_from_json(const nlohmann::json& j, const EmotionTaxonomy& taxonomy) {
    try {
        PredictionSet set;
        set.manifest = manifest_from_json(j.at("manifest"));
        if (j.at("taxonomy").get<std::vector<std::string>>() != taxonomy.labels())
            throw AnalysisError("prediction set taxonomy differs from the dataset taxonomy");
        std::map<std::string, LabelSet> entries;
        for (const auto& [id, labels] : j.at("predictions").items())
            entries.emplace(id, make_label_set(taxonomy, labels.get<std::vector<std::string>>()));
        set.predictions = PredictionMap(taxonomy, std::move(entries));
        const auto& d = j.at("diagnostics");
        set.diagnostics.clean = d.at("clean").get<std::size_t>();
        set.diagnostics.fuzzy_matched = d.at("fuzzy_matched").get<std::size_t>();
        set.diagnostics.partial = d.at("partial").get<std::size_t>();
        set.diagnostics.unparseable = d.at("unparseable").get<std::size_t>();
        set.diagnostics.unparseable_ids = d.at("unparseable_ids").get<std::vector<std::string>>();
        return set;
    } catch (const nlohmann::json::exception& e) {
        throw AnalysisError(std::string("malformed prediction set: ") + e.what());
    }
}

void save_prediction_set(const std::filesystem::path& path, const PredictionSet& set) {
    std::filesystem::create_directories(path.parent_path());
    const auto tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw AnalysisError("cannot write " + tmp);
        out << to_json(set).dump(2) << '\n';
    }
    std::filesystem::rename(tmp, path);
}

PredictionSet load_prediction_set(const std::filesystem::path& path, const EmotionTaxonomy& taxonomy) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw AnalysisError("cannot open " + path.string());
    auto j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded()) throw AnalysisError(path.string() + " is not valid JSON");
    return prediction_set_from_json(j, taxonomy);
}

// ---- execution -------------------------------------------------------------

namespace {

// "Input: " -> "Input:"; completions are cut where the model starts a new block.
std::string trim_block_marker(std::string prefix) {
    while (!prefix.empty() && (prefix.back() == ' ' || prefix.back() == '\t')) prefix.pop_back();
    return prefix;
}

} // namespace

std::uint64_t query_text_seed(const RunManifest& m, const std::string& query_id) {
    const bool fixed_texts = m.scheme.sedl || m.scheme.kind == SchemeKind::prior_prompt;
    const std::uint64_t run_seed =
        stable_hash("texts", m.base_seed, static_cast<std::uint64_t>(fixed_texts ? 0 : m.run_index));
    return stable_hash(run_seed, query_id);
}

std::vector<Demonstration> select_demonstrations(const RunManifest& m, const LabeledExample& query,
                                                 const MultilabelDataset& pool, const PredictionMap* label_source,
                                                 const EmbeddingStore* embeddings) {
    const std::uint64_t seed = query_text_seed(m, query.id);
    const std::string_view exclude = query.id;
    switch (m.scheme.kind) {
    case SchemeKind::zero_shot: return {};
    case SchemeKind::icl: return sample_icl(pool, m.k, seed, exclude);
    case SchemeKind::prior_independent:
        return m.scheme.sedl ? sample_sedl(pool, m.k, seed, m.run_index, LabelMode::independent, exclude)
                             : sample_prior_independent(pool, m.k, seed, exclude);
    case SchemeKind::prior_uniform:
        return m.scheme.sedl ? sample_sedl(pool, m.k, seed, m.run_index, LabelMode::uniform, exclude)
                             : sample_prior_uniform(pool, m.k, seed, exclude);
    case SchemeKind::prior_prompt:
        if (label_source == nullptr) throw SamplingError("prior_prompt run without label-source predictions");
        return sample_prior_prompt(pool, m.k, seed, *label_source, exclude);
    case SchemeKind::cossim:
        if (embeddings == nullptr) throw SamplingError("cossim run without an embedding store");
        return retrieve_similar(query, pool, *embeddings, m.k, m.retrieval_order);
    }
    throw SamplingError("unknown scheme");
}

PredictionSet execute_run(const RunManifest& manifest, const RunInputs& in) {
    manifest.scheme.validate();
    const auto& taxonomy = in.eval.taxonomy();
    if (!(taxonomy == in.pool.taxonomy())) throw AnalysisError("evaluation and pool datasets use different taxonomies");
    std::vector<ParseOutcome> outcomes(in.eval.size());
    parallel_for(in.eval.size(), in.concurrency, [&](std::size_t i) {
        const auto& query = in.eval[i];
        const auto demos = select_demonstrations(manifest, query, in.pool, in.label_source, in.embeddings);
        CompletionRequest request{render_prompt(in.prompt_template, taxonomy, demos, query), &query, demos};
        const auto result = in.model.cached_complete(request);
        outcomes[i] = parse_output(result.completion, taxonomy, manifest.label_format,
                                   trim_block_marker(in.prompt_template.block_prefix()));
    });

    PredictionSet set;
    set.manifest = manifest;
    std::map<std::string, LabelSet> entries;
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
        const auto& o = outcomes[i];
        entries.emplace(in.eval[i].id, o.labels);
        switch (o.status) {
        case ParseStatus::clean: ++set.diagnostics.clean; break;
        case ParseStatus::fuzzy_matched: ++set.diagnostics.fuzzy_matched; break;
        case ParseStatus::partial: ++set.diagnostics.partial; break;
        case ParseStatus::unparseable:
            ++set.diagnostics.unparseable;
            set.diagnostics.unparseable_ids.push_back(in.eval[i].id);
            break;
        }
    }
    set.predictions = PredictionMap(taxonomy, std::move(entries));
    return set;
}

// ---- analyses --------------------------------------------------------------

PredictionSet restricted(const PredictionSet& set, const std::set<std::string>& ids) {
    PredictionSet out = set;
    out.predictions = set.predictions.restricted_to(ids);
    return out;
}

MetricTriple performance(const PredictionSet& predictions, const MultilabelDataset& reference) {
    const auto gold = PredictionMap::from_gold(reference);
    return metric_triple(gold, predictions.predictions.restricted_to(gold.ids()));
}

ImprovementReport improvement_over_prior(const std::map<std::size_t, MetricTriple>& icl,
                                         const std::map<std::string, MetricTriple>& priors) {
    if (priors.empty()) throw AnalysisError("improvement over prior needs at least one prior performance");
    ImprovementReport r;
    bool first = true;
    for (const auto& [name, perf] : priors) {
        if (first || perf.jaccard > r.best.jaccard) {
            r.best.jaccard = perf.jaccard;
            r.best_jaccard_source = name;
        }
        if (first || perf.micro_f1 > r.best.micro_f1) {
            r.best.micro_f1 = perf.micro_f1;
            r.best_micro_f1_source = name;
        }
        if (first || perf.macro_f1 > r.best.macro_f1) {
            r.best.macro_f1 = perf.macro_f1;
            r.best_macro_f1_source = name;
        }
        first = false;
    }
    auto pct = [](double value, double best) -> std::optional<double> {
        if (best == 0.0) return std::nullopt;
        return 100.0 * (value - best) / best;
    };
    for (const auto& [k, perf] : icl)
        r.by_k[k] = {pct(perf.jaccard, r.best.jaccard), pct(perf.micro_f1, r.best.micro_f1),
                     pct(perf.macro_f1, r.best.macro_f1)};
    return r;
}

namespace {

std::set<std::string> shared_ids(std::span<const PredictionSet> runs, const char* what) {
    if (runs.empty()) throw AnalysisError(std::string(what) + ": no runs given");
    auto ids = runs.front().predictions.ids();
    for (const auto& r : runs)
        if (r.predictions.ids() != ids)
            throw AnalysisError(std::string(what) + ": runs do not share evaluation ids (" + run_id(r.manifest) + ")");
    return ids;
}

} // namespace

PullReport pull(std::span<const PredictionSet> icl_runs, std::span<const PredictionSet> prior_runs,
                const MultilabelDataset& gold, bool allow_cross_shot) {
    if (prior_runs.empty()) throw AnalysisError("pull: no prior runs given");
    const auto ids = shared_ids(icl_runs, "pull");
    PullReport report;
    report.k = icl_runs.front().manifest.k;
    report.icl_group = run_name(icl_runs.front().manifest);
    report.prior_group = run_name(prior_runs.front().manifest);
    if (!allow_cross_shot) {
        for (const auto& r : icl_runs)
            if (r.manifest.k != report.k) throw AnalysisError("pull: icl runs use different k");
        for (const auto& r : prior_runs)
            if (r.manifest.k != report.k)
                throw AnalysisError("pull: prior run " + run_id(r.manifest) + " has k=" + std::to_string(r.manifest.k) +
                                    ", icl runs have k=" + std::to_string(report.k));
    }
    const auto truth = PredictionMap::from_gold(gold).restricted_to(ids);
    std::vector<PredictionMap> priors;
    priors.reserve(prior_runs.size());
    for (const auto& p : prior_runs) priors.push_back(p.predictions.restricted_to(ids));

    std::vector<MetricTriple> to_truth;
    std::vector<MetricTriple> to_prior;
    for (const auto& run : icl_runs) {
        to_truth.push_back(metric_triple(truth, run.predictions));
        for (const auto& prior : priors) to_prior.push_back(metric_triple(prior, run.predictions));
    }
    report.sim_to_ground_truth = summarize(to_truth);
    report.sim_to_prior = summarize(to_prior);
    report.pull = {report.sim_to_prior.mean.jaccard - report.sim_to_ground_truth.mean.jaccard,
                   report.sim_to_prior.mean.micro_f1 - report.sim_to_ground_truth.mean.micro_f1,
                   report.sim_to_prior.mean.macro_f1 - report.sim_to_ground_truth.mean.macro_f1};
    return report;
}

PairwiseSimilarity consistency(std::span<const PredictionSet> group_a,
                               std::optional<std::span<const PredictionSet>> group_b) {
    PairwiseSimilarity out;
    std::vector<MetricTriple> values;
    if (!group_b) {
        if (group_a.size() < 2) throw AnalysisError("consistency within a group needs at least 2 runs");
        shared_ids(group_a, "consistency");
        out.config_a = out.config_b = run_name(group_a.front().manifest);
        for (std::size_t i = 0; i < group_a.size(); ++i)
            for (std::size_t j = i + 1; j < group_a.size(); ++j)
                values.push_back(metric_triple(group_a[i].predictions, group_a[j].predictions));
    } else {
        if (group_a.empty() || group_b->empty()) throw AnalysisError("consistency across groups needs runs on both sides");
        out.config_a = run_name(group_a.front().manifest);
        out.config_b = run_name(group_b->front().manifest);
        for (const auto& a : group_a)
            for (const auto& b : *group_b) values.push_back(metric_triple(a.predictions, b.predictions));
    }
    out.pairs = values.size();
    out.stats = summarize(values);
    return out;
}

MetricStats proxy_performance(std::span<const PredictionSet> reinforced_runs, const PredictionSet& prior_dataset) {
    const std::string source_id = run_id(prior_dataset.manifest);
    std::vector<MetricTriple> values;
    for (const auto& run : reinforced_runs) {
        if (run.manifest.label_source_run != source_id)
            throw AnalysisError("proxy performance: " + run_id(run.manifest) + " was labelled by " +
                                run.manifest.label_source_run.value_or("<none>") + ", not " + source_id);
        values.push_back(metric_triple(prior_dataset.predictions.restricted_to(run.predictions.ids()), run.predictions));
    }
    return summarize(values);
}

MetricStats proxy_performance(std::span<const PredictionSet> reinforced_runs, std::span<const PredictionSet> sources) {
    std::vector<MetricTriple> values;
    for (const auto& run : reinforced_runs) {
        const PredictionSet* source = nullptr;
        for (const auto& s : sources)
            if (run.manifest.label_source_run == run_id(s.manifest)) source = &s;
        if (source == nullptr)
            throw AnalysisError("proxy performance: no label-source run for " + run_id(run.manifest));
        values.push_back(proxy_performance(std::span(&run, 1), *source).mean);
    }
    return summarize(values);
}

std::vector<PredictionSet> build_prior_dataset(std::span<const PredictionSet> prior_runs,
                                               const MultilabelDataset& pool) {
    std::set<std::string> pool_ids;
    for (const auto& ex : pool.examples()) pool_ids.insert(ex.id);
    std::vector<PredictionSet> out;
    out.reserve(prior_runs.size());
    for (const auto& run : prior_runs) {
        std::vector<std::string> missing;
        for (const auto& id : pool_ids)
            if (!run.predictions.contains(id)) missing.push_back(id);
        if (!missing.empty()) {
            std::string msg = "prior run " + run_id(run.manifest) + " does not cover the demonstration pool; missing:";
            for (const auto& id : missing) msg += " " + id;
            throw AnalysisError(msg);
        }
        out.push_back(restricted(run, pool_ids));
    }
    return out;
}

// ---- serialization ---------------------------------------------------------

nlohmann::ordered_json to_json(const MetricTriple& t) {
    return {{"jaccard", t.jaccard}, {"micro_f1", t.micro_f1}, {"macro_f1", t.macro_f1}};
}

nlohmann::ordered_json to_json(const MetricStats& s) {
    return {{"mean", to_json(s.mean)}, {"std", to_json(s.stddev)}, {"count", s.count}};
}

nlohmann::ordered_json to_json(const ImprovementReport& r) {
    nlohmann::ordered_json j;
    j["best_prior"] = to_json(r.best);
    j["best_prior_source"] = {{"jaccard", r.best_jaccard_source},
                              {"micro_f1", r.best_micro_f1_source},
                              {"macro_f1", r.best_macro_f1_source}};
    auto opt = [](const std::optional<double>& v) { return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(); };
    nlohmann::ordered_json by_k = nlohmann::ordered_json::object();
    for (const auto& [k, c] : r.by_k)
        by_k[std::to_string(k)] = nlohmann::ordered_json{
            {"jaccard", opt(c.jaccard)}, {"micro_f1", opt(c.micro_f1)}, {"macro_f1", opt(c.macro_f1)}};
    j["improvement_percent"] = by_k;
    return j;
}

nlohmann::ordered_json to_json(const PullReport& r) {
    return {{"k", r.k},
            {"icl_group", r.icl_group},
            {"prior_group", r.prior_group},
            {"sim_to_ground_truth", to_json(r.sim_to_ground_truth)},
            {"sim_to_prior", to_json(r.sim_to_prior)},
            {"pull", to_json(r.pull)}};
}

nlohmann::ordered_json to_json(const PairwiseSimilarity& s) {
    return {{"config_a", s.config_a}, {"config_b", s.config_b}, {"pairs", s.pairs}, {"stats", to_json(s.stats)}};
}

std::string_view to_string(MetricName metric) {
    switch (metric) {
    case MetricName::jaccard: return "jaccard";
    case MetricName::micro_f1: return "micro_f1";
    case MetricName::macro_f1: return "macro_f1";
    }
    return "jaccard";
}

double get(const MetricTriple& t, MetricName metric) {
    switch (metric) {
    case MetricName::jaccard: return t.jaccard;
    case MetricName::micro_f1: return t.micro_f1;
    case MetricName::macro_f1: return t.macro_f1;
    }
    return t.jaccard;
}

std::string format_cell(const MetricStats& stats, MetricName metric) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3f±%.3f", get(stats.mean, metric), get(stats.stddev, metric));
    return buf;
}

void write_similarity_matrix(std::ostream& out, const std::vector<std::string>& groups,
                             const std::map<std::pair<std::string, std::string>, MetricStats>& cells,
                             MetricName metric) {
    out << to_string(metric);
    for (const auto& g : groups) out << ',' << g;
    out << '\n';
    for (const auto& row : groups) {
        out << row;
        for (const auto& col : groups) {
            out << ',';
            auto it = cells.find({row, col});
            if (it == cells.end()) it = cells.find({col, row});
            if (it != cells.end()) out << format_cell(it->second, metric);
        }
        out << '\n';
    }
}

} // namespace priorpull
