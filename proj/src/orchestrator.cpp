#include "priorpull/orchestrator.hpp"

#include "priorpull/error.hpp"
#include "priorpull/hashing.hpp"
#include "priorpull/naming.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>

namespace priorpull {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

// ---- data ------------------------------------------------------------------

const MultilabelDataset& LoadedData::split(Split s) const {
    auto it = splits.find(s);
    if (it == splits.end()) throw DatasetError("dataset has no '" + std::string(to_string(s)) + "' split");
    return it->second;
}

MultilabelDataset LoadedData::combined(const std::vector<Split>& which) const {
    if (which.size() == 1) return split(which.front());
    std::vector<MultilabelDataset> parts;
    for (auto s : which) parts.push_back(split(s));
    return concat(parts, which.back());
}

LoadedData load_data(const DatasetSpec& spec) {
    std::optional<EmotionTaxonomy> taxonomy;
    if (spec.taxonomy) taxonomy = load_taxonomy(*spec.taxonomy, spec.name);
    std::optional<PoolingMap> pooling;
    if (spec.pooling_map) {
        std::optional<EmotionTaxonomy> clusters;
        if (spec.cluster_taxonomy) clusters = load_taxonomy(*spec.cluster_taxonomy, spec.name + "-clusters");
        pooling = load_pooling_map(*spec.pooling_map, clusters);
    }
    LoadedData data;
    for (const auto& [split, path] : spec.splits) {
        auto ds = load_dataset(path, spec.format, split, taxonomy);
        if (pooling) ds = pool_labels(ds, *pooling);
        if (spec.subsample && spec.subsample->split == split) ds = subsample(ds, spec.subsample->n, spec.subsample->seed);
        data.splits.emplace(split, std::move(ds));
    }
    if (data.splits.empty()) throw DatasetError("dataset has no splits");
    data.taxonomy = data.splits.begin()->second.taxonomy();
    for (const auto& [split, ds] : data.splits)
        if (!(ds.taxonomy() == data.taxonomy))
            throw DatasetError("split '" + std::string(to_string(split)) + "' uses a different taxonomy");
    return data;
}

// ---- planning --------------------------------------------------------------

namespace {

RunManifest base_manifest(const ExperimentConfig& cfg, const std::string& template_ref) {
    RunManifest m;
    m.dataset = cfg.dataset.name;
    m.base_seed = cfg.base_seed;
    m.endpoint = cfg.endpoint.cache_model_id();
    m.template_ref = template_ref;
    m.label_format = cfg.label_format;
    m.eval_splits = {cfg.eval_split};
    m.pool_split = cfg.pool_split;
    m.retrieval_order = cfg.retrieval_order;
    m.max_output_tokens = cfg.endpoint.max_output_tokens;
    return m;
}

} // namespace

std::vector<PlannedRun> plan_runs(const ExperimentConfig& cfg, const std::string& template_ref) {
    std::vector<PlannedRun> plan;
    std::vector<PlannedRun> prompt_runs;
    std::map<std::string, std::size_t> index;  // run id -> position in plan

    auto add = [&](const RunManifest& m, bool requested) {
        const auto id = run_id(m);
        if (auto it = index.find(id); it != index.end()) {
            if (!(plan[it->second].manifest == m)) throw ConfigError({"two different runs share the name " + id});
            plan[it->second].requested = plan[it->second].requested || requested;
            return;
        }
        index.emplace(id, plan.size());
        plan.push_back({m, requested});
    };

    const bool traindev_sources = cfg.pool_split != cfg.eval_split;
    for (const auto& spec : cfg.experiments) {
        std::vector<std::size_t> ks = spec.k.value_or(cfg.k_values);
        if (spec.scheme.kind == SchemeKind::zero_shot) ks = {0};
        for (auto k : ks) {
            for (std::size_t r = 0; r < cfg.runs; ++r) {
                RunManifest m = base_manifest(cfg, template_ref);
                m.scheme = spec.scheme;
                m.k = k;
                m.run_index = r;
                if (spec.scheme.kind != SchemeKind::prior_prompt) {
                    add(m, true);
                    continue;
                }
                LabelSourceRef src = *spec.scheme.label_source;
                if (src.kind == SchemeKind::zero_shot) src.k = 0;
                else if (src.k == 0) src.k = k;
                m.scheme.label_source = src;

                RunManifest source = base_manifest(cfg, template_ref);
                source.scheme = SamplingScheme{src.kind, src.sedl, std::nullopt};
                source.k = src.k;
                source.run_index = r;
                if (traindev_sources) {
                    // The prior must also label the demonstration pool, so its
                    // own demonstrations come from a third split.
                    source.eval_splits = {cfg.pool_split, cfg.eval_split};
                    source.pool_split = cfg.traindev_pool_split;
                    source.traindev = true;
                }
                m.label_source_run = run_id(source);
                add(source, false);
                prompt_runs.push_back({m, true});
            }
        }
    }
    for (const auto& p : prompt_runs) add(p.manifest, true);
    return plan;
}

std::vector<std::string> plan_groups(const std::vector<PlannedRun>& plan) {
    std::vector<std::string> groups;
    for (const auto& p : plan) {
        auto name = run_name(p.manifest);
        if (std::find(groups.begin(), groups.end(), name) == groups.end()) groups.push_back(std::move(name));
    }
    return groups;
}

fs::path run_path(const fs::path& out_dir, const RunManifest& m) {
    return out_dir / "runs" / run_name(m) / ("run-" + std::to_string(m.run_index) + ".json");
}

// ---- reports ---------------------------------------------------------------

namespace {

struct Group {
    std::string name;
    RunManifest first;  // manifest of run 0, for scheme/k lookups
    std::vector<PredictionSet> runs;  // evaluation views, ordered by run index
    std::vector<PredictionSet> full;  // unrestricted runs
};

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

std::string num(const std::optional<double>& v) { return v ? num(*v) : std::string(); }

void write_file(const fs::path& path, const std::string& content, std::vector<fs::path>& written) {
    fs::create_directories(path.parent_path());
    const auto tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw AnalysisError("cannot write " + tmp);
        out << content;
    }
    fs::rename(tmp, path);
    written.push_back(path);
}

void write_json(const fs::path& path, const ojson& j, std::vector<fs::path>& written) {
    write_file(path, j.dump(2) + "\n", written);
}

std::string stats_csv(const MetricStats& s) {
    return num(s.mean.jaccard) + "," + num(s.stddev.jaccard) + "," + num(s.mean.micro_f1) + "," +
           num(s.stddev.micro_f1) + "," + num(s.mean.macro_f1) + "," + num(s.stddev.macro_f1);
}

const char* kStatsHeader = "jaccard_mean,jaccard_std,micro_f1_mean,micro_f1_std,macro_f1_mean,macro_f1_std";

bool is_prior_kind(SchemeKind kind) {
    return kind == SchemeKind::zero_shot || kind == SchemeKind::prior_independent ||
           kind == SchemeKind::prior_uniform;
}

MetricStats group_performance(const Group& g, const MultilabelDataset& eval) {
    std::vector<MetricTriple> values;
    for (const auto& r : g.runs) values.push_back(performance(r, eval));
    return summarize(values);
}

} // namespace

std::vector<fs::path> write_reports(const ExperimentConfig& cfg, const std::vector<PlannedRun>& plan,
                                    const std::map<std::string, PredictionSet>& runs, const MultilabelDataset& eval,
                                    const std::vector<std::string>& analyses, const fs::path& report_dir) {
    std::set<std::string> eval_ids;
    for (const auto& ex : eval.examples()) eval_ids.insert(ex.id);

    // Complete groups only; a group with a missing run is reported as skipped.
    std::vector<Group> groups;
    std::vector<std::string> skipped;
    for (const auto& name : plan_groups(plan)) {
        Group g;
        g.name = name;
        bool complete = true;
        for (const auto& p : plan) {
            if (run_name(p.manifest) != name) continue;
            auto it = runs.find(run_id(p.manifest));
            if (it == runs.end()) {
                complete = false;
                break;
            }
            if (g.runs.empty()) g.first = p.manifest;
            g.runs.push_back(restricted(it->second, eval_ids));
            g.full.push_back(it->second);
        }
        if (complete && !g.runs.empty()) groups.push_back(std::move(g));
        else skipped.push_back(name);
    }
    auto find_group = [&](const std::string& name) -> const Group* {
        for (const auto& g : groups)
            if (g.name == name) return &g;
        return nullptr;
    };

    auto header = [&](const char* analysis) {
        ojson j;
        j["analysis"] = analysis;
        j["experiment"] = cfg.name;
        j["config_digest"] = cfg.digest;
        j["dataset"] = cfg.dataset.name;
        j["endpoint"] = cfg.endpoint.cache_model_id();
        j["max_output_tokens"] = cfg.endpoint.max_output_tokens;
        j["eval_split"] = to_string(cfg.eval_split);
        j["decisions"] = {{"std", "population (ddof=0)"},
                          {"best_prior", "chosen per metric over all prior groups and k"},
                          {"pull_prior", to_string(cfg.pull_prior)},
                          {"retrieval_order", to_string(cfg.retrieval_order)},
                          {"jaccard_empty_pair", 1.0},
                          {"macro_f1_absent_label", 0.0}};
        j["skipped_groups"] = skipped;
        return j;
    };

    std::vector<fs::path> written;
    write_json(report_dir / "config.json", ojson{{"config_digest", cfg.digest}, {"config", cfg.resolved}}, written);
    auto wants = [&](const char* name) { return std::find(analyses.begin(), analyses.end(), name) != analyses.end(); };

    if (wants("performance")) {
        ojson j = header("performance");
        ojson rows = ojson::array();
        std::string csv = std::string("group,scheme,k,runs,") + kStatsHeader + ",fuzzy_matched,partial,unparseable\n";
        for (const auto& g : groups) {
            const auto stats = group_performance(g, eval);
            ParseDiagnostics d;
            for (const auto& r : g.full) {
                d.clean += r.diagnostics.clean;
                d.fuzzy_matched += r.diagnostics.fuzzy_matched;
                d.partial += r.diagnostics.partial;
                d.unparseable += r.diagnostics.unparseable;
            }
            rows.push_back({{"group", g.name},
                            {"scheme", to_string(g.first.scheme.kind)},
                            {"k", g.first.k},
                            {"runs", g.runs.size()},
                            {"performance", to_json(stats)},
                            {"parse", {{"clean", d.clean},
                                       {"fuzzy_matched", d.fuzzy_matched},
                                       {"partial", d.partial},
                                       {"unparseable", d.unparseable}}}});
            csv += g.name + "," + std::string(to_string(g.first.scheme.kind)) + "," + std::to_string(g.first.k) + "," +
                   std::to_string(g.runs.size()) + "," + stats_csv(stats) + "," + std::to_string(d.fuzzy_matched) +
                   "," + std::to_string(d.partial) + "," + std::to_string(d.unparseable) + "\n";
        }
        j["groups"] = rows;
        write_json(report_dir / "performance.json", j, written);
        write_file(report_dir / "performance.csv", csv, written);
    }

    if (wants("improvement")) {
        ojson j = header("improvement");
        std::map<std::size_t, MetricTriple> icl;
        std::map<std::string, MetricTriple> priors;
        for (const auto& g : groups) {
            const auto& s = g.first.scheme;
            if (s.kind == SchemeKind::icl && !s.sedl && !g.first.traindev)
                icl[g.first.k] = group_performance(g, eval).mean;
            else if (is_prior_kind(s.kind))
                priors[g.name] = group_performance(g, eval).mean;
        }
        std::string csv = "k,jaccard_pct,micro_f1_pct,macro_f1_pct\n";
        if (icl.empty() || priors.empty()) {
            j["report"] = nullptr;
            j["note"] = "needs at least one icl group and one prior group";
        } else {
            const auto report = improvement_over_prior(icl, priors);
            j["icl_performance"] = ojson::object();
            for (const auto& [k, t] : icl) j["icl_performance"][std::to_string(k)] = to_json(t);
            j["prior_performance"] = ojson::object();
            for (const auto& [name, t] : priors) j["prior_performance"][name] = to_json(t);
            j["report"] = to_json(report);
            for (const auto& [k, c] : report.by_k)
                csv += std::to_string(k) + "," + num(c.jaccard) + "," + num(c.micro_f1) + "," + num(c.macro_f1) + "\n";
        }
        write_json(report_dir / "improvement.json", j, written);
        write_file(report_dir / "improvement.csv", csv, written);
    }

    if (wants("pull")) {
        ojson j = header("pull");
        ojson rows = ojson::array();
        std::string csv = "icl_group,prior_group,k,pull_jaccard,pull_micro_f1,pull_macro_f1,sim_gt_jaccard,"
                          "sim_prior_jaccard\n";
        for (const auto& g : groups) {
            const auto& s = g.first.scheme;
            if ((s.kind != SchemeKind::icl && s.kind != SchemeKind::cossim) || s.sedl || g.first.traindev) continue;
            LabelSourceRef ref{cfg.pull_prior, g.first.k, false};
            const Group* prior = nullptr;
            for (auto [sedl, traindev] : {std::pair{false, false}, {true, false}, {false, true}, {true, true}}) {
                ref.sedl = sedl;
                if ((prior = find_group(label_source_name(ref, traindev)))) break;
            }
            if (prior == nullptr) continue;
            const auto report = pull(g.runs, prior->runs, eval);
            rows.push_back(to_json(report));
            csv += report.icl_group + "," + report.prior_group + "," + std::to_string(report.k) + "," +
                   num(report.pull.jaccard) + "," + num(report.pull.micro_f1) + "," + num(report.pull.macro_f1) + "," +
                   num(report.sim_to_ground_truth.mean.jaccard) + "," + num(report.sim_to_prior.mean.jaccard) + "\n";
        }
        j["reports"] = rows;
        write_json(report_dir / "pull.json", j, written);
        write_file(report_dir / "pull.csv", csv, written);
    }

    if (wants("consistency")) {
        ojson j = header("consistency");
        const std::string gt = "ground-truth";
        std::map<std::pair<std::string, std::string>, MetricStats> cells;
        cells[{gt, gt}] = MetricStats{{1.0, 1.0, 1.0}, {0.0, 0.0, 0.0}, 1};
        ojson within = ojson::array();
        ojson across = ojson::array();
        ojson truth = ojson::array();
        for (const auto& g : groups) {
            const auto perf = group_performance(g, eval);
            cells[{gt, g.name}] = perf;
            truth.push_back({{"group", g.name}, {"stats", to_json(perf)}});
            if (g.runs.size() >= 2) {
                const auto c = consistency(g.runs);
                cells[{g.name, g.name}] = c.stats;
                within.push_back(to_json(c));
            }
        }
        for (std::size_t a = 0; a < groups.size(); ++a)
            for (std::size_t b = a + 1; b < groups.size(); ++b) {
                const auto c = consistency(groups[a].runs, std::span<const PredictionSet>(groups[b].runs));
                cells[{groups[a].name, groups[b].name}] = c.stats;
                across.push_back(to_json(c));
            }
        j["ground_truth"] = truth;
        j["within"] = within;
        j["across"] = across;
        write_json(report_dir / "consistency.json", j, written);
        std::vector<std::string> names{gt};
        for (const auto& g : groups) names.push_back(g.name);
        for (auto metric : {MetricName::jaccard, MetricName::micro_f1, MetricName::macro_f1}) {
            std::ostringstream csv;
            write_similarity_matrix(csv, names, cells, metric);
            write_file(report_dir / ("similarity_" + std::string(to_string(metric)) + ".csv"), csv.str(), written);
        }
    }

    if (wants("proxy")) {
        ojson j = header("proxy");
        ojson rows = ojson::array();
        std::string csv = std::string("group,label_source_group,") + "proxy_jaccard,proxy_micro_f1,proxy_macro_f1," +
                          "gt_jaccard,gt_micro_f1,gt_macro_f1\n";
        for (const auto& g : groups) {
            if (g.first.scheme.kind != SchemeKind::prior_prompt) continue;
            const auto& source_run = *g.first.label_source_run;
            const auto source_name = source_run.substr(0, source_run.rfind("/run-"));
            const Group* source = find_group(source_name);
            if (source == nullptr) continue;
            const auto proxy = proxy_performance(g.runs, source->full);
            const auto truth = group_performance(g, eval);
            rows.push_back({{"group", g.name},
                            {"label_source_group", source_name},
                            {"proxy_performance", to_json(proxy)},
                            {"ground_truth_performance", to_json(truth)}});
            csv += g.name + "," + source_name + "," + num(proxy.mean.jaccard) + "," + num(proxy.mean.micro_f1) + "," +
                   num(proxy.mean.macro_f1) + "," + num(truth.mean.jaccard) + "," + num(truth.mean.micro_f1) + "," +
                   num(truth.mean.macro_f1) + "\n";
        }
        j["reports"] = rows;
        write_json(report_dir / "proxy.json", j, written);
        write_file(report_dir / "proxy.csv", csv, written);
    }
    return written;
}

// ---- orchestration ---------------------------------------------------------

namespace {

EmbeddingStore build_embeddings(const ExperimentConfig& cfg, const std::vector<PlannedRun>& plan,
                                const LoadedData& data, ModelClient& client) {
    if (cfg.embeddings) return load_embeddings(*cfg.embeddings);
    std::set<Split> needed;
    for (const auto& p : plan) {
        if (p.manifest.scheme.kind != SchemeKind::cossim) continue;
        needed.insert(p.manifest.pool_split);
        for (auto s : p.manifest.eval_splits) needed.insert(s);
    }
    EmbeddingStore store;
    for (auto s : needed) {
        const auto& ds = data.split(s);
        std::vector<std::string> texts;
        for (const auto& ex : ds.examples()) texts.push_back(ex.text);
        const auto vectors = client.embed(texts);
        for (std::size_t i = 0; i < ds.size(); ++i)
            if (!store.contains(ds[i].id)) store.add(ds[i].id, vectors.at(i));
    }
    return store;
}

} // namespace

OrchestratorResult orchestrate(const ExperimentConfig& cfg, const OrchestratorOptions& opt) {
    OrchestratorResult result;
    std::ostream* log = opt.log;
    auto note = [&](const std::string& line) {
        if (log) *log << line << '\n';
    };

    const fs::path out_dir = opt.out_dir.value_or(cfg.out_dir);
    const std::size_t concurrency = std::max<std::size_t>(1, opt.concurrency.value_or(cfg.concurrency));
    const auto data = load_data(cfg.dataset);
    const auto tmpl = cfg.template_path ? PromptTemplate::load(*cfg.template_path, cfg.label_format)
                                        : PromptTemplate::default_template(cfg.label_format);
    const std::string template_ref = "sha256:" + sha256_hex(tmpl.text());
    const auto plan = plan_runs(cfg, template_ref);

    std::shared_ptr<CompletionBackend> backend = opt.backend;
    if (!backend) backend = make_backend(cfg.endpoint, data.taxonomy, cfg.label_format);
    ModelClient client(cfg.endpoint, backend, std::make_shared<TranscriptCache>(cfg.cache_dir), opt.offline);

    std::optional<EmbeddingStore> embeddings;

    std::map<std::string, PredictionSet> runs;
    std::set<std::string> unavailable;  // failed or skipped run ids
    for (const auto& p : plan) {
        const auto& m = p.manifest;
        const auto id = run_id(m);
        if (m.label_source_run && unavailable.count(*m.label_source_run)) {
            ++result.runs_skipped;
            unavailable.insert(id);
            result.failures.push_back(id + ": skipped, label source " + *m.label_source_run + " unavailable");
            note("skip " + id);
            continue;
        }
        const auto path = run_path(out_dir, m);
        if ((opt.reuse_runs || opt.persisted_only) && fs::exists(path)) {
            try {
                auto set = load_prediction_set(path, data.taxonomy);
                if (set.manifest == m) {
                    runs.emplace(id, std::move(set));
                    ++result.runs_loaded;
                    note("load " + id);
                    continue;
                }
            } catch (const Error& e) {
                note("ignoring persisted " + path.string() + ": " + e.what());
            }
        }
        try {
            if (opt.persisted_only) throw AnalysisError("no persisted run matching the manifest at " + path.string());
            const auto eval = data.combined(m.eval_splits);
            const MultilabelDataset& pool = m.scheme.kind == SchemeKind::zero_shot ? eval : data.split(m.pool_split);
            std::optional<PredictionMap> labels;
            if (m.scheme.kind == SchemeKind::prior_prompt) {
                const auto& source = runs.at(*m.label_source_run);
                labels = build_prior_dataset(std::span(&source, 1), pool).front().predictions;
            }
            if (m.scheme.kind == SchemeKind::cossim && !embeddings) embeddings = build_embeddings(cfg, plan, data, client);
            RunInputs inputs{eval, pool, tmpl, client, labels ? &*labels : nullptr,
                             embeddings ? &*embeddings : nullptr, concurrency};
            auto set = execute_run(m, inputs);
            save_prediction_set(path, set);
            runs.emplace(id, std::move(set));
            ++result.runs_executed;
            note("done " + id);
        } catch (const Error& e) {
            ++result.runs_failed;
            unavailable.insert(id);
            result.failures.push_back(id + ": " + e.what());
            note("FAILED " + id + ": " + e.what());
        }
    }

    const auto& analyses = opt.analyses.empty() ? cfg.analyses : opt.analyses;
    result.reports = write_reports(cfg, plan, runs, data.split(cfg.eval_split), analyses, out_dir / "reports");
    result.backend_calls = client.backend_calls();
    result.cache_hits = client.cache_hits();
    result.exit_status = result.failures.empty() ? 0 : 1;
    note("runs: " + std::to_string(result.runs_executed) + " executed, " + std::to_string(result.runs_loaded) +
         " loaded, " + std::to_string(result.runs_failed) + " failed, " + std::to_string(result.runs_skipped) +
         " skipped; model calls: " + std::to_string(result.backend_calls) + ", cache hits: " +
         std::to_string(result.cache_hits));
    return result;
}

} // namespace priorpull
