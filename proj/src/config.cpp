#include "priorpull/config.hpp"

#include "priorpull/error.hpp"
#include "priorpull/hashing.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <set>

namespace priorpull {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

// Accumulates problems while reading fields, so one pass reports them all.
class Reader {
public:
    explicit Reader(fs::path base) : base_(std::move(base)) {}

    std::vector<std::string> problems;

    void problem(std::string msg) { problems.push_back(std::move(msg)); }

    void allow_keys(const json& obj, const std::string& where, std::initializer_list<const char*> keys) {
        if (!obj.is_object()) return;
        std::set<std::string> allowed(keys.begin(), keys.end());
        for (const auto& [key, _] : obj.items())
            if (!allowed.count(key)) problem(where + ": unknown key '" + key + "'");
    }

    template <typename T>
    std::optional<T> get(const json& obj, const char* key, const std::string& where) {
        if (!obj.is_object() || !obj.contains(key) || obj[key].is_null()) return std::nullopt;
        try {
            return obj[key].get<T>();
        } catch (const json::exception&) {
            problem(where + "." + key + ": wrong type");
            return std::nullopt;
        }
    }

    template <typename T>
    std::optional<T> require(const json& obj, const char* key, const std::string& where) {
        if (!obj.is_object() || !obj.contains(key) || obj[key].is_null()) {
            problem(where + "." + key + ": required");
            return std::nullopt;
        }
        return get<T>(obj, key, where);
    }

    // Parses an enum-valued field; the parser's message names the allowed values.
    template <typename E>
    std::optional<E> choice(const json& obj, const char* key, const std::string& where,
                            const std::function<E(std::string_view)>& parse) {
        auto raw = get<std::string>(obj, key, where);
        if (!raw) return std::nullopt;
        try {
            return parse(*raw);
        } catch (const Error& e) {
            problem(where + "." + key + ": " + e.what());
            return std::nullopt;
        }
    }

    std::optional<fs::path> existing_file(const json& obj, const char* key, const std::string& where, bool required) {
        auto raw = required ? require<std::string>(obj, key, where) : get<std::string>(obj, key, where);
        if (!raw) return std::nullopt;
        fs::path p = fs::path(*raw).is_absolute() ? fs::path(*raw) : base_ / *raw;
        p = p.lexically_normal();
        if (!fs::is_regular_file(p)) {
            problem(where + "." + key + ": file not found: " + p.string());
            return std::nullopt;
        }
        return p;
    }

    fs::path resolve(const std::string& raw) const {
        return (fs::path(raw).is_absolute() ? fs::path(raw) : base_ / raw).lexically_normal();
    }

private:
    fs::path base_;
};

bool needs_demonstrations(SchemeKind kind) { return kind != SchemeKind::zero_shot; }

std::string path_string(const std::optional<fs::path>& p) { return p ? p->string() : std::string(); }

} // namespace

ExperimentConfig parse_config(const json& doc, const fs::path& base_dir) {
    Reader r(base_dir);
    ExperimentConfig cfg;
    if (!doc.is_object()) throw ConfigError({"config must be a JSON object"});
    r.allow_keys(doc, "config",
                 {"name", "dataset", "endpoint", "template", "label_format", "k", "runs", "base_seed", "experiments",
                  "analyses", "eval_split", "pool_split", "traindev_pool_split", "retrieval_order", "embeddings",
                  "pull_prior", "concurrency", "cache_dir", "out_dir"});

    cfg.name = r.get<std::string>(doc, "name", "config").value_or("experiment");

    // dataset
    const json ds = doc.value("dataset", json::object());
    if (!doc.contains("dataset")) r.problem("config.dataset: required");
    r.allow_keys(ds, "dataset", {"name", "format", "taxonomy", "splits", "pooling_map", "cluster_taxonomy", "subsample"});
    cfg.dataset.name = r.get<std::string>(ds, "name", "dataset").value_or("dataset");
    if (auto f = r.choice<DatasetFormat>(ds, "format", "dataset", parse_dataset_format)) cfg.dataset.format = *f;
    cfg.dataset.taxonomy = r.existing_file(ds, "taxonomy", "dataset", cfg.dataset.format == DatasetFormat::jsonl);
    if (ds.contains("splits") && ds["splits"].is_object()) {
        for (const auto& [split_name, _] : ds["splits"].items()) {
            try {
                const Split split = parse_split(split_name);
                if (auto p = r.existing_file(ds["splits"], split_name.c_str(), "dataset.splits", true))
                    cfg.dataset.splits[split] = *p;
            } catch (const Error& e) {
                r.problem("dataset.splits: " + std::string(e.what()));
            }
        }
    } else {
        r.problem("dataset.splits: required object mapping split names to files");
    }
    cfg.dataset.pooling_map = r.existing_file(ds, "pooling_map", "dataset", false);
    cfg.dataset.cluster_taxonomy = r.existing_file(ds, "cluster_taxonomy", "dataset", false);
    if (ds.contains("subsample") && ds["subsample"].is_object()) {
        const auto& ss = ds["subsample"];
        r.allow_keys(ss, "dataset.subsample", {"split", "n", "seed"});
        SubsampleSpec spec;
        if (auto s = r.choice<Split>(ss, "split", "dataset.subsample", parse_split)) spec.split = *s;
        spec.n = r.require<std::size_t>(ss, "n", "dataset.subsample").value_or(0);
        spec.seed = r.get<std::uint64_t>(ss, "seed", "dataset.subsample").value_or(0);
        cfg.dataset.subsample = spec;
    }

    // endpoint
    const json ep = doc.value("endpoint", json::object());
    if (!doc.contains("endpoint")) r.problem("config.endpoint: required");
    r.allow_keys(ep, "endpoint",
                 {"name", "kind", "base_url", "model_id", "max_output_tokens", "api_key_env", "embedding_model",
                  "requests_per_minute", "timeout_ms", "max_retries", "retry_base_delay_ms", "retry_max_delay_ms",
                  "mock", "temperature"});
    auto& e = cfg.endpoint;
    e.name = r.get<std::string>(ep, "name", "endpoint").value_or("default");
    if (auto k = r.choice<EndpointKind>(ep, "kind", "endpoint", parse_endpoint_kind)) e.kind = *k;
    else if (!ep.contains("kind")) r.problem("endpoint.kind: required (allowed: http_chat, http_completion, mock)");
    e.base_url = r.get<std::string>(ep, "base_url", "endpoint").value_or("");
    e.model_id = r.get<std::string>(ep, "model_id", "endpoint").value_or(e.kind == EndpointKind::mock ? "mock" : "");
    e.max_output_tokens = r.get<std::size_t>(ep, "max_output_tokens", "endpoint").value_or(128);
    e.api_key_env = r.get<std::string>(ep, "api_key_env", "endpoint").value_or("");
    e.embedding_model = r.get<std::string>(ep, "embedding_model", "endpoint").value_or("");
    e.requests_per_minute = r.get<double>(ep, "requests_per_minute", "endpoint").value_or(0.0);
    e.timeout = std::chrono::milliseconds(r.get<long long>(ep, "timeout_ms", "endpoint").value_or(60000));
    e.retry.max_retries = r.get<int>(ep, "max_retries", "endpoint").value_or(5);
    e.retry.base_delay = std::chrono::milliseconds(r.get<long long>(ep, "retry_base_delay_ms", "endpoint").value_or(500));
    e.retry.max_delay = std::chrono::milliseconds(r.get<long long>(ep, "retry_max_delay_ms", "endpoint").value_or(30000));
    if (auto t = r.get<double>(ep, "temperature", "endpoint"); t && *t != 0.0)
        r.problem("endpoint.temperature: experiments run at temperature 0");
    if (e.kind != EndpointKind::mock) {
        if (e.base_url.empty()) r.problem("endpoint.base_url: required for HTTP endpoints");
        if (e.model_id.empty()) r.problem("endpoint.model_id: required for HTTP endpoints");
    }
    if (ep.contains("mock")) {
        const auto& m = ep["mock"];
        r.allow_keys(m, "endpoint.mock", {"prior_seed", "lambda"});
        e.mock.prior_seed = r.get<std::uint64_t>(m, "prior_seed", "endpoint.mock").value_or(0);
        e.mock.lambda = r.get<double>(m, "lambda", "endpoint.mock").value_or(0.0);
        if (e.mock.lambda < 0.0 || e.mock.lambda > 1.0) r.problem("endpoint.mock.lambda: must lie in [0, 1]");
    }
    if (e.max_output_tokens == 0) r.problem("endpoint.max_output_tokens: must be positive");

    cfg.template_path = r.existing_file(doc, "template", "config", false);
    if (auto f = r.choice<LabelFormat>(doc, "label_format", "config", parse_label_format)) cfg.label_format = *f;
    if (auto ks = r.get<std::vector<std::size_t>>(doc, "k", "config")) cfg.k_values = *ks;
    if (cfg.k_values.empty()) r.problem("config.k: the k list must not be empty");
    cfg.runs = r.get<std::size_t>(doc, "runs", "config").value_or(3);
    if (cfg.runs == 0) r.problem("config.runs: must be at least 1");
    cfg.base_seed = r.get<std::uint64_t>(doc, "base_seed", "config").value_or(0);
    if (auto s = r.choice<Split>(doc, "eval_split", "config", parse_split)) cfg.eval_split = *s;
    if (auto s = r.choice<Split>(doc, "pool_split", "config", parse_split)) cfg.pool_split = *s;
    if (auto s = r.choice<Split>(doc, "traindev_pool_split", "config", parse_split)) cfg.traindev_pool_split = *s;
    if (auto o = r.choice<RetrievalOrder>(doc, "retrieval_order", "config", parse_retrieval_order))
        cfg.retrieval_order = *o;
    cfg.embeddings = r.existing_file(doc, "embeddings", "config", false);
    if (auto p = r.choice<SchemeKind>(doc, "pull_prior", "config", parse_scheme_kind)) {
        if (*p != SchemeKind::prior_independent && *p != SchemeKind::prior_uniform)
            r.problem("config.pull_prior: must be prior_independent or prior_uniform");
        else
            cfg.pull_prior = *p;
    }
    cfg.concurrency = r.get<std::size_t>(doc, "concurrency", "config").value_or(4);
    if (cfg.concurrency == 0) r.problem("config.concurrency: must be at least 1");
    cfg.cache_dir = r.resolve(r.get<std::string>(doc, "cache_dir", "config").value_or(".priorpull-cache"));
    cfg.out_dir = r.resolve(r.get<std::string>(doc, "out_dir", "config").value_or("out"));

    if (auto a = r.get<std::vector<std::string>>(doc, "analyses", "config")) {
        cfg.analyses.clear();
        for (const auto& name : *a) {
            if (std::find(kAnalysisNames.begin(), kAnalysisNames.end(), name) == kAnalysisNames.end())
                r.problem("config.analyses: unknown analysis '" + name +
                          "' (allowed: performance, improvement, pull, consistency, proxy)");
            else
                cfg.analyses.push_back(name);
        }
    }

    // experiments
    if (!doc.contains("experiments") || !doc["experiments"].is_array() || doc["experiments"].empty()) {
        r.problem("config.experiments: required non-empty list");
    } else {
        for (std::size_t i = 0; i < doc["experiments"].size(); ++i) {
            const auto& x = doc["experiments"][i];
            const std::string where = "experiments[" + std::to_string(i) + "]";
            r.allow_keys(x, where, {"scheme", "sedl", "k", "label_source"});
            ExperimentSpec spec;
            auto kind = r.choice<SchemeKind>(x, "scheme", where, parse_scheme_kind);
            if (!kind) {
                if (!x.contains("scheme")) r.problem(where + ".scheme: required");
                continue;
            }
            spec.scheme.kind = *kind;
            spec.scheme.sedl = r.get<bool>(x, "sedl", where).value_or(false);
            spec.k = r.get<std::vector<std::size_t>>(x, "k", where);
            if (x.contains("label_source")) {
                const auto& src = x["label_source"];
                r.allow_keys(src, where + ".label_source", {"scheme", "k", "sedl"});
                LabelSourceRef ref;
                if (auto sk = r.choice<SchemeKind>(src, "scheme", where + ".label_source", parse_scheme_kind))
                    ref.kind = *sk;
                ref.sedl = r.get<bool>(src, "sedl", where + ".label_source").value_or(spec.scheme.sedl);
                // k = 0 here means "same shot as the prompt run"; resolved at planning time.
                ref.k = r.get<std::size_t>(src, "k", where + ".label_source").value_or(0);
                spec.scheme.label_source = ref;
            }
            const auto ks = spec.k.value_or(cfg.k_values);
            if (spec.scheme.kind == SchemeKind::zero_shot) {
                if (spec.k && std::any_of(ks.begin(), ks.end(), [](std::size_t k) { return k != 0; }))
                    r.problem(where + ".k: zero_shot runs have k = 0");
            } else if (std::find(ks.begin(), ks.end(), std::size_t{0}) != ks.end()) {
                r.problem(where + ".k: k = 0 is not allowed for scheme " + std::string(to_string(spec.scheme.kind)) +
                          ", which needs demonstrations");
            }
            try {
                SamplingScheme probe = spec.scheme;
                if (probe.label_source && probe.label_source->kind != SchemeKind::zero_shot && probe.label_source->k == 0)
                    probe.label_source->k = 1;
                probe.validate();
            } catch (const Error& err) {
                r.problem(where + ": " + err.what());
            }
            if (spec.scheme.kind == SchemeKind::cossim) {
                const bool has_store = cfg.embeddings.has_value();
                const bool can_embed = e.kind == EndpointKind::mock || !e.embedding_model.empty();
                if (doc.contains("embeddings") && !has_store) {
                    // already reported as a missing file
                } else if (!has_store && !can_embed) {
                    r.problem(where + ": cossim needs an embedding store (config.embeddings) or endpoint.embedding_model");
                }
            }
            cfg.experiments.push_back(std::move(spec));
        }
    }

    // split coverage
    auto need_split = [&](Split s, const std::string& why) {
        if (!cfg.dataset.splits.empty() && !cfg.dataset.splits.count(s))
            r.problem("dataset.splits: missing '" + std::string(to_string(s)) + "' split (" + why + ")");
    };
    need_split(cfg.eval_split, "eval_split");
    const bool any_demos = std::any_of(cfg.experiments.begin(), cfg.experiments.end(),
                                       [](const ExperimentSpec& x) { return needs_demonstrations(x.scheme.kind); });
    if (any_demos) need_split(cfg.pool_split, "pool_split");
    const bool any_prompt = std::any_of(cfg.experiments.begin(), cfg.experiments.end(), [](const ExperimentSpec& x) {
        return x.scheme.kind == SchemeKind::prior_prompt;
    });
    if (any_prompt && cfg.pool_split != cfg.eval_split) {
        need_split(cfg.traindev_pool_split, "traindev_pool_split, used to label the pool for prior-prompt runs");
        if (cfg.traindev_pool_split == cfg.pool_split || cfg.traindev_pool_split == cfg.eval_split)
            r.problem("config.traindev_pool_split: must differ from pool_split and eval_split");
    }

    if (!r.problems.empty()) throw ConfigError(r.problems);

    // Resolved form; concurrency and locations are left out of the digest.
    nlohmann::ordered_json res;
    res["name"] = cfg.name;
    nlohmann::ordered_json splits = nlohmann::ordered_json::object();
    for (const auto& [s, p] : cfg.dataset.splits) splits[std::string(to_string(s))] = p.string();
    res["dataset"] = {{"name", cfg.dataset.name},
                      {"format", cfg.dataset.format == DatasetFormat::jsonl ? "jsonl" : "semeval_tsv"},
                      {"taxonomy", path_string(cfg.dataset.taxonomy)},
                      {"splits", splits},
                      {"pooling_map", path_string(cfg.dataset.pooling_map)},
                      {"cluster_taxonomy", path_string(cfg.dataset.cluster_taxonomy)}};
    if (cfg.dataset.subsample)
        res["dataset"]["subsample"] = {{"split", to_string(cfg.dataset.subsample->split)},
                                       {"n", cfg.dataset.subsample->n},
                                       {"seed", cfg.dataset.subsample->seed}};
    res["endpoint"] = {{"kind", to_string(e.kind)},
                       {"model", e.cache_model_id()},
                       {"base_url", e.base_url},
                       {"max_output_tokens", e.max_output_tokens},
                       {"temperature", e.temperature},
                       {"embedding_model", e.embedding_model}};
    res["template"] = path_string(cfg.template_path);
    res["label_format"] = to_string(cfg.label_format);
    res["k"] = cfg.k_values;
    res["runs"] = cfg.runs;
    res["base_seed"] = cfg.base_seed;
    nlohmann::ordered_json xs = nlohmann::ordered_json::array();
    for (const auto& x : cfg.experiments) {
        nlohmann::ordered_json xj = {{"scheme", to_string(x.scheme.kind)}, {"sedl", x.scheme.sedl}};
        if (x.k) xj["k"] = *x.k;
        if (x.scheme.label_source)
            xj["label_source"] = {{"scheme", to_string(x.scheme.label_source->kind)},
                                  {"k", x.scheme.label_source->k},
                                  {"sedl", x.scheme.label_source->sedl}};
        xs.push_back(xj);
    }
    res["experiments"] = xs;
    res["analyses"] = cfg.analyses;
    res["eval_split"] = to_string(cfg.eval_split);
    res["pool_split"] = to_string(cfg.pool_split);
    res["traindev_pool_split"] = to_string(cfg.traindev_pool_split);
    res["retrieval_order"] = to_string(cfg.retrieval_order);
    res["embeddings"] = path_string(cfg.embeddings);
    res["pull_prior"] = to_string(cfg.pull_prior);
    cfg.digest = sha256_hex(res.dump());
    cfg.resolved = std::move(res);
    return cfg;
}

ExperimentConfig validate_config(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError({"cannot open config file " + path.string()});
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError({path.string() + " is not valid JSON: " + e.what()});
    }
    return parse_config(doc, fs::absolute(path).parent_path());
}

} // namespace priorpull
