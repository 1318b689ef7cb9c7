#include "priorpull/model.hpp"

#include "priorpull/error.hpp"
#include "priorpull/hashing.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include <unistd.h>

namespace priorpull {

std::string_view to_string(EndpointKind kind) {
    switch (kind) {
    case EndpointKind::http_chat: return "http_chat";
    case EndpointKind::http_completion: return "http_completion";
    case EndpointKind::mock: return "mock";
    }
    return "mock";
}

EndpointKind parse_endpoint_kind(std::string_view name) {
    if (name == "http_chat") return EndpointKind::http_chat;
    if (name == "http_completion") return EndpointKind::http_completion;
    if (name == "mock") return EndpointKind::mock;
    throw Error("unknown endpoint kind '" + std::string(name) + "' (allowed: http_chat, http_completion, mock)");
}

std::string ModelEndpoint::cache_model_id() const {
    if (kind != EndpointKind::mock) return model_id;
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", mock.lambda);
    return "mock:" + model_id + ":prior_seed=" + std::to_string(mock.prior_seed) + ":lambda=" + buf;
}

std::string ModelEndpoint::describe() const {
    std::string out = "endpoint '" + name + "' (" + std::string(to_string(kind)) + ", model " + model_id;
    if (!base_url.empty()) out += ", " + base_url;
    return out + ")";
}

// ---- mock ------------------------------------------------------------------

namespace {

std::set<std::string> tokens(std::string_view text) {
    std::set<std::string> out;
    std::string cur;
    for (char c : text) {
        if (std::isalnum(static_cast<unsigned char>(c))) {
            cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        } else if (!cur.empty()) {
            out.insert(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) out.insert(std::move(cur));
    return out;
}

} // namespace

LabelSet mock_prior(const MockOracle& oracle, std::string_view example_id) {
    LabelSet g;
    for (std::size_t j = 0; j < oracle.taxonomy.size(); ++j)
        if (stable_hash(oracle.prior_seed, "prior", example_id, static_cast<std::uint64_t>(j)) % 2 == 0) g.insert(j);
    return g;
}

LabelSet mock_demonstration_labels(std::string_view query_text, std::span<const Demonstration> demos) {
    if (demos.empty()) return {};
    const auto query = tokens(query_text);
    std::size_t best = 0;
    std::size_t best_overlap = 0;
    for (std::size_t i = 0; i < demos.size(); ++i) {
        const auto demo = tokens(demos[i].text);
        std::size_t overlap = 0;
        for (const auto& t : demo) overlap += query.count(t);
        if (overlap > best_overlap) {
            best_overlap = overlap;
            best = i;
        }
    }
    return demos[best].shown_labels;
}

LabelSet mock_predict(const MockOracle& oracle, const LabeledExample& query, std::span<const Demonstration> demos) {
    const LabelSet prior = mock_prior(oracle, query.id);
    const LabelSet shown = mock_demonstration_labels(query.text, demos);
    LabelSet out;
    for (std::size_t j = 0; j < oracle.taxonomy.size(); ++j) {
        const double u = unit_interval(stable_hash(oracle.prior_seed, "pull", query.id, static_cast<std::uint64_t>(j)));
        const bool take = u < oracle.lambda ? prior.contains(j) : shown.contains(j);
        if (take) out.insert(j);
    }
    return out;
}

std::vector<double> mock_embedding(std::string_view text) {
    constexpr std::size_t kDim = 64;
    std::vector<double> v(kDim, 0.0);
    v[0] = 0.1;  // keeps empty texts away from the zero vector
    for (const auto& t : tokens(text)) v[1 + stable_hash("embed", t) % (kDim - 1)] += 1.0;
    return v;
}

Completion MockBackend::complete(const CompletionRequest& request) {
    LabelSet predicted;
    if (request.query != nullptr) {
        predicted = mock_predict(oracle_, *request.query, request.demos);
    } else {
        const LabeledExample synthetic{sha256_hex(request.prompt), request.prompt, {}};
        predicted = mock_predict(oracle_, synthetic, {});
    }
    return {format_labels(oracle_.taxonomy, predicted, format_), std::nullopt};
}

std::vector<std::vector<double>> MockBackend::embed(const std::vector<std::string>& texts) {
    std::vector<std::vector<double>> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.push_back(mock_embedding(t));
    return out;
}

std::unique_ptr<CompletionBackend> make_backend(const ModelEndpoint& endpoint, const EmotionTaxonomy& taxonomy,
                                                LabelFormat format) {
    if (endpoint.kind == EndpointKind::mock)
        return std::make_unique<MockBackend>(MockOracle{endpoint.mock.prior_seed, endpoint.mock.lambda, taxonomy},
                                             format);
    return std::make_unique<HttpBackend>(endpoint);
}

// ---- rate limiting ---------------------------------------------------------

RateLimiter::RateLimiter(double requests_per_minute, double burst)
    : rate_per_second_(requests_per_minute / 60.0),
      capacity_(std::max(1.0, burst)),
      tokens_(capacity_),
      last_(std::chrono::steady_clock::now()) {}

void RateLimiter::acquire() {
    if (rate_per_second_ <= 0.0) return;
    for (;;) {
        std::chrono::duration<double> wait{};
        {
            std::lock_guard lock(mutex_);
            const auto now = std::chrono::steady_clock::now();
            tokens_ = std::min(capacity_, tokens_ + std::chrono::duration<double>(now - last_).count() * rate_per_second_);
            last_ = now;
            if (tokens_ >= 1.0) {
                tokens_ -= 1.0;
                return;
            }
            wait = std::chrono::duration<double>((1.0 - tokens_) / rate_per_second_);
        }
        std::this_thread::sleep_for(wait);
    }
}

// ---- cache -----------------------------------------------------------------

namespace {

std::string format_real(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string utc_now() {
    const std::time_t t = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::atomic<std::uint64_t> g_temp_counter{0};

} // namespace

std::string completion_cache_key(std::string_view model_id, std::string_view prompt, double temperature,
                                 std::size_t max_output_tokens) {
    nlohmann::json framed = {"completion-v1", model_id, prompt, format_real(temperature), max_output_tokens};
    return sha256_hex(framed.dump());
}

std::string embedding_cache_key(std::string_view model_id, std::string_view text) {
    nlohmann::json framed = {"embedding-v1", model_id, text};
    return sha256_hex(framed.dump());
}

TranscriptCache::TranscriptCache(std::filesystem::path root) : root_(std::move(root)) {
    std::filesystem::create_directories(root_);
}

std::filesystem::path TranscriptCache::path_for(const std::string& key) const {
    return root_ / key.substr(0, 2) / (key + ".json");
}

std::optional<Transcript> TranscriptCache::load(const std::string& key) const {
    const auto path = path_for(key);
    std::ifstream in(path, std::ios::binary);
    if (!in) return std::nullopt;
    auto corrupt = [&](const std::string& why) -> std::optional<Transcript> {
        ++corrupt_;
        std::cerr << "warning: ignoring corrupt cache entry " << path.string() << ": " << why << '\n';
        return std::nullopt;
    };
    nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded() || !j.is_object()) return corrupt("not a JSON object");
    try {
        Transcript t;
        t.cache_key = j.at("cache_key").get<std::string>();
        t.model_id = j.at("model_id").get<std::string>();
        t.prompt = j.at("prompt").get<std::string>();
        t.completion = j.at("completion").get<std::string>();
        t.temperature = j.at("temperature").get<double>();
        t.max_output_tokens = j.at("max_output_tokens").get<std::size_t>();
        t.timestamp = j.value("timestamp", "");
        if (j.contains("usage") && j["usage"].is_object())
            t.usage = TokenUsage{j["usage"].value("prompt_tokens", std::int64_t{0}),
                                 j["usage"].value("completion_tokens", std::int64_t{0})};
        t.kind = j.value("kind", "completion");
        const std::string expected = t.kind == "embedding"
                                         ? embedding_cache_key(t.model_id, t.prompt)
                                         : completion_cache_key(t.model_id, t.prompt, t.temperature, t.max_output_tokens);
        if (t.cache_key != key || expected != key) return corrupt("digest mismatch");
        if (j.at("completion_sha256").get<std::string>() != sha256_hex(t.completion))
            return corrupt("completion digest mismatch");
        return t;
    } catch (const nlohmann::json::exception& e) {
        return corrupt(e.what());
    }
}

void TranscriptCache::store(const Transcript& t) const {
    const auto path = path_for(t.cache_key);
    std::filesystem::create_directories(path.parent_path());
    nlohmann::ordered_json j;
    j["cache_key"] = t.cache_key;
    j["kind"] = t.kind;
    j["model_id"] = t.model_id;
    j["temperature"] = t.temperature;
    j["max_output_tokens"] = t.max_output_tokens;
    j["prompt"] = t.prompt;
    j["completion"] = t.completion;
    j["completion_sha256"] = sha256_hex(t.completion);
    j["timestamp"] = t.timestamp;
    if (t.usage) j["usage"] = {{"prompt_tokens", t.usage->prompt_tokens}, {"completion_tokens", t.usage->completion_tokens}};

    std::ostringstream tmp_name;
    tmp_name << path.filename().string() << ".tmp." << ::getpid() << '.' << g_temp_counter.fetch_add(1);
    const auto tmp = path.parent_path() / tmp_name.str();
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write cache file " + tmp.string());
        out << j.dump(2) << '\n';
        if (!out) throw Error("failed writing cache file " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

// ---- client ----------------------------------------------------------------

ModelClient::ModelClient(ModelEndpoint endpoint, std::shared_ptr<CompletionBackend> backend,
                         std::shared_ptr<TranscriptCache> cache, bool offline)
    : endpoint_(std::move(endpoint)), backend_(std::move(backend)), cache_(std::move(cache)), offline_(offline) {}

Completion ModelClient::call_backend(const CompletionRequest& request) {
    if (offline_ && backend_->uses_network())
        throw OfflineError("offline mode: no cached completion for this prompt at " + endpoint_.describe());
    ++backend_calls_;
    return backend_->complete(request);
}

std::string ModelClient::complete(const CompletionRequest& request) { return call_backend(request).text; }

CachedCompletion ModelClient::cached_complete(const CompletionRequest& request) {
    if (!cache_) return {complete(request), false};
    const std::string model_id = endpoint_.cache_model_id();
    const std::string key =
        completion_cache_key(model_id, request.prompt, endpoint_.temperature, endpoint_.max_output_tokens);
    if (auto hit = cache_->load(key)) {
        ++hits_;
        return {std::move(hit->completion), true};
    }

    std::promise<std::string> promise;
    {
        std::unique_lock lock(inflight_mutex_);
        if (auto it = inflight_.find(key); it != inflight_.end()) {
            auto shared = it->second;
            lock.unlock();
            ++hits_;
            return {shared.get(), true};
        }
        inflight_.emplace(key, promise.get_future().share());
    }
    auto release = [&] {
        std::lock_guard lock(inflight_mutex_);
        inflight_.erase(key);
    };
    try {
        // A concurrent writer may have finished between the first probe and
        // registering as in-flight.
        if (auto hit = cache_->load(key)) {
            ++hits_;
            promise.set_value(hit->completion);
            release();
            return {std::move(hit->completion), true};
        }
        Completion c = call_backend(request);
        Transcript t;
        t.cache_key = key;
        t.model_id = model_id;
        t.prompt = request.prompt;
        t.completion = c.text;
        t.temperature = endpoint_.temperature;
        t.max_output_tokens = endpoint_.max_output_tokens;
        t.timestamp = utc_now();
        t.usage = c.usage;
        cache_->store(t);
        promise.set_value(c.text);
        release();
        return {std::move(c.text), false};
    } catch (...) {
        promise.set_exception(std::current_exception());
        release();
        throw;
    }
}

std::vector<std::vector<double>> ModelClient::embed(const std::vector<std::string>& texts) {
    const std::string model_id = "embed:" + (endpoint_.embedding_model.empty() ? endpoint_.cache_model_id()
                                                                               : endpoint_.embedding_model);
    std::vector<std::vector<double>> out(texts.size());
    std::vector<std::size_t> missing;
    for (std::size_t i = 0; i < texts.size(); ++i) {
        if (cache_) {
            if (auto hit = cache_->load(embedding_cache_key(model_id, texts[i]))) {
                ++hits_;
                out[i] = nlohmann::json::parse(hit->completion).get<std::vector<double>>();
                continue;
            }
        }
        missing.push_back(i);
    }
    if (missing.empty()) return out;
    if (offline_ && backend_->uses_network())
        throw OfflineError("offline mode: missing cached embeddings at " + endpoint_.describe());
    std::vector<std::string> batch;
    batch.reserve(missing.size());
    for (auto i : missing) batch.push_back(texts[i]);
    ++backend_calls_;
    auto vectors = backend_->embed(batch);
    if (vectors.size() != batch.size()) throw EndpointError("embedding count mismatch from " + endpoint_.describe(), false);
    for (std::size_t m = 0; m < missing.size(); ++m) {
        out[missing[m]] = vectors[m];
        if (cache_) {
            Transcript t;
            t.kind = "embedding";
            t.model_id = model_id;
            t.prompt = batch[m];
            t.cache_key = embedding_cache_key(model_id, batch[m]);
            t.completion = nlohmann::json(vectors[m]).dump();
            t.timestamp = utc_now();
            cache_->store(t);
        }
    }
    return out;
}

// ---- dispatch --------------------------------------------------------------

void parallel_for(std::size_t n, std::size_t concurrency, const std::function<void(std::size_t)>& fn) {
    if (n == 0) return;
    const std::size_t workers = std::max<std::size_t>(1, std::min(concurrency, n));
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    auto work = [&] {
        for (;;) {
            if (failed.load()) return;
            const std::size_t i = next.fetch_add(1);
            if (i >= n) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
                failed = true;
                return;
            }
        }
    };
    if (workers == 1) {
        work();
    } else {
        std::vector<std::jthread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    }
    if (first_error) std::rethrow_exception(first_error);
}

} // namespace priorpull
