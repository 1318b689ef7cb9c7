#pragma once

#include "priorpull/corpus.hpp"
#include "priorpull/prompt.hpp"
#include "priorpull/sampling.hpp"

#include <atomic>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <functional>
#include <future>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <unordered_map>
#include <vector>

namespace priorpull {

enum class EndpointKind { http_chat, http_completion, mock };
std::string_view to_string(EndpointKind kind);
EndpointKind parse_endpoint_kind(std::string_view name);

struct RetryPolicy {
    int max_retries = 5;
    std::chrono::milliseconds base_delay{500};
    std::chrono::milliseconds max_delay{30000};
};

struct MockSettings {
    std::uint64_t prior_seed = 0;
    double lambda = 0.0;  // prior-pull strength in [0, 1]
};

struct ModelEndpoint {
    std::string name = "default";
    EndpointKind kind = EndpointKind::mock;
    std::string base_url;  // e.g. https://api.openai.com/v1
    std::string model_id;
    std::size_t max_output_tokens = 128;
    double temperature = 0.0;
    std::string api_key_env;      // name of the variable holding the key
    std::string embedding_model;  // empty: embeddings unavailable over HTTP
    double requests_per_minute = 0.0;  // 0: unlimited
    std::chrono::milliseconds timeout{60000};
    RetryPolicy retry;
    MockSettings mock;

    // Model identity used in cache keys. Mock parameters are folded in so two
    // mock configurations never share transcripts.
    std::string cache_model_id() const;
    std::string describe() const;
};

// ---- mock oracle -----------------------------------------------------------

/// Deterministic stand-in LLM with a tunable pull towards its own prior.
struct MockOracle {
    std::uint64_t prior_seed = 0;
    double lambda = 0.0;
    EmotionTaxonomy taxonomy;
};

// g(x): label j is in the prior iff stable_hash(prior_seed, id, j) is even.
LabelSet mock_prior(const MockOracle& oracle, std::string_view example_id);

// h(x): shown labels of the demonstration sharing the most tokens with the
// query text (earliest wins ties); empty without demonstrations.
LabelSet mock_demonstration_labels(std::string_view query_text, std::span<const Demonstration> demos);

// Per label j: from g(x) when unit_hash(prior_seed, id, j) < lambda, else from h(x).
LabelSet mock_predict(const MockOracle& oracle, const LabeledExample& query, std::span<const Demonstration> demos);

// Hashed bag-of-words vector; texts sharing words get high cosine similarity.
std::vector<double> mock_embedding(std::string_view text);

// ---- backends --------------------------------------------------------------

struct TokenUsage {
    std::int64_t prompt_tokens = 0;
    std::int64_t completion_tokens = 0;
};

struct Completion {
    std::string text;
    std::optional<TokenUsage> usage;
};

// The structured query/demonstrations travel alongside the prompt so the
// mock can answer; HTTP backends only send `prompt`.
struct CompletionRequest {
    std::string prompt;
    const LabeledExample* query = nullptr;
    std::span<const Demonstration> demos;
};

class CompletionBackend {
public:
    virtual ~CompletionBackend() = default;
    virtual Completion complete(const CompletionRequest& request) = 0;
    virtual std::vector<std::vector<double>> embed(const std::vector<std::string>& texts) = 0;
    virtual bool uses_network() const = 0;
};

class MockBackend : public CompletionBackend {
public:
    MockBackend(MockOracle oracle, LabelFormat format) : oracle_(std::move(oracle)), format_(format) {}
    Completion complete(const CompletionRequest& request) override;
    std::vector<std::vector<double>> embed(const std::vector<std::string>& texts) override;
    bool uses_network() const override { return false; }

private:
    MockOracle oracle_;
    LabelFormat format_;
};

/// Token bucket; `acquire` blocks until a request may start.
class RateLimiter {
public:
    explicit RateLimiter(double requests_per_minute, double burst = 1.0);
    void acquire();

private:
    double rate_per_second_;
    double capacity_;
    double tokens_;
    std::chrono::steady_clock::time_point last_;
    std::mutex mutex_;
};

/// OpenAI-compatible client: POST {base_url}/chat/completions or
/// {base_url}/completions, and {base_url}/embeddings. Retries timeouts, 429
/// and 5xx with exponential backoff and jitter; never retries other 4xx.
class HttpBackend : public CompletionBackend {
public:
    explicit HttpBackend(ModelEndpoint endpoint);
    ~HttpBackend() override;

    Completion complete(const CompletionRequest& request) override;
    std::vector<std::vector<double>> embed(const std::vector<std::string>& texts) override;
    bool uses_network() const override { return true; }

    // HTTP attempts issued, retries included.
    std::size_t network_calls() const noexcept { return calls_.load(); }

private:
    std::string post_json(const std::string& path, const std::string& body);

    ModelEndpoint endpoint_;
    std::string origin_;  // scheme://host:port
    std::string prefix_;  // path prefix, e.g. /v1
    std::unique_ptr<RateLimiter> limiter_;
    std::atomic<std::size_t> calls_{0};
};

std::unique_ptr<CompletionBackend> make_backend(const ModelEndpoint& endpoint, const EmotionTaxonomy& taxonomy,
                                                LabelFormat format);

// ---- transcript cache ------------------------------------------------------

struct Transcript {
    std::string kind = "completion";  // or "embedding"; the prompt field then holds the text
    std::string cache_key;
    std::string model_id;
    std::string prompt;
    std::string completion;
    double temperature = 0.0;
    std::size_t max_output_tokens = 0;
    std::string timestamp;
    std::optional<TokenUsage> usage;
};

std::string completion_cache_key(std::string_view model_id, std::string_view prompt, double temperature,
                                 std::size_t max_output_tokens);
std::string embedding_cache_key(std::string_view model_id, std::string_view text);

/// One JSON transcript per key under root/<first two hex digits>/<key>.json.
/// Writes go to a temporary file that is renamed into place.
class TranscriptCache {
public:
    explicit TranscriptCache(std::filesystem::path root);

    // Entries whose stored fields no longer hash to their key, or whose
    // completion digest is wrong, are reported and treated as misses.
    std::optional<Transcript> load(const std::string& key) const;
    void store(const Transcript& transcript) const;

    std::filesystem::path path_for(const std::string& key) const;
    const std::filesystem::path& root() const noexcept { return root_; }
    std::size_t corrupt_entries() const noexcept { return corrupt_.load(); }

private:
    std::filesystem::path root_;
    mutable std::atomic<std::size_t> corrupt_{0};
};

// ---- client ----------------------------------------------------------------

struct CachedCompletion {
    std::string completion;
    bool hit = false;
};

/// Completion front-end shared by all runs: transcript cache, in-flight
/// de-duplication of identical misses, and the offline switch.
class ModelClient {
public:
    ModelClient(ModelEndpoint endpoint, std::shared_ptr<CompletionBackend> backend,
                std::shared_ptr<TranscriptCache> cache, bool offline = false);

    const ModelEndpoint& endpoint() const noexcept { return endpoint_; }

    // Uncached call straight to the backend.
    std::string complete(const CompletionRequest& request);
    CachedCompletion cached_complete(const CompletionRequest& request);
    std::vector<std::vector<double>> embed(const std::vector<std::string>& texts);

    std::size_t backend_calls() const noexcept { return backend_calls_.load(); }
    std::size_t cache_hits() const noexcept { return hits_.load(); }

private:
    Completion call_backend(const CompletionRequest& request);

    ModelEndpoint endpoint_;
    std::shared_ptr<CompletionBackend> backend_;
    std::shared_ptr<TranscriptCache> cache_;
    bool offline_;
    std::atomic<std::size_t> backend_calls_{0};
    std::atomic<std::size_t> hits_{0};
    std::mutex inflight_mutex_;
    std::unordered_map<std::string, std::shared_future<std::string>> inflight_;
};

/// Runs fn(i) for i in [0, n) on up to `concurrency` threads. The first
/// exception stops further scheduling and is rethrown after all workers join.
void parallel_for(std::size_t n, std::size_t concurrency, const std::function<void(std::size_t)>& fn);

} // namespace priorpull
