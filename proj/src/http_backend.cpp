#include <httplib.h>

#include "priorpull/error.hpp"
#include "priorpull/model.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdlib>
#include <random>

namespace priorpull {

namespace {

bool retryable_status(int status) { return status == 408 || status == 429 || status >= 500; }

std::string snippet(const std::string& body) { return body.size() > 300 ? body.substr(0, 300) + "..." : body; }

} // namespace

HttpBackend::HttpBackend(ModelEndpoint endpoint) : endpoint_(std::move(endpoint)) {
    const auto scheme_end = endpoint_.base_url.find("://");
    if (scheme_end == std::string::npos)
        throw Error(endpoint_.describe() + ": base_url must start with http:// or https://");
    const auto path_start = endpoint_.base_url.find('/', scheme_end + 3);
    origin_ = endpoint_.base_url.substr(0, path_start);
    prefix_ = path_start == std::string::npos ? "" : endpoint_.base_url.substr(path_start);
    while (!prefix_.empty() && prefix_.back() == '/') prefix_.pop_back();
    if (endpoint_.requests_per_minute > 0.0) limiter_ = std::make_unique<RateLimiter>(endpoint_.requests_per_minute);
}

HttpBackend::~HttpBackend() = default;

std::string HttpBackend::post_json(const std::string& path, const std::string& body) {
    httplib::Headers headers;
    if (!endpoint_.api_key_env.empty()) {
        const char* key = std::getenv(endpoint_.api_key_env.c_str());
        if (key == nullptr || *key == '\0')
            throw AuthenticationError(endpoint_.describe() + ": API key variable " + endpoint_.api_key_env +
                                      " is not set");
        headers.emplace("Authorization", std::string("Bearer ") + key);
    }

    thread_local std::mt19937_64 jitter_rng{std::random_device{}()};
    const auto timeout_s = std::chrono::duration_cast<std::chrono::seconds>(endpoint_.timeout);
    const auto timeout_us = std::chrono::duration_cast<std::chrono::microseconds>(endpoint_.timeout - timeout_s);
    std::string last_problem;
    for (int attempt = 0;; ++attempt) {
        if (attempt > 0) {
            auto delay = endpoint_.retry.base_delay * (1LL << std::min(attempt - 1, 20));
            delay = std::min<std::chrono::milliseconds>(delay, endpoint_.retry.max_delay);
            const auto jitter_ms = delay.count() > 0 ? static_cast<long long>(jitter_rng() % (delay.count() / 2 + 1)) : 0;
            std::this_thread::sleep_for(delay + std::chrono::milliseconds(jitter_ms));
        }
        if (limiter_) limiter_->acquire();

        httplib::Client client(origin_);
        client.set_connection_timeout(timeout_s.count(), timeout_us.count());
        client.set_read_timeout(timeout_s.count(), timeout_us.count());
        client.set_write_timeout(timeout_s.count(), timeout_us.count());
        ++calls_;
        auto res = client.Post(prefix_ + path, headers, body, "application/json");

        if (!res) {
            last_problem = "transport error: " + httplib::to_string(res.error());
        } else if (res->status == 401 || res->status == 403) {
            throw AuthenticationError(endpoint_.describe() + ": authentication failed (HTTP " +
                                      std::to_string(res->status) + "): " + snippet(res->body));
        } else if (res->status >= 200 && res->status < 300) {
            return res->body;
        } else if (retryable_status(res->status)) {
            last_problem = "HTTP " + std::to_string(res->status) + ": " + snippet(res->body);
        } else {
            throw EndpointError(endpoint_.describe() + ": HTTP " + std::to_string(res->status) + ": " + snippet(res->body),
                                false);
        }
        if (attempt >= endpoint_.retry.max_retries)
            throw EndpointError(endpoint_.describe() + ": retry budget exhausted after " + std::to_string(attempt + 1) +
                                    " attempt(s); last error: " + last_problem,
                                true);
    }
}

Completion HttpBackend::complete(const CompletionRequest& request) {
    nlohmann::json body = {{"model", endpoint_.model_id},
                           {"temperature", endpoint_.temperature},
                           {"max_tokens", endpoint_.max_output_tokens}};
    const bool chat = endpoint_.kind == EndpointKind::http_chat;
    if (chat) {
        body["messages"] = nlohmann::json::array({{{"role", "user"}, {"content", request.prompt}}});
    } else {
        body["prompt"] = request.prompt;
    }
    const std::string raw = post_json(chat ? "/chat/completions" : "/completions", body.dump());
    try {
        const auto j = nlohmann::json::parse(raw);
        const auto& choice = j.at("choices").at(0);
        Completion c;
        if (chat) {
            const auto& content = choice.at("message").at("content");
            c.text = content.is_null() ? "" : content.get<std::string>();
        } else {
            c.text = choice.at("text").get<std::string>();
        }
        if (j.contains("usage") && j["usage"].is_object())
            c.usage = TokenUsage{j["usage"].value("prompt_tokens", std::int64_t{0}),
                                 j["usage"].value("completion_tokens", std::int64_t{0})};
        return c;
    } catch (const nlohmann::json::exception& e) {
        throw EndpointError(endpoint_.describe() + ": malformed completion response: " + e.what(), false);
    }
}

std::vector<std::vector<double>> HttpBackend::embed(const std::vector<std::string>& texts) {
    if (endpoint_.embedding_model.empty())
        throw EndpointError(endpoint_.describe() + ": no embedding_model configured", false);
    nlohmann::json body = {{"model", endpoint_.embedding_model}, {"input", texts}};
    const std::string raw = post_json("/embeddings", body.dump());
    try {
        const auto j = nlohmann::json::parse(raw);
        std::vector<std::vector<double>> out(texts.size());
        const auto& data = j.at("data");
        for (std::size_t i = 0; i < data.size(); ++i) {
            const std::size_t index = data[i].value("index", i);
            if (index >= out.size()) throw EndpointError(endpoint_.describe() + ": embedding index out of range", false);
            out[index] = data[i].at("embedding").get<std::vector<double>>();
        }
        for (const auto& v : out)
            if (v.empty()) throw EndpointError(endpoint_.describe() + ": response is missing embeddings", false);
        return out;
    } catch (const nlohmann::json::exception& e) {
        throw EndpointError(endpoint_.describe() + ": malformed embedding response: " + e.what(), false);
    }
}

} // namespace priorpull
