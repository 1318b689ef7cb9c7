#include "stub_server.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "priorpull/hashing.hpp"

#include <stdexcept>

struct StubServer::Impl {
    httplib::Server server;
};

StubServer::StubServer(Responder responder) : impl_(std::make_unique<Impl>()), responder_(std::move(responder)) {
    auto handle = [this](const httplib::Request& req, httplib::Response& res, bool embeddings) {
        ++calls_;
        const auto now = ++in_flight_;
        auto peak = max_in_flight_.load();
        while (now > peak && !max_in_flight_.compare_exchange_weak(peak, now)) {
        }
        struct Leave {
            std::atomic<std::size_t>& n;
            ~Leave() { --n; }
        } leave{in_flight_};
        if (delay_.count() > 0) std::this_thread::sleep_for(delay_);

        {
            std::lock_guard lock(mutex_);
            if (!token_.empty() && req.get_header_value("Authorization") != "Bearer " + token_) {
                res.status = 401;
                res.set_content(R"({"error":{"message":"invalid api key"}})", "application/json");
                return;
            }
            if (!failures_.empty()) {
                res.status = failures_.front();
                failures_.pop_front();
                res.set_content(R"({"error":{"message":"injected failure"}})", "application/json");
                return;
            }
        }
        const auto body = nlohmann::json::parse(req.body);
        nlohmann::json out;
        if (embeddings) {
            ++embedding_calls_;
            out["data"] = nlohmann::json::array();
            std::size_t i = 0;
            for (const auto& text : body.at("input")) {
                std::vector<double> v(16, 0.0);
                v[0] = 0.1;
                const auto s = text.get<std::string>();
                for (std::size_t w = 0, start = 0; w <= s.size(); ++w)
                    if (w == s.size() || s[w] == ' ') {
                        if (w > start) v[1 + priorpull::stable_hash(s.substr(start, w - start)) % 15] += 1.0;
                        start = w + 1;
                    }
                out["data"].push_back({{"index", i++}, {"embedding", v}});
            }
        } else {
            ++completion_calls_;
            const bool chat = body.contains("messages");
            const std::string prompt =
                chat ? body["messages"][0]["content"].get<std::string>() : body["prompt"].get<std::string>();
            const std::string text = responder_(prompt);
            if (chat)
                out["choices"] = {{{"index", 0}, {"message", {{"role", "assistant"}, {"content", text}}}}};
            else
                out["choices"] = {{{"index", 0}, {"text", text}}};
            out["usage"] = {{"prompt_tokens", prompt.size() / 4}, {"completion_tokens", text.size() / 4}};
        }
        res.set_content(out.dump(), "application/json");
    };
    impl_->server.Post("/v1/chat/completions",
                       [handle](const httplib::Request& q, httplib::Response& r) { handle(q, r, false); });
    impl_->server.Post("/v1/completions", [handle](const httplib::Request& q, httplib::Response& r) { handle(q, r, false); });
    impl_->server.Post("/v1/embeddings", [handle](const httplib::Request& q, httplib::Response& r) { handle(q, r, true); });
    port_ = impl_->server.bind_to_any_port("127.0.0.1");
    if (port_ <= 0) throw std::runtime_error("stub server could not bind");
    thread_ = std::thread([this] { impl_->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
}

StubServer::~StubServer() {
    impl_->server.stop();
    if (thread_.joinable()) thread_.join();
}

std::string StubServer::base_url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1"; }

void StubServer::fail_next(std::deque<int> statuses) {
    std::lock_guard lock(mutex_);
    failures_ = std::move(statuses);
}

void StubServer::require_token(std::string token) {
    std::lock_guard lock(mutex_);
    token_ = std::move(token);
}

void StubServer::reset_counters() {
    calls_ = 0;
    completion_calls_ = 0;
    embedding_calls_ = 0;
    max_in_flight_ = 0;
}

std::string hashed_json_answer(const std::string& prompt, const std::vector<std::string>& labels) {
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    for (std::size_t i = 0; i < labels.size(); ++i) j[labels[i]] = priorpull::stable_hash(prompt, i) % 3 == 0;
    return j.dump();
}
