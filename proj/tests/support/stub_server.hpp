#pragma once

#include <atomic>
#include <chrono>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <thread>

// Minimal OpenAI-compatible server on 127.0.0.1 for tests. Counts requests
// and the peak number of handlers running at once.
class StubServer {
public:
    // prompt -> completion text
    using Responder = std::function<std::string(const std::string& prompt)>;

    explicit StubServer(Responder responder);
    ~StubServer();
    StubServer(const StubServer&) = delete;
    StubServer& operator=(const StubServer&) = delete;

    std::string base_url() const;  // http://127.0.0.1:<port>/v1
    int port() const { return port_; }

    // Status codes returned (in order) before normal service resumes.
    void fail_next(std::deque<int> statuses);
    void require_token(std::string token);
    void set_delay(std::chrono::milliseconds delay) { delay_ = delay; }

    std::size_t calls() const { return calls_.load(); }
    std::size_t completion_calls() const { return completion_calls_.load(); }
    std::size_t embedding_calls() const { return embedding_calls_.load(); }
    std::size_t max_in_flight() const { return max_in_flight_.load(); }
    void reset_counters();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    Responder responder_;
    int port_ = 0;
    std::thread thread_;
    std::mutex mutex_;
    std::deque<int> failures_;
    std::string token_;
    std::chrono::milliseconds delay_{0};
    std::atomic<std::size_t> calls_{0};
    std::atomic<std::size_t> completion_calls_{0};
    std::atomic<std::size_t> embedding_calls_{0};
    std::atomic<std::size_t> in_flight_{0};
    std::atomic<std::size_t> max_in_flight_{0};
};

// Deterministic stand-in answer: a JSON object over `labels`, each true or
// false by a hash of the prompt.
std::string hashed_json_answer(const std::string& prompt, const std::vector<std::string>& labels);
