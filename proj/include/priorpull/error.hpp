#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace priorpull {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Dataset file could not be read or violates its format.
class DatasetError : public Error {
public:
    using Error::Error;
};

// Two prediction maps do not share ids or taxonomy.
class AlignmentError : public Error {
public:
    using Error::Error;
};

class SamplingError : public Error {
public:
    using Error::Error;
};

class TemplateError : public Error {
public:
    using Error::Error;
};

// Endpoint failures. `retryable()` distinguishes transient faults.
class EndpointError : public Error {
public:
    EndpointError(const std::string& what, bool retryable) : Error(what), retryable_(retryable) {}
    bool retryable() const noexcept { return retryable_; }

private:
    bool retryable_;
};

class AuthenticationError : public EndpointError {
public:
    explicit AuthenticationError(const std::string& what) : EndpointError(what, false) {}
};

// Raised when a network call would be needed while running offline.
class OfflineError : public Error {
public:
    using Error::Error;
};

class AnalysisError : public Error {
public:
    using Error::Error;
};

// Collects every validation problem instead of stopping at the first.
class ConfigError : public Error {
public:
    explicit ConfigError(std::vector<std::string> problems)
        : Error(join(problems)), problems_(std::move(problems)) {}

    const std::vector<std::string>& problems() const noexcept { return problems_; }

private:
    static std::string join(const std::vector<std::string>& problems) {
        std::string out = "invalid configuration:";
        for (const auto& p : problems) {
            out += "\n  - ";
            out += p;
        }
        return out;
    }

    std::vector<std::string> problems_;
};

} // namespace priorpull
