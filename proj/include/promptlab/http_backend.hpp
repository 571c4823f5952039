#pragma once

// Chat-completions backend over HTTP with bounded concurrency and capped
// exponential backoff on retryable failures.

#include <chrono>
#include <condition_variable>
#include <cstdlib>
#include <mutex>
#include <string>
#include <thread>
#include <utility>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "promptlab/backends.hpp"

namespace promptlab {

struct HttpBackendConfig {
    std::string base_url = "https://api.openai.com";
    std::string api_key;  // empty: read from PROMPTLAB_API_KEY at construction
    int max_retries = 5;  // retries after the first attempt
    int initial_backoff_ms = 1000;
    double backoff_factor = 2.0;
    int max_backoff_ms = 60000;
    int max_in_flight = 4;
    int timeout_seconds = 120;
};

namespace detail {

class Semaphore {
public:
    explicit Semaphore(int slots) : slots_(slots > 0 ? slots : 1) {}
    void acquire() {
        std::unique_lock<std::mutex> lock(mu_);
        cv_.wait(lock, [this] { return slots_ > 0; });
        --slots_;
    }
    void release() {
        {
            std::lock_guard<std::mutex> lock(mu_);
            ++slots_;
        }
        cv_.notify_one();
    }

private:
    std::mutex mu_;
    std::condition_variable cv_;
    int slots_;
};

class SemaphoreGuard {
public:
    explicit SemaphoreGuard(Semaphore& s) : sem_(s) { sem_.acquire(); }
    ~SemaphoreGuard() { sem_.release(); }
    SemaphoreGuard(const SemaphoreGuard&) = delete;
    SemaphoreGuard& operator=(const SemaphoreGuard&) = delete;

private:
    Semaphore& sem_;
};

/// Exponential backoff: initial * factor^attempt, capped.
inline int backoff_schedule(const HttpBackendConfig& config, int attempt) {
    double ms = static_cast<double>(config.initial_backoff_ms);
    for (int i = 0; i < attempt; ++i) ms *= config.backoff_factor;
    if (ms > config.max_backoff_ms) ms = static_cast<double>(config.max_backoff_ms);
    return static_cast<int>(ms);
}

}  // namespace detail

class HttpBackend : public Backend {
public:
    explicit HttpBackend(HttpBackendConfig config = {})
        : config_(std::move(config)), gate_(config_.max_in_flight) {
        if (config_.api_key.empty()) {
            if (const char* env = std::getenv("PROMPTLAB_API_KEY")) config_.api_key = env;
        }
    }

    std::string name() const override { return "http"; }
    const HttpBackendConfig& config() const { return config_; }

    CompletionResponse complete(const CompletionRequest& request) override {
        request.validate();
        detail::SemaphoreGuard slot(gate_);

        const std::string body = to_chat_body(request).dump();
        httplib::Headers headers;
        if (!config_.api_key.empty())
            headers.emplace("Authorization", "Bearer " + config_.api_key);

        std::string last_failure;
        for (int attempt = 0;; ++attempt) {
            httplib::Client client(config_.base_url);
            client.set_connection_timeout(config_.timeout_seconds, 0);
            client.set_read_timeout(config_.timeout_seconds, 0);
            client.set_write_timeout(config_.timeout_seconds, 0);

            auto res = client.Post("/v1/chat/completions", headers, body, "application/json");
            if (res) {
                if (res->status == 200) {
                    nlohmann::json parsed =
                        nlohmann::json::parse(res->body, nullptr, /*allow_exceptions=*/false);
                    if (parsed.is_discarded())
                        throw MalformedResponse("chat response: body is not valid JSON");
                    CompletionResponse out;
                    out.texts = texts_from_chat_response(parsed);
                    if (static_cast<int>(out.texts.size()) != request.n_draws)
                        throw MalformedResponse(
                            "chat response: " + std::to_string(out.texts.size()) +
                            " choices for a request of " + std::to_string(request.n_draws));
                    out.meta["retries"] = std::to_string(attempt);
                    out.meta["status"] = "200";
                    return out;
                }
                if (res->status == 401 || res->status == 403)
                    throw AuthError("authentication rejected (HTTP " +
                                    std::to_string(res->status) + ")");
                const bool retryable = res->status == 429 || res->status >= 500;
                if (!retryable)
                    throw BackendError("HTTP " + std::to_string(res->status) + ": " +
                                       res->body.substr(0, 200));
                last_failure = "HTTP " + std::to_string(res->status);
            } else {
                last_failure = std::string("transport error: ") + httplib::to_string(res.error());
            }

            if (attempt >= config_.max_retries)
                throw RetriesExhausted(last_failure + " after " + std::to_string(attempt + 1) +
                                           " attempts to " + config_.base_url,
                                       attempt + 1);
            std::this_thread::sleep_for(
                std::chrono::milliseconds(detail::backoff_schedule(config_, attempt)));
        }
    }

private:
    HttpBackendConfig config_;
    detail::Semaphore gate_;
};

}  // namespace promptlab
