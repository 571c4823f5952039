#pragma once

// Completion backend contract plus the chat-completions wire format. Two
// implementations ship: a deterministic mock (mock_backend.hpp) and an HTTP
// client (http_backend.hpp).

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "nlohmann/json.hpp"

namespace promptlab {

struct CompletionRequest {
    std::string model;
    std::string system;  // empty system is legal and omitted from the wire
    std::string user;
    double temperature = 1.0;
    int n_draws = 1;
    /// Logical index of the first draw in this request. Not part of the wire
    /// format; deterministic backends fold it into per-draw randomness so a
    /// resumed cell reproduces exactly the draws an uninterrupted run makes.
    int draw_offset = 0;

    void validate() const {
        if (model.empty()) throw std::invalid_argument("CompletionRequest: empty model");
        if (user.empty()) throw std::invalid_argument("CompletionRequest: empty user message");
        if (n_draws < 1) throw std::invalid_argument("CompletionRequest: n_draws must be >= 1");
        if (draw_offset < 0) throw std::invalid_argument("CompletionRequest: negative draw_offset");
        if (!(temperature >= 0.0) || temperature > 2.0)
            throw std::invalid_argument("CompletionRequest: temperature must be in [0, 2]");
    }
};

struct CompletionResponse {
    std::vector<std::string> texts;                // one per draw
    std::map<std::string, std::string> meta;       // retries, latency_ms, ...
};

// ---- errors ----

class BackendError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// 401/403 or missing credentials; never retried.
class AuthError : public BackendError {
public:
    using BackendError::BackendError;
};

/// Retryable failures (429/5xx/transport) that survived the whole retry
/// budget.
class RetriesExhausted : public BackendError {
public:
    RetriesExhausted(const std::string& what, int attempts)
        : BackendError(what), attempts_(attempts) {}
    int attempts() const { return attempts_; }

private:
    int attempts_ = 0;
};

/// Response arrived but does not match the expected wire shape.
class MalformedResponse : public BackendError {
public:
    using BackendError::BackendError;
};

class Backend {
public:
    virtual ~Backend() = default;
    virtual CompletionResponse complete(const CompletionRequest& request) = 0;
    virtual std::string name() const = 0;
    /// True when identical requests always produce identical responses; the
    /// runner zeroes timestamps for such backends so stores are byte-stable.
    virtual bool deterministic() const { return false; }
};

// ---- chat-completions wire format ----

inline nlohmann::ordered_json to_chat_body(const CompletionRequest& request) {
    request.validate();
    nlohmann::ordered_json body;
    body["model"] = request.model;
    auto messages = nlohmann::ordered_json::array();
    if (!request.system.empty())
        messages.push_back({{"role", "system"}, {"content", request.system}});
    messages.push_back({{"role", "user"}, {"content", request.user}});
    body["messages"] = messages;
    body["temperature"] = request.temperature;
    body["n"] = request.n_draws;
    return body;
}

/// Inverse of to_chat_body over the wire fields (draw_offset is not wire
/// state). Throws MalformedResponse on shape violations.
inline CompletionRequest request_from_chat_body(const nlohmann::json& body) {
    CompletionRequest req;
    try {
        req.model = body.at("model").get<std::string>();
        req.temperature = body.at("temperature").get<double>();
        req.n_draws = body.at("n").get<int>();
        const auto& messages = body.at("messages");
        if (!messages.is_array() || messages.empty())
            throw MalformedResponse("chat body: messages must be a non-empty array");
        for (const auto& m : messages) {
            const std::string role = m.at("role").get<std::string>();
            const std::string content = m.at("content").get<std::string>();
            if (role == "system") {
                if (!req.system.empty()) throw MalformedResponse("chat body: repeated system message");
                req.system = content;
            } else if (role == "user") {
                if (!req.user.empty()) throw MalformedResponse("chat body: repeated user message");
                req.user = content;
            } else {
                throw MalformedResponse("chat body: unexpected role '" + role + "'");
            }
        }
    } catch (const nlohmann::json::exception& ex) {
        throw MalformedResponse(std::string("chat body: ") + ex.what());
    }
    req.validate();
    return req;
}

/// Extract draw texts from a chat-completions response body.
inline std::vector<std::string> texts_from_chat_response(const nlohmann::json& body) {
    std::vector<std::string> texts;
    try {
        const auto& choices = body.at("choices");
        if (!choices.is_array() || choices.empty())
            throw MalformedResponse("chat response: choices must be a non-empty array");
        for (const auto& c : choices)
            texts.push_back(c.at("message").at("content").get<std::string>());
    } catch (const nlohmann::json::exception& ex) {
        throw MalformedResponse(std::string("chat response: ") + ex.what());
    }
    return texts;
}

inline nlohmann::ordered_json chat_response_body(const std::string& model,
                                                 const std::vector<std::string>& texts) {
    nlohmann::ordered_json body;
    body["model"] = model;
    auto choices = nlohmann::ordered_json::array();
    for (size_t i = 0; i < texts.size(); ++i)
        choices.push_back({{"index", i}, {"message", {{"role", "assistant"}, {"content", texts[i]}}}});
    body["choices"] = choices;
    return body;
}

}  // namespace promptlab
