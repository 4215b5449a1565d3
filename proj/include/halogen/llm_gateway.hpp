#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <json.hpp>

#include "halogen/errors.hpp"
#include "halogen/hashing.hpp"
#include "halogen/jsonl.hpp"
#include "halogen/log.hpp"
#include "halogen/strings.hpp"

namespace halogen {

// ---------------------------------------------------------------------------
// Requests and responses
// ---------------------------------------------------------------------------

struct DecodingSettings {
    double temperature = 1.0;
    double top_p = 0.7;

    bool operator==(const DecodingSettings&) const = default;
};

inline void validate(const DecodingSettings& d) {
    if (d.temperature < 0.0) throw ValidationError("temperature must be >= 0");
    if (!(d.top_p > 0.0 && d.top_p <= 1.0)) throw ValidationError("top_p must be in (0, 1]");
}

struct CompletionRequest {
    std::string model;
    std::string system_text;
    std::string user_text;
    DecodingSettings decoding;
    std::string tag; // pipeline stage, for logging only; never part of the cache key
};

struct CompletionResponse {
    std::string text;
    std::string backend_id;
    bool cached = false;
};

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

class GatewayError : public Error {
public:
    using Error::Error;
};

/// Retryable failure (network error, 429, 5xx).
class TransientBackendError : public GatewayError {
public:
    using GatewayError::GatewayError;
};

/// Authentication or configuration problem; retrying cannot help.
class BackendConfigError : public GatewayError {
public:
    using GatewayError::GatewayError;
};

class RetriesExhaustedError : public GatewayError {
public:
    using GatewayError::GatewayError;
};

class ReplayMissError : public GatewayError {
public:
    ReplayMissError(std::string key, const std::string& tag)
        : GatewayError("replay miss: no recorded response for cache key " + key +
                       (tag.empty() ? "" : " (tag " + tag + ")")),
          key_(std::move(key)) {}
    const std::string& key() const { return key_; }

private:
    std::string key_;
};

// ---------------------------------------------------------------------------
// Backend interface
// ---------------------------------------------------------------------------

class Backend {
public:
    virtual ~Backend() = default;
    virtual CompletionResponse complete(const CompletionRequest& request) = 0;
    virtual std::string id() const = 0;
};

/// Test backend driven by a plain function.
class CallbackBackend : public Backend {
public:
    using Fn = std::function<std::string(const CompletionRequest&)>;
    explicit CallbackBackend(Fn fn, std::string id = "callback")
        : fn_(std::move(fn)), id_(std::move(id)) {}

    CompletionResponse complete(const CompletionRequest& request) override {
        return {fn_(request), id_, false};
    }
    std::string id() const override { return id_; }

private:
    Fn fn_;
    std::string id_;
};

// ---------------------------------------------------------------------------
// Scripted mock backend
// ---------------------------------------------------------------------------

/// One scripted response rule. All present conditions must hold; rules are
/// evaluated in declaration order and the first match wins.
struct MockRule {
    std::optional<std::string> tag;          // exact match on request tag
    std::optional<std::string> user_equals;  // exact match on user_text
    std::vector<std::string> user_contains;  // every entry must be a substring
    std::vector<std::string> system_contains;
    std::string response;

    bool matches(const CompletionRequest& req) const {
        if (tag && *tag != req.tag) return false;
        if (user_equals && *user_equals != req.user_text) return false;
        for (const std::string& s : user_contains) {
            if (!strings::contains(req.user_text, s)) return false;
        }
        for (const std::string& s : system_contains) {
            if (!strings::contains(req.system_text, s)) return false;
        }
        return true;
    }
};

/// Offline backend scripted by ordered match rules, loadable from a JSON
/// file. Unmatched requests fail loudly so fixtures cannot drift silently.
class MockBackend : public Backend {
public:
    MockBackend() = default;

    void add_rule(MockRule rule) { rules_.push_back(std::move(rule)); }
    void set_default_response(std::string text) { default_response_ = std::move(text); }

    CompletionResponse complete(const CompletionRequest& request) override {
        for (const MockRule& rule : rules_) {
            if (rule.matches(request)) return {rule.response, id(), false};
        }
        if (default_response_) return {*default_response_, id(), false};
        throw GatewayError("mock backend has no rule matching request (tag=" + request.tag +
                           ", user_text starts \"" + request.user_text.substr(0, 60) + "\")");
    }

    std::string id() const override { return "mock"; }

    static MockBackend from_json(const nlohmann::json& j) {
        MockBackend mock;
        auto string_or_list = [](const nlohmann::json& v) {
            std::vector<std::string> out;
            if (v.is_string()) {
                out.push_back(v.get<std::string>());
            } else if (v.is_array()) {
                for (const auto& e : v) out.push_back(e.get<std::string>());
            } else {
                throw ParseError("mock rule matcher must be a string or array of strings");
            }
            return out;
        };
        for (const auto& r : j.value("rules", nlohmann::json::array())) {
            MockRule rule;
            if (r.contains("tag")) rule.tag = r.at("tag").get<std::string>();
            if (r.contains("user_equals")) rule.user_equals = r.at("user_equals").get<std::string>();
            if (r.contains("user_contains")) rule.user_contains = string_or_list(r.at("user_contains"));
            if (r.contains("system_contains"))
                rule.system_contains = string_or_list(r.at("system_contains"));
            rule.response = r.at("response").get<std::string>();
            mock.add_rule(std::move(rule));
        }
        if (j.contains("default_response")) {
            mock.set_default_response(j.at("default_response").get<std::string>());
        }
        return mock;
    }

    static MockBackend from_file(const std::filesystem::path& path) {
        nlohmann::json j = nlohmann::json::parse(jsonl::read_text(path), nullptr, false);
        if (j.is_discarded()) throw ParseError("malformed mock script JSON: " + path.string());
        try {
            return from_json(j);
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(path.string() + ": " + e.what());
        }
    }

private:
    std::vector<MockRule> rules_;
    std::optional<std::string> default_response_;
};

// ---------------------------------------------------------------------------
// Gateway
// ---------------------------------------------------------------------------

enum class GatewayMode { Live, Record, Replay, Mock };

inline std::string_view mode_name(GatewayMode m) {
    switch (m) {
        case GatewayMode::Live: return "live";
        case GatewayMode::Record: return "record";
        case GatewayMode::Replay: return "replay";
        case GatewayMode::Mock: return "mock";
    }
    return "mock";
}

inline GatewayMode parse_gateway_mode(std::string_view text) {
    const std::string key = strings::lower_ascii(strings::trim(text));
    if (key == "live") return GatewayMode::Live;
    if (key == "record") return GatewayMode::Record;
    if (key == "replay") return GatewayMode::Replay;
    if (key == "mock") return GatewayMode::Mock;
    throw ParseError("unknown gateway mode: \"" + std::string(text) + "\"");
}

struct GatewayOptions {
    GatewayMode mode = GatewayMode::Mock;
    int attempt_limit = 3;
    double backoff_initial_s = 1.0; // doubles per retry: 1s, 2s, 4s
    int concurrency_limit = 4;
    std::filesystem::path cache_dir; // required for record/replay
};

namespace detail {
inline std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}
} // namespace detail

/// Single entry point for every model call in the pipeline. Adds bounded
/// retries with exponential backoff, a content-addressed record/replay
/// cache, and an in-flight concurrency cap. Replay mode never touches the
/// network: an unseen request is an error, not a fallthrough.
class LlmGateway {
public:
    LlmGateway(GatewayOptions options, std::shared_ptr<Backend> backend)
        : options_(std::move(options)), backend_(std::move(backend)) {
        if (options_.attempt_limit < 1) throw ConfigError("attempt limit must be >= 1");
        if (options_.concurrency_limit < 1) throw ConfigError("concurrency limit must be >= 1");
        slots_ = std::make_unique<Slots>(options_.concurrency_limit);
        const bool needs_cache =
            options_.mode == GatewayMode::Record || options_.mode == GatewayMode::Replay;
        if (needs_cache && options_.cache_dir.empty()) {
            throw ConfigError("record/replay mode requires a cache directory");
        }
        const bool needs_backend = options_.mode != GatewayMode::Replay;
        if (needs_backend && !backend_) {
            throw ConfigError("gateway mode \"" + std::string(mode_name(options_.mode)) +
                              "\" requires a backend");
        }
        if (needs_cache) std::filesystem::create_directories(options_.cache_dir);
    }

    /// Deterministic digest over (model, system_text, user_text, decoding).
    /// The tag is excluded by contract so logging labels never split the cache.
    static std::string cache_key(const CompletionRequest& request) {
        nlohmann::json j = {{"model", request.model},
                            {"system", request.system_text},
                            {"user", request.user_text},
                            {"temperature", detail::format_double(request.decoding.temperature)},
                            {"top_p", detail::format_double(request.decoding.top_p)}};
        return hashing::digest128_hex(j.dump());
    }

    CompletionResponse complete(const CompletionRequest& request) {
        if (request.user_text.empty()) throw ValidationError("completion request user_text is empty");
        validate(request.decoding);

        switch (options_.mode) {
            case GatewayMode::Replay: {
                const std::string key = cache_key(request);
                if (auto hit = read_cache(key)) return *hit;
                throw ReplayMissError(key, request.tag);
            }
            case GatewayMode::Record: {
                const std::string key = cache_key(request);
                if (auto hit = read_cache(key)) return *hit; // resumed runs reuse earlier recordings
                CompletionResponse response = call_with_retries(request);
                write_cache(key, request, response);
                return response;
            }
            case GatewayMode::Mock:
            case GatewayMode::Live:
                return call_with_retries(request);
        }
        throw ConfigError("unreachable gateway mode");
    }

    GatewayMode mode() const { return options_.mode; }

private:
    // Minimal counting semaphore; <semaphore> needs a compile-time max.
    class Slots {
    public:
        explicit Slots(int count) : available_(count) {}
        void acquire() {
            std::unique_lock lock(mu_);
            cv_.wait(lock, [&] { return available_ > 0; });
            --available_;
        }
        void release() {
            {
                std::lock_guard lock(mu_);
                ++available_;
            }
            cv_.notify_one();
        }

    private:
        std::mutex mu_;
        std::condition_variable cv_;
        int available_;
    };

    struct SlotGuard {
        explicit SlotGuard(Slots& s) : slots(s) { slots.acquire(); }
        ~SlotGuard() { slots.release(); }
        Slots& slots;
    };

    CompletionResponse call_with_retries(const CompletionRequest& request) {
        std::string last_error;
        for (int attempt = 1; attempt <= options_.attempt_limit; ++attempt) {
            try {
                SlotGuard guard(*slots_);
                return backend_->complete(request);
            } catch (const TransientBackendError& e) {
                last_error = e.what();
                log_warn("gateway", "transient_error",
                         {{"tag", request.tag}, {"attempt", attempt}, {"error", last_error}});
                if (attempt < options_.attempt_limit) {
                    const double delay = options_.backoff_initial_s * static_cast<double>(1 << (attempt - 1));
                    std::this_thread::sleep_for(std::chrono::duration<double>(delay));
                }
            }
        }
        throw RetriesExhaustedError("backend failed after " + std::to_string(options_.attempt_limit) +
                                    " attempts: " + last_error);
    }

    std::filesystem::path cache_path(const std::string& key) const {
        return options_.cache_dir / (key + ".json");
    }

    std::optional<CompletionResponse> read_cache(const std::string& key) const {
        const std::filesystem::path path = cache_path(key);
        if (!std::filesystem::exists(path)) return std::nullopt;
        nlohmann::json j = nlohmann::json::parse(jsonl::read_text(path), nullptr, false);
        if (j.is_discarded()) throw ParseError("malformed cache entry: " + path.string());
        CompletionResponse response;
        response.text = j.at("text").get<std::string>();
        response.backend_id = j.value("backend_id", std::string("recorded"));
        response.cached = true;
        return response;
    }

    void write_cache(const std::string& key, const CompletionRequest& request,
                     const CompletionResponse& response) const {
        // The request is echoed so recordings can be audited by hand.
        nlohmann::json j = {{"key", key},
                            {"model", request.model},
                            {"system_text", request.system_text},
                            {"user_text", request.user_text},
                            {"temperature", request.decoding.temperature},
                            {"top_p", request.decoding.top_p},
                            {"text", response.text},
                            {"backend_id", response.backend_id}};
        jsonl::write_text_atomic(cache_path(key), j.dump(2) + "\n");
    }

    GatewayOptions options_;
    std::shared_ptr<Backend> backend_;
    std::unique_ptr<Slots> slots_; // behind a pointer so gateways stay movable
};

} // namespace halogen
