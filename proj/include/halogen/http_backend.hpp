#pragma once

// Kept separate from llm_gateway.hpp so test binaries that only need the
// mock/replay paths do not pay the httplib compile cost.

#include <cstdlib>
#include <string>

#include <httplib.h>
#include <json.hpp>

#include "halogen/llm_gateway.hpp"

namespace halogen {

struct HttpBackendOptions {
    std::string base_url;                     // e.g. "https://api.example.com/v1"
    std::string api_key;                      // if empty, resolved from api_key_env
    std::string api_key_env = "OPENAI_API_KEY";
    double timeout_s = 60.0;                  // per-attempt wall clock bound
};

/// Chat-completion backend speaking the common OpenAI-style wire format:
/// POST {base_url}/chat/completions with a JSON body carrying the messages
/// and decoding settings, bearer-token auth from the environment.
class HttpChatBackend : public Backend {
public:
    explicit HttpChatBackend(HttpBackendOptions options) : options_(std::move(options)) {
        if (options_.base_url.empty()) throw BackendConfigError("backend base_url is empty");
        if (options_.api_key.empty()) {
            const char* env = std::getenv(options_.api_key_env.c_str());
            if (env == nullptr || *env == '\0') {
                throw BackendConfigError("API key not found in environment variable " +
                                         options_.api_key_env);
            }
            options_.api_key = env;
        }
        split_url(options_.base_url, origin_, path_prefix_);
    }

    CompletionResponse complete(const CompletionRequest& request) override {
        nlohmann::json messages = nlohmann::json::array();
        if (!request.system_text.empty()) {
            messages.push_back({{"role", "system"}, {"content", request.system_text}});
        }
        messages.push_back({{"role", "user"}, {"content", request.user_text}});
        nlohmann::json body = {{"model", request.model},
                               {"messages", messages},
                               {"temperature", request.decoding.temperature},
                               {"top_p", request.decoding.top_p}};

        httplib::Client client(origin_);
        client.set_connection_timeout(std::chrono::duration<double>(options_.timeout_s));
        client.set_read_timeout(std::chrono::duration<double>(options_.timeout_s));
        client.set_write_timeout(std::chrono::duration<double>(options_.timeout_s));
        client.set_bearer_token_auth(options_.api_key);

        auto res = client.Post(path_prefix_ + "/chat/completions", body.dump(), "application/json");
        if (!res) {
            throw TransientBackendError("http error: " + httplib::to_string(res.error()));
        }
        if (res->status == 401 || res->status == 403) {
            throw BackendConfigError("backend rejected credentials (HTTP " +
                                     std::to_string(res->status) + ")");
        }
        if (res->status == 408 || res->status == 429 || res->status >= 500) {
            throw TransientBackendError("backend returned HTTP " + std::to_string(res->status));
        }
        if (res->status != 200) {
            throw GatewayError("backend returned HTTP " + std::to_string(res->status) + ": " +
                               res->body.substr(0, 200));
        }
        nlohmann::json j = nlohmann::json::parse(res->body, nullptr, false);
        if (j.is_discarded() || !j.contains("choices") || j["choices"].empty()) {
            throw GatewayError("malformed chat-completion response body");
        }
        CompletionResponse response;
        response.text = j["choices"][0].at("message").at("content").get<std::string>();
        response.backend_id = id();
        return response;
    }

    std::string id() const override { return "http:" + origin_; }

    double timeout_s() const { return options_.timeout_s; }

    /// Splits "https://host:port/v1" into origin and path prefix.
    static void split_url(const std::string& url, std::string& origin, std::string& path_prefix) {
        const std::size_t scheme = url.find("://");
        if (scheme == std::string::npos) throw BackendConfigError("base_url must include a scheme");
        const std::size_t slash = url.find('/', scheme + 3);
        if (slash == std::string::npos) {
            origin = url;
            path_prefix.clear();
        } else {
            origin = url.substr(0, slash);
            path_prefix = url.substr(slash);
            while (!path_prefix.empty() && path_prefix.back() == '/') path_prefix.pop_back();
        }
    }

private:
    HttpBackendOptions options_;
    std::string origin_;
    std::string path_prefix_;
};

} // namespace halogen
