#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "halogen/errors.hpp"
#include "halogen/jsonl.hpp"
#include "halogen/llm_gateway.hpp"
#include "halogen/log.hpp"

namespace halogen {

/// Connection settings for one model role (generator, verifier, optimizer,
/// judge, candidate model under evaluation).
struct BackendConfig {
    std::string base_url;
    std::string model;
    std::string api_key_env = "OPENAI_API_KEY";
    int attempt_limit = 3;
    double backoff_initial_s = 1.0;
    int concurrency = 4;
    double timeout_s = 60.0;
    DecodingSettings decoding{1.0, 0.7};
};

enum class JudgeKind { ExactMatch, Llm };

/// The single pipeline configuration file (JSON). Relative paths resolve
/// against the config file's directory. Load fails fast: every referenced
/// input must exist before any stage runs.
struct PipelineConfig {
    std::filesystem::path config_dir;
    std::filesystem::path corpus;
    std::filesystem::path prompt_dir;
    std::filesystem::path rulebook_path;
    std::filesystem::path out_dir = "out";
    std::filesystem::path cache_dir;
    std::filesystem::path mock_script;
    GatewayMode mode = GatewayMode::Mock;
    std::uint64_t seed = 0;

    BackendConfig generator_backend;
    BackendConfig verifier_backend;
    BackendConfig optimizer_backend;
    BackendConfig judge_backend;
    BackendConfig candidate_backend;

    struct Generation {
        int k = 3;
        int max_questions_per_doc = 15;
        int workers = 1;
    } generation;

    struct Optimization {
        int train_docs = 60;
        int val_docs = 20;
        int max_iters = 5;
        int candidates = 4;
        bool stratify_by_topic = false;
    } optimization;

    struct Evaluation {
        bool strict_unparsable = true;
        JudgeKind judge = JudgeKind::ExactMatch;
    } evaluation;

    static PipelineConfig load(const std::filesystem::path& path);
};

namespace detail {

inline BackendConfig backend_from_json(const nlohmann::json& j, const BackendConfig& defaults) {
    BackendConfig b = defaults;
    b.base_url = j.value("base_url", b.base_url);
    b.model = j.value("model", b.model);
    b.api_key_env = j.value("api_key_env", b.api_key_env);
    b.attempt_limit = j.value("attempt_limit", b.attempt_limit);
    b.backoff_initial_s = j.value("backoff_initial_s", b.backoff_initial_s);
    b.concurrency = j.value("concurrency", b.concurrency);
    b.timeout_s = j.value("timeout_s", b.timeout_s);
    if (j.contains("decoding")) {
        const auto& d = j.at("decoding");
        b.decoding.temperature = d.value("temperature", b.decoding.temperature);
        b.decoding.top_p = d.value("top_p", b.decoding.top_p);
    }
    validate(b.decoding);
    return b;
}

} // namespace detail

inline PipelineConfig PipelineConfig::load(const std::filesystem::path& path) {
    nlohmann::json j = nlohmann::json::parse(jsonl::read_text(path), nullptr, false);
    if (j.is_discarded()) throw ConfigError("malformed config JSON: " + path.string());

    PipelineConfig cfg;
    cfg.config_dir = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
    auto resolve = [&](const std::string& p) -> std::filesystem::path {
        std::filesystem::path fp(p);
        return fp.is_absolute() ? fp : cfg.config_dir / fp;
    };

    try {
        cfg.corpus = resolve(j.at("corpus").get<std::string>());
        cfg.prompt_dir = resolve(j.at("prompt_dir").get<std::string>());
        cfg.rulebook_path = resolve(j.at("rulebook").get<std::string>());
        cfg.out_dir = resolve(j.value("out_dir", std::string("out")));
        if (j.contains("cache_dir")) cfg.cache_dir = resolve(j.at("cache_dir").get<std::string>());
        if (j.contains("mock_script")) cfg.mock_script = resolve(j.at("mock_script").get<std::string>());
        cfg.mode = parse_gateway_mode(j.value("mode", std::string("mock")));
        cfg.seed = j.value("seed", std::uint64_t{0});

        const nlohmann::json backends = j.value("backends", nlohmann::json::object());
        BackendConfig defaults;
        if (backends.contains("defaults")) {
            defaults = detail::backend_from_json(backends.at("defaults"), defaults);
        }
        cfg.generator_backend =
            detail::backend_from_json(backends.value("generator", nlohmann::json::object()), defaults);
        cfg.verifier_backend =
            detail::backend_from_json(backends.value("verifier", nlohmann::json::object()), defaults);
        cfg.optimizer_backend =
            detail::backend_from_json(backends.value("optimizer", nlohmann::json::object()), defaults);
        cfg.judge_backend =
            detail::backend_from_json(backends.value("judge", nlohmann::json::object()), defaults);
        cfg.candidate_backend =
            detail::backend_from_json(backends.value("candidate", nlohmann::json::object()), defaults);

        if (j.contains("generation")) {
            const auto& g = j.at("generation");
            cfg.generation.k = g.value("k", cfg.generation.k);
            cfg.generation.max_questions_per_doc =
                g.value("max_questions_per_doc", cfg.generation.max_questions_per_doc);
            cfg.generation.workers = g.value("workers", cfg.generation.workers);
        }
        if (j.contains("optimization")) {
            const auto& o = j.at("optimization");
            cfg.optimization.train_docs = o.value("train_docs", cfg.optimization.train_docs);
            cfg.optimization.val_docs = o.value("val_docs", cfg.optimization.val_docs);
            cfg.optimization.max_iters = o.value("max_iters", cfg.optimization.max_iters);
            cfg.optimization.candidates = o.value("candidates", cfg.optimization.candidates);
            cfg.optimization.stratify_by_topic =
                o.value("stratify_by_topic", cfg.optimization.stratify_by_topic);
        }
        if (j.contains("evaluation")) {
            const auto& e = j.at("evaluation");
            cfg.evaluation.strict_unparsable =
                e.value("strict_unparsable", cfg.evaluation.strict_unparsable);
            const std::string judge = e.value("judge", std::string("exact_match"));
            if (judge == "exact_match") {
                cfg.evaluation.judge = JudgeKind::ExactMatch;
            } else if (judge == "llm") {
                cfg.evaluation.judge = JudgeKind::Llm;
            } else {
                throw ConfigError("unknown judge kind \"" + judge + "\"");
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }

    // Fail fast on unresolvable inputs.
    namespace fs = std::filesystem;
    if (!fs::exists(cfg.corpus)) throw ConfigError("corpus not found: " + cfg.corpus.string());
    if (!fs::is_directory(cfg.prompt_dir)) {
        throw ConfigError("prompt directory not found: " + cfg.prompt_dir.string());
    }
    if (!fs::exists(cfg.rulebook_path)) {
        throw ConfigError("rulebook not found: " + cfg.rulebook_path.string());
    }
    if (cfg.mode == GatewayMode::Mock && !fs::exists(cfg.mock_script)) {
        throw ConfigError("mock mode requires a mock_script file");
    }
    if ((cfg.mode == GatewayMode::Record || cfg.mode == GatewayMode::Replay) && cfg.cache_dir.empty()) {
        throw ConfigError("record/replay mode requires cache_dir");
    }
    if (cfg.generation.k < 1) throw ConfigError("generation.k must be >= 1");
    return cfg;
}

} // namespace halogen
