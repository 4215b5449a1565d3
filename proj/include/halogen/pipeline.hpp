#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "halogen/agreement.hpp"
#include "halogen/aggregator.hpp"
#include "halogen/config.hpp"
#include "halogen/corpus.hpp"
#include "halogen/evaluator.hpp"
#include "halogen/generator.hpp"
#include "halogen/http_backend.hpp"
#include "halogen/llm_gateway.hpp"
#include "halogen/optimizer.hpp"
#include "halogen/prompt_kit.hpp"
#include "halogen/verifier.hpp"

namespace halogen {

// ---------------------------------------------------------------------------
// Stage wiring
// ---------------------------------------------------------------------------

/// Shared per-run context: one mock backend instance serves every role so a
/// single script file can drive the whole pipeline.
class PipelineContext {
public:
    explicit PipelineContext(PipelineConfig cfg) : cfg_(std::move(cfg)) {
        if (cfg_.mode == GatewayMode::Mock) {
            mock_ = std::make_shared<MockBackend>(MockBackend::from_file(cfg_.mock_script));
        }
        std::filesystem::create_directories(cfg_.out_dir);
    }

    const PipelineConfig& cfg() const { return cfg_; }

    LlmGateway make_gateway(const BackendConfig& backend) const {
        GatewayOptions options;
        options.mode = cfg_.mode;
        options.attempt_limit = backend.attempt_limit;
        options.backoff_initial_s = backend.backoff_initial_s;
        options.concurrency_limit = backend.concurrency;
        options.cache_dir = cfg_.cache_dir;
        std::shared_ptr<Backend> impl;
        switch (cfg_.mode) {
            case GatewayMode::Mock:
                impl = mock_;
                break;
            case GatewayMode::Replay:
                break; // replay is served entirely from the cache
            case GatewayMode::Record:
            case GatewayMode::Live: {
                HttpBackendOptions http;
                http.base_url = backend.base_url;
                http.api_key_env = backend.api_key_env;
                http.timeout_s = backend.timeout_s;
                impl = std::make_shared<HttpChatBackend>(std::move(http));
                break;
            }
        }
        return LlmGateway(options, std::move(impl));
    }

    // Artifact paths, all under out_dir.
    std::filesystem::path documents_path() const { return cfg_.out_dir / "documents.jsonl"; }
    std::filesystem::path meta_path() const { return cfg_.out_dir / "meta_records.jsonl"; }
    std::filesystem::path verified_path() const { return cfg_.out_dir / "verified.jsonl"; }
    std::filesystem::path rejected_path() const { return cfg_.out_dir / "rejected.jsonl"; }
    std::filesystem::path unverified_path() const { return cfg_.out_dir / "unverified.jsonl"; }
    std::filesystem::path feedback_path() const { return cfg_.out_dir / "feedback.jsonl"; }
    std::filesystem::path trace_path() const { return cfg_.out_dir / "optimization_trace.json"; }
    std::filesystem::path optimized_prompt_dir() const { return cfg_.out_dir / "prompts"; }
    std::filesystem::path responses_path() const { return cfg_.out_dir / "responses.jsonl"; }
    std::filesystem::path report_json_path() const { return cfg_.out_dir / "report.json"; }
    std::filesystem::path report_md_path() const { return cfg_.out_dir / "report.md"; }

    /// Prompts for generation: the optimized set when the optimize stage has
    /// run, otherwise the configured initial prompts.
    StagePrompts load_prompts() const {
        namespace fs = std::filesystem;
        if (fs::is_directory(optimized_prompt_dir())) {
            return load_stage_prompts(optimized_prompt_dir());
        }
        return load_stage_prompts(cfg_.prompt_dir);
    }

    GeneratorOptions generator_options() const {
        GeneratorOptions opts;
        opts.model = cfg_.generator_backend.model;
        opts.decoding = cfg_.generator_backend.decoding;
        opts.k = cfg_.generation.k;
        opts.max_questions_per_doc = cfg_.generation.max_questions_per_doc;
        opts.workers = cfg_.generation.workers;
        return opts;
    }

    VerifierOptions verifier_options() const {
        VerifierOptions opts;
        opts.model = cfg_.verifier_backend.model;
        opts.decoding = cfg_.verifier_backend.decoding;
        opts.workers = cfg_.generation.workers;
        return opts;
    }

private:
    PipelineConfig cfg_;
    std::shared_ptr<MockBackend> mock_;
};

// ---------------------------------------------------------------------------
// Stages
// ---------------------------------------------------------------------------

/// Validates the corpus and writes the canonical copy under out_dir.
inline std::size_t run_ingest(const PipelineContext& ctx) {
    std::vector<KnowledgeDocument> docs = load_corpus(ctx.cfg().corpus);
    write_corpus(ctx.documents_path(), docs);
    log_info("ingest", "done", {{"documents", docs.size()}});
    return docs.size();
}

inline OptimizationTrace run_optimize(const PipelineContext& ctx) {
    const PipelineConfig& cfg = ctx.cfg();
    std::vector<KnowledgeDocument> docs = load_corpus(cfg.corpus);
    CorpusSplit split = split_corpus(docs, static_cast<std::size_t>(cfg.optimization.train_docs),
                                     static_cast<std::size_t>(cfg.optimization.val_docs), cfg.seed,
                                     cfg.optimization.stratify_by_topic);
    std::vector<KnowledgeDocument> train = select_documents(docs, split.train_ids);
    std::vector<KnowledgeDocument> val = select_documents(docs, split.validation_ids);

    LlmGateway gen_gateway = ctx.make_gateway(cfg.generator_backend);
    LlmGateway verify_gateway = ctx.make_gateway(cfg.verifier_backend);
    LlmGateway proposer_gateway = ctx.make_gateway(cfg.optimizer_backend);
    Verifier verifier(verify_gateway, load_rulebook(cfg.rulebook_path), ctx.verifier_options());
    ProposerOptions proposer{cfg.optimizer_backend.model, cfg.optimizer_backend.decoding};

    OptimizerHooks hooks =
        make_pipeline_hooks(std::move(train), std::move(val), gen_gateway, ctx.generator_options(),
                            verifier, proposer_gateway, proposer, cfg.generation.workers);
    OptimizerOptions options;
    options.max_iters = cfg.optimization.max_iters;
    options.n_candidates = cfg.optimization.candidates;
    options.workers = cfg.generation.workers;

    StagePrompts init = load_stage_prompts(cfg.prompt_dir);
    StagePrompts selected = init;
    OptimizationTrace trace = optimize(init, hooks, options, &selected);

    jsonl::write_text_atomic(ctx.trace_path(), to_json(trace).dump(2) + "\n");
    for (PromptStage stage : kAllPromptStages) {
        store_template(ctx.optimized_prompt_dir(), init.by_stage(stage));
        if (selected.by_stage(stage).version != init.by_stage(stage).version) {
            store_template(ctx.optimized_prompt_dir(), selected.by_stage(stage));
        }
    }
    log_info("optimize", "done",
             {{"selected_version", trace.selected_version},
              {"stop_reason", std::string(stop_reason_name(trace.stop_reason))}});
    return trace;
}

inline std::vector<MetaRecord> run_generate(const PipelineContext& ctx) {
    const PipelineConfig& cfg = ctx.cfg();
    std::vector<KnowledgeDocument> docs = load_corpus(cfg.corpus);
    StagePrompts prompts = ctx.load_prompts();
    LlmGateway gateway = ctx.make_gateway(cfg.generator_backend);
    std::vector<MetaRecord> records =
        run_generation(docs, prompts, gateway, ctx.generator_options());
    write_meta_records(ctx.meta_path(), records);
    log_info("generate", "done", {{"records", records.size()}});
    return records;
}

inline VerificationBatch run_verify(const PipelineContext& ctx, bool collect_feedback = true) {
    const PipelineConfig& cfg = ctx.cfg();
    std::vector<MetaRecord> records = load_meta_records(ctx.meta_path());
    LlmGateway gateway = ctx.make_gateway(cfg.verifier_backend);
    Verifier verifier(gateway, load_rulebook(cfg.rulebook_path), ctx.verifier_options());
    VerificationBatch batch =
        verify_records(records, verifier, collect_feedback, cfg.generation.workers);

    write_meta_records(ctx.verified_path(), batch.verified);
    write_meta_records(ctx.rejected_path(), batch.rejected);
    write_feedback(ctx.feedback_path(), batch.feedback);
    if (!batch.unverified.empty()) {
        write_meta_records(ctx.unverified_path(), batch.unverified);
        log_warn("verify", "records_left_unverified", {{"count", batch.unverified.size()}});
    }
    log_info("verify", "done",
             {{"verified", batch.verified.size()}, {"rejected", batch.rejected.size()}});
    return batch;
}

inline BenchmarkStats run_aggregate(const PipelineContext& ctx) {
    std::vector<MetaRecord> verified = load_meta_records(ctx.verified_path());
    Benchmark bench = aggregate(verified, ctx.cfg().seed);
    write_benchmark(ctx.cfg().out_dir, bench);
    BenchmarkStats stats = bench.stats();
    log_info("aggregate", "done", {{"total", stats.total()}});
    return stats;
}

inline EvalReport run_evaluate(const PipelineContext& ctx) {
    const PipelineConfig& cfg = ctx.cfg();
    Benchmark bench = load_benchmark(cfg.out_dir);
    LlmGateway candidate_gateway = ctx.make_gateway(cfg.candidate_backend);
    ResponseLog log = run_model(bench, candidate_gateway, cfg.candidate_backend.model,
                                cfg.candidate_backend.decoding, cfg.generation.workers);
    write_response_log(ctx.responses_path(), log);

    std::unique_ptr<GenerativeJudge> judge;
    std::optional<LlmGateway> judge_gateway;
    if (cfg.evaluation.judge == JudgeKind::Llm) {
        judge_gateway.emplace(ctx.make_gateway(cfg.judge_backend));
        judge = std::make_unique<LlmJudge>(*judge_gateway, cfg.judge_backend.model,
                                           cfg.judge_backend.decoding);
    } else {
        judge = std::make_unique<ExactMatchJudge>();
    }
    std::vector<JudgedGenerative> judged =
        judge_generative_responses(bench, log, *judge, cfg.generation.workers);

    EvalOptions eval_options;
    eval_options.strict_unparsable = cfg.evaluation.strict_unparsable;
    EvalReport report = compute_metrics(bench, log, judged, eval_options);
    report.model = cfg.candidate_backend.model;
    report.judge = judge->id();

    jsonl::write_text_atomic(ctx.report_json_path(), to_json(report).dump(2) + "\n");
    jsonl::write_text_atomic(ctx.report_md_path(), render_report_markdown(report));
    log_info("evaluate", "done", {{"items", log.size()}});
    return report;
}

inline std::string run_report(const PipelineContext& ctx) {
    if (!std::filesystem::exists(ctx.report_md_path())) {
        throw IoError("no report found; run the evaluate stage first");
    }
    return jsonl::read_text(ctx.report_md_path());
}

// ---------------------------------------------------------------------------
// Full pipeline
// ---------------------------------------------------------------------------

enum class PipelineStage { Optimize, Generate, Verify, Aggregate };

inline PipelineStage parse_pipeline_stage(std::string_view text) {
    const std::string key = strings::lower_ascii(strings::trim(text));
    if (key == "optimize") return PipelineStage::Optimize;
    if (key == "generate") return PipelineStage::Generate;
    if (key == "verify") return PipelineStage::Verify;
    if (key == "aggregate") return PipelineStage::Aggregate;
    throw ParseError("unknown pipeline stage: \"" + std::string(text) + "\"");
}

/// Runs optimize → generate → verify → aggregate. With resume_from, earlier
/// stages are skipped and their artifacts must already exist.
inline void run_pipeline(const PipelineContext& ctx,
                         std::optional<PipelineStage> resume_from = std::nullopt) {
    const int start = resume_from ? static_cast<int>(*resume_from) : 0;
    if (start <= static_cast<int>(PipelineStage::Optimize)) run_optimize(ctx);
    if (start <= static_cast<int>(PipelineStage::Generate)) run_generate(ctx);
    if (start <= static_cast<int>(PipelineStage::Verify)) run_verify(ctx);
    if (start <= static_cast<int>(PipelineStage::Aggregate)) run_aggregate(ctx);
}

} // namespace halogen
