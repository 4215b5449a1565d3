#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "halogen/errors.hpp"
#include "halogen/generator.hpp"
#include "halogen/llm_gateway.hpp"
#include "halogen/log.hpp"
#include "halogen/parallel.hpp"
#include "halogen/prompt_kit.hpp"
#include "halogen/verifier.hpp"

namespace halogen {

// ---------------------------------------------------------------------------
// Validation scoring
// ---------------------------------------------------------------------------

/// Per-check pass rates over a scored batch. overall is the fraction of
/// records passing all three checks jointly, so it can never exceed any
/// individual rate.
struct ValidationReport {
    double corr_rate = 0.0;
    double halu_rate = 0.0;
    double label_rate = 0.0;
    double overall_rate = 0.0;
    int n_records = 0;

    bool operator==(const ValidationReport&) const = default;
};

inline nlohmann::json to_json(const ValidationReport& r) {
    return {{"corr_rate", r.corr_rate},
            {"halu_rate", r.halu_rate},
            {"label_rate", r.label_rate},
            {"overall_rate", r.overall_rate},
            {"n_records", r.n_records}};
}

inline ValidationReport report_from_json(const nlohmann::json& j) {
    ValidationReport r;
    r.corr_rate = j.at("corr_rate").get<double>();
    r.halu_rate = j.at("halu_rate").get<double>();
    r.label_rate = j.at("label_rate").get<double>();
    r.overall_rate = j.at("overall_rate").get<double>();
    r.n_records = j.at("n_records").get<int>();
    return r;
}

/// Per-record check outcome: did the correctness check pass, did all k
/// hallucination checks pass, did all k label checks pass.
struct RecordOutcome {
    bool corr = false;
    bool halu = false;
    bool label = false;

    bool overall() const { return corr && halu && label; }
};

inline RecordOutcome outcome_from_verdicts(std::span<const Verdict> verdicts) {
    RecordOutcome out{true, true, true};
    bool saw_corr = false, saw_halu = false, saw_label = false;
    for (const Verdict& v : verdicts) {
        const bool pass = v.outcome == Outcome::Pass;
        switch (v.check) {
            case CheckKind::Corr: saw_corr = true; out.corr = out.corr && pass; break;
            case CheckKind::Halu: saw_halu = true; out.halu = out.halu && pass; break;
            case CheckKind::Label: saw_label = true; out.label = out.label && pass; break;
        }
    }
    out.corr = out.corr && saw_corr;
    out.halu = out.halu && saw_halu;
    out.label = out.label && saw_label;
    return out;
}

inline ValidationReport summarize_outcomes(std::span<const RecordOutcome> outcomes) {
    ValidationReport report;
    report.n_records = static_cast<int>(outcomes.size());
    if (outcomes.empty()) return report;
    int corr = 0, halu = 0, label = 0, overall = 0;
    for (const RecordOutcome& o : outcomes) {
        corr += o.corr ? 1 : 0;
        halu += o.halu ? 1 : 0;
        label += o.label ? 1 : 0;
        overall += o.overall() ? 1 : 0;
    }
    const double n = static_cast<double>(outcomes.size());
    report.corr_rate = corr / n;
    report.halu_rate = halu / n;
    report.label_rate = label / n;
    report.overall_rate = overall / n;
    return report;
}

/// Generates with the candidate prompts over the validation documents and
/// verifies everything, producing per-check pass rates. Records that fail a
/// generation stage never reach the verifier and are not counted.
inline ValidationReport score_prompts(const StagePrompts& prompts,
                                      std::span<const KnowledgeDocument> val_docs,
                                      LlmGateway& gen_gateway, const GeneratorOptions& gen_options,
                                      const Verifier& verifier, int workers = 1) {
    if (val_docs.empty()) throw ValidationError("validation document set is empty");
    std::vector<MetaRecord> records = run_generation(val_docs, prompts, gen_gateway, gen_options);
    std::vector<MetaRecord> input(records.begin(), records.end());
    auto results = parallel_map(
        input, [&](const MetaRecord& r) { return verifier.verify_record(r, /*collect_feedback=*/true); },
        workers);
    std::vector<RecordOutcome> outcomes;
    outcomes.reserve(results.size());
    for (const auto& result : results) outcomes.push_back(outcome_from_verdicts(result.verdicts));
    return summarize_outcomes(outcomes);
}

// ---------------------------------------------------------------------------
// Candidate proposal
// ---------------------------------------------------------------------------

inline constexpr std::string_view kProposerInstruction =
    "你是一个提示词优化助手。下面给出当前的数据生成提示词模板（@ 指令格式）以及验证模块对不合格数据的错误反馈。"
    "请针对错误反馈改写提示词，使生成的数据更符合要求。"
    "输出 {n} 个候选模板，每个候选模板放在独立的 ``` 围栏代码块中，并保持与输入相同的 @ 指令格式"
    "（@stage、@target_slot、@instruction、@rule、@example_input、@example_output）。"
    "不要输出围栏代码块之外的解释文字。";

/// Renders the optimizer-agent request for one stage template.
inline std::string build_proposal_prompt(const PromptTemplate& current,
                                         std::span<const RejectionFeedback> feedback, int n,
                                         std::size_t max_feedback_lines = 50) {
    std::string prompt(kProposerInstruction);
    const std::string token = "{n}";
    const std::size_t pos = prompt.find(token);
    prompt.replace(pos, token.size(), std::to_string(n));
    prompt += "\n\n【当前模板】\n```\n" + serialize_template(current) + "```\n\n【错误反馈】\n";
    std::size_t lines = 0;
    for (const RejectionFeedback& f : feedback) {
        for (const Verdict& v : f.verdicts) {
            if (lines >= max_feedback_lines) break;
            prompt += "- 记录 " + f.record_id + " " + std::string(check_name(v.check));
            if (v.response_index) prompt += "[" + std::to_string(*v.response_index) + "]";
            prompt += " " + std::string(outcome_name(v.outcome)) + "：" + v.rationale + "\n";
            ++lines;
        }
    }
    if (lines == 0) prompt += "（无错误反馈）\n";
    return prompt;
}

struct ProposerOptions {
    std::string model;
    DecodingSettings decoding;
};

/// Asks the optimizer agent for n full replacement templates. Unparsable
/// candidates are dropped; if none survive, the current template is returned
/// unchanged so the loop degenerates to a no-op instead of failing.
inline std::vector<PromptTemplate> propose_candidates(const PromptTemplate& current,
                                                      std::span<const RejectionFeedback> feedback,
                                                      int n, LlmGateway& gateway,
                                                      const ProposerOptions& options) {
    if (n < 1) throw ValidationError("candidate count must be >= 1");
    CompletionRequest request;
    request.model = options.model;
    request.user_text = build_proposal_prompt(current, feedback, n);
    request.decoding = options.decoding;
    request.tag = "optimize.propose";
    const std::string reply = gateway.complete(request).text;

    std::vector<PromptTemplate> candidates;
    for (const std::string& block : wire::fenced_blocks(reply)) {
        try {
            PromptTemplate t = parse_template(block);
            t.stage = current.stage; // the agent cannot move a template across stages
            candidates.push_back(std::move(t));
        } catch (const Error& e) {
            log_warn("optimize", "candidate_dropped", {{"error", e.what()}});
        }
        if (candidates.size() == static_cast<std::size_t>(n)) break;
    }
    if (candidates.empty()) {
        log_warn("optimize", "all_candidates_dropped", {{"stage", std::string(stage_name(current.stage))}});
        candidates.push_back(current);
    }
    return candidates;
}

// ---------------------------------------------------------------------------
// Optimization loop
// ---------------------------------------------------------------------------

enum class StopReason { MaxIters, EarlyStop };

inline std::string_view stop_reason_name(StopReason s) {
    return s == StopReason::MaxIters ? "max_iters" : "early_stop";
}

struct IterationEntry {
    int iteration = 0;
    int version = 0; // prompt version adopted at this iteration
    ValidationReport report;
};

struct OptimizationTrace {
    std::vector<IterationEntry> iterations;
    int selected_version = 0;
    StopReason stop_reason = StopReason::MaxIters;
    std::optional<std::string> error_note;
};

inline nlohmann::json to_json(const OptimizationTrace& t) {
    nlohmann::json iters = nlohmann::json::array();
    for (const IterationEntry& e : t.iterations) {
        iters.push_back({{"iteration", e.iteration}, {"version", e.version}, {"report", to_json(e.report)}});
    }
    nlohmann::json j = {{"iterations", iters},
                        {"selected_version", t.selected_version},
                        {"stop_reason", std::string(stop_reason_name(t.stop_reason))}};
    if (t.error_note) j["error_note"] = *t.error_note;
    return j;
}

/// Hooks isolate the loop logic from the generate/verify plumbing so traces
/// can be replayed from scripted rates.
struct OptimizerHooks {
    // Scores a candidate prompt set on the validation split.
    std::function<ValidationReport(const StagePrompts&)> score;
    // Runs generate+verify on the training split and returns rejection feedback.
    std::function<std::vector<RejectionFeedback>(const StagePrompts&)> gather_feedback;
    // Proposes n replacement candidates for one stage template.
    std::function<std::vector<PromptTemplate>(const PromptTemplate&,
                                              const std::vector<RejectionFeedback>&, int)>
        propose;
};

struct OptimizerOptions {
    int max_iters = 5;
    int n_candidates = 4;
    int workers = 1; // parallel candidate scoring
};

/// Multi-round prompt optimization. Iteration 0 scores the initial prompts
/// as the baseline anchor. Each later round gathers verifier feedback on the
/// training split, proposes candidates per stage, adopts the stage-wise
/// argmax by validation overall rate, and terminates early as soon as the
/// adopted candidate regresses below the best seen so far. Ties select the
/// earlier iteration.
inline OptimizationTrace optimize(const StagePrompts& init, const OptimizerHooks& hooks,
                                  const OptimizerOptions& options,
                                  StagePrompts* selected_out = nullptr) {
    if (options.max_iters < 1) throw ValidationError("max_iters must be >= 1");
    if (options.n_candidates < 1) throw ValidationError("n_candidates must be >= 1");

    OptimizationTrace trace;
    StagePrompts current = init;

    ValidationReport baseline = hooks.score(current);
    trace.iterations.push_back({0, current.max_version(), baseline});
    double best_overall = baseline.overall_rate;
    int best_iteration = 0;
    StagePrompts best_prompts = current;
    trace.stop_reason = StopReason::MaxIters;

    for (int iter = 1; iter <= options.max_iters; ++iter) {
        StagePrompts next = current;
        try {
            std::vector<RejectionFeedback> feedback = hooks.gather_feedback(current);

            for (PromptStage stage : kAllPromptStages) {
                std::vector<PromptTemplate> candidates =
                    hooks.propose(current.by_stage(stage), feedback, options.n_candidates);
                for (PromptTemplate& c : candidates) {
                    c.version = iter;
                    c.parent_version = current.by_stage(stage).version;
                }
                // Candidates are scored with the other stages held at the
                // current round's prompts, then the best one per stage wins.
                std::vector<ValidationReport> reports = parallel_map(
                    candidates,
                    [&](const PromptTemplate& c) {
                        StagePrompts trial = current;
                        trial.by_stage(stage) = c;
                        return hooks.score(trial);
                    },
                    options.workers);
                std::size_t best_idx = 0;
                for (std::size_t i = 1; i < reports.size(); ++i) {
                    if (reports[i].overall_rate > reports[best_idx].overall_rate) best_idx = i;
                }
                next.by_stage(stage) = candidates[best_idx];
            }

            ValidationReport adopted = hooks.score(next);
            trace.iterations.push_back({iter, iter, adopted});

            if (adopted.overall_rate < best_overall) {
                trace.stop_reason = StopReason::EarlyStop;
                break;
            }
            if (adopted.overall_rate > best_overall) {
                best_overall = adopted.overall_rate;
                best_iteration = iter;
                best_prompts = next;
            }
            current = next;
        } catch (const Error& e) {
            trace.error_note = e.what();
            trace.stop_reason = StopReason::EarlyStop;
            log_error("optimize", "iteration_aborted", {{"iteration", iter}, {"error", e.what()}});
            break;
        }
    }

    trace.selected_version = best_iteration;
    if (selected_out != nullptr) *selected_out = best_prompts;
    return trace;
}

/// Wires the default hooks to the real generate/verify pipeline.
inline OptimizerHooks make_pipeline_hooks(std::vector<KnowledgeDocument> train_docs,
                                          std::vector<KnowledgeDocument> val_docs,
                                          LlmGateway& gen_gateway, GeneratorOptions gen_options,
                                          const Verifier& verifier, LlmGateway& proposer_gateway,
                                          ProposerOptions proposer_options, int workers = 1) {
    OptimizerHooks hooks;
    hooks.score = [&gen_gateway, &verifier, gen_options, val_docs, workers](const StagePrompts& prompts) {
        return score_prompts(prompts, val_docs, gen_gateway, gen_options, verifier, workers);
    };
    hooks.gather_feedback = [&gen_gateway, &verifier, gen_options, train_docs,
                             workers](const StagePrompts& prompts) {
        std::vector<MetaRecord> records = run_generation(train_docs, prompts, gen_gateway, gen_options);
        VerificationBatch batch = verify_records(records, verifier, /*collect_feedback=*/true, workers);
        return batch.feedback;
    };
    hooks.propose = [&proposer_gateway, proposer_options](const PromptTemplate& current,
                                                          const std::vector<RejectionFeedback>& feedback,
                                                          int n) {
        return propose_candidates(current, feedback, n, proposer_gateway, proposer_options);
    };
    return hooks;
}

} // namespace halogen
