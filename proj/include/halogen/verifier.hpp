#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "halogen/errors.hpp"
#include "halogen/generator.hpp"
#include "halogen/llm_gateway.hpp"
#include "halogen/log.hpp"
#include "halogen/parallel.hpp"
#include "halogen/prompt_kit.hpp"
#include "halogen/strings.hpp"

namespace halogen {

// ---------------------------------------------------------------------------
// Verdicts
// ---------------------------------------------------------------------------

enum class CheckKind { Corr, Halu, Label };
enum class Outcome { Pass, Fail, Uncertain };

inline std::string_view check_name(CheckKind c) {
    switch (c) {
        case CheckKind::Corr: return "corr";
        case CheckKind::Halu: return "halu";
        case CheckKind::Label: return "label";
    }
    return "corr";
}

inline CheckKind parse_check(std::string_view text) {
    const std::string key = strings::lower_ascii(strings::trim(text));
    if (key == "corr") return CheckKind::Corr;
    if (key == "halu") return CheckKind::Halu;
    if (key == "label") return CheckKind::Label;
    throw ParseError("unknown check kind: \"" + std::string(text) + "\"");
}

inline std::string_view outcome_name(Outcome o) {
    switch (o) {
        case Outcome::Pass: return "pass";
        case Outcome::Fail: return "fail";
        case Outcome::Uncertain: return "uncertain";
    }
    return "uncertain";
}

inline Outcome parse_outcome(std::string_view text) {
    const std::string key = strings::lower_ascii(strings::trim(text));
    if (key == "pass") return Outcome::Pass;
    if (key == "fail") return Outcome::Fail;
    if (key == "uncertain") return Outcome::Uncertain;
    throw ParseError("unknown outcome: \"" + std::string(text) + "\"");
}

struct Verdict {
    CheckKind check = CheckKind::Corr;
    Outcome outcome = Outcome::Uncertain;
    std::string rationale;
    std::optional<int> response_index; // present iff check is Halu or Label

    bool operator==(const Verdict&) const = default;
};

inline nlohmann::json to_json(const Verdict& v) {
    nlohmann::json j = {{"check", std::string(check_name(v.check))},
                        {"outcome", std::string(outcome_name(v.outcome))},
                        {"rationale", v.rationale}};
    if (v.response_index) j["response_index"] = *v.response_index;
    return j;
}

inline Verdict verdict_from_json(const nlohmann::json& j) {
    Verdict v;
    v.check = parse_check(j.at("check").get<std::string>());
    v.outcome = parse_outcome(j.at("outcome").get<std::string>());
    v.rationale = j.value("rationale", std::string{});
    if (j.contains("response_index")) v.response_index = j.at("response_index").get<int>();
    return v;
}

/// Error feedback for a rejected record: every non-Pass verdict, in stable
/// (check, response index) order. This is the optimizer's input.
struct RejectionFeedback {
    std::string record_id;
    std::vector<Verdict> verdicts;
};

inline nlohmann::json to_json(const RejectionFeedback& f) {
    nlohmann::json verdicts = nlohmann::json::array();
    for (const Verdict& v : f.verdicts) verdicts.push_back(to_json(v));
    return {{"record_id", f.record_id}, {"verdicts", verdicts}};
}

inline RejectionFeedback feedback_from_json(const nlohmann::json& j) {
    RejectionFeedback f;
    f.record_id = j.at("record_id").get<std::string>();
    for (const auto& v : j.at("verdicts")) f.verdicts.push_back(verdict_from_json(v));
    if (f.verdicts.empty()) throw ValidationError("rejection feedback has no verdicts");
    return f;
}

// ---------------------------------------------------------------------------
// Verdict wire format
// ---------------------------------------------------------------------------

/// The verifier agent must start its reply with 通过 / 不通过 / 不确定
/// (or PASS / FAIL / UNCERTAIN). Anything else is strict-mapped to
/// Uncertain, which rejects the record downstream.
inline std::pair<Outcome, std::string> parse_verdict_text(std::string_view reply) {
    std::string text = strings::trim(reply);
    struct Token {
        std::string_view token;
        Outcome outcome;
        bool ascii;
    };
    // Longer tokens first: 不通过 must win over 通过, UNCERTAIN over nothing.
    static const Token tokens[] = {
        {"不通过", Outcome::Fail, false},  {"不确定", Outcome::Uncertain, false},
        {"通过", Outcome::Pass, false},    {"UNCERTAIN", Outcome::Uncertain, true},
        {"PASS", Outcome::Pass, true},     {"FAIL", Outcome::Fail, true},
    };
    for (const Token& t : tokens) {
        const bool matches = t.ascii
                                 ? strings::lower_ascii(text.substr(0, t.token.size())) ==
                                       strings::lower_ascii(t.token)
                                 : std::string_view(text).starts_with(t.token);
        if (!matches) continue;
        std::string rest = text.substr(t.token.size());
        // Trim separators between the token and the rationale.
        for (;;) {
            std::string trimmed = strings::trim(rest);
            static const std::string_view seps[] = {"—", "：", "，", "。", ":", "-", ","};
            bool stripped = false;
            for (std::string_view sep : seps) {
                if (std::string_view(trimmed).starts_with(sep)) {
                    rest = trimmed.substr(sep.size());
                    stripped = true;
                    break;
                }
            }
            if (!stripped) {
                rest = trimmed;
                break;
            }
        }
        return {t.outcome, rest};
    }
    return {Outcome::Uncertain, text};
}

// ---------------------------------------------------------------------------
// Verifier
// ---------------------------------------------------------------------------

struct VerifierOptions {
    std::string model;
    DecodingSettings decoding;
    int workers = 1;
};

/// Applies the three checks (correctness, hallucination, label) to meta
/// records by prompting a verifier agent with the rulebook. Uncertain counts
/// as non-Pass everywhere: ambiguous data is filtered, never kept.
class Verifier {
public:
    Verifier(LlmGateway& gateway, Rulebook rulebook, VerifierOptions options)
        : gateway_(gateway), rulebook_(std::move(rulebook)), options_(std::move(options)) {
        halogen::validate(rulebook_);
    }

    Verdict check_correctness(const MetaRecord& record) const {
        require_unverified(record);
        const std::string body = "【问题】" + record.question + "\n【背景知识】" + record.knowledge +
                                 "\n【正确答案】" + record.correct_answer;
        const std::string prompt =
            build_check_prompt(kCorrInstruction, rulebook_.correctness_rules, body);
        auto [outcome, rationale] = ask(prompt, "verify.corr");
        return {CheckKind::Corr, outcome, rationale, std::nullopt};
    }

    Verdict check_hallucination(const MetaRecord& record, int index) const {
        require_unverified(record);
        require_index(record, index);
        const std::string& response = record.hallucinated_responses[static_cast<std::size_t>(index)];
        // Analytically forced case: a response equal to the correct answer can
        // never contain a hallucination, so no model call is needed.
        if (strings::normalize_answer(response) == strings::normalize_answer(record.correct_answer)) {
            return {CheckKind::Halu, Outcome::Fail, "幻觉答案与正确答案相同", index};
        }
        const std::string body = "【问题】" + record.question + "\n【背景知识】" + record.knowledge +
                                 "\n【正确答案】" + record.correct_answer + "\n【幻觉答案】" + response;
        const std::string prompt =
            build_check_prompt(kHaluInstruction, rulebook_.hallucination_rules, body);
        auto [outcome, rationale] = ask(prompt, "verify.halu");
        return {CheckKind::Halu, outcome, rationale, index};
    }

    Verdict check_label(const MetaRecord& record, int index) const {
        require_unverified(record);
        require_index(record, index);
        const HallucinationType label = record.labels[static_cast<std::size_t>(index)];
        if (!is_valid(label)) {
            throw ValidationError("record " + record.id + " carries an unknown label");
        }
        // Only the rules for the claimed type are rendered; the per-type rule
        // sets already encode classification priority.
        const auto& rules = rulebook_.label_rules.at(label);
        const std::string instruction = "假设你是一个幻觉类型检测员。请根据给定的要求判断是否存在" +
                                        std::string(chinese_name(label)) + "，并提供理由。具体要求如下：";
        const std::string body = "【问题】" + record.question + "\n【正确答案】" +
                                 record.correct_answer + "\n【幻觉答案】" +
                                 record.hallucinated_responses[static_cast<std::size_t>(index)] +
                                 "\n【声称的幻觉类型】" + std::string(chinese_name(label)) + "（" +
                                 std::string(code(label)) + "）";
        const std::string prompt = build_check_prompt(instruction, rules, body);
        auto [outcome, rationale] = ask(prompt, "verify.label");
        return {CheckKind::Label, outcome, rationale, index};
    }

    /// Runs Corr → Halu(0..k-1) → Label(0..k-1). With collect_feedback the
    /// full verdict list is gathered for the optimizer; otherwise the record
    /// is rejected at the first non-Pass verdict.
    struct VerifyResult {
        MetaRecord record;
        std::optional<RejectionFeedback> feedback;
        std::vector<Verdict> verdicts; // all verdicts collected this run
    };

    VerifyResult verify_record(const MetaRecord& input, bool collect_feedback) const {
        require_unverified(input);
        VerifyResult result;
        result.record = input;
        const int k = static_cast<int>(input.hallucinated_responses.size());

        try {
            result.verdicts.push_back(check_correctness(input));
            bool failed = result.verdicts.back().outcome != Outcome::Pass;
            if (!failed || collect_feedback) {
                for (int i = 0; i < k && (!failed || collect_feedback); ++i) {
                    result.verdicts.push_back(check_hallucination(input, i));
                    failed = failed || result.verdicts.back().outcome != Outcome::Pass;
                }
                for (int i = 0; i < k && (!failed || collect_feedback); ++i) {
                    result.verdicts.push_back(check_label(input, i));
                    failed = failed || result.verdicts.back().outcome != Outcome::Pass;
                }
            }
        } catch (const GatewayError& e) {
            // Retryable: the record stays Unverified.
            log_warn("verify", "gateway_error", {{"record_id", input.id}, {"error", e.what()}});
            result.record.status = RecordStatus::Unverified;
            result.verdicts.clear();
            return result;
        }

        if (decides_verified(result.verdicts, k)) {
            result.record.status = RecordStatus::Verified;
        } else {
            result.record.status = RecordStatus::Rejected;
            RejectionFeedback feedback;
            feedback.record_id = input.id;
            std::string summary;
            for (const Verdict& v : result.verdicts) {
                if (v.outcome == Outcome::Pass) continue;
                feedback.verdicts.push_back(v);
                summary += std::string(check_name(v.check));
                if (v.response_index) summary += "[" + std::to_string(*v.response_index) + "]";
                summary += " " + std::string(outcome_name(v.outcome)) + ": " + v.rationale + "\n";
            }
            result.record.feedback = summary;
            result.feedback = std::move(feedback);
        }
        return result;
    }

    /// A record is Verified iff the correctness check and all k hallucination
    /// and label checks are present and Pass. Adding any non-Pass verdict can
    /// only reject; it can never promote.
    static bool decides_verified(std::span<const Verdict> verdicts, int k) {
        int corr = 0, halu = 0, label = 0;
        for (const Verdict& v : verdicts) {
            if (v.outcome != Outcome::Pass) return false;
            switch (v.check) {
                case CheckKind::Corr: ++corr; break;
                case CheckKind::Halu: ++halu; break;
                case CheckKind::Label: ++label; break;
            }
        }
        return corr >= 1 && halu >= k && label >= k;
    }

    const Rulebook& rulebook() const { return rulebook_; }

    static constexpr std::string_view kCorrInstruction =
        "假设你是一个中文问答正确性检验者。请根据给定的背景知识，判断所给答案是否是问题的正确回复并给出理由。"
        "具体对问答的要求如下：";
    static constexpr std::string_view kHaluInstruction =
        "假设你是一个中文问答错误性检验者。请根据给定的背景知识，判断所给幻觉答案是否是问题的错误回复并给出理由。"
        "具体对问答的要求如下：";
    static constexpr std::string_view kVerdictInstruction =
        "请在回复的第一行以「通过」、「不通过」或「不确定」开头，然后给出理由。";

    static std::string build_check_prompt(std::string_view instruction,
                                          std::span<const std::string> rules,
                                          std::string_view body) {
        std::string prompt(instruction);
        prompt += "\n\n";
        for (std::size_t i = 0; i < rules.size(); ++i) {
            prompt += std::to_string(i + 1) + ". " + rules[i] + "\n";
        }
        prompt += "\n";
        prompt += kVerdictInstruction;
        prompt += "\n\n";
        prompt += body;
        return prompt;
    }

private:
    static void require_unverified(const MetaRecord& record) {
        if (record.status != RecordStatus::Unverified) {
            throw ValidationError("record " + record.id + " has already been verified");
        }
    }

    static void require_index(const MetaRecord& record, int index) {
        if (index < 0 || static_cast<std::size_t>(index) >= record.hallucinated_responses.size()) {
            throw ValidationError("response index " + std::to_string(index) + " out of range for record " +
                                  record.id);
        }
    }

    std::pair<Outcome, std::string> ask(const std::string& prompt, std::string tag) const {
        CompletionRequest request;
        request.model = options_.model;
        request.user_text = prompt;
        request.decoding = options_.decoding;
        request.tag = std::move(tag);
        return parse_verdict_text(gateway_.complete(request).text);
    }

    LlmGateway& gateway_;
    Rulebook rulebook_;
    VerifierOptions options_;
};

// ---------------------------------------------------------------------------
// Batch verification
// ---------------------------------------------------------------------------

struct VerificationBatch {
    std::vector<MetaRecord> verified;
    std::vector<MetaRecord> rejected;
    std::vector<MetaRecord> unverified; // gateway failures; retryable
    std::vector<RejectionFeedback> feedback;
};

/// Verifies records with bounded parallelism. Output ordering follows input
/// ordering in every bucket, and feedback entries stay aligned with their
/// rejected records.
inline VerificationBatch verify_records(std::span<const MetaRecord> records, const Verifier& verifier,
                                        bool collect_feedback, int workers = 1) {
    std::vector<MetaRecord> input(records.begin(), records.end());
    auto results = parallel_map(
        input, [&](const MetaRecord& r) { return verifier.verify_record(r, collect_feedback); },
        workers);

    VerificationBatch batch;
    for (auto& result : results) {
        switch (result.record.status) {
            case RecordStatus::Verified:
                batch.verified.push_back(std::move(result.record));
                break;
            case RecordStatus::Rejected:
                batch.rejected.push_back(std::move(result.record));
                if (result.feedback) batch.feedback.push_back(std::move(*result.feedback));
                break;
            case RecordStatus::Unverified:
                batch.unverified.push_back(std::move(result.record));
                break;
        }
    }
    return batch;
}

inline void write_feedback(const std::filesystem::path& path,
                           std::span<const RejectionFeedback> feedback) {
    std::string text;
    for (const RejectionFeedback& f : feedback) {
        text += to_json(f).dump();
        text += '\n';
    }
    jsonl::write_text_atomic(path, text);
}

inline std::vector<RejectionFeedback> load_feedback(const std::filesystem::path& path) {
    std::vector<RejectionFeedback> out;
    jsonl::for_each_line(path, [&](const nlohmann::json& j, std::size_t lineno) {
        try {
            out.push_back(feedback_from_json(j));
        } catch (const Error& e) {
            throw ParseError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    });
    return out;
}

} // namespace halogen
