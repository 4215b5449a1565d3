#pragma once

#include <cstdio>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "halogen/aggregator.hpp"
#include "halogen/errors.hpp"
#include "halogen/llm_gateway.hpp"
#include "halogen/log.hpp"
#include "halogen/parallel.hpp"
#include "halogen/strings.hpp"

namespace halogen {

// ---------------------------------------------------------------------------
// Response log
// ---------------------------------------------------------------------------

struct ResponseEntry {
    std::string item_id;
    std::string model;
    std::string text;
    DecodingSettings decoding;
    bool answered = true; // false when the gateway failed for this item
};

using ResponseLog = std::vector<ResponseEntry>;

inline nlohmann::json to_json(const ResponseEntry& e) {
    return {{"item_id", e.item_id}, {"model", e.model},           {"text", e.text},
            {"temperature", e.decoding.temperature}, {"top_p", e.decoding.top_p},
            {"answered", e.answered}};
}

inline ResponseEntry response_from_json(const nlohmann::json& j) {
    ResponseEntry e;
    e.item_id = j.at("item_id").get<std::string>();
    e.model = j.at("model").get<std::string>();
    e.text = j.at("text").get<std::string>();
    e.decoding.temperature = j.value("temperature", 1.0);
    e.decoding.top_p = j.value("top_p", 0.7);
    e.answered = j.value("answered", true);
    return e;
}

inline void write_response_log(const std::filesystem::path& path, const ResponseLog& log) {
    std::string text;
    for (const ResponseEntry& e : log) {
        text += to_json(e).dump();
        text += '\n';
    }
    jsonl::write_text_atomic(path, text);
}

inline ResponseLog load_response_log(const std::filesystem::path& path) {
    ResponseLog out;
    jsonl::for_each_line(path, [&](const nlohmann::json& j, std::size_t) {
        out.push_back(response_from_json(j));
    });
    return out;
}

// ---------------------------------------------------------------------------
// Zero-shot item prompts
// ---------------------------------------------------------------------------

inline std::string item_prompt(const BenchmarkItem& item) {
    if (const auto* g = std::get_if<GenerativePayload>(&item.payload)) {
        return g->question;
    }
    if (const auto* c = std::get_if<ChoicePayload>(&item.payload)) {
        static constexpr char letters[] = {'A', 'B', 'C', 'D'};
        std::string prompt = c->question_text + "\n";
        for (std::size_t i = 0; i < c->options.size(); ++i) {
            prompt += std::string(1, letters[i]) + ". " + c->options[i] + "\n";
        }
        prompt += "请只回答选项字母（A、B、C 或 D）。";
        return prompt;
    }
    const auto& t = std::get<TrueFalsePayload>(item.payload);
    return t.statement_question + "\n请回答「正确」或「错误」。";
}

/// Runs a candidate model over every benchmark item, zero shot. The log is
/// complete and ordered by item_id; per-item gateway failures are recorded
/// as unanswered rather than aborting the run.
inline ResponseLog run_model(const Benchmark& bench, LlmGateway& gateway, const std::string& model,
                             const DecodingSettings& decoding, int workers = 1) {
    std::vector<const BenchmarkItem*> items = bench.all_items_sorted();
    auto ask = [&](const BenchmarkItem* item) -> ResponseEntry {
        ResponseEntry entry;
        entry.item_id = item->item_id;
        entry.model = model;
        entry.decoding = decoding;
        CompletionRequest request;
        request.model = model;
        request.user_text = item_prompt(*item);
        request.decoding = decoding;
        request.tag = "evaluate.candidate";
        try {
            entry.text = gateway.complete(request).text;
        } catch (const GatewayError& e) {
            entry.answered = false;
            log_warn("evaluate", "item_unanswered", {{"item_id", item->item_id}, {"error", e.what()}});
        }
        return entry;
    };
    return parallel_map(items, ask, workers);
}

// ---------------------------------------------------------------------------
// Generative judging
// ---------------------------------------------------------------------------

/// Decides whether a free-form model response conflicts with the gold
/// answer. A conflict means the response is hallucinated.
class GenerativeJudge {
public:
    enum class Verdict { Conflict, NoConflict, Unparsable };

    virtual ~GenerativeJudge() = default;
    virtual Verdict judge(const std::string& question, const std::string& gold_answer,
                          const std::string& response) = 0;
    virtual std::string id() const = 0;
};

/// Deterministic judge for offline runs: the response is clean iff it
/// contains the normalized gold answer.
class ExactMatchJudge : public GenerativeJudge {
public:
    Verdict judge(const std::string&, const std::string& gold_answer,
                  const std::string& response) override {
        const std::string gold = strings::lower_ascii(strings::normalize_answer(gold_answer));
        const std::string got = strings::lower_ascii(strings::normalize_answer(response));
        return strings::contains(got, gold) ? Verdict::NoConflict : Verdict::Conflict;
    }
    std::string id() const override { return "exact-match"; }
};

/// LLM-backed judge. The judge model must lead its reply with CONFLICT or
/// NO-CONFLICT; anything else is a judge-parse failure and the item is
/// excluded from the metric denominator.
class LlmJudge : public GenerativeJudge {
public:
    LlmJudge(LlmGateway& gateway, std::string model, DecodingSettings decoding)
        : gateway_(gateway), model_(std::move(model)), decoding_(decoding) {}

    Verdict judge(const std::string& question, const std::string& gold_answer,
                  const std::string& response) override {
        CompletionRequest request;
        request.model = model_;
        request.user_text =
            "请判断【模型回答】与【标准答案】是否存在事实冲突。"
            "如果存在冲突，模型回答视为幻觉。\n"
            "请在回复的第一行只输出 CONFLICT 或 NO-CONFLICT，随后给出简短理由。\n\n"
            "【问题】" + question + "\n【标准答案】" + gold_answer + "\n【模型回答】" + response;
        request.decoding = decoding_;
        request.tag = "evaluate.judge";
        return parse_judge_reply(gateway_.complete(request).text);
    }

    std::string id() const override { return "llm:" + model_; }

    static Verdict parse_judge_reply(std::string_view reply) {
        const std::string head = strings::lower_ascii(strings::trim(reply));
        // NO-CONFLICT first: CONFLICT is its suffix.
        if (head.starts_with("no-conflict") || head.starts_with("no conflict")) {
            return Verdict::NoConflict;
        }
        if (head.starts_with("conflict")) return Verdict::Conflict;
        return Verdict::Unparsable;
    }

private:
    LlmGateway& gateway_;
    std::string model_;
    DecodingSettings decoding_;
};

struct JudgedGenerative {
    std::string item_id;
    GenerativeJudge::Verdict verdict = GenerativeJudge::Verdict::Unparsable;
};

/// Judges every answered generative response. Unanswered items are left out
/// here; compute_metrics scores them by policy.
inline std::vector<JudgedGenerative> judge_generative_responses(const Benchmark& bench,
                                                                const ResponseLog& log,
                                                                GenerativeJudge& judge,
                                                                int workers = 1) {
    std::map<std::string_view, const ResponseEntry*> by_id;
    for (const ResponseEntry& e : log) by_id.emplace(e.item_id, &e);

    std::vector<const BenchmarkItem*> items;
    for (const BenchmarkItem& item : bench.generative) items.push_back(&item);

    auto run = [&](const BenchmarkItem* item) -> std::optional<JudgedGenerative> {
        auto it = by_id.find(item->item_id);
        if (it == by_id.end() || !it->second->answered) return std::nullopt;
        const auto& payload = std::get<GenerativePayload>(item->payload);
        JudgedGenerative out;
        out.item_id = item->item_id;
        out.verdict = judge.judge(payload.question, payload.gold_answer, it->second->text);
        if (out.verdict == GenerativeJudge::Verdict::Unparsable) {
            log_warn("evaluate", "judge_parse_error", {{"item_id", item->item_id}});
        }
        return out;
    };
    auto results = parallel_map(items, run, workers);
    std::vector<JudgedGenerative> judged;
    for (auto& r : results) {
        if (r) judged.push_back(std::move(*r));
    }
    return judged;
}

// ---------------------------------------------------------------------------
// Choice and true/false scoring
// ---------------------------------------------------------------------------

enum class ChoiceScore { Correct, Hallucinated, Unparsable };

/// Extracts the chosen option: first a standalone letter A–D (neighbours not
/// ASCII alphanumeric, so letters inside English words never match), then a
/// unique full option text occurrence. Returns the option index or nullopt.
inline std::optional<int> extract_choice(const ChoicePayload& payload, std::string_view response) {
    for (std::size_t i = 0; i < response.size(); ++i) {
        const char c = response[i];
        const char upper = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
        if (upper < 'A' || upper > 'D') continue;
        const bool left_ok = i == 0 || !strings::is_ascii_alnum(response[i - 1]);
        const bool right_ok = i + 1 >= response.size() || !strings::is_ascii_alnum(response[i + 1]);
        if (left_ok && right_ok) return upper - 'A';
    }
    const std::string norm_response = strings::normalize_option(std::string(response));
    std::optional<int> match;
    for (int i = 0; i < 4; ++i) {
        const std::string opt = strings::normalize_option(payload.options[static_cast<std::size_t>(i)]);
        if (!opt.empty() && strings::contains(norm_response, opt)) {
            if (match) return std::nullopt; // ambiguous: several options quoted
            match = i;
        }
    }
    return match;
}

inline ChoiceScore score_choice(const BenchmarkItem& item, std::string_view response) {
    const auto* payload = std::get_if<ChoicePayload>(&item.payload);
    if (payload == nullptr) throw ValidationError("score_choice requires a single-choice item");
    auto picked = extract_choice(*payload, response);
    if (!picked) return ChoiceScore::Unparsable;
    return *picked == payload->answer_index ? ChoiceScore::Correct : ChoiceScore::Hallucinated;
}

enum class TfScore { Correct, FalseNegative, FalsePositive, Unparsable };

/// Normalizes a reply to a true/false token. Multi-character tokens are
/// matched anywhere (earliest position, longest token first, standalone
/// words for English); the single characters 对/错 only count when they lead
/// the reply, otherwise echoes of the statement would misparse.
inline std::optional<bool> extract_true_false(std::string_view response) {
    struct Token {
        std::string_view text;
        bool value;
        bool ascii_word;
    };
    static const Token tokens[] = {
        {"不正确", false, false}, {"不对", false, false}, {"错误", false, false},
        {"正确", true, false},    {"true", true, true},   {"false", false, true},
        {"yes", true, true},      {"no", false, true},
    };
    const std::string lower = strings::lower_ascii(response);
    std::optional<std::pair<std::size_t, bool>> best; // (position, value)
    for (const Token& t : tokens) {
        std::size_t pos = lower.find(t.text);
        while (pos != std::string::npos) {
            bool ok = true;
            if (t.ascii_word) {
                const bool left_ok = pos == 0 || !strings::is_ascii_alnum(lower[pos - 1]);
                const std::size_t end = pos + t.text.size();
                const bool right_ok = end >= lower.size() || !strings::is_ascii_alnum(lower[end]);
                ok = left_ok && right_ok;
            }
            if (ok) break;
            pos = lower.find(t.text, pos + 1);
        }
        if (pos == std::string::npos) continue;
        if (!best || pos < best->first) best = {pos, t.value};
    }
    if (best) return best->second;

    const std::string head = strings::trim(response);
    if (head.starts_with("对")) return true;
    if (head.starts_with("错")) return false;
    return std::nullopt;
}

inline TfScore score_true_false(const BenchmarkItem& item, std::string_view response) {
    const auto* payload = std::get_if<TrueFalsePayload>(&item.payload);
    if (payload == nullptr) throw ValidationError("score_true_false requires a true/false item");
    auto said_true = extract_true_false(response);
    if (!said_true) return TfScore::Unparsable;
    if (*said_true == payload->truth) return TfScore::Correct;
    // Hallucinated statement accepted as correct → false negative;
    // correct statement flagged as wrong → false positive.
    return payload->truth ? TfScore::FalsePositive : TfScore::FalseNegative;
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

/// Integer accounting behind one rate: rate == hallucinated / scored.
struct SliceCounts {
    int scored = 0;
    int hallucinated = 0;

    std::optional<double> rate() const {
        if (scored == 0) return std::nullopt;
        return static_cast<double>(hallucinated) / static_cast<double>(scored);
    }
    bool operator==(const SliceCounts&) const = default;
};

inline nlohmann::json to_json(const SliceCounts& s) {
    nlohmann::json j = {{"scored", s.scored}, {"hallucinated", s.hallucinated}};
    if (auto r = s.rate()) j["rate"] = *r;
    return j;
}

struct EvalReport {
    std::string model;
    std::string judge;
    bool strict_unparsable = true;

    SliceCounts generative;
    SliceCounts single_choice;
    SliceCounts true_false;
    std::optional<double> overall_rate; // unweighted mean of present format rates

    std::map<std::string, SliceCounts> per_type;  // generative items by primary label
    std::map<std::string, SliceCounts> per_topic; // generative items by topic

    // True/false decomposition over parsable responses.
    int fn_count = 0;          // hallucinated statement judged correct
    int fp_count = 0;          // correct statement judged hallucinated
    int tf_false_scored = 0;   // parsable responses to false items
    int tf_true_scored = 0;    // parsable responses to true items
    int tf_unparsable = 0;     // strict mode counts these as hallucinated, outside fn/fp

    int generative_excluded = 0; // judge-parse failures (always excluded)
    int choice_unparsable = 0;
    int unanswered = 0;

    std::optional<double> fn_rate() const {
        if (tf_false_scored == 0) return std::nullopt;
        return static_cast<double>(fn_count) / static_cast<double>(tf_false_scored);
    }
    std::optional<double> fp_rate() const {
        if (tf_true_scored == 0) return std::nullopt;
        return static_cast<double>(fp_count) / static_cast<double>(tf_true_scored);
    }
};

struct EvalOptions {
    // Strict mode scores unparsable and unanswered responses as hallucinated;
    // the alternative excludes them from denominators. One switch, applied
    // uniformly, never mixed per item.
    bool strict_unparsable = true;
};

/// Computes per-format, per-type and per-topic hallucination rates from a
/// complete response log. The overall rate is the unweighted arithmetic mean
/// of the three per-format rates; empty slices are reported as absent, not
/// as zero.
inline EvalReport compute_metrics(const Benchmark& bench, const ResponseLog& log,
                                  std::span<const JudgedGenerative> judged,
                                  const EvalOptions& options = {}) {
    EvalReport report;
    report.strict_unparsable = options.strict_unparsable;
    if (!log.empty()) report.model = log.front().model;

    std::map<std::string_view, const ResponseEntry*> responses;
    for (const ResponseEntry& e : log) {
        if (!responses.emplace(e.item_id, &e).second) {
            throw ValidationError("duplicate response log entry for item " + e.item_id);
        }
    }
    std::map<std::string_view, GenerativeJudge::Verdict> verdicts;
    for (const JudgedGenerative& jg : judged) verdicts.emplace(jg.item_id, jg.verdict);

    auto find_response = [&](const BenchmarkItem& item) -> const ResponseEntry* {
        auto it = responses.find(item.item_id);
        if (it == responses.end()) {
            throw ValidationError("response log is missing item " + item.item_id);
        }
        return it->second;
    };

    // tally() applies the strict/lenient switch uniformly: outcome is
    // true=hallucinated, false=clean, nullopt=unparsable-or-unanswered.
    auto tally = [&](SliceCounts& slice, std::optional<bool> hallucinated) {
        if (hallucinated) {
            slice.scored += 1;
            slice.hallucinated += *hallucinated ? 1 : 0;
        } else if (options.strict_unparsable) {
            slice.scored += 1;
            slice.hallucinated += 1;
        }
    };

    for (const BenchmarkItem& item : bench.generative) {
        const ResponseEntry* entry = find_response(item);
        std::optional<bool> outcome;
        if (!entry->answered) {
            report.unanswered += 1;
        } else {
            auto it = verdicts.find(item.item_id);
            if (it == verdicts.end() || it->second == GenerativeJudge::Verdict::Unparsable) {
                // Judge failure: excluded from the denominator regardless of mode.
                report.generative_excluded += 1;
                continue;
            }
            outcome = it->second == GenerativeJudge::Verdict::Conflict;
        }
        tally(report.generative, outcome);
        tally(report.per_type[std::string(code(item.primary_label))], outcome);
        tally(report.per_topic[item.topic.name()], outcome);
    }

    for (const BenchmarkItem& item : bench.single_choice) {
        const ResponseEntry* entry = find_response(item);
        std::optional<bool> outcome;
        if (!entry->answered) {
            report.unanswered += 1;
        } else {
            switch (score_choice(item, entry->text)) {
                case ChoiceScore::Correct: outcome = false; break;
                case ChoiceScore::Hallucinated: outcome = true; break;
                case ChoiceScore::Unparsable: report.choice_unparsable += 1; break;
            }
        }
        tally(report.single_choice, outcome);
    }

    for (const BenchmarkItem& item : bench.true_false) {
        const ResponseEntry* entry = find_response(item);
        const auto& payload = std::get<TrueFalsePayload>(item.payload);
        std::optional<bool> outcome;
        if (!entry->answered) {
            report.unanswered += 1;
        } else {
            switch (score_true_false(item, entry->text)) {
                case TfScore::Correct:
                    outcome = false;
                    (payload.truth ? report.tf_true_scored : report.tf_false_scored) += 1;
                    break;
                case TfScore::FalseNegative:
                    outcome = true;
                    report.fn_count += 1;
                    report.tf_false_scored += 1;
                    break;
                case TfScore::FalsePositive:
                    outcome = true;
                    report.fp_count += 1;
                    report.tf_true_scored += 1;
                    break;
                case TfScore::Unparsable:
                    report.tf_unparsable += 1;
                    break;
            }
        }
        tally(report.true_false, outcome);
    }

    int present = 0;
    double sum = 0.0;
    for (const SliceCounts* slice : {&report.generative, &report.single_choice, &report.true_false}) {
        if (auto r = slice->rate()) {
            sum += *r;
            present += 1;
        }
    }
    if (present > 0) report.overall_rate = sum / present;
    return report;
}

// ---------------------------------------------------------------------------
// Report serialization
// ---------------------------------------------------------------------------

inline nlohmann::json to_json(const EvalReport& r) {
    nlohmann::json per_type = nlohmann::json::object();
    for (const auto& [key, counts] : r.per_type) per_type[key] = to_json(counts);
    nlohmann::json per_topic = nlohmann::json::object();
    for (const auto& [key, counts] : r.per_topic) per_topic[key] = to_json(counts);
    nlohmann::json j = {{"model", r.model},
                        {"judge", r.judge},
                        {"strict_unparsable", r.strict_unparsable},
                        {"generative", to_json(r.generative)},
                        {"single_choice", to_json(r.single_choice)},
                        {"true_false", to_json(r.true_false)},
                        {"per_type", per_type},
                        {"per_topic", per_topic},
                        {"fn_count", r.fn_count},
                        {"fp_count", r.fp_count},
                        {"tf_false_scored", r.tf_false_scored},
                        {"tf_true_scored", r.tf_true_scored},
                        {"tf_unparsable", r.tf_unparsable},
                        {"generative_excluded", r.generative_excluded},
                        {"choice_unparsable", r.choice_unparsable},
                        {"unanswered", r.unanswered}};
    if (r.overall_rate) j["overall_rate"] = *r.overall_rate;
    if (auto fn = r.fn_rate()) j["fn_rate"] = *fn;
    if (auto fp = r.fp_rate()) j["fp_rate"] = *fp;
    return j;
}

namespace detail {
inline std::string percent(std::optional<double> rate) {
    if (!rate) return "-";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f%%", *rate * 100.0);
    return buf;
}
} // namespace detail

/// Renders the report as a small markdown document, one table per view.
inline std::string render_report_markdown(const EvalReport& r) {
    std::string out = "# Hallucination evaluation: " + r.model + "\n\n";
    out += "| Format | Scored | Hallucinated | Rate |\n|---|---|---|---|\n";
    auto row = [&](std::string_view name, const SliceCounts& s) {
        out += "| " + std::string(name) + " | " + std::to_string(s.scored) + " | " +
               std::to_string(s.hallucinated) + " | " + detail::percent(s.rate()) + " |\n";
    };
    row("Generative", r.generative);
    row("Single choice", r.single_choice);
    row("True/false", r.true_false);
    out += "\nOverall (unweighted mean of format rates): " + detail::percent(r.overall_rate) + "\n";

    if (!r.per_type.empty()) {
        out += "\n## Generative rate by hallucination type\n\n| Type | Scored | Hallucinated | Rate |\n|---|---|---|---|\n";
        for (const auto& [key, counts] : r.per_type) row(key, counts);
    }
    if (!r.per_topic.empty()) {
        out += "\n## Generative rate by topic\n\n| Topic | Scored | Hallucinated | Rate |\n|---|---|---|---|\n";
        for (const auto& [key, counts] : r.per_topic) row(key, counts);
    }
    out += "\n## True/false error decomposition\n\n";
    out += "False negatives (hallucination accepted): " + std::to_string(r.fn_count) + " of " +
           std::to_string(r.tf_false_scored) + " (" + detail::percent(r.fn_rate()) + ")\n\n";
    out += "False positives (correct answer rejected): " + std::to_string(r.fp_count) + " of " +
           std::to_string(r.tf_true_scored) + " (" + detail::percent(r.fp_rate()) + ")\n";
    return out;
}

} // namespace halogen
