#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "halogen/corpus.hpp"
#include "halogen/errors.hpp"
#include "halogen/hashing.hpp"
#include "halogen/llm_gateway.hpp"
#include "halogen/log.hpp"
#include "halogen/parallel.hpp"
#include "halogen/prompt_kit.hpp"
#include "halogen/strings.hpp"
#include "halogen/taxonomy.hpp"

namespace halogen {

// ---------------------------------------------------------------------------
// Records
// ---------------------------------------------------------------------------

/// Output of the QA stage: a question, its correct answer, and the supporting
/// text extracted from the source document.
struct QaDraft {
    std::string doc_id;
    std::string knowledge;
    std::string question;
    std::string correct_answer;

    bool operator==(const QaDraft&) const = default;
};

enum class RecordStatus { Unverified, Verified, Rejected };

inline std::string_view status_name(RecordStatus s) {
    switch (s) {
        case RecordStatus::Unverified: return "unverified";
        case RecordStatus::Verified: return "verified";
        case RecordStatus::Rejected: return "rejected";
    }
    return "unverified";
}

inline RecordStatus parse_status(std::string_view text) {
    const std::string key = strings::lower_ascii(strings::trim(text));
    if (key == "unverified") return RecordStatus::Unverified;
    if (key == "verified") return RecordStatus::Verified;
    if (key == "rejected") return RecordStatus::Rejected;
    throw ParseError("unknown record status: \"" + std::string(text) + "\"");
}

/// The generated quadruple all benchmark formats derive from: question,
/// correct answer, extracted knowledge, k hallucinated responses with
/// per-response labels.
struct MetaRecord {
    std::string id;
    std::string doc_id;
    std::string knowledge;
    std::string question;
    std::string correct_answer;
    std::vector<std::string> hallucinated_responses;
    std::vector<HallucinationType> labels; // parallel to hallucinated_responses
    HallucinationType primary_label = HallucinationType::FactFab;
    Topic topic;
    RecordStatus status = RecordStatus::Unverified;
    std::string feedback; // rejection summary, set only when status == Rejected

    bool operator==(const MetaRecord&) const = default;
};

inline void validate(const MetaRecord& m) {
    if (m.id.empty()) throw ValidationError("meta record id is empty");
    if (m.question.empty() || m.correct_answer.empty() || m.knowledge.empty()) {
        throw ValidationError("meta record " + m.id + " has an empty QA field");
    }
    if (m.labels.size() != m.hallucinated_responses.size()) {
        throw ValidationError("meta record " + m.id + ": labels and responses differ in length");
    }
    if (m.hallucinated_responses.empty()) {
        throw ValidationError("meta record " + m.id + " has no hallucinated responses");
    }
    const std::string gold = strings::normalize_answer(m.correct_answer);
    for (const std::string& r : m.hallucinated_responses) {
        if (strings::normalize_answer(r) == gold) {
            throw ValidationError("meta record " + m.id +
                                  ": hallucinated response equals the correct answer");
        }
    }
    for (HallucinationType t : m.labels) {
        if (!is_valid(t)) throw ValidationError("meta record " + m.id + " has an invalid label");
    }
    if (std::find(m.labels.begin(), m.labels.end(), m.primary_label) == m.labels.end()) {
        throw ValidationError("meta record " + m.id + ": primary label not among labels");
    }
}

inline nlohmann::json to_json(const MetaRecord& m) {
    nlohmann::json labels = nlohmann::json::array();
    for (HallucinationType t : m.labels) labels.push_back(std::string(code(t)));
    nlohmann::json j = {{"id", m.id},
                        {"doc_id", m.doc_id},
                        {"topic", m.topic.name()},
                        {"knowledge", m.knowledge},
                        {"question", m.question},
                        {"correct_answer", m.correct_answer},
                        {"hallucinated_responses", m.hallucinated_responses},
                        {"labels", labels},
                        {"primary_label", std::string(code(m.primary_label))},
                        {"status", std::string(status_name(m.status))}};
    if (m.status == RecordStatus::Rejected) j["feedback"] = m.feedback;
    return j;
}

inline MetaRecord meta_from_json(const nlohmann::json& j) {
    MetaRecord m;
    m.id = j.at("id").get<std::string>();
    m.doc_id = j.at("doc_id").get<std::string>();
    m.topic = Topic::parse(j.at("topic").get<std::string>());
    m.knowledge = j.at("knowledge").get<std::string>();
    m.question = j.at("question").get<std::string>();
    m.correct_answer = j.at("correct_answer").get<std::string>();
    m.hallucinated_responses = j.at("hallucinated_responses").get<std::vector<std::string>>();
    for (const auto& l : j.at("labels")) {
        m.labels.push_back(parse_hallucination_type(l.get<std::string>()));
    }
    m.primary_label = parse_hallucination_type(j.at("primary_label").get<std::string>());
    m.status = parse_status(j.at("status").get<std::string>());
    m.feedback = j.value("feedback", std::string{});
    validate(m);
    return m;
}

inline std::vector<MetaRecord> load_meta_records(const std::filesystem::path& path) {
    std::vector<MetaRecord> out;
    jsonl::for_each_line(path, [&](const nlohmann::json& j, std::size_t lineno) {
        try {
            out.push_back(meta_from_json(j));
        } catch (const Error& e) {
            throw ParseError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    });
    return out;
}

inline void write_meta_records(const std::filesystem::path& path, std::span<const MetaRecord> records) {
    std::string text;
    for (const MetaRecord& m : records) {
        text += to_json(m).dump();
        text += '\n';
    }
    jsonl::write_text_atomic(path, text);
}

// ---------------------------------------------------------------------------
// Stage errors
// ---------------------------------------------------------------------------

/// Model output did not follow the stage wire format. Carries the raw text
/// so failed generations can be audited.
class StageParseError : public Error {
public:
    StageParseError(const std::string& what, std::string raw_text)
        : Error(what), raw_text_(std::move(raw_text)) {}
    const std::string& raw_text() const { return raw_text_; }

private:
    std::string raw_text_;
};

/// The model produced fewer usable responses than requested.
class ShortOutputError : public StageParseError {
public:
    using StageParseError::StageParseError;
};

// ---------------------------------------------------------------------------
// Wire format
// ---------------------------------------------------------------------------
//
// Every generation stage must reply in fenced, field-tagged blocks:
//
//   ```
//   QUESTION: ...
//   ANSWER: ...
//   KNOWLEDGE: ...
//   ```
//
// A field runs from its tag to the next tag or the end of the block. Blocks
// that do not parse are dropped (and logged); they never poison the batch.

namespace wire {

inline std::vector<std::string> fenced_blocks(std::string_view text) {
    std::vector<std::string> blocks;
    std::optional<std::string> current;
    for (const std::string& line : strings::split_lines(text)) {
        if (strings::trim(line).starts_with("```")) {
            if (current) {
                blocks.push_back(std::move(*current));
                current.reset();
            } else {
                current = std::string{};
            }
            continue;
        }
        if (current) {
            *current += line;
            *current += '\n';
        }
    }
    // An unterminated fence is malformed and is ignored.
    return blocks;
}

/// Parses "TAG: value" fields (":" or "："), value continuing until the next
/// tag line. Returns (tag, value) pairs in order of appearance.
inline std::vector<std::pair<std::string, std::string>> tagged_fields(
    std::string_view block, std::span<const std::string_view> tags) {
    std::vector<std::pair<std::string, std::string>> fields;
    std::string* active = nullptr;
    for (const std::string& line : strings::split_lines(block)) {
        bool started = false;
        for (std::string_view tag : tags) {
            const std::string trimmed = strings::trim(line);
            if (!trimmed.starts_with(tag)) continue;
            std::string_view rest = std::string_view(trimmed).substr(tag.size());
            if (rest.starts_with(":")) {
                rest.remove_prefix(1);
            } else if (rest.starts_with("：")) {
                rest.remove_prefix(std::string_view("：").size());
            } else {
                continue;
            }
            fields.emplace_back(std::string(tag), strings::trim(rest));
            active = &fields.back().second;
            started = true;
            break;
        }
        if (!started && active) {
            *active += "\n" + line;
        }
    }
    for (auto& [tag, value] : fields) value = strings::trim(value);
    return fields;
}

inline std::optional<std::string> field_value(
    const std::vector<std::pair<std::string, std::string>>& fields, std::string_view tag) {
    for (const auto& [t, v] : fields) {
        if (t == tag) return v;
    }
    return std::nullopt;
}

} // namespace wire

// ---------------------------------------------------------------------------
// Primary label election
// ---------------------------------------------------------------------------

/// Most frequent label; ties broken by taxonomy declaration order
/// (FactFab < AttrErr < EntErr < RelErr < SpaErr < RefErr).
inline HallucinationType primary_label_of(std::span<const HallucinationType> labels) {
    if (labels.empty()) throw ValidationError("cannot elect a primary label from no labels");
    HallucinationType best = HallucinationType::FactFab;
    std::size_t best_count = 0;
    for (HallucinationType t : kAllHallucinationTypes) {
        const std::size_t count =
            static_cast<std::size_t>(std::count(labels.begin(), labels.end(), t));
        if (count > best_count) {
            best = t;
            best_count = count;
        }
    }
    return best;
}

/// Assembles an Unverified MetaRecord from stage outputs. The id is a stable
/// content digest so reruns produce identical ids regardless of scheduling.
inline MetaRecord build_meta(const QaDraft& draft, std::vector<std::string> responses,
                             std::vector<HallucinationType> labels, Topic topic) {
    if (responses.size() != labels.size()) {
        throw ValidationError("responses and labels must have equal length");
    }
    MetaRecord m;
    m.id = draft.doc_id + "-" +
           hashing::hex64(hashing::fnv1a64(draft.question + "\x1f" + draft.correct_answer)).substr(0, 12);
    m.doc_id = draft.doc_id;
    m.knowledge = draft.knowledge;
    m.question = draft.question;
    m.correct_answer = draft.correct_answer;
    m.hallucinated_responses = std::move(responses);
    m.labels = std::move(labels);
    m.primary_label = primary_label_of(m.labels);
    m.topic = std::move(topic);
    m.status = RecordStatus::Unverified;
    validate(m);
    return m;
}

// ---------------------------------------------------------------------------
// Generator
// ---------------------------------------------------------------------------

struct GeneratorOptions {
    std::string model;
    DecodingSettings decoding;
    int k = 3;                     // hallucinated responses per question
    int max_questions_per_doc = 15;
    int workers = 1;
};

/// Drives the three-stage generation protocol: extract QA pairs from a
/// document, generate k hallucinated responses per question, then label each
/// response with its hallucination type.
class Generator {
public:
    Generator(LlmGateway& gateway, GeneratorOptions options)
        : gateway_(gateway), options_(std::move(options)) {
        if (options_.k < 1) throw ConfigError("k must be >= 1");
    }

    std::vector<QaDraft> generate_qa(const KnowledgeDocument& doc, const PromptTemplate& tpl) const {
        require_stage(tpl, PromptStage::QaGen);
        const std::string input = "【主题】" + doc.topic.name() + "\n【知识文档】\n" + doc.text;
        const std::string reply = call(tpl, input, "generate.qa").text;

        static const std::string_view tags[] = {"QUESTION", "ANSWER", "KNOWLEDGE"};
        std::vector<QaDraft> drafts;
        for (const std::string& block : wire::fenced_blocks(reply)) {
            auto fields = wire::tagged_fields(block, tags);
            auto question = wire::field_value(fields, "QUESTION");
            auto answer = wire::field_value(fields, "ANSWER");
            auto knowledge = wire::field_value(fields, "KNOWLEDGE");
            if (!question || !answer || !knowledge || question->empty() || answer->empty() ||
                knowledge->empty()) {
                log_warn("generate", "malformed_qa_block", {{"doc_id", doc.id}, {"block", block}});
                continue;
            }
            drafts.push_back({doc.id, *knowledge, *question, *answer});
        }
        if (drafts.empty()) {
            log_warn("generate", "qa_parse_error", {{"doc_id", doc.id}, {"raw", reply}});
        }
        return drafts;
    }

    std::vector<std::string> generate_hallucinated(const QaDraft& draft, const PromptTemplate& tpl,
                                                   int k) const {
        require_stage(tpl, PromptStage::HaluGen);
        if (k < 1) throw ValidationError("k must be >= 1");
        const std::string input = "【问题】" + draft.question + "\n【正确答案】" + draft.correct_answer +
                                  "\n【背景知识】" + draft.knowledge + "\n【需要的幻觉答复数量】" +
                                  std::to_string(k);
        const std::string reply = call(tpl, input, "generate.halu").text;

        static const std::string_view tags[] = {"RESPONSE"};
        const std::string gold = strings::normalize_answer(draft.correct_answer);
        std::vector<std::string> responses;
        for (const std::string& block : wire::fenced_blocks(reply)) {
            for (const auto& [tag, value] : wire::tagged_fields(block, tags)) {
                if (value.empty()) continue;
                if (strings::normalize_answer(value) == gold) {
                    // A "hallucinated" response that matches the correct answer
                    // violates the contradiction requirement.
                    log_warn("generate", "response_equals_answer", {{"doc_id", draft.doc_id}});
                    continue;
                }
                responses.push_back(value);
                if (responses.size() == static_cast<std::size_t>(k)) return responses;
            }
        }
        throw ShortOutputError("model produced " + std::to_string(responses.size()) +
                                   " usable hallucinated responses, need " + std::to_string(k),
                               reply);
    }

    std::vector<HallucinationType> generate_labels(const QaDraft& draft,
                                                   std::span<const std::string> responses,
                                                   const PromptTemplate& tpl) const {
        require_stage(tpl, PromptStage::LabelGen);
        std::string input = "【问题】" + draft.question + "\n【正确答案】" + draft.correct_answer + "\n";
        for (std::size_t i = 0; i < responses.size(); ++i) {
            input += "【幻觉答复" + std::to_string(i + 1) + "】" + responses[i] + "\n";
        }
        const std::string reply = call(tpl, input, "generate.label").text;

        static const std::string_view tags[] = {"LABEL"};
        std::vector<HallucinationType> labels;
        for (const std::string& block : wire::fenced_blocks(reply)) {
            for (const auto& [tag, value] : wire::tagged_fields(block, tags)) {
                auto parsed = try_parse_hallucination_type(value);
                if (!parsed) {
                    throw StageParseError("unknown hallucination label \"" + value + "\"", reply);
                }
                labels.push_back(*parsed);
            }
        }
        if (labels.size() != responses.size()) {
            throw StageParseError("expected " + std::to_string(responses.size()) + " labels, got " +
                                      std::to_string(labels.size()),
                                  reply);
        }
        return labels;
    }

    const GeneratorOptions& options() const { return options_; }

private:
    static void require_stage(const PromptTemplate& tpl, PromptStage expected) {
        if (tpl.stage != expected) {
            throw ValidationError(std::string("prompt template stage mismatch: expected ") +
                                  std::string(stage_name(expected)) + ", got " +
                                  std::string(stage_name(tpl.stage)));
        }
    }

    CompletionResponse call(const PromptTemplate& tpl, const std::string& input,
                            std::string tag) const {
        CompletionRequest request;
        request.model = options_.model;
        request.user_text = render(tpl, input);
        request.decoding = options_.decoding;
        request.tag = std::move(tag);
        return gateway_.complete(request);
    }

    LlmGateway& gateway_;
    GeneratorOptions options_;
};

/// The prompt set the generator runs with, one template per stage.
struct StagePrompts {
    PromptTemplate qa_gen;
    PromptTemplate halu_gen;
    PromptTemplate label_gen;

    const PromptTemplate& by_stage(PromptStage s) const {
        switch (s) {
            case PromptStage::QaGen: return qa_gen;
            case PromptStage::HaluGen: return halu_gen;
            case PromptStage::LabelGen: return label_gen;
        }
        return qa_gen;
    }

    PromptTemplate& by_stage(PromptStage s) {
        switch (s) {
            case PromptStage::QaGen: return qa_gen;
            case PromptStage::HaluGen: return halu_gen;
            case PromptStage::LabelGen: return label_gen;
        }
        return qa_gen;
    }

    int max_version() const {
        return std::max({qa_gen.version, halu_gen.version, label_gen.version});
    }
};

inline StagePrompts load_stage_prompts(const std::filesystem::path& prompt_dir) {
    return {load_latest_template(prompt_dir, PromptStage::QaGen),
            load_latest_template(prompt_dir, PromptStage::HaluGen),
            load_latest_template(prompt_dir, PromptStage::LabelGen)};
}

/// Runs all three stages over a document batch. Documents fan out across
/// workers; stages within one question stay sequential. Records that fail a
/// stage are dropped and logged, never partially emitted. Output order is
/// (document order, draft order), independent of scheduling.
inline std::vector<MetaRecord> run_generation(std::span<const KnowledgeDocument> docs,
                                              const StagePrompts& prompts, LlmGateway& gateway,
                                              const GeneratorOptions& options) {
    Generator gen(gateway, options);
    std::vector<KnowledgeDocument> doc_list(docs.begin(), docs.end());

    auto per_doc = [&](const KnowledgeDocument& doc) -> std::vector<MetaRecord> {
        std::vector<MetaRecord> records;
        std::vector<QaDraft> drafts;
        try {
            drafts = gen.generate_qa(doc, prompts.qa_gen);
        } catch (const GatewayError& e) {
            log_error("generate", "qa_stage_failed", {{"doc_id", doc.id}, {"error", e.what()}});
            return records;
        }
        if (drafts.size() > static_cast<std::size_t>(options.max_questions_per_doc)) {
            drafts.resize(static_cast<std::size_t>(options.max_questions_per_doc));
        }
        std::unordered_set<std::string> seen;
        for (const QaDraft& draft : drafts) {
            if (!seen.insert(draft.question + "\x1f" + draft.correct_answer).second) {
                log_warn("generate", "duplicate_draft", {{"doc_id", doc.id}});
                continue;
            }
            try {
                std::vector<std::string> responses =
                    gen.generate_hallucinated(draft, prompts.halu_gen, options.k);
                std::vector<HallucinationType> labels =
                    gen.generate_labels(draft, responses, prompts.label_gen);
                records.push_back(build_meta(draft, std::move(responses), std::move(labels), doc.topic));
            } catch (const StageParseError& e) {
                log_warn("generate", "record_dropped",
                         {{"doc_id", doc.id}, {"question", draft.question}, {"error", e.what()}});
            } catch (const GatewayError& e) {
                log_error("generate", "stage_failed",
                          {{"doc_id", doc.id}, {"question", draft.question}, {"error", e.what()}});
            }
        }
        return records;
    };

    std::vector<std::vector<MetaRecord>> per_doc_records =
        parallel_map(doc_list, per_doc, options.workers);
    std::vector<MetaRecord> all;
    for (auto& batch : per_doc_records) {
        for (auto& r : batch) all.push_back(std::move(r));
    }
    return all;
}

} // namespace halogen
