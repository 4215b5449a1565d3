#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "halogen/errors.hpp"
#include "halogen/jsonl.hpp"
#include "halogen/strings.hpp"
#include "halogen/taxonomy.hpp"

namespace halogen {

// ---------------------------------------------------------------------------
// PromptTemplate
// ---------------------------------------------------------------------------

enum class PromptStage { QaGen, HaluGen, LabelGen };

inline constexpr std::array<PromptStage, 3> kAllPromptStages = {
    PromptStage::QaGen, PromptStage::HaluGen, PromptStage::LabelGen};

constexpr std::string_view stage_name(PromptStage s) {
    switch (s) {
        case PromptStage::QaGen: return "qa_gen";
        case PromptStage::HaluGen: return "halu_gen";
        case PromptStage::LabelGen: return "label_gen";
    }
    return "";
}

inline PromptStage parse_stage(std::string_view text) {
    const std::string key = strings::lower_ascii(strings::trim(text));
    for (PromptStage s : kAllPromptStages) {
        if (key == stage_name(s)) return s;
    }
    throw ParseError("unknown prompt stage: \"" + std::string(text) + "\"");
}

struct PromptExample {
    std::string input;
    std::string output;
    bool operator==(const PromptExample&) const = default;
};

/// A structured generation prompt: task instruction, ordered requirement
/// rules, worked examples, and a placeholder token marking where the target
/// input is substituted. The optimizer replaces whole templates, never
/// patches them, so every version is auditable on disk.
struct PromptTemplate {
    PromptStage stage = PromptStage::QaGen;
    std::string instruction;
    std::vector<std::string> rules;
    std::vector<PromptExample> examples;
    std::string target_slot = "{{INPUT}}";
    int version = 0;
    std::optional<int> parent_version;

    bool operator==(const PromptTemplate&) const = default;
};

inline void validate(const PromptTemplate& t) {
    if (t.rules.empty()) throw ValidationError("prompt template must declare at least one rule");
    if (t.instruction.empty()) throw ValidationError("prompt template instruction must be non-empty");
    if (t.target_slot.empty()) throw ValidationError("prompt template target slot must be non-empty");
    // The slot token may appear only at its dedicated position in the layout.
    if (strings::contains(t.instruction, t.target_slot)) {
        throw ValidationError("target slot token must not appear in the instruction");
    }
    for (const std::string& r : t.rules) {
        if (strings::contains(r, t.target_slot)) {
            throw ValidationError("target slot token must not appear in a rule");
        }
    }
    for (const PromptExample& e : t.examples) {
        if (strings::contains(e.input, t.target_slot) || strings::contains(e.output, t.target_slot)) {
            throw ValidationError("target slot token must not appear in an example");
        }
    }
}

/// Assembles the prompt layout with the target slot token still in place.
inline std::string layout(const PromptTemplate& t) {
    std::string out = strings::trim(t.instruction);
    out += "\n\n要求：\n";
    for (std::size_t i = 0; i < t.rules.size(); ++i) {
        out += std::to_string(i + 1) + ". " + strings::trim(t.rules[i]) + "\n";
    }
    if (!t.examples.empty()) {
        out += "\n";
        for (std::size_t i = 0; i < t.examples.size(); ++i) {
            out += "示例" + std::to_string(i + 1) + "：\n【输入】\n" + strings::trim(t.examples[i].input) +
                   "\n【输出】\n" + strings::trim(t.examples[i].output) + "\n\n";
        }
    } else {
        out += "\n";
    }
    out += "【目标输入】\n" + t.target_slot + "\n";
    return out;
}

/// Renders instruction → rules → examples → target input, substituting
/// target_input at the slot token. Pure; identical inputs produce identical
/// strings.
inline std::string render(const PromptTemplate& t, std::string_view target_input) {
    if (target_input.empty()) throw ValidationError("render requires a non-empty target input");
    validate(t);
    std::string text = layout(t);
    const std::size_t pos = text.find(t.target_slot);
    text.replace(pos, t.target_slot.size(), target_input);
    return text;
}

// ---------------------------------------------------------------------------
// Template file format
// ---------------------------------------------------------------------------
//
// Plain text, line oriented. Header directives first, then sections:
//
//   @stage qa_gen
//   @version 3
//   @parent 2
//   @target_slot {{INPUT}}
//   @instruction
//   ...text...
//   @rule
//   ...text...
//   @example_input
//   ...text...
//   @example_output
//   ...text...

inline std::string serialize_template(const PromptTemplate& t) {
    std::string out;
    out += "@stage " + std::string(stage_name(t.stage)) + "\n";
    out += "@version " + std::to_string(t.version) + "\n";
    if (t.parent_version) out += "@parent " + std::to_string(*t.parent_version) + "\n";
    out += "@target_slot " + t.target_slot + "\n";
    out += "@instruction\n" + strings::trim(t.instruction) + "\n";
    for (const std::string& r : t.rules) out += "@rule\n" + strings::trim(r) + "\n";
    for (const PromptExample& e : t.examples) {
        out += "@example_input\n" + strings::trim(e.input) + "\n";
        out += "@example_output\n" + strings::trim(e.output) + "\n";
    }
    return out;
}

inline PromptTemplate parse_template(std::string_view text) {
    PromptTemplate t;
    t.target_slot = "{{INPUT}}";
    bool saw_stage = false;

    std::string section;          // active multi-line section directive
    std::string body;             // accumulated section body
    std::optional<std::string> pending_example_input;

    auto flush = [&]() {
        const std::string content = strings::trim(body);
        body.clear();
        if (section.empty()) return;
        if (section == "instruction") {
            t.instruction = content;
        } else if (section == "rule") {
            if (content.empty()) throw ParseError("template rule section is empty");
            t.rules.push_back(content);
        } else if (section == "example_input") {
            pending_example_input = content;
        } else if (section == "example_output") {
            if (!pending_example_input) {
                throw ParseError("@example_output without a preceding @example_input");
            }
            t.examples.push_back({*pending_example_input, content});
            pending_example_input.reset();
        }
        section.clear();
    };

    for (const std::string& raw : strings::split_lines(text)) {
        if (raw.starts_with("@")) {
            std::string line = strings::trim(raw);
            std::size_t sp = line.find(' ');
            std::string directive = sp == std::string::npos ? line.substr(1) : line.substr(1, sp - 1);
            std::string arg = sp == std::string::npos ? "" : strings::trim(line.substr(sp + 1));
            if (directive == "stage") {
                flush();
                t.stage = parse_stage(arg);
                saw_stage = true;
            } else if (directive == "version") {
                flush();
                t.version = std::stoi(arg);
            } else if (directive == "parent") {
                flush();
                t.parent_version = std::stoi(arg);
            } else if (directive == "target_slot") {
                flush();
                if (arg.empty()) throw ParseError("@target_slot requires a token argument");
                t.target_slot = arg;
            } else if (directive == "instruction" || directive == "rule" ||
                       directive == "example_input" || directive == "example_output") {
                flush();
                section = directive;
            } else {
                throw ParseError("unknown template directive @" + directive);
            }
            continue;
        }
        if (!section.empty()) {
            body += raw;
            body += '\n';
        } else if (!strings::trim(raw).empty()) {
            throw ParseError("template text outside any section: \"" + strings::trim(raw) + "\"");
        }
    }
    flush();
    if (pending_example_input) throw ParseError("@example_input without a matching @example_output");
    if (!saw_stage) throw ParseError("template is missing the @stage directive");
    validate(t);
    return t;
}

inline std::filesystem::path template_path(const std::filesystem::path& prompt_dir,
                                           PromptStage stage, int version) {
    return prompt_dir / std::string(stage_name(stage)) / ("v" + std::to_string(version) + ".txt");
}

inline PromptTemplate load_template(const std::filesystem::path& path) {
    try {
        return parse_template(jsonl::read_text(path));
    } catch (const ParseError& e) {
        throw ParseError(path.string() + ": " + e.what());
    } catch (const ValidationError& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
}

inline void store_template(const std::filesystem::path& prompt_dir, const PromptTemplate& t) {
    validate(t);
    jsonl::write_text_atomic(template_path(prompt_dir, t.stage, t.version), serialize_template(t));
}

/// Loads the highest version present for a stage.
inline PromptTemplate load_latest_template(const std::filesystem::path& prompt_dir,
                                           PromptStage stage) {
    namespace fs = std::filesystem;
    const fs::path dir = prompt_dir / std::string(stage_name(stage));
    if (!fs::is_directory(dir)) {
        throw IoError("prompt stage directory not found: " + dir.string());
    }
    int best = -1;
    for (const auto& entry : fs::directory_iterator(dir)) {
        const std::string name = entry.path().filename().string();
        if (name.starts_with("v") && name.ends_with(".txt")) {
            try {
                best = std::max(best, std::stoi(name.substr(1, name.size() - 5)));
            } catch (const std::exception&) {
                // ignore files that do not follow the v<N>.txt convention
            }
        }
    }
    if (best < 0) throw IoError("no prompt versions found under " + dir.string());
    return load_template(template_path(prompt_dir, stage, best));
}

// ---------------------------------------------------------------------------
// Rulebook
// ---------------------------------------------------------------------------

/// The verification rule sets: correctness rules, hallucination rules, and
/// one rule list per hallucination type for the label check. Rule order is
/// load-bearing (classification priority is expressed by it).
struct Rulebook {
    std::vector<std::string> correctness_rules;
    std::vector<std::string> hallucination_rules;
    std::map<HallucinationType, std::vector<std::string>> label_rules;

    bool operator==(const Rulebook&) const = default;
};

inline void validate(const Rulebook& rb) {
    if (rb.correctness_rules.empty()) throw ValidationError("rulebook has no correctness rules");
    if (rb.hallucination_rules.empty()) throw ValidationError("rulebook has no hallucination rules");
    for (HallucinationType t : kAllHallucinationTypes) {
        auto it = rb.label_rules.find(t);
        if (it == rb.label_rules.end() || it->second.empty()) {
            throw ValidationError("rulebook has no label rules for " + std::string(code(t)));
        }
    }
}

inline nlohmann::json to_json(const Rulebook& rb) {
    nlohmann::json labels = nlohmann::json::object();
    for (const auto& [type, rules] : rb.label_rules) labels[std::string(code(type))] = rules;
    return {{"correctness_rules", rb.correctness_rules},
            {"hallucination_rules", rb.hallucination_rules},
            {"label_rules", labels}};
}

inline Rulebook rulebook_from_json(const nlohmann::json& j) {
    Rulebook rb;
    rb.correctness_rules = j.at("correctness_rules").get<std::vector<std::string>>();
    rb.hallucination_rules = j.at("hallucination_rules").get<std::vector<std::string>>();
    for (const auto& [key, rules] : j.at("label_rules").items()) {
        rb.label_rules[parse_hallucination_type(key)] = rules.get<std::vector<std::string>>();
    }
    validate(rb);
    return rb;
}

inline Rulebook load_rulebook(const std::filesystem::path& path) {
    nlohmann::json j = nlohmann::json::parse(jsonl::read_text(path), nullptr, false);
    if (j.is_discarded()) throw ParseError("malformed rulebook JSON: " + path.string());
    try {
        return rulebook_from_json(j);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

inline void save_rulebook(const std::filesystem::path& path, const Rulebook& rb) {
    jsonl::write_text_atomic(path, to_json(rb).dump(2) + "\n");
}

} // namespace halogen
