#pragma once

#include <array>
#include <algorithm>
#include <optional>
#include <span>
#include <string>
#include <unordered_set>
#include <variant>
#include <vector>

#include <json.hpp>

#include "halogen/errors.hpp"
#include "halogen/generator.hpp"
#include "halogen/random.hpp"
#include "halogen/strings.hpp"

namespace halogen {

// ---------------------------------------------------------------------------
// Benchmark items
// ---------------------------------------------------------------------------

enum class BenchmarkFormat { Generative, SingleChoice, TrueFalse };

inline std::string_view format_name(BenchmarkFormat f) {
    switch (f) {
        case BenchmarkFormat::Generative: return "generative";
        case BenchmarkFormat::SingleChoice: return "single_choice";
        case BenchmarkFormat::TrueFalse: return "true_false";
    }
    return "generative";
}

inline BenchmarkFormat parse_format(std::string_view text) {
    const std::string key = strings::lower_ascii(strings::trim(text));
    if (key == "generative") return BenchmarkFormat::Generative;
    if (key == "single_choice") return BenchmarkFormat::SingleChoice;
    if (key == "true_false") return BenchmarkFormat::TrueFalse;
    throw ParseError("unknown benchmark format: \"" + std::string(text) + "\"");
}

struct GenerativePayload {
    std::string question;
    std::string gold_answer;
    bool operator==(const GenerativePayload&) const = default;
};

struct ChoicePayload {
    std::string question_text;
    std::array<std::string, 4> options;
    int answer_index = 0; // position of the gold answer after shuffling
    bool operator==(const ChoicePayload&) const = default;
};

enum class TfSource { FromCorrect, FromHallucinated };

struct TrueFalsePayload {
    std::string statement_question;
    bool truth = false; // true iff built from the correct answer
    TfSource source = TfSource::FromCorrect;
    std::optional<int> source_index; // which hallucinated response, when false
    bool operator==(const TrueFalsePayload&) const = default;
};

struct BenchmarkItem {
    std::string item_id;
    std::string meta_id;
    Topic topic;
    HallucinationType primary_label = HallucinationType::FactFab;
    std::variant<GenerativePayload, ChoicePayload, TrueFalsePayload> payload;

    BenchmarkFormat format() const {
        if (std::holds_alternative<GenerativePayload>(payload)) return BenchmarkFormat::Generative;
        if (std::holds_alternative<ChoicePayload>(payload)) return BenchmarkFormat::SingleChoice;
        return BenchmarkFormat::TrueFalse;
    }

    bool operator==(const BenchmarkItem&) const = default;
};

inline nlohmann::json to_json(const BenchmarkItem& item) {
    nlohmann::json j = {{"item_id", item.item_id},
                        {"meta_id", item.meta_id},
                        {"format", std::string(format_name(item.format()))},
                        {"topic", item.topic.name()},
                        {"primary_label", std::string(code(item.primary_label))}};
    if (const auto* g = std::get_if<GenerativePayload>(&item.payload)) {
        j["question"] = g->question;
        j["gold_answer"] = g->gold_answer;
    } else if (const auto* c = std::get_if<ChoicePayload>(&item.payload)) {
        j["question_text"] = c->question_text;
        j["options"] = c->options;
        j["answer_index"] = c->answer_index;
    } else if (const auto* t = std::get_if<TrueFalsePayload>(&item.payload)) {
        j["statement_question"] = t->statement_question;
        j["truth"] = t->truth;
        j["source"] = t->source == TfSource::FromCorrect ? "correct" : "hallucinated";
        if (t->source_index) j["source_index"] = *t->source_index;
    }
    return j;
}

inline BenchmarkItem item_from_json(const nlohmann::json& j) {
    BenchmarkItem item;
    item.item_id = j.at("item_id").get<std::string>();
    item.meta_id = j.at("meta_id").get<std::string>();
    item.topic = Topic::parse(j.at("topic").get<std::string>());
    item.primary_label = parse_hallucination_type(j.at("primary_label").get<std::string>());
    switch (parse_format(j.at("format").get<std::string>())) {
        case BenchmarkFormat::Generative: {
            GenerativePayload p;
            p.question = j.at("question").get<std::string>();
            p.gold_answer = j.at("gold_answer").get<std::string>();
            item.payload = std::move(p);
            break;
        }
        case BenchmarkFormat::SingleChoice: {
            ChoicePayload p;
            p.question_text = j.at("question_text").get<std::string>();
            auto opts = j.at("options").get<std::vector<std::string>>();
            if (opts.size() != 4) throw ParseError("single-choice item must carry 4 options");
            std::copy(opts.begin(), opts.end(), p.options.begin());
            p.answer_index = j.at("answer_index").get<int>();
            if (p.answer_index < 0 || p.answer_index > 3) {
                throw ParseError("answer_index out of range");
            }
            item.payload = std::move(p);
            break;
        }
        case BenchmarkFormat::TrueFalse: {
            TrueFalsePayload p;
            p.statement_question = j.at("statement_question").get<std::string>();
            p.truth = j.at("truth").get<bool>();
            p.source = j.at("source").get<std::string>() == "correct" ? TfSource::FromCorrect
                                                                      : TfSource::FromHallucinated;
            if (j.contains("source_index")) p.source_index = j.at("source_index").get<int>();
            if (p.truth != (p.source == TfSource::FromCorrect)) {
                throw ParseError("true/false item truth flag contradicts its source");
            }
            item.payload = std::move(p);
            break;
        }
    }
    return item;
}

// ---------------------------------------------------------------------------
// Format construction
// ---------------------------------------------------------------------------

// 判断对错 statement template; English mirror:
// "True or false: for the question "{q}", is the answer "{a}" correct?"
inline constexpr std::string_view kTrueFalseTemplate =
    "判断对错：对于问题「{q}」，回答「{a}」是否正确？";

inline std::string render_tf_statement(std::string_view question, std::string_view answer) {
    std::string text(kTrueFalseTemplate);
    auto substitute = [&text](std::string_view token, std::string_view value) {
        const std::size_t pos = text.find(token);
        text.replace(pos, token.size(), value);
    };
    substitute("{q}", question);
    substitute("{a}", answer);
    return text;
}

inline void require_verified(const MetaRecord& meta) {
    if (meta.status != RecordStatus::Verified) {
        throw ValidationError("record " + meta.id + " is " + std::string(status_name(meta.status)) +
                              "; only verified records may be aggregated");
    }
}

/// One generative item per verified record; the gold answer is the record's
/// correct answer.
inline BenchmarkItem to_generative(const MetaRecord& meta) {
    require_verified(meta);
    BenchmarkItem item;
    item.item_id = meta.id + ":gen";
    item.meta_id = meta.id;
    item.topic = meta.topic;
    item.primary_label = meta.primary_label;
    item.payload = GenerativePayload{meta.question, meta.correct_answer};
    return item;
}

/// Exactly two true/false items per record: one true statement from the
/// correct answer, one false statement from a seeded-uniform choice among the
/// hallucinated responses. The per-record substream keeps the draw
/// independent of processing order.
inline std::array<BenchmarkItem, 2> to_true_false(const MetaRecord& meta, std::uint64_t seed) {
    require_verified(meta);
    BenchmarkItem true_item;
    true_item.item_id = meta.id + ":tf-0";
    true_item.meta_id = meta.id;
    true_item.topic = meta.topic;
    true_item.primary_label = meta.primary_label;
    true_item.payload = TrueFalsePayload{render_tf_statement(meta.question, meta.correct_answer),
                                         true, TfSource::FromCorrect, std::nullopt};

    rng::Engine eng = rng::make_stream(seed, meta.id + "/tf");
    const int pick = static_cast<int>(rng::bounded(eng, meta.hallucinated_responses.size()));
    BenchmarkItem false_item;
    false_item.item_id = meta.id + ":tf-1";
    false_item.meta_id = meta.id;
    false_item.topic = meta.topic;
    false_item.primary_label = meta.primary_label;
    false_item.payload = TrueFalsePayload{
        render_tf_statement(meta.question, meta.hallucinated_responses[static_cast<std::size_t>(pick)]),
        false, TfSource::FromHallucinated, pick};
    return {std::move(true_item), std::move(false_item)};
}

/// Builds a four-option single-choice item, or nothing when the hallucinated
/// responses are not pairwise distinct after normalization (trim, collapse
/// whitespace, strip terminal punctuation). Options are the correct answer
/// plus three hallucinated responses in seeded-shuffled order.
inline std::optional<BenchmarkItem> to_single_choice(const MetaRecord& meta, std::uint64_t seed) {
    require_verified(meta);
    const std::size_t k = meta.hallucinated_responses.size();
    if (k < 3) return std::nullopt;
    std::unordered_set<std::string> normalized;
    for (const std::string& r : meta.hallucinated_responses) {
        if (!normalized.insert(strings::normalize_option(r)).second) return std::nullopt;
    }

    std::array<std::string, 4> options = {meta.correct_answer, meta.hallucinated_responses[0],
                                          meta.hallucinated_responses[1],
                                          meta.hallucinated_responses[2]};
    std::array<int, 4> order = {0, 1, 2, 3};
    rng::Engine eng = rng::make_stream(seed, meta.id + "/choice");
    rng::shuffle(order.begin(), order.end(), eng);

    ChoicePayload payload;
    payload.question_text = "单项选择：" + meta.question;
    for (int i = 0; i < 4; ++i) {
        payload.options[static_cast<std::size_t>(i)] = options[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])];
        if (order[static_cast<std::size_t>(i)] == 0) payload.answer_index = i;
    }

    BenchmarkItem item;
    item.item_id = meta.id + ":choice";
    item.meta_id = meta.id;
    item.topic = meta.topic;
    item.primary_label = meta.primary_label;
    item.payload = std::move(payload);
    return item;
}

// ---------------------------------------------------------------------------
// Aggregation
// ---------------------------------------------------------------------------

struct BenchmarkStats {
    std::size_t generative = 0;
    std::size_t single_choice = 0;
    std::size_t true_false = 0;

    std::size_t total() const { return generative + single_choice + true_false; }
    bool operator==(const BenchmarkStats&) const = default;
};

inline nlohmann::json to_json(const BenchmarkStats& s) {
    return {{"generative", s.generative},
            {"single_choice", s.single_choice},
            {"true_false", s.true_false},
            {"total", s.total()}};
}

struct Benchmark {
    std::vector<BenchmarkItem> generative;
    std::vector<BenchmarkItem> single_choice;
    std::vector<BenchmarkItem> true_false;

    BenchmarkStats stats() const {
        return {generative.size(), single_choice.size(), true_false.size()};
    }

    std::vector<const BenchmarkItem*> all_items_sorted() const {
        std::vector<const BenchmarkItem*> items;
        items.reserve(stats().total());
        for (const auto& i : generative) items.push_back(&i);
        for (const auto& i : single_choice) items.push_back(&i);
        for (const auto& i : true_false) items.push_back(&i);
        std::sort(items.begin(), items.end(),
                  [](const BenchmarkItem* a, const BenchmarkItem* b) { return a->item_id < b->item_id; });
        return items;
    }
};

/// Converts verified records into the three formats. Every input must be
/// Verified — the pipeline boundary enforces that rejected or unverified
/// records never leak into a benchmark. Items are ordered by item_id.
inline Benchmark aggregate(std::span<const MetaRecord> metas, std::uint64_t seed) {
    Benchmark bench;
    std::unordered_set<std::string> ids;
    for (const MetaRecord& meta : metas) {
        require_verified(meta);
        if (!ids.insert(meta.id).second) {
            throw ValidationError("duplicate meta record id \"" + meta.id + "\"");
        }
        bench.generative.push_back(to_generative(meta));
        auto tf = to_true_false(meta, seed);
        bench.true_false.push_back(std::move(tf[0]));
        bench.true_false.push_back(std::move(tf[1]));
        if (auto choice = to_single_choice(meta, seed)) {
            bench.single_choice.push_back(std::move(*choice));
        }
    }
    auto by_id = [](const BenchmarkItem& a, const BenchmarkItem& b) { return a.item_id < b.item_id; };
    std::sort(bench.generative.begin(), bench.generative.end(), by_id);
    std::sort(bench.single_choice.begin(), bench.single_choice.end(), by_id);
    std::sort(bench.true_false.begin(), bench.true_false.end(), by_id);
    return bench;
}

inline void write_items(const std::filesystem::path& path, std::span<const BenchmarkItem> items) {
    std::string text;
    for (const BenchmarkItem& item : items) {
        text += to_json(item).dump();
        text += '\n';
    }
    jsonl::write_text_atomic(path, text);
}

inline std::vector<BenchmarkItem> load_items(const std::filesystem::path& path) {
    std::vector<BenchmarkItem> out;
    jsonl::for_each_line(path, [&](const nlohmann::json& j, std::size_t lineno) {
        try {
            out.push_back(item_from_json(j));
        } catch (const Error& e) {
            throw ParseError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    });
    return out;
}

inline void write_benchmark(const std::filesystem::path& dir, const Benchmark& bench) {
    write_items(dir / "benchmark_generative.jsonl", bench.generative);
    write_items(dir / "benchmark_choice.jsonl", bench.single_choice);
    write_items(dir / "benchmark_tf.jsonl", bench.true_false);
    jsonl::write_text_atomic(dir / "stats.json", to_json(bench.stats()).dump(2) + "\n");
}

inline Benchmark load_benchmark(const std::filesystem::path& dir) {
    Benchmark bench;
    bench.generative = load_items(dir / "benchmark_generative.jsonl");
    bench.single_choice = load_items(dir / "benchmark_choice.jsonl");
    bench.true_false = load_items(dir / "benchmark_tf.jsonl");
    return bench;
}

} // namespace halogen
