#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "halogen/errors.hpp"
#include "halogen/jsonl.hpp"
#include "halogen/random.hpp"
#include "halogen/strings.hpp"

namespace halogen {

// ---------------------------------------------------------------------------
// Topic
// ---------------------------------------------------------------------------

/// Document topic. The six named topics are closed; anything else maps to
/// Other with the original label preserved, so new domains never fail to
/// load.
struct Topic {
    enum class Kind {
        Celebrities,
        Entertainment,
        Education,
        Astrogeography,
        Biology,
        Culture,
        Other,
    };

    Kind kind = Kind::Other;
    std::string label; // set only when kind == Other

    static Topic make(Kind kind) {
        Topic t;
        t.kind = kind;
        return t;
    }

    static Topic other(std::string label) {
        Topic t;
        t.kind = Kind::Other;
        t.label = std::move(label);
        return t;
    }

    static Topic parse(std::string_view text) {
        static const std::pair<std::string_view, Kind> named[] = {
            {"celebrities", Kind::Celebrities}, {"entertainment", Kind::Entertainment},
            {"education", Kind::Education},     {"astrogeography", Kind::Astrogeography},
            {"biology", Kind::Biology},         {"culture", Kind::Culture},
        };
        const std::string key = strings::lower_ascii(strings::trim(text));
        for (auto [name, kind] : named) {
            if (key == name) return make(kind);
        }
        return other(strings::trim(text));
    }

    std::string name() const {
        switch (kind) {
            case Kind::Celebrities: return "Celebrities";
            case Kind::Entertainment: return "Entertainment";
            case Kind::Education: return "Education";
            case Kind::Astrogeography: return "Astrogeography";
            case Kind::Biology: return "Biology";
            case Kind::Culture: return "Culture";
            case Kind::Other: return label;
        }
        return label;
    }

    bool operator==(const Topic& rhs) const = default;
    bool operator<(const Topic& rhs) const {
        if (kind != rhs.kind) return kind < rhs.kind;
        return label < rhs.label;
    }
};

// ---------------------------------------------------------------------------
// KnowledgeDocument
// ---------------------------------------------------------------------------

/// A topic-tagged source text from which QA data is mined.
struct KnowledgeDocument {
    std::string id;
    Topic topic;
    std::string source; // provenance URL or name; free-form
    std::string text;

    bool operator==(const KnowledgeDocument&) const = default;
};

inline void validate_document(const KnowledgeDocument& doc) {
    if (doc.id.empty()) throw ValidationError("document id must be non-empty");
    if (doc.text.empty()) throw ValidationError("document text must be non-empty (id=" + doc.id + ")");
    if (doc.topic.kind == Topic::Kind::Other && doc.topic.label.empty()) {
        throw ValidationError("document topic must be non-empty (id=" + doc.id + ")");
    }
}

inline nlohmann::json to_json(const KnowledgeDocument& doc) {
    return {{"id", doc.id}, {"topic", doc.topic.name()}, {"source", doc.source}, {"text", doc.text}};
}

inline KnowledgeDocument document_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ParseError("document record must be a JSON object");
    for (const char* field : {"id", "topic", "source", "text"}) {
        if (!j.contains(field) || !j.at(field).is_string()) {
            throw ParseError(std::string("document record missing string field \"") + field + "\"");
        }
    }
    KnowledgeDocument doc;
    doc.id = j.at("id").get<std::string>();
    doc.topic = Topic::parse(j.at("topic").get<std::string>());
    doc.source = j.at("source").get<std::string>();
    doc.text = j.at("text").get<std::string>();
    validate_document(doc);
    return doc;
}

// ---------------------------------------------------------------------------
// Corpus I/O
// ---------------------------------------------------------------------------

/// Loads documents.jsonl (one object per line, fields {id, topic, source,
/// text}). Reports the offending line number for malformed records and
/// duplicate ids.
inline std::vector<KnowledgeDocument> load_corpus(const std::filesystem::path& path) {
    std::vector<KnowledgeDocument> docs;
    std::unordered_map<std::string, std::size_t> seen; // id -> first line
    jsonl::for_each_line(path, [&](const nlohmann::json& j, std::size_t lineno) {
        KnowledgeDocument doc;
        try {
            doc = document_from_json(j);
        } catch (const Error& e) {
            throw ParseError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
        auto [it, inserted] = seen.emplace(doc.id, lineno);
        if (!inserted) {
            throw ValidationError(path.string() + ":" + std::to_string(lineno) +
                                  ": duplicate document id \"" + doc.id + "\" (first seen on line " +
                                  std::to_string(it->second) + ")");
        }
        docs.push_back(std::move(doc));
    });
    return docs;
}

inline void write_corpus(const std::filesystem::path& path,
                         std::span<const KnowledgeDocument> docs) {
    std::unordered_set<std::string> ids;
    std::string text;
    for (const KnowledgeDocument& doc : docs) {
        validate_document(doc);
        if (!ids.insert(doc.id).second) {
            throw ValidationError("duplicate document id \"" + doc.id + "\"");
        }
        text += to_json(doc).dump();
        text += '\n';
    }
    jsonl::write_text_atomic(path, text);
}

// ---------------------------------------------------------------------------
// Corpus split
// ---------------------------------------------------------------------------

/// Disjoint train/validation document id sets drawn from one corpus.
struct CorpusSplit {
    std::vector<std::string> train_ids;
    std::vector<std::string> validation_ids;
    std::uint64_t seed = 0;
};

namespace detail {

// Largest-remainder allocation of `total` picks across per-group capacities.
inline std::vector<std::size_t> proportional_quota(const std::vector<std::size_t>& group_sizes,
                                                   std::size_t total) {
    std::size_t universe = 0;
    for (std::size_t s : group_sizes) universe += s;
    std::vector<std::size_t> quota(group_sizes.size(), 0);
    std::vector<std::pair<double, std::size_t>> remainders;
    std::size_t assigned = 0;
    for (std::size_t g = 0; g < group_sizes.size(); ++g) {
        double exact = universe == 0 ? 0.0
                                     : static_cast<double>(total) * static_cast<double>(group_sizes[g]) /
                                           static_cast<double>(universe);
        quota[g] = std::min(group_sizes[g], static_cast<std::size_t>(exact));
        assigned += quota[g];
        remainders.emplace_back(exact - static_cast<double>(quota[g]), g);
    }
    std::sort(remainders.begin(), remainders.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    for (const auto& [rem, g] : remainders) {
        if (assigned >= total) break;
        if (quota[g] < group_sizes[g]) {
            ++quota[g];
            ++assigned;
        }
    }
    // Distribute anything still missing to groups with spare capacity.
    for (std::size_t g = 0; assigned < total && g < quota.size(); ++g) {
        while (assigned < total && quota[g] < group_sizes[g]) {
            ++quota[g];
            ++assigned;
        }
    }
    return quota;
}

} // namespace detail

/// Samples disjoint train/validation id sets without replacement.
/// Deterministic for fixed (docs, counts, seed). When stratify_by_topic is
/// set, picks are allocated across topics proportionally to topic sizes.
inline CorpusSplit split_corpus(std::span<const KnowledgeDocument> docs, std::size_t n_train,
                                std::size_t n_val, std::uint64_t seed,
                                bool stratify_by_topic = false) {
    if (n_train + n_val > docs.size()) {
        throw ValidationError("insufficient documents: need " + std::to_string(n_train + n_val) +
                              ", corpus has " + std::to_string(docs.size()));
    }
    rng::Engine eng = rng::make_stream(seed, "corpus-split");
    CorpusSplit split;
    split.seed = seed;

    std::vector<std::size_t> picked; // n_train + n_val distinct doc indices, draw order
    if (!stratify_by_topic) {
        picked = rng::sample_indices(docs.size(), n_train + n_val, eng);
    } else {
        std::map<std::string, std::vector<std::size_t>> groups;
        for (std::size_t i = 0; i < docs.size(); ++i) groups[docs[i].topic.name()].push_back(i);
        std::vector<std::size_t> sizes;
        sizes.reserve(groups.size());
        for (const auto& [name, members] : groups) sizes.push_back(members.size());
        std::vector<std::size_t> quota = detail::proportional_quota(sizes, n_train + n_val);
        std::size_t g = 0;
        for (const auto& [name, members] : groups) {
            std::vector<std::size_t> local = rng::sample_indices(members.size(), quota[g], eng);
            for (std::size_t idx : local) picked.push_back(members[idx]);
            ++g;
        }
        rng::shuffle(picked, eng); // interleave topics before the train/val cut
    }

    std::vector<std::size_t> train(picked.begin(), picked.begin() + static_cast<std::ptrdiff_t>(n_train));
    std::vector<std::size_t> val(picked.begin() + static_cast<std::ptrdiff_t>(n_train), picked.end());
    std::sort(train.begin(), train.end());
    std::sort(val.begin(), val.end());
    for (std::size_t i : train) split.train_ids.push_back(docs[i].id);
    for (std::size_t i : val) split.validation_ids.push_back(docs[i].id);
    return split;
}

/// Resolves a list of ids back to documents, preserving id order.
inline std::vector<KnowledgeDocument> select_documents(std::span<const KnowledgeDocument> docs,
                                                       std::span<const std::string> ids) {
    std::unordered_map<std::string_view, const KnowledgeDocument*> by_id;
    for (const KnowledgeDocument& d : docs) by_id.emplace(d.id, &d);
    std::vector<KnowledgeDocument> out;
    out.reserve(ids.size());
    for (const std::string& id : ids) {
        auto it = by_id.find(id);
        if (it == by_id.end()) throw ValidationError("unknown document id \"" + id + "\"");
        out.push_back(*it->second);
    }
    return out;
}

} // namespace halogen
