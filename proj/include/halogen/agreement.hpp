#pragma once

#include <algorithm>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "halogen/errors.hpp"
#include "halogen/jsonl.hpp"
#include "halogen/random.hpp"
#include "halogen/strings.hpp"

namespace halogen {

// ---------------------------------------------------------------------------
// Annotation matrix
// ---------------------------------------------------------------------------

/// Sparse (unit, rater) → categorical label mapping for a human audit.
/// Missing cells are allowed: real audits have dropouts.
struct AnnotationMatrix {
    std::vector<std::string> units;  // first-seen order
    std::vector<std::string> raters; // first-seen order
    std::map<std::string, std::map<std::string, std::string>> values; // unit → rater → label

    void add(const std::string& unit, const std::string& rater, const std::string& label) {
        if (unit.empty() || rater.empty() || label.empty()) {
            throw ValidationError("annotation fields must be non-empty");
        }
        auto& row = values[unit];
        if (!row.emplace(rater, label).second) {
            throw ValidationError("duplicate annotation for unit \"" + unit + "\", rater \"" + rater +
                                  "\"");
        }
        if (std::find(units.begin(), units.end(), unit) == units.end()) units.push_back(unit);
        if (std::find(raters.begin(), raters.end(), rater) == raters.end()) raters.push_back(rater);
    }
};

/// annotations.csv: header "unit_id,rater_id,label", one annotation per row.
/// Fields are plain (no quoting); commas inside fields are not supported.
inline AnnotationMatrix load_annotations_csv(const std::filesystem::path& path) {
    AnnotationMatrix matrix;
    const std::string text = jsonl::read_text(path);
    std::size_t lineno = 0;
    for (const std::string& line : strings::split_lines(text)) {
        ++lineno;
        const std::string trimmed = strings::trim(line);
        if (trimmed.empty()) continue;
        if (lineno == 1 && strings::lower_ascii(trimmed).starts_with("unit_id")) continue;
        std::vector<std::string> fields;
        std::size_t start = 0;
        for (;;) {
            std::size_t comma = trimmed.find(',', start);
            if (comma == std::string::npos) {
                fields.push_back(strings::trim(trimmed.substr(start)));
                break;
            }
            fields.push_back(strings::trim(trimmed.substr(start, comma - start)));
            start = comma + 1;
        }
        if (fields.size() != 3) {
            throw ParseError(path.string() + ":" + std::to_string(lineno) +
                             ": expected 3 fields (unit_id,rater_id,label)");
        }
        try {
            matrix.add(fields[0], fields[1], fields[2]);
        } catch (const ValidationError& e) {
            throw ParseError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return matrix;
}

inline void write_annotations_csv(const std::filesystem::path& path, const AnnotationMatrix& matrix) {
    std::string text = "unit_id,rater_id,label\n";
    for (const std::string& unit : matrix.units) {
        auto row = matrix.values.find(unit);
        if (row == matrix.values.end()) continue;
        for (const auto& [rater, label] : row->second) {
            text += unit + "," + rater + "," + label + "\n";
        }
    }
    jsonl::write_text_atomic(path, text);
}

// ---------------------------------------------------------------------------
// Majority vote
// ---------------------------------------------------------------------------

/// Strict-majority label: a label wins only when it accounts for more than
/// half of all votes; otherwise the unit is Unresolved (nullopt). Order of
/// votes never matters.
inline std::optional<std::string> majority_vote(std::span<const std::string> labels) {
    if (labels.empty()) throw ValidationError("majority vote requires at least one label");
    std::map<std::string_view, std::size_t> counts;
    for (const std::string& l : labels) counts[l] += 1;
    for (const auto& [label, count] : counts) {
        if (count * 2 > labels.size()) return std::string(label);
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Krippendorff's alpha (nominal metric)
// ---------------------------------------------------------------------------

/// alpha = 1 - D_o / D_e over the coincidence matrix of pairable values.
/// Units with fewer than two values are excluded (nothing to pair). With a
/// single category and zero observed disagreement the statistic is defined
/// as 1.0; fewer than two pairable values overall is a domain error.
inline double krippendorff_alpha(const AnnotationMatrix& matrix) {
    std::map<std::string, std::size_t> totals; // pairable value count per category
    std::size_t n = 0;
    double observed_num = 0.0; // sum over units of (#disagreeing ordered pairs) / (m_u - 1)

    for (const auto& [unit, row] : matrix.values) {
        const std::size_t m = row.size();
        if (m < 2) continue;
        std::map<std::string_view, std::size_t> counts;
        for (const auto& [rater, label] : row) counts[label] += 1;
        for (const auto& [label, count] : counts) {
            totals[std::string(label)] += count;
        }
        n += m;
        // ordered disagreeing pairs in this unit: m(m-1) - sum_c c(c-1)
        std::size_t agreeing = 0;
        for (const auto& [label, count] : counts) agreeing += count * (count - 1);
        observed_num += static_cast<double>(m * (m - 1) - agreeing) / static_cast<double>(m - 1);
    }

    if (n < 2) {
        throw DomainError("krippendorff_alpha requires at least two pairable values");
    }

    double expected_num = 0.0; // sum_{c != k} n_c * n_k
    for (const auto& [c, nc] : totals) {
        for (const auto& [k, nk] : totals) {
            if (c != k) expected_num += static_cast<double>(nc) * static_cast<double>(nk);
        }
    }

    const double d_o = observed_num / static_cast<double>(n);
    const double d_e = expected_num / static_cast<double>(n * (n - 1));
    if (d_e == 0.0) {
        // Only one category ever appears among pairable values.
        if (d_o == 0.0) return 1.0;
        throw DomainError("krippendorff_alpha undefined: zero expected disagreement with nonzero "
                          "observed disagreement");
    }
    return 1.0 - d_o / d_e;
}

// ---------------------------------------------------------------------------
// Audit sampling
// ---------------------------------------------------------------------------

/// Seeded uniform sample without replacement, returned in the input's order
/// (stable). n larger than the pool is an error.
template <class T>
std::vector<T> sample_for_annotation(std::span<const T> records, std::size_t n, std::uint64_t seed) {
    if (n > records.size()) {
        throw ValidationError("cannot sample " + std::to_string(n) + " records from " +
                              std::to_string(records.size()));
    }
    rng::Engine eng = rng::make_stream(seed, "annotation-sample");
    std::vector<std::size_t> picked = rng::sample_indices(records.size(), n, eng);
    std::sort(picked.begin(), picked.end());
    std::vector<T> out;
    out.reserve(n);
    for (std::size_t i : picked) out.push_back(records[i]);
    return out;
}

template <class T>
std::vector<T> sample_for_annotation(const std::vector<T>& records, std::size_t n,
                                     std::uint64_t seed) {
    return sample_for_annotation(std::span<const T>(records), n, seed);
}

} // namespace halogen
