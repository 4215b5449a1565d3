#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>

#include "halogen/errors.hpp"
#include "halogen/strings.hpp"

namespace halogen {

/// The six fine-grained hallucination error types. Declaration order is
/// meaningful: it is the tie-break order when electing a record's primary
/// label.
enum class HallucinationType {
    FactFab, // fabricated concepts or facts with no real-world basis
    AttrErr, // wrong attribute (function, composition, feature) of a real object
    EntErr,  // wrong entity (person, work, event) contradicting world knowledge
    RelErr,  // wrong relationship between entities (quantity, order, comparison)
    SpaErr,  // wrong time or place of an event, event content itself intact
    RefErr,  // made-up references or links
};

inline constexpr std::array<HallucinationType, 6> kAllHallucinationTypes = {
    HallucinationType::FactFab, HallucinationType::AttrErr, HallucinationType::EntErr,
    HallucinationType::RelErr,  HallucinationType::SpaErr,  HallucinationType::RefErr,
};

inline constexpr int declaration_index(HallucinationType t) {
    return static_cast<int>(t);
}

inline constexpr bool is_valid(HallucinationType t) {
    return static_cast<int>(t) >= 0 && static_cast<int>(t) < 6;
}

constexpr std::string_view code(HallucinationType t) {
    switch (t) {
        case HallucinationType::FactFab: return "FactFab";
        case HallucinationType::AttrErr: return "AttrErr";
        case HallucinationType::EntErr: return "EntErr";
        case HallucinationType::RelErr: return "RelErr";
        case HallucinationType::SpaErr: return "SpaErr";
        case HallucinationType::RefErr: return "RefErr";
    }
    return "";
}

constexpr std::string_view long_name(HallucinationType t) {
    switch (t) {
        case HallucinationType::FactFab: return "Factual Fabrication";
        case HallucinationType::AttrErr: return "Attribute Error";
        case HallucinationType::EntErr: return "Entity Error";
        case HallucinationType::RelErr: return "Relation Error";
        case HallucinationType::SpaErr: return "Spatiotemporal Error";
        case HallucinationType::RefErr: return "Reference Error";
    }
    return "";
}

constexpr std::string_view chinese_name(HallucinationType t) {
    switch (t) {
        case HallucinationType::FactFab: return "虚构事实";
        case HallucinationType::AttrErr: return "属性错误";
        case HallucinationType::EntErr: return "实体错误";
        case HallucinationType::RelErr: return "关系错误";
        case HallucinationType::SpaErr: return "时空幻觉";
        case HallucinationType::RefErr: return "虚假引用";
    }
    return "";
}

/// Accepts the short code ("SpaErr"), the long name ("Spatiotemporal Error")
/// or the Chinese name, case-insensitively for ASCII.
inline std::optional<HallucinationType> try_parse_hallucination_type(std::string_view text) {
    const std::string key = strings::lower_ascii(strings::collapse_whitespace(text));
    for (HallucinationType t : kAllHallucinationTypes) {
        if (key == strings::lower_ascii(code(t))) return t;
        if (key == strings::lower_ascii(long_name(t))) return t;
        if (key == chinese_name(t)) return t;
    }
    return std::nullopt;
}

inline HallucinationType parse_hallucination_type(std::string_view text) {
    if (auto t = try_parse_hallucination_type(text)) return *t;
    throw ParseError("unknown hallucination type: \"" + std::string(text) + "\"");
}

} // namespace halogen
