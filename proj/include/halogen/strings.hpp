#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <string>
#include <string_view>
#include <vector>

namespace halogen::strings {

inline bool is_space(char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

inline std::string trim(std::string_view s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && is_space(s[b])) ++b;
    while (e > b && is_space(s[e - 1])) --e;
    return std::string(s.substr(b, e - b));
}

/// Trims and collapses every internal whitespace run to a single space.
inline std::string collapse_whitespace(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    bool in_run = false;
    for (char c : s) {
        if (is_space(c)) {
            in_run = true;
            continue;
        }
        if (in_run && !out.empty()) out.push_back(' ');
        in_run = false;
        out.push_back(c);
    }
    return out;
}

namespace detail {
// Trailing punctuation stripped when normalizing answer options. Includes the
// common full-width CJK sentence marks (multi-byte UTF-8 suffixes).
inline constexpr std::array<std::string_view, 12> kTerminalPunct = {
    "\xE3\x80\x82", // 。
    "\xEF\xBC\x81", // ！
    "\xEF\xBC\x9F", // ？
    "\xEF\xBC\x8C", // ，
    "\xEF\xBC\x9B", // ；
    "\xEF\xBC\x9A", // ：
    "\xE3\x80\x81", // 、
    "\xE2\x80\xA6", // …
    ".", "!", "?", ",",
};
} // namespace detail

inline std::string strip_terminal_punct(std::string_view s) {
    std::string out(s);
    for (;;) {
        while (!out.empty() && is_space(out.back())) out.pop_back();
        bool stripped = false;
        for (std::string_view p : detail::kTerminalPunct) {
            if (out.size() >= p.size() && std::string_view(out).ends_with(p)) {
                out.resize(out.size() - p.size());
                stripped = true;
                break;
            }
        }
        if (!stripped) break;
    }
    // ';' and ':' handled separately so ASCII smileys in fixtures stay intact
    while (!out.empty() && (out.back() == ';' || out.back() == ':')) out.pop_back();
    return out;
}

/// Whitespace-insensitive form used for answer equality checks.
inline std::string normalize_answer(std::string_view s) {
    return collapse_whitespace(s);
}

/// Normalization used when testing answer options for distinctness:
/// trim, collapse internal whitespace, strip terminal punctuation.
inline std::string normalize_option(std::string_view s) {
    return strip_terminal_punct(collapse_whitespace(s));
}

inline std::string lower_ascii(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

inline bool contains(std::string_view hay, std::string_view needle) {
    return hay.find(needle) != std::string_view::npos;
}

inline bool icontains_ascii(std::string_view hay, std::string_view needle) {
    return contains(lower_ascii(hay), lower_ascii(needle));
}

inline std::vector<std::string> split_lines(std::string_view s) {
    std::vector<std::string> lines;
    std::size_t start = 0;
    while (start <= s.size()) {
        std::size_t nl = s.find('\n', start);
        if (nl == std::string_view::npos) {
            lines.emplace_back(s.substr(start));
            break;
        }
        std::string_view line = s.substr(start, nl - start);
        if (line.ends_with("\r")) line.remove_suffix(1);
        lines.emplace_back(line);
        start = nl + 1;
    }
    return lines;
}

inline bool is_ascii_alnum(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) != 0;
}

} // namespace halogen::strings
