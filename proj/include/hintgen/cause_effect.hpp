#pragma once

// Rule-based split of an answer into effect (the main answer) and cause
// (its justification). Rules, in precedence order:
//   (a) because-like  "E because C", "E since C", "E as C"
//   (b) if-then       "If C then E", "If C, E"     (cause keeps the "If")
//   (c) short comma   "E, C" with E at most 4 word tokens
//   (d) so-like       "C so E", "C therefore E", "C hence E", "C thus E"
//   (e) none          whole text is the effect, cause empty
// Within a rule the leftmost qualifying occurrence wins. A rule qualifies
// only if its effect segment is non-empty after trimming.

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hintgen/error.hpp"
#include "hintgen/text.hpp"

namespace hintgen {

enum class Connective { because_like, if_then, comma, so_like, none };

inline std::string_view to_string(Connective c) {
    switch (c) {
    case Connective::because_like: return "because_like";
    case Connective::if_then: return "if_then";
    case Connective::comma: return "comma";
    case Connective::so_like: return "so_like";
    case Connective::none: return "none";
    }
    return "none";
}

inline Connective connective_from_string(std::string_view s) {
    for (auto c : {Connective::because_like, Connective::if_then, Connective::comma, Connective::so_like,
                   Connective::none})
        if (to_string(c) == s)
            return c;
    throw ParseError("unknown connective '" + std::string(s) + "'");
}

/// Half-open byte range into the decomposed source text.
struct Span {
    std::size_t begin = 0;
    std::size_t end = 0;

    std::size_t size() const { return end - begin; }
    bool empty() const { return begin == end; }
    bool operator==(const Span &) const = default;
};

struct Decomposition {
    std::string cause;
    std::string effect;
    Connective connective = Connective::none;
    std::string connective_text;
    Span cause_span;
    Span effect_span;
    Span connective_span;

    bool operator==(const Decomposition &) const = default;
};

inline bool has_cause(const Decomposition &d) { return !d.cause.empty(); }

namespace detail {

struct WordToken {
    std::string lower;
    Span span;
};

inline bool is_word_char(std::string_view s, std::size_t i) {
    if (text::is_alnum(s[i]))
        return true;
    // apostrophe inside a word: it's, don't
    return s[i] == '\'' && i > 0 && i + 1 < s.size() && text::is_alnum(s[i - 1]) && text::is_alnum(s[i + 1]);
}

inline std::vector<WordToken> word_tokens(std::string_view s, std::size_t lo, std::size_t hi) {
    std::vector<WordToken> out;
    std::size_t i = lo;
    while (i < hi) {
        if (!is_word_char(s, i)) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j < hi && is_word_char(s, j))
            ++j;
        out.push_back({text::to_lower(s.substr(i, j - i)), {i, j}});
        i = j;
    }
    return out;
}

inline std::size_t count_words(std::string_view s, Span span) {
    return word_tokens(s, span.begin, span.end).size();
}

inline bool is_separator_punct(char c) { return c == ',' || c == ';' || c == ':' || c == '-'; }

/// Trims whitespace and separator punctuation from both ends; a segment with
/// no alphanumerics left is punctuation-only residue and becomes empty.
inline Span trim_segment(std::string_view s, std::size_t b, std::size_t e) {
    while (b < e && (text::is_space(s[b]) || is_separator_punct(s[b])))
        ++b;
    while (e > b && (text::is_space(s[e - 1]) || is_separator_punct(s[e - 1])))
        --e;
    bool any_alnum = false;
    for (std::size_t i = b; i < e && !any_alnum; ++i)
        any_alnum = text::is_alnum(s[i]);
    if (!any_alnum)
        return {b, b};
    return {b, e};
}

inline Decomposition make(std::string_view s, Connective kind, Span connective, Span cause, Span effect) {
    Decomposition d;
    d.connective = kind;
    d.connective_span = connective;
    d.connective_text = std::string(s.substr(connective.begin, connective.size()));
    d.cause_span = cause;
    d.effect_span = effect;
    d.cause = std::string(s.substr(cause.begin, cause.size()));
    d.effect = std::string(s.substr(effect.begin, effect.size()));
    return d;
}

inline bool is_because_like(std::string_view w) { return w == "because" || w == "since" || w == "as"; }

inline bool is_so_like(std::string_view w) {
    return w == "so" || w == "therefore" || w == "hence" || w == "thus";
}

inline std::optional<Decomposition> rule_because(std::string_view s, const std::vector<WordToken> &toks,
                                                 std::size_t lo, std::size_t hi) {
    for (std::size_t i = 0; i < toks.size(); ++i) {
        if (!is_because_like(toks[i].lower))
            continue;
        Span effect = trim_segment(s, lo, toks[i].span.begin);
        Span cause = trim_segment(s, toks[i].span.end, hi);
        if (effect.empty())
            continue;
        if (toks[i].lower == "as") {
            // "as" only as a conjunction between two clauses
            if (i > 0 && toks[i - 1].lower == "such")
                continue;
            // comparative "as deep as", "as well as"
            if ((i + 2 < toks.size() && toks[i + 2].lower == "as") || (i >= 2 && toks[i - 2].lower == "as"))
                continue;
            if (count_words(s, cause) < 3)
                continue;
        }
        return make(s, Connective::because_like, toks[i].span, cause, effect);
    }
    return std::nullopt;
}

inline std::optional<Decomposition> rule_if_then(std::string_view s, const std::vector<WordToken> &toks,
                                                 std::size_t lo, std::size_t hi) {
    if (toks.empty() || toks.front().lower != "if")
        return std::nullopt;
    for (std::size_t i = 1; i < toks.size(); ++i) {
        if (toks[i].lower != "then")
            continue;
        Span cause = trim_segment(s, lo, toks[i].span.begin);
        Span effect = trim_segment(s, toks[i].span.end, hi);
        if (!effect.empty())
            return make(s, Connective::if_then, toks[i].span, cause, effect);
    }
    std::size_t comma = s.find(',', toks.front().span.end);
    if (comma == std::string_view::npos || comma >= hi)
        return std::nullopt;
    Span cause = trim_segment(s, lo, comma);
    Span effect = trim_segment(s, comma + 1, hi);
    if (effect.empty())
        return std::nullopt;
    return make(s, Connective::if_then, {comma, comma + 1}, cause, effect);
}

inline std::optional<Decomposition> rule_comma(std::string_view s, std::size_t lo, std::size_t hi) {
    std::size_t comma = s.find(',', lo);
    if (comma == std::string_view::npos || comma >= hi)
        return std::nullopt;
    Span effect = trim_segment(s, lo, comma);
    if (effect.empty() || count_words(s, effect) > 4)
        return std::nullopt;
    Span cause = trim_segment(s, comma + 1, hi);
    return make(s, Connective::comma, {comma, comma + 1}, cause, effect);
}

inline std::optional<Decomposition> rule_so(std::string_view s, const std::vector<WordToken> &toks, std::size_t lo,
                                            std::size_t hi) {
    for (const auto &t : toks) {
        if (!is_so_like(t.lower))
            continue;
        Span cause = trim_segment(s, lo, t.span.begin);
        Span effect = trim_segment(s, t.span.end, hi);
        if (!effect.empty())
            return make(s, Connective::so_like, t.span, cause, effect);
    }
    return std::nullopt;
}

} // namespace detail

/// Splits `text` into cause and effect. Spans index into `text` itself.
/// Throws ValidationError for empty or whitespace-only input.
inline Decomposition decompose(std::string_view text) {
    std::size_t lo = 0, hi = text.size();
    while (lo < hi && text::is_space(text[lo]))
        ++lo;
    while (hi > lo && text::is_space(text[hi - 1]))
        --hi;
    if (lo == hi)
        throw ValidationError("cannot decompose empty text");

    auto toks = detail::word_tokens(text, lo, hi);
    if (auto d = detail::rule_because(text, toks, lo, hi))
        return *d;
    if (auto d = detail::rule_if_then(text, toks, lo, hi))
        return *d;
    if (auto d = detail::rule_comma(text, lo, hi))
        return *d;
    if (auto d = detail::rule_so(text, toks, lo, hi))
        return *d;

    Span effect = detail::trim_segment(text, lo, hi);
    if (effect.empty())
        effect = {lo, hi};
    return detail::make(text, Connective::none, {lo, lo}, {lo, lo}, effect);
}

} // namespace hintgen
