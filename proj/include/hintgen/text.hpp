#pragma once

#include <cctype>
#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace hintgen::text {

inline bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
inline bool is_alnum(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }
inline bool is_punct(char c) { return std::ispunct(static_cast<unsigned char>(c)) != 0; }

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && is_space(s.front()))
        s.remove_prefix(1);
    while (!s.empty() && is_space(s.back()))
        s.remove_suffix(1);
    return s;
}

inline std::string trim_copy(std::string_view s) { return std::string(trim(s)); }

inline std::string to_lower(std::string_view s) {
    std::string out(s);
    for (char &c : out)
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

/// Lowercased runs of ASCII alphanumerics; everything else separates tokens.
/// Shared by the stub embedding backend, BLEU and ROUGE.
inline std::vector<std::string> alnum_tokens(std::string_view s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (is_alnum(c)) {
            cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        } else if (!cur.empty()) {
            out.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty())
        out.push_back(std::move(cur));
    return out;
}

inline bool contains_icase(std::string_view haystack, std::string_view needle) {
    if (needle.empty())
        return true;
    return to_lower(haystack).find(to_lower(needle)) != std::string::npos;
}

/// Makes a generated question end with exactly one '?'.
inline std::string as_question(std::string_view s) {
    std::string_view t = trim(s);
    while (!t.empty() && (t.back() == '?' || t.back() == '.' || t.back() == '!' || is_space(t.back())))
        t.remove_suffix(1);
    std::string out(t);
    out.push_back('?');
    return out;
}

inline std::string strip_trailing_question_marks(std::string_view s) {
    std::string_view t = trim(s);
    while (!t.empty() && t.back() == '?')
        t.remove_suffix(1);
    return std::string(trim(t));
}

inline std::uint64_t fnv1a64(std::string_view s, std::uint64_t seed = 0) {
    std::uint64_t h = 1469598103934665603ULL ^ seed;
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ULL;
    }
    return h;
}

inline std::uint64_t splitmix64(std::uint64_t &state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Deterministic unit vector for a key. Independent keys are quasi-orthogonal
/// for large dimensions (expected |cos| ~ 1/sqrt(dim)).
inline std::vector<double> hash_unit_vector(std::string_view key, std::uint64_t seed, std::size_t dim) {
    std::uint64_t state = fnv1a64(key, seed);
    std::vector<double> v(dim);
    double norm2 = 0.0;
    for (std::size_t i = 0; i < dim; ++i) {
        // uniform in [-1, 1)
        double u = static_cast<double>(splitmix64(state) >> 11) * 0x1.0p-53;
        v[i] = 2.0 * u - 1.0;
        norm2 += v[i] * v[i];
    }
    double inv = 1.0 / std::sqrt(norm2);
    for (double &x : v)
        x *= inv;
    return v;
}

inline std::string join(const std::vector<std::string> &parts, std::string_view sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i)
            out += sep;
        out += parts[i];
    }
    return out;
}

inline std::string replace_all(std::string s, std::string_view from, std::string_view to) {
    if (from.empty())
        return s;
    std::size_t pos = 0;
    while ((pos = s.find(from, pos)) != std::string::npos) {
        s.replace(pos, from.size(), to);
        pos += to.size();
    }
    return s;
}

} // namespace hintgen::text
