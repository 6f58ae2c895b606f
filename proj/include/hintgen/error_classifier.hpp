#pragma once

#include <string_view>

#include "hintgen/cause_effect.hpp"
#include "hintgen/error.hpp"
#include "hintgen/similarity.hpp"

namespace hintgen {

enum class ErrorCategory {
    IncorrectCauseIncorrectEffect,
    CorrectCauseIncorrectEffect,
    IncorrectCauseCorrectEffect,
    MissingCauseCorrectEffect,
    /// Both parts match. Only reachable when the solution checker and the
    /// classifier disagree.
    NoDetectedError,
};

inline std::string_view to_string(ErrorCategory c) {
    switch (c) {
    case ErrorCategory::IncorrectCauseIncorrectEffect: return "IncorrectCauseIncorrectEffect";
    case ErrorCategory::CorrectCauseIncorrectEffect: return "CorrectCauseIncorrectEffect";
    case ErrorCategory::IncorrectCauseCorrectEffect: return "IncorrectCauseCorrectEffect";
    case ErrorCategory::MissingCauseCorrectEffect: return "MissingCauseCorrectEffect";
    case ErrorCategory::NoDetectedError: return "NoDetectedError";
    }
    return "NoDetectedError";
}

inline ErrorCategory error_category_from_string(std::string_view s) {
    for (auto c : {ErrorCategory::IncorrectCauseIncorrectEffect, ErrorCategory::CorrectCauseIncorrectEffect,
                   ErrorCategory::IncorrectCauseCorrectEffect, ErrorCategory::MissingCauseCorrectEffect,
                   ErrorCategory::NoDetectedError})
        if (to_string(c) == s)
            return c;
    throw ParseError("unknown error category '" + std::string(s) + "'");
}

/// Category from the two match outcomes. An empty student cause never
/// matches a present reference cause.
inline ErrorCategory category_from_matches(bool cause_matches, bool effect_matches, bool student_has_cause) {
    if (!cause_matches && !effect_matches)
        return ErrorCategory::IncorrectCauseIncorrectEffect;
    if (cause_matches && !effect_matches)
        return ErrorCategory::CorrectCauseIncorrectEffect;
    if (!cause_matches)
        return student_has_cause ? ErrorCategory::IncorrectCauseCorrectEffect
                                 : ErrorCategory::MissingCauseCorrectEffect;
    return ErrorCategory::NoDetectedError;
}

inline ErrorCategory classify(const Decomposition &student, const Decomposition &reference,
                              const EmbeddingBackend &backend, double tau, const IdfTable *idf = nullptr) {
    if (reference.effect.empty())
        throw ValidationError("reference decomposition has an empty effect");
    bool ce = is_match(student.cause, reference.cause, backend, tau, idf);
    bool ee = is_match(student.effect, reference.effect, backend, tau, idf);
    return category_from_matches(ce, ee, has_cause(student));
}

} // namespace hintgen
