#pragma once

#include <optional>
#include <string_view>

namespace comedia {

enum class Gender { Male, Female, Undefined };

std::string_view to_string(Gender g);

/// Accepts the enum names and the TEI/DraCor spellings ("MALE", "female", ...).
/// Anything else maps to Undefined.
Gender gender_from_annotation(std::string_view text);

/// Strict inverse of to_string; nullopt for anything else.
std::optional<Gender> parse_gender(std::string_view text);

/// Class index used by the classifier: Male = 0, Female = 1.
inline constexpr int kMaleClass = 0;
inline constexpr int kFemaleClass = 1;

inline int class_index(Gender g) { return g == Gender::Female ? kFemaleClass : kMaleClass; }
inline Gender class_gender(int index) { return index == kFemaleClass ? Gender::Female : Gender::Male; }

}  // namespace comedia
