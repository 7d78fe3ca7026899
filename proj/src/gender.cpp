#include "comedia/gender.hpp"

#include "comedia/text.hpp"

namespace comedia {

std::string_view to_string(Gender g) {
    switch (g) {
        case Gender::Male: return "Male";
        case Gender::Female: return "Female";
        case Gender::Undefined: return "Undefined";
    }
    return "Undefined";
}

Gender gender_from_annotation(std::string_view text) {
    const auto lower = to_lower(normalize_whitespace(text));
    if (lower == "male") return Gender::Male;
    if (lower == "female") return Gender::Female;
    return Gender::Undefined;
}

std::optional<Gender> parse_gender(std::string_view text) {
    if (text == "Male") return Gender::Male;
    if (text == "Female") return Gender::Female;
    if (text == "Undefined") return Gender::Undefined;
    return std::nullopt;
}

}  // namespace comedia
