#pragma once

// Minimal element tree over libexpat. Element names have any namespace
// prefix stripped; attribute names are kept verbatim ("xml:id").

#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace comedia::xml {

struct Element;

using Node = std::variant<std::string, std::unique_ptr<Element>>;

struct Element {
    std::string name;
    std::map<std::string, std::string> attributes;
    std::vector<Node> children;

    const std::string* attribute(std::string_view key) const;
    std::vector<const Element*> child_elements(std::string_view name = {}) const;
    const Element* first_child(std::string_view name) const;
    /// All descendant text in document order.
    std::string text() const;
};

/// Throws Error(XmlParse) with line/column on malformed input.
std::unique_ptr<Element> parse(std::string_view document);

bool is_well_formed(std::string_view document);

/// Depth-first search of element descendants by name.
void find_all(const Element& root, std::string_view name, std::vector<const Element*>& out);
const Element* find_first(const Element& root, std::string_view name);

}  // namespace comedia::xml
