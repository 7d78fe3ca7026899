#include "xml_tree.hpp"

#include "comedia/error.hpp"

#include <expat.h>

#include <memory>

namespace comedia::xml {
namespace {

std::string local_name(const char* name) {
    std::string_view s(name);
    const auto colon = s.rfind(':');
    return std::string(colon == std::string_view::npos ? s : s.substr(colon + 1));
}

struct Builder {
    std::unique_ptr<Element> root;
    std::vector<Element*> stack;
};

void on_start(void* data, const XML_Char* name, const XML_Char** attrs) {
    auto* b = static_cast<Builder*>(data);
    auto element = std::make_unique<Element>();
    element->name = local_name(name);
    for (int i = 0; attrs[i]; i += 2) element->attributes.emplace(attrs[i], attrs[i + 1]);
    Element* raw = element.get();
    if (b->stack.empty()) {
        b->root = std::move(element);
    } else {
        b->stack.back()->children.emplace_back(std::move(element));
    }
    b->stack.push_back(raw);
}

void on_end(void* data, const XML_Char*) { static_cast<Builder*>(data)->stack.pop_back(); }

void on_text(void* data, const XML_Char* s, int len) {
    auto* b = static_cast<Builder*>(data);
    if (b->stack.empty()) return;
    auto& children = b->stack.back()->children;
    if (!children.empty()) {
        if (auto* text = std::get_if<std::string>(&children.back())) {
            text->append(s, static_cast<std::size_t>(len));
            return;
        }
    }
    children.emplace_back(std::string(s, static_cast<std::size_t>(len)));
}

struct ParserDeleter {
    void operator()(XML_Parser p) const { XML_ParserFree(p); }
};

}  // namespace

const std::string* Element::attribute(std::string_view key) const {
    auto it = attributes.find(std::string(key));
    return it == attributes.end() ? nullptr : &it->second;
}

std::vector<const Element*> Element::child_elements(std::string_view filter) const {
    std::vector<const Element*> out;
    for (const auto& child : children) {
        if (const auto* e = std::get_if<std::unique_ptr<Element>>(&child)) {
            if (filter.empty() || (*e)->name == filter) out.push_back(e->get());
        }
    }
    return out;
}

const Element* Element::first_child(std::string_view filter) const {
    for (const auto& child : children) {
        if (const auto* e = std::get_if<std::unique_ptr<Element>>(&child)) {
            if ((*e)->name == filter) return e->get();
        }
    }
    return nullptr;
}

std::string Element::text() const {
    std::string out;
    for (const auto& child : children) {
        if (const auto* s = std::get_if<std::string>(&child)) {
            out += *s;
        } else {
            out += std::get<std::unique_ptr<Element>>(child)->text();
        }
    }
    return out;
}

std::unique_ptr<Element> parse(std::string_view document) {
    std::unique_ptr<XML_ParserStruct, ParserDeleter> parser(XML_ParserCreate("UTF-8"));
    if (!parser) throw Error(ErrorKind::XmlParse, "cannot allocate parser");
    Builder builder;
    XML_SetUserData(parser.get(), &builder);
    XML_SetElementHandler(parser.get(), on_start, on_end);
    XML_SetCharacterDataHandler(parser.get(), on_text);
    if (XML_Parse(parser.get(), document.data(), static_cast<int>(document.size()), XML_TRUE) == XML_STATUS_ERROR) {
        throw Error(ErrorKind::XmlParse,
                    std::string(XML_ErrorString(XML_GetErrorCode(parser.get()))) + " at line " +
                        std::to_string(XML_GetCurrentLineNumber(parser.get())) + ", column " +
                        std::to_string(XML_GetCurrentColumnNumber(parser.get())));
    }
    if (!builder.root) throw Error(ErrorKind::XmlParse, "document has no root element");
    return std::move(builder.root);
}

bool is_well_formed(std::string_view document) {
    std::unique_ptr<XML_ParserStruct, ParserDeleter> parser(XML_ParserCreate("UTF-8"));
    if (!parser) return false;
    return XML_Parse(parser.get(), document.data(), static_cast<int>(document.size()), XML_TRUE) != XML_STATUS_ERROR;
}

void find_all(const Element& root, std::string_view name, std::vector<const Element*>& out) {
    for (const auto* child : root.child_elements()) {
        if (child->name == name) out.push_back(child);
        find_all(*child, name, out);
    }
}

const Element* find_first(const Element& root, std::string_view name) {
    for (const auto* child : root.child_elements()) {
        if (child->name == name) return child;
        if (const auto* hit = find_first(*child, name)) return hit;
    }
    return nullptr;
}

}  // namespace comedia::xml
