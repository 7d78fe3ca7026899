#include "csv.hpp"

#include "comedia/error.hpp"

namespace comedia::csv {

std::vector<std::vector<std::string>> parse(std::string_view text) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> current;
    std::string value;
    bool quoted = false;
    bool field_started = false;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    value.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                value.push_back(c);
            }
            continue;
        }
        switch (c) {
            case '"': quoted = true; field_started = true; break;
            case ',':
                current.push_back(std::move(value));
                value.clear();
                field_started = true;
                break;
            case '\r': break;
            case '\n':
                if (field_started || !value.empty()) {
                    current.push_back(std::move(value));
                    rows.push_back(std::move(current));
                }
                current.clear();
                value.clear();
                field_started = false;
                break;
            default: value.push_back(c); field_started = true;
        }
    }
    if (quoted) throw Error(ErrorKind::InvalidArgument, "unterminated quoted CSV field");
    if (field_started || !value.empty()) {
        current.push_back(std::move(value));
        rows.push_back(std::move(current));
    }
    return rows;
}

std::string field(std::string_view value) {
    if (value.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(value);
    std::string out = "\"";
    for (const char c : value) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

std::string row(const std::vector<std::string>& fields) {
    std::string out;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) out.push_back(',');
        out += field(fields[i]);
    }
    out.push_back('\n');
    return out;
}

}  // namespace comedia::csv
