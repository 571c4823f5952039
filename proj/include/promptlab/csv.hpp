#pragma once

// Minimal RFC-4180 CSV reading/writing. Product names contain commas and
// quotes, so fields are quoted when needed and doubled-quote escapes are
// honored on the way back in.

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace promptlab {

inline std::string csv_escape(const std::string& field) {
    bool needs_quotes = field.find_first_of(",\"\r\n") != std::string::npos;
    if (!needs_quotes) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += "\"\"";
        else out.push_back(c);
    }
    out += "\"";
    return out;
}

inline std::string csv_row(const std::vector<std::string>& fields) {
    std::string out;
    for (size_t i = 0; i < fields.size(); ++i) {
        if (i) out.push_back(',');
        out += csv_escape(fields[i]);
    }
    out.push_back('\n');
    return out;
}

/// Parse one logical CSV record starting at *pos in text; advances *pos past
/// the record's trailing newline. Handles quoted fields with embedded
/// newlines/commas and "" escapes.
inline std::vector<std::string> csv_parse_record(const std::string& text, size_t& pos) {
    std::vector<std::string> fields;
    std::string cur;
    bool in_quotes = false;
    bool done = false;
    while (pos < text.size() && !done) {
        char c = text[pos];
        if (in_quotes) {
            if (c == '"') {
                if (pos + 1 < text.size() && text[pos + 1] == '"') {
                    cur.push_back('"');
                    ++pos;
                } else {
                    in_quotes = false;
                }
            } else {
                cur.push_back(c);
            }
            ++pos;
        } else {
            switch (c) {
                case '"': in_quotes = true; ++pos; break;
                case ',': fields.push_back(cur); cur.clear(); ++pos; break;
                case '\r': ++pos; break;
                case '\n': ++pos; done = true; break;
                default: cur.push_back(c); ++pos; break;
            }
        }
    }
    if (in_quotes) throw std::runtime_error("csv: unterminated quoted field");
    fields.push_back(cur);
    return fields;
}

/// Read a whole CSV file into rows of fields. Skips blank lines.
inline std::vector<std::vector<std::string>> csv_read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("csv: cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    std::string text = ss.str();
    std::vector<std::vector<std::string>> rows;
    size_t pos = 0;
    while (pos < text.size()) {
        auto fields = csv_parse_record(text, pos);
        if (fields.size() == 1 && fields[0].empty()) continue;  // blank line
        rows.push_back(std::move(fields));
    }
    return rows;
}

}  // namespace promptlab
