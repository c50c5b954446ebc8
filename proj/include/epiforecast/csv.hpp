#pragma once

#include "epiforecast/errors.hpp"

#include <cstddef>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace epi::csv {

/// One parsed record and the 1-based physical line it started on.
struct Record {
    std::vector<std::string> fields;
    std::size_t line = 0;
};

/**
 * Streaming RFC 4180 reader: comma separated, double-quote quoting with ""
 * escapes, CRLF or LF line endings, embedded newlines inside quotes. A UTF-8
 * byte-order mark at the start of the stream is skipped.
 */
class Reader {
public:
    explicit Reader(std::istream& in) : in_(in) {
        if (in_.peek() == 0xEF) {
            char bom[3];
            in_.read(bom, 3);
            if (!(static_cast<unsigned char>(bom[1]) == 0xBB &&
                  static_cast<unsigned char>(bom[2]) == 0xBF)) {
                throw ParseError("invalid byte-order mark", 1);
            }
        }
    }

    /// Next non-empty record, or nullopt at end of input.
    std::optional<Record> next() {
        while (true) {
            if (in_.peek() == std::char_traits<char>::eof()) return std::nullopt;
            Record rec;
            rec.line = line_;
            std::string field;
            bool quoted = false;
            bool after_quote = false;
            bool any = false;
            while (true) {
                const int ci = in_.get();
                if (ci == std::char_traits<char>::eof()) {
                    if (quoted) throw ParseError("unterminated quoted field", rec.line);
                    break;
                }
                const char c = static_cast<char>(ci);
                any = true;
                if (quoted) {
                    if (c == '"') {
                        if (in_.peek() == '"') {
                            in_.get();
                            field.push_back('"');
                        } else {
                            quoted = false;
                            after_quote = true;
                        }
                    } else {
                        if (c == '\n') ++line_;
                        field.push_back(c);
                    }
                    continue;
                }
                if (c == ',') {
                    rec.fields.push_back(std::move(field));
                    field.clear();
                    after_quote = false;
                } else if (c == '\r') {
                    if (in_.peek() == '\n') in_.get();
                    ++line_;
                    break;
                } else if (c == '\n') {
                    ++line_;
                    break;
                } else if (c == '"' && field.empty() && !after_quote) {
                    quoted = true;
                } else {
                    if (after_quote) {
                        throw ParseError("unexpected character after closing quote", rec.line);
                    }
                    field.push_back(c);
                }
            }
            if (!any) return std::nullopt;
            rec.fields.push_back(std::move(field));
            if (rec.fields.size() == 1 && rec.fields[0].empty()) continue; // blank line
            return rec;
        }
    }

private:
    std::istream& in_;
    std::size_t line_ = 1;
};

inline std::string_view trim(std::string_view s) noexcept {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
    return s;
}

/// Quote a field if it contains a comma, quote, or line break.
inline std::string escape(std::string_view field) {
    if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

inline void write_row(std::ostream& out, const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) out << ',';
        out << escape(fields[i]);
    }
    out << '\n';
}

} // namespace epi::csv
