#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <unordered_map>
#include <vector>

#include "crimeflow/common.hpp"

namespace crimeflow::csv {

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return std::move(ss).str();
}

/// Splits one record on commas. Double-quoted fields may contain commas and
/// doubled quotes. Trailing '\r' is ignored.
inline void split_record(std::string_view line, std::vector<std::string>& out) {
    out.clear();
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    std::string field;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(std::move(field));
            field.clear();
        } else {
            field.push_back(c);
        }
    }
    out.push_back(std::move(field));
}

/// Header-checked table reader. Blank lines are skipped; every record must
/// carry exactly as many fields as the header.
class Reader {
public:
    Reader(std::string path, std::string text) : path_(std::move(path)), text_(std::move(text)) {}

    static Reader open(const std::string& path) { return Reader(path, read_file(path)); }

    /// Reads the header and checks that every required column is present.
    void require_header(const std::vector<std::string>& required) {
        if (!next_raw()) {
            if (required.empty()) return;
            throw ParseError(path_, 1, "missing header");
        }
        header_ = fields_;
        for (std::size_t i = 0; i < header_.size(); ++i) index_[std::string(trim(header_[i]))] = i;
        for (const auto& col : required)
            if (!index_.count(col)) throw ParseError(path_, line_no_, "missing column '" + col + "'");
    }

    bool empty_body() const { return pos_ >= text_.size(); }

    /// Advances to the next record; false at end of input.
    bool next() {
        while (next_raw()) {
            if (fields_.size() == 1 && trim(fields_[0]).empty()) continue;
            if (fields_.size() != header_.size())
                throw ParseError(path_, line_no_,
                                 "expected " + std::to_string(header_.size()) + " fields, got " +
                                     std::to_string(fields_.size()));
            return true;
        }
        return false;
    }

    bool has(const std::string& column) const { return index_.count(column) > 0; }

    std::string_view field(const std::string& column) const {
        auto it = index_.find(column);
        if (it == index_.end()) throw ParseError(path_, line_no_, "no column '" + column + "'");
        return trim(fields_[it->second]);
    }

    double number(const std::string& column) const {
        auto s = field(column);
        double v = 0;
        auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc{} || p != s.data() + s.size())
            throw ParseError(path_, line_no_, "column '" + column + "': not a number: '" + std::string(s) + "'");
        return v;
    }

    std::int64_t integer(const std::string& column) const {
        auto s = field(column);
        std::int64_t v = 0;
        auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc{} || p != s.data() + s.size())
            throw ParseError(path_, line_no_, "column '" + column + "': not an integer: '" + std::string(s) + "'");
        return v;
    }

    const std::vector<std::string>& header() const { return header_; }
    std::size_t line() const { return line_no_; }
    const std::string& path() const { return path_; }

    [[noreturn]] void fail(const std::string& what) const { throw ParseError(path_, line_no_, what); }

private:
    static std::string_view trim(std::string_view s) {
        while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
        while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
        return s;
    }

    bool next_raw() {
        if (pos_ >= text_.size()) return false;
        auto end = text_.find('\n', pos_);
        if (end == std::string::npos) end = text_.size();
        split_record(std::string_view(text_).substr(pos_, end - pos_), fields_);
        pos_ = end + 1;
        ++line_no_;
        return true;
    }

    std::string path_;
    std::string text_;
    std::size_t pos_ = 0;
    std::size_t line_no_ = 0;
    std::vector<std::string> header_;
    std::vector<std::string> fields_;
    std::unordered_map<std::string, std::size_t, std::hash<std::string>> index_;
};

/// Quotes a field when it contains a delimiter, quote or newline.
inline std::string escape(std::string_view s) {
    if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

}  // namespace crimeflow::csv
