#pragma once

#include <istream>
#include <string>
#include <unordered_map>
#include <vector>

#include "gbmep/errors.hpp"

namespace gbmep {

// Splits one CSV line: commas separate fields, double quotes protect commas,
// doubled quotes inside a quoted field escape a quote. Embedded newlines are
// not supported.
inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
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
            fields.push_back(std::move(field));
            field.clear();
        } else if (c != '\r') {
            field.push_back(c);
        }
    }
    fields.push_back(std::move(field));
    return fields;
}

inline std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        else out.push_back(c);
    }
    out.push_back('"');
    return out;
}

// Header-indexed row reader.
class CsvReader {
  public:
    explicit CsvReader(std::istream& in) : in_(in) {
        std::string line;
        if (!std::getline(in_, line)) throw schema_error("csv input is empty");
        header_ = split_csv_line(line);
        for (std::size_t i = 0; i < header_.size(); ++i) index_.emplace(header_[i], i);
    }

    const std::vector<std::string>& header() const { return header_; }

    // Index of a required column; throws naming the column when absent.
    std::size_t column(const std::string& name) const {
        auto it = index_.find(name);
        if (it == index_.end()) throw schema_error("missing required column '" + name + "'");
        return it->second;
    }

    bool has_column(const std::string& name) const { return index_.count(name) > 0; }

    bool next(std::vector<std::string>& row) {
        std::string line;
        while (std::getline(in_, line)) {
            if (line.empty() || line == "\r") continue;
            row = split_csv_line(line);
            return true;
        }
        return false;
    }

  private:
    std::istream& in_;
    std::vector<std::string> header_;
    std::unordered_map<std::string, std::size_t> index_;
};

} // namespace gbmep
