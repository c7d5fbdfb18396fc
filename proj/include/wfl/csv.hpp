#pragma once

// Small RFC-4180-style CSV layer: header + string rows, quoted fields when
// needed, floats always through one 9-significant-digit formatter so that
// emit -> parse round-trips and byte-identical reruns are testable.

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace wfl {

inline std::string format_g9(double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

inline std::string csv_escape(const std::string& field) {
    bool needs_quotes = false;
    for (char c : field)
        if (c == ',' || c == '"' || c == '\n' || c == '\r') {
            needs_quotes = true;
            break;
        }
    if (!needs_quotes) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

inline std::string csv_to_string(const CsvTable& table) {
    std::ostringstream out;
    for (std::size_t i = 0; i < table.header.size(); ++i) {
        if (i) out << ',';
        out << csv_escape(table.header[i]);
    }
    out << '\n';
    for (const auto& row : table.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) out << ',';
            out << csv_escape(row[i]);
        }
        out << '\n';
    }
    return out.str();
}

inline void write_csv(const CsvTable& table, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open CSV output file: " + path);
    out << csv_to_string(table);
    out.flush();
    if (!out) throw std::runtime_error("failed writing CSV output file: " + path);
}

/// Parses quoted fields, embedded commas/newlines, and CRLF endings. The
/// first record becomes the header.
inline CsvTable read_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open CSV input file: " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    CsvTable table;
    std::vector<std::string> record;
    std::string field;
    bool in_quotes = false;
    bool any_field = false;
    auto end_field = [&] {
        record.push_back(field);
        field.clear();
        any_field = false;
    };
    auto end_record = [&] {
        end_field();
        if (table.header.empty())
            table.header = std::move(record);
        else
            table.rows.push_back(std::move(record));
        record = {};
    };
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                field += c;
            }
            continue;
        }
        switch (c) {
            case '"': in_quotes = true; any_field = true; break;
            case ',': end_field(); break;
            case '\r': break;
            case '\n': end_record(); break;
            default: field += c; any_field = true; break;
        }
    }
    if (in_quotes) throw std::runtime_error("unterminated quoted field in CSV file: " + path);
    if (!field.empty() || any_field || !record.empty()) end_record();
    return table;
}

}  // namespace wfl
