#pragma once

// CSV ingestion (RFC 4180: header row, double-quote quoting with "" escapes,
// quoted fields may span lines, LF or CRLF endings, optional UTF-8 BOM) and
// group specifications.

#include "npgroup/error.hpp"
#include "npgroup/selection.hpp"
#include "npgroup/types.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace npgroup {

struct CsvRecord {
    std::size_t line = 0;   // 1-based physical line where the record starts
    std::vector<std::string> fields;
};

struct CsvTable {
    std::vector<std::string> header;
    std::vector<CsvRecord> records;
};

inline CsvTable parse_csv(std::istream& in) {
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (text.size() >= 3 && text.compare(0, 3, "\xEF\xBB\xBF") == 0) text.erase(0, 3);

    std::vector<CsvRecord> rows;
    CsvRecord cur;
    std::string field;
    std::size_t line = 1;
    cur.line = 1;
    bool in_quotes = false;
    bool quoted_field = false;
    bool row_has_content = false;

    auto end_field = [&] {
        cur.fields.push_back(std::move(field));
        field.clear();
        quoted_field = false;
    };
    auto end_record = [&] {
        end_field();
        if (row_has_content || cur.fields.size() > 1 || !cur.fields.front().empty()) rows.push_back(std::move(cur));
        cur = CsvRecord{};
        cur.line = line;
        row_has_content = false;
    };

    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                if (c == '\n') ++line;
                field.push_back(c);
            }
            continue;
        }
        switch (c) {
            case '"':
                if (!field.empty() || quoted_field) throw ParseError(line, "unexpected quote inside unquoted field");
                in_quotes = true;
                quoted_field = true;
                row_has_content = true;
                break;
            case ',':
                row_has_content = true;
                end_field();
                break;
            case '\r':
                if (i + 1 < text.size() && text[i + 1] == '\n') break;
                [[fallthrough]];
            case '\n':
                ++line;
                end_record();
                break;
            default:
                if (quoted_field) throw ParseError(line, "characters after closing quote");
                field.push_back(c);
        }
    }
    if (in_quotes) throw ParseError(cur.line, "unterminated quoted field");
    if (!field.empty() || !cur.fields.empty() || row_has_content) end_record();

    CsvTable table;
    if (rows.empty()) throw ParseError(1, "file is empty (a header row is required)");
    table.header = std::move(rows.front().fields);
    table.records.assign(std::make_move_iterator(rows.begin() + 1), std::make_move_iterator(rows.end()));
    return table;
}

inline CsvTable read_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open '" + path + "'");
    return parse_csv(in);
}

/// Quotes a field when it contains a comma, quote, or line break.
inline std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        else out.push_back(c);
    }
    return out + "\"";
}

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

inline bool parse_number(const std::string& raw, double& out) {
    const std::string s = trim(raw);
    if (s.empty()) return false;
    const char* first = s.data();
    if (*first == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), out);
    return ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(out);
}

inline std::string join_lines(const std::vector<std::size_t>& lines) {
    std::string s;
    for (std::size_t i = 0; i < lines.size(); ++i) s += (i ? "," : "") + std::to_string(lines[i]);
    return s;
}

inline std::size_t column_index(const std::vector<std::string>& header, const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw MissingColumn(name);
    return static_cast<std::size_t>(it - header.begin());
}

}  // namespace detail

/// Numeric dataset with `response` as Y and every other column as X.
/// Rows with blank or non-numeric cells are rejected together, listed by line.
inline Dataset dataset_from_table(const CsvTable& table, const std::string& response) {
    const std::size_t ycol = detail::column_index(table.header, response);
    for (std::size_t a = 0; a < table.header.size(); ++a) {
        for (std::size_t b = a + 1; b < table.header.size(); ++b) {
            if (table.header[a] == table.header[b]) throw ValidationError("duplicate column name '" + table.header[a] + "'");
        }
    }
    const std::size_t cols = table.header.size();
    Dataset ds;
    ds.response_name = response;
    for (std::size_t c = 0; c < cols; ++c) {
        if (c != ycol) ds.names.push_back(table.header[c]);
    }
    const Index n = static_cast<Index>(table.records.size());
    ds.y.resize(n);
    ds.x.resize(n, static_cast<Index>(cols - 1));

    std::vector<std::size_t> bad;
    for (Index i = 0; i < n; ++i) {
        const CsvRecord& rec = table.records[static_cast<std::size_t>(i)];
        if (rec.fields.size() != cols) {
            bad.push_back(rec.line);
            continue;
        }
        Index xc = 0;
        bool ok = true;
        for (std::size_t c = 0; c < cols && ok; ++c) {
            double v = 0.0;
            ok = detail::parse_number(rec.fields[c], v);
            if (c == ycol) ds.y(i) = v;
            else ds.x(i, xc++) = v;
        }
        if (!ok) bad.push_back(rec.line);
    }
    if (!bad.empty()) {
        throw ParseError(bad, "line " + std::to_string(bad.front()) +
                                  ": missing, non-numeric, or wrong number of fields (rejected lines: " +
                                  detail::join_lines(bad) + ")");
    }
    return ds;
}

/// Group specification, either inline tokens `name:col1,col2` (several per
/// string, separated by spaces or ';') or the path of a two-column
/// `column,group` mapping file (header optional).
inline GroupMap parse_group_spec(const std::vector<std::string>& spec, const std::vector<std::string>& columns) {
    std::vector<std::pair<std::string, std::vector<std::string>>> named;
    auto group_slot = [&](const std::string& name) -> std::vector<std::string>& {
        for (auto& g : named) {
            if (g.first == name) return g.second;
        }
        named.emplace_back(name, std::vector<std::string>{});
        return named.back().second;
    };

    const bool mapping_file = spec.size() == 1 && spec.front().find(':') == std::string::npos;
    if (mapping_file) {
        const CsvTable t = read_csv(spec.front());
        std::vector<CsvRecord> recs = t.records;
        const bool has_header = t.header.size() == 2 && t.header[0] == "column" && t.header[1] == "group";
        if (!has_header) recs.insert(recs.begin(), CsvRecord{1, t.header});
        for (const auto& r : recs) {
            if (r.fields.size() != 2) throw ParseError(r.line, "group mapping rows need exactly two fields: column,group");
            group_slot(detail::trim(r.fields[1])).push_back(detail::trim(r.fields[0]));
        }
    } else {
        for (const std::string& arg : spec) {
            std::string normalized = arg;
            std::replace(normalized.begin(), normalized.end(), ';', ' ');
            std::istringstream tokens(normalized);
            std::string tok;
            while (tokens >> tok) {
                const auto colon = tok.find(':');
                if (colon == std::string::npos || colon == 0 || colon + 1 == tok.size())
                    throw ValidationError("group token '" + tok + "' must look like name:col1,col2");
                auto& slot = group_slot(tok.substr(0, colon));
                std::istringstream cols(tok.substr(colon + 1));
                std::string col;
                while (std::getline(cols, col, ',')) {
                    if (!col.empty()) slot.push_back(col);
                }
            }
        }
    }

    GroupMap gm;
    std::vector<int> assigned(columns.size(), 0);
    for (const auto& [name, cols] : named) {
        IndexSet idx;
        for (const auto& c : cols) {
            const std::size_t k = detail::column_index(columns, c);
            if (assigned[k]++) throw OverlappingGroups(c);
            idx.push_back(k);
        }
        std::sort(idx.begin(), idx.end());
        gm.groups.push_back(std::move(idx));
        gm.labels.push_back(name);
    }
    for (std::size_t k = 0; k < columns.size(); ++k) {
        if (!assigned[k]) throw UnassignedColumn(columns[k]);
    }
    if (gm.groups.empty()) throw EmptyInput("group specification is empty");
    return gm;
}

inline std::pair<Dataset, GroupMap> ingest_csv(const std::string& path, const std::string& response,
                                               const std::vector<std::string>& group_spec) {
    Dataset ds = dataset_from_table(read_csv(path), response);
    GroupMap gm = parse_group_spec(group_spec, ds.names);
    return {std::move(ds), std::move(gm)};
}

}  // namespace npgroup
