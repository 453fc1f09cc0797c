#include "cdtd/csv.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace cdtd {

namespace {

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool in_quotes = false;
    bool any_field = false;

    size_t i = 0;
    const size_t n = text.size();
    while (i < n) {
        char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < n && text[i + 1] == '"') {
                    field += '"';
                    i += 2;
                } else {
                    in_quotes = false;
                    ++i;
                }
            } else {
                field += c;
                ++i;
            }
        } else {
            if (c == '"' && field.empty()) {
                in_quotes = true;
                any_field = true;
                ++i;
            } else if (c == ',') {
                row.push_back(field);
                field.clear();
                any_field = true;
                ++i;
            } else if (c == '\r' && i + 1 < n && text[i + 1] == '\n') {
                row.push_back(field);
                rows.push_back(row);
                row.clear();
                field.clear();
                any_field = false;
                i += 2;
            } else if (c == '\n') {
                row.push_back(field);
                rows.push_back(row);
                row.clear();
                field.clear();
                any_field = false;
                ++i;
            } else {
                field += c;
                any_field = true;
                ++i;
            }
        }
    }
    if (in_quotes) throw std::runtime_error("csv: unterminated quoted field");
    if (any_field || !field.empty()) {
        row.push_back(field);
        rows.push_back(row);
    }
    return rows;
}

bool needs_quoting(const std::string& s) {
    return s.find_first_of(",\"\n\r") != std::string::npos;
}

void write_field(std::ostream& os, const std::string& s) {
    if (!needs_quoting(s)) {
        os << s;
        return;
    }
    os << '"';
    for (char c : s) {
        if (c == '"') os << "\"\"";
        else os << c;
    }
    os << '"';
}

}  // namespace

std::vector<std::vector<std::string>> read_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("csv: cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_csv(ss.str());
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("csv: cannot write " + path);
    for (size_t k = 0; k < header.size(); ++k) {
        if (k) out << ',';
        write_field(out, header[k]);
    }
    out << '\n';
    for (const auto& row : rows) {
        for (size_t k = 0; k < row.size(); ++k) {
            if (k) out << ',';
            write_field(out, row[k]);
        }
        out << '\n';
    }
    if (!out) throw std::runtime_error("csv: write failed for " + path);
}

RawTable load_csv(const std::string& path, const TableSchema& schema) {
    auto cells = read_csv(path);
    if (cells.empty()) throw std::runtime_error("csv: empty file " + path);

    const auto& header = cells[0];
    const int K = schema.n_features();
    if (static_cast<int>(header.size()) != K)
        throw std::runtime_error("csv: header has " + std::to_string(header.size()) +
                                 " columns, schema expects " + std::to_string(K));
    for (int k = 0; k < K; ++k) {
        if (header[k] != schema.features[k].name)
            throw std::runtime_error("csv: header column '" + header[k] +
                                     "' does not match schema feature '" +
                                     schema.features[k].name + "'");
    }

    RawTable table;
    table.schema = schema;
    for (size_t r = 1; r < cells.size(); ++r) {
        auto& row = cells[r];
        if (row.size() == 1 && row[0].empty()) continue;  // trailing blank line
        if (static_cast<int>(row.size()) != K)
            throw std::runtime_error("csv: row " + std::to_string(r) + " has " +
                                     std::to_string(row.size()) + " cells, expected " +
                                     std::to_string(K));
        bool drop = false;
        for (int k = 0; k < K && !drop; ++k) {
            const bool is_target = schema.target_index && *schema.target_index == k;
            if (row[k].empty()) {
                if (schema.is_continuous(k) || is_target) drop = true;
                else row[k] = kMissingToken;
            } else if (schema.is_continuous(k)) {
                char* end = nullptr;
                std::strtod(row[k].c_str(), &end);
                if (end == row[k].c_str() || *end != '\0')
                    throw std::runtime_error("csv: non-numeric value '" + row[k] +
                                             "' in continuous column '" +
                                             schema.features[k].name + "' (row " +
                                             std::to_string(r) + ")");
            }
        }
        if (drop) {
            ++table.n_dropped;
        } else {
            table.rows.push_back(std::move(row));
        }
    }
    return table;
}

}  // namespace cdtd
