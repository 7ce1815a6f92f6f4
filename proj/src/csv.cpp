#include "ordlab/csv.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "ordlab/errors.hpp"

namespace ordlab {

void Csv::add_row(std::vector<std::string> row) {
    if (row.size() != header.size())
        throw SchemaError("csv: row width " + std::to_string(row.size()) +
                          " does not match header width " + std::to_string(header.size()));
    rows.push_back(std::move(row));
}

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return std::string(buf);
}

namespace {
void check_field(const std::string& f) {
    if (f.find(',') != std::string::npos || f.find('"') != std::string::npos ||
        f.find('\n') != std::string::npos)
        throw SchemaError("csv: field needs quoting, which this schema forbids: '" + f + "'");
}
}  // namespace

void write_csv(const Csv& csv, const std::string& path) {
    if (csv.header.empty()) throw SchemaError("csv: refusing to write headerless file " + path);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ArtifactError("write_csv: cannot open " + path);
    for (size_t i = 0; i < csv.header.size(); ++i) {
        check_field(csv.header[i]);
        out << (i ? "," : "") << csv.header[i];
    }
    out << "\n";
    for (const auto& row : csv.rows) {
        for (size_t i = 0; i < row.size(); ++i) {
            check_field(row[i]);
            out << (i ? "," : "") << row[i];
        }
        out << "\n";
    }
}

Csv read_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ArtifactError("read_csv: missing file " + path);
    Csv csv;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string field;
        while (std::getline(ss, field, ',')) fields.push_back(field);
        if (!line.empty() && line.back() == ',') fields.push_back("");
        if (first) {
            csv.header = fields;
            first = false;
        } else {
            csv.rows.push_back(fields);
        }
    }
    return csv;
}

void lint_csv(const std::string& path) {
    Csv csv = read_csv(path);
    if (csv.header.empty()) throw SchemaError("lint: " + path + " has no header row");
    if (std::find(csv.header.begin(), csv.header.end(), "manifest_hash") == csv.header.end())
        throw SchemaError("lint: " + path + " lacks a manifest_hash column");
    for (size_t i = 0; i < csv.rows.size(); ++i)
        if (csv.rows[i].size() != csv.header.size())
            throw SchemaError("lint: " + path + " row " + std::to_string(i + 1) + " has " +
                              std::to_string(csv.rows[i].size()) + " fields, header has " +
                              std::to_string(csv.header.size()));
}

size_t column_index(const Csv& csv, const std::string& name) {
    auto it = std::find(csv.header.begin(), csv.header.end(), name);
    if (it == csv.header.end()) throw SchemaError("csv: missing column '" + name + "'");
    return static_cast<size_t>(it - csv.header.begin());
}

std::string cell(const Csv& csv, size_t row, const std::string& name) {
    if (row >= csv.rows.size()) throw SchemaError("csv: row index out of range");
    return csv.rows[row][column_index(csv, name)];
}

}  // namespace ordlab
