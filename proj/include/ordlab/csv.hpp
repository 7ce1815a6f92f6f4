#pragma once

#include <string>
#include <vector>

namespace ordlab {

struct Csv {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    void add_row(std::vector<std::string> row);
};

// Stable decimal formatting for CSV cells (%.10g).
std::string fmt_double(double v);

void write_csv(const Csv& csv, const std::string& path);
Csv read_csv(const std::string& path);

// Schema linter: header present, rectangular rows, and a manifest_hash
// column. Throws SchemaError with the offending detail.
void lint_csv(const std::string& path);

// Column access helpers for report joins.
size_t column_index(const Csv& csv, const std::string& name);
std::string cell(const Csv& csv, size_t row, const std::string& name);

}  // namespace ordlab
