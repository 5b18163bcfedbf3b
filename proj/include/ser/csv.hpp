#pragma once

#include <string>
#include <vector>

namespace ser {

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    int column(const std::string& name) const;  // -1 when absent
};

// Reads a comma-separated UTF-8 file with a mandatory header row. Handles
// trailing \r and skips blank lines; no quoting (none of the formats here
// embed commas).
CsvTable read_csv(const std::string& path);

CsvTable parse_csv(const std::string& text);

void write_csv(const std::string& path, const CsvTable& table);

// Shortest round-trip decimal representation (via std::to_chars), so emitted
// files are byte-stable for identical doubles.
std::string format_double(double v);

// Strict numeric parse of a whole cell.
bool parse_double(const std::string& cell, double& out);

}  // namespace ser
