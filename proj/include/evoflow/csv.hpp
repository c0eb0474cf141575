#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace evoflow {

// A parsed CSV table with a header row. Fields follow RFC 4180 quoting.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    // Index of a header column, or -1.
    int column(std::string_view name) const;
};

CsvTable parse_csv(std::string_view text);
std::string to_csv(const CsvTable& table);

} // namespace evoflow
