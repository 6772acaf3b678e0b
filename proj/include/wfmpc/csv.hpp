// Minimal CSV I/O for traces, lookup tables and result series.
#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace wfmpc::csv {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  std::size_t column_count() const { return header.size(); }
  std::size_t row_count() const { return rows.size(); }
};

// Formats with enough digits for an exact double round trip, so repeated
// writes of the same run are byte-identical.
std::string format_double(double value);

// Reads a comma-separated numeric table. The first line is the header; every
// following line must have one numeric field per header column.
Table read_table(const std::filesystem::path& path);

void write_table(const std::filesystem::path& path,
                 const std::vector<std::string>& header,
                 const std::vector<std::vector<double>>& rows);

}  // namespace wfmpc::csv
