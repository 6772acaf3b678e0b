#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "wfmpc/csv.hpp"

namespace {

std::filesystem::path temp_file(const char* name) {
  return std::filesystem::temp_directory_path() / name;
}

}  // namespace

TEST_CASE("csv round trip is exact") {
  const auto path = temp_file("wfmpc_csv_roundtrip.csv");
  const std::vector<std::string> header{"a", "b"};
  const std::vector<std::vector<double>> rows{
      {1.0 / 3.0, -2.5e-17}, {1e300, 42.0}, {0.1 + 0.2, 7.0}};
  wfmpc::csv::write_table(path, header, rows);
  const auto table = wfmpc::csv::read_table(path);
  REQUIRE(table.header == header);
  REQUIRE(table.row_count() == rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < rows[r].size(); ++c) {
      CHECK(table.rows[r][c] == rows[r][c]);
    }
  }
  std::filesystem::remove(path);
}

TEST_CASE("csv rejects malformed input") {
  const auto path = temp_file("wfmpc_csv_bad.csv");
  {
    std::ofstream out(path);
    out << "a,b\n1,2\n3\n";
  }
  CHECK_THROWS(wfmpc::csv::read_table(path));
  {
    std::ofstream out(path);
    out << "a,b\n1,zap\n";
  }
  CHECK_THROWS(wfmpc::csv::read_table(path));
  CHECK_THROWS(wfmpc::csv::read_table(temp_file("wfmpc_csv_missing.csv")));
  std::filesystem::remove(path);
}
