#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

namespace pbsdm {

// 17 significant digits, so values round-trip exactly; "nan"/"inf" otherwise.
std::string format_double(double v);
// Throws DataError on anything that is not a complete decimal number.
double parse_double(std::string_view text);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;  // 1-based source line of each row
};

// Comma-separated, no quoting. Ragged rows raise DataError naming the line.
CsvTable read_csv(const std::filesystem::path& path);

// Writes to a sibling temporary file; commit() renames it into place.
class CsvWriter {
 public:
  explicit CsvWriter(std::filesystem::path path);
  ~CsvWriter();
  CsvWriter(const CsvWriter&) = delete;
  CsvWriter& operator=(const CsvWriter&) = delete;

  void row(const std::vector<std::string>& cells);
  void commit();

 private:
  std::filesystem::path path_;
  std::filesystem::path tmp_;
  std::ofstream out_;
  bool committed_ = false;
};

// Atomic whole-file write (temporary file + rename).
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

}  // namespace pbsdm
