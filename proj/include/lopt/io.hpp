#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace lopt {

/// Writes `content` to a sibling temporary file and renames it into place.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);
std::string read_file(const std::filesystem::path& path);

/// Lowercase hex SHA-256.
std::string sha256_hex(std::string_view content);

/// Shortest round-trip form is not required; CSV files always use 17
/// significant digits so values reload bit-exactly.
std::string format_double(double v);

/// Comma-separated table with a header row and LF line endings.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header);

  void add_row(const std::vector<double>& values);
  /// Mixed text/number row; numbers must already be formatted.
  void add_text_row(const std::vector<std::string>& cells);

  std::size_t rows() const { return rows_.size(); }
  const std::vector<std::string>& header() const { return header_; }
  std::string str() const;

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

struct ParsedCsv {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  long column(const std::string& name) const;
  std::vector<double> numbers(const std::string& name) const;
};

ParsedCsv parse_csv(const std::string& text);

}  // namespace lopt
