#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace rlab {

// Shortest round-trip decimal form; "nan", "inf" and "-inf" for non-finite
// values. Independent of the locale.
std::string format_double(double v);

// RFC 4180 quoting of a single field.
std::string csv_field(std::string_view s);

// Writes a header row and data rows with CRLF-free '\n' line ends.
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, std::vector<std::string> header);

  CsvWriter& add(std::string_view s);
  CsvWriter& add(const char* s) { return add(std::string_view(s)); }
  CsvWriter& add(const std::string& s) { return add(std::string_view(s)); }
  CsvWriter& add(double v);
  CsvWriter& add(std::uint64_t v);
  CsvWriter& add(std::int64_t v);
  CsvWriter& add(unsigned v) { return add(static_cast<std::uint64_t>(v)); }
  CsvWriter& add(int v) { return add(static_cast<std::int64_t>(v)); }
  CsvWriter& add(bool v) { return add(std::string_view(v ? "true" : "false")); }
  // empty field when absent
  CsvWriter& add(const std::optional<double>& v);
  // ends the current row; throws std::logic_error on a column count mismatch
  void end_row();
  void close();

  std::size_t rows() const { return rows_; }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
  std::size_t columns_ = 0;
  std::size_t current_ = 0;
  std::size_t rows_ = 0;
  std::string line_;
};

// Splits CSV text into records, honouring quotes. Used to count rows of
// produced files.
std::vector<std::vector<std::string>> parse_csv(std::string_view text);

}  // namespace rlab
