#include "rlab/csv.hpp"

#include <charconv>
#include <cmath>
#include <stdexcept>

namespace rlab {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

CsvWriter::CsvWriter(const std::filesystem::path& path, std::vector<std::string> header)
    : path_(path), out_(path, std::ios::binary | std::ios::trunc), columns_(header.size()) {
  if (!out_) throw std::runtime_error("cannot open " + path.string() + " for writing");
  for (const auto& h : header) add(std::string_view(h));
  end_row();
  rows_ = 0;
}

CsvWriter& CsvWriter::add(std::string_view s) {
  if (current_ > 0) line_ += ',';
  line_ += csv_field(s);
  ++current_;
  return *this;
}

CsvWriter& CsvWriter::add(double v) { return add(std::string_view(format_double(v))); }
CsvWriter& CsvWriter::add(std::uint64_t v) { return add(std::string_view(std::to_string(v))); }
CsvWriter& CsvWriter::add(std::int64_t v) { return add(std::string_view(std::to_string(v))); }
CsvWriter& CsvWriter::add(const std::optional<double>& v) { return v ? add(*v) : add(std::string_view()); }

void CsvWriter::end_row() {
  if (current_ != columns_)
    throw std::logic_error(path_.filename().string() + ": row has " + std::to_string(current_) + " fields, header has " +
                           std::to_string(columns_));
  line_ += '\n';
  out_ << line_;
  line_.clear();
  current_ = 0;
  ++rows_;
}

void CsvWriter::close() {
  out_.close();
  if (!out_) throw std::runtime_error("failed writing " + path_.string());
}

std::vector<std::vector<std::string>> parse_csv(std::string_view text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false, any = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    any = true;
    if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      row.push_back(std::move(field));
      field.clear();
    } else if (c == '\n') {
      row.push_back(std::move(field));
      field.clear();
      rows.push_back(std::move(row));
      row.clear();
      any = false;
    } else if (c != '\r') {
      field += c;
    }
  }
  if (quoted) throw std::runtime_error("unterminated quoted CSV field");
  if (any || !field.empty() || !row.empty()) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace rlab
