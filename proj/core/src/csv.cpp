#include "leosop/csv.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "leosop/errors.hpp"

namespace leosop {
namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string location(const std::filesystem::path& path, std::size_t line) {
  return path.string() + ":" + std::to_string(line);
}

}  // namespace

std::size_t CsvTable::column(std::string_view name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return i;
  throw ConfigError("CSV column '" + std::string(name) + "' not found");
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  CsvTable table;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cells = split(line);
    if (table.header.empty()) {
      table.header = std::move(cells);
      continue;
    }
    if (cells.size() != table.header.size())
      throw ConfigError(location(path, line_no) + ": expected " +
                        std::to_string(table.header.size()) + " columns, found " +
                        std::to_string(cells.size()));
    table.rows.push_back(std::move(cells));
  }
  if (table.header.empty()) throw ConfigError(path.string() + ": missing CSV header");
  return table;
}

double parse_double(const std::string& text, const std::filesystem::path& path,
                    std::size_t line) {
  double v = 0.0;
  const auto* begin = text.data();
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc() || ptr != end)
    throw ConfigError(location(path, line) + ": not a number: '" + text + "'");
  return v;
}

std::int64_t parse_int(const std::string& text, const std::filesystem::path& path,
                       std::size_t line) {
  std::int64_t v = 0;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end)
    throw ConfigError(location(path, line) + ": not an integer: '" + text + "'");
  return v;
}

std::string format_double(double v) {
  std::array<char, 32> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  if (ec != std::errc()) return "nan";
  return std::string(buf.data(), ptr);
}

CsvWriter::CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header)
    : path_(path) {
  file_ = std::fopen(path.c_str(), "w");
  if (file_ == nullptr) throw IoError("cannot create " + path.string());
  std::string line;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (i > 0) line.push_back(',');
    line += header[i];
  }
  line.push_back('\n');
  write_line(line);
}

CsvWriter::~CsvWriter() {
  if (file_ != nullptr) std::fclose(file_);
}

void CsvWriter::write_line(const std::string& line) {
  if (file_ == nullptr) throw IoError("write on closed CSV " + path_.string());
  if (std::fwrite(line.data(), 1, line.size(), file_) != line.size())
    throw IoError("write failed on " + path_.string());
}

void CsvWriter::close() {
  if (file_ != nullptr) {
    const bool ok = std::fclose(file_) == 0;
    file_ = nullptr;
    if (!ok) throw IoError("close failed on " + path_.string());
  }
}

}  // namespace leosop
