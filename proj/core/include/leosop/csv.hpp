#pragma once

// Minimal CSV reading/writing for the pipeline's plain numeric tables.
// Doubles are written in shortest round-trip form so files re-read exactly.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

namespace leosop {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Index of a named column; throws ConfigError when absent.
  std::size_t column(std::string_view name) const;
};

/// Reads a comma-separated file with a header row. Throws IoError when the
/// file is missing and ConfigError on ragged rows (with the line number).
CsvTable read_csv(const std::filesystem::path& path);

double parse_double(const std::string& text, const std::filesystem::path& path,
                    std::size_t line);
std::int64_t parse_int(const std::string& text, const std::filesystem::path& path,
                       std::size_t line);

std::string format_double(double v);

class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header);
  ~CsvWriter();

  CsvWriter(const CsvWriter&) = delete;
  CsvWriter& operator=(const CsvWriter&) = delete;

  template <typename... Ts>
  void row(const Ts&... values) {
    std::string line;
    bool first = true;
    (append(line, values, first), ...);
    line.push_back('\n');
    write_line(line);
  }

  void close();

 private:
  template <typename T>
  static void append(std::string& line, const T& v, bool& first) {
    if (!first) line.push_back(',');
    first = false;
    if constexpr (std::is_same_v<T, bool>) {
      line += v ? "1" : "0";
    } else if constexpr (std::is_floating_point_v<T>) {
      line += format_double(static_cast<double>(v));
    } else if constexpr (std::is_integral_v<T>) {
      line += std::to_string(v);
    } else {
      line += std::string_view(v);
    }
  }

  void write_line(const std::string& line);

  std::FILE* file_ = nullptr;
  std::filesystem::path path_;
};

}  // namespace leosop
