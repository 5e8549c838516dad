#pragma once

#include <cstdint>
#include <filesystem>
#include <ostream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace ahakv {

enum class OutputFormat { csv, json };

std::string_view to_string(OutputFormat format) noexcept;
OutputFormat output_format_from_string(std::string_view name);
/// ".csv" or ".json".
std::string_view extension(OutputFormat format) noexcept;

/// Shortest round-trip decimal form, '.' separator, locale independent.
std::string format_double(double value);

using Cell = std::variant<std::int64_t, double, std::string, bool>;

/// Rows of named columns, written as CSV (header row, LF endings) or as a
/// JSON array of objects with the same keys in column order.
class Table {
 public:
  explicit Table(std::vector<std::string> columns);

  void add_row(std::vector<Cell> cells);

  const std::vector<std::string>& columns() const noexcept { return columns_; }
  std::size_t size() const noexcept { return rows_.size(); }

  void write_csv(std::ostream& os) const;
  void write_json(std::ostream& os) const;
  void write(std::ostream& os, OutputFormat format) const;
  void write_file(const std::filesystem::path& path, OutputFormat format) const;

 private:
  std::vector<std::string> columns_;
  std::vector<std::vector<Cell>> rows_;
};

}  // namespace ahakv
