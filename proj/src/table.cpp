#include "ahakv/table.hpp"

#include <charconv>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace ahakv {

std::string_view to_string(OutputFormat format) noexcept {
  return format == OutputFormat::csv ? "csv" : "json";
}

OutputFormat output_format_from_string(std::string_view name) {
  if (name == "csv") return OutputFormat::csv;
  if (name == "json") return OutputFormat::json;
  throw std::invalid_argument("unknown output format '" + std::string(name) + "'");
}

std::string_view extension(OutputFormat format) noexcept {
  return format == OutputFormat::csv ? ".csv" : ".json";
}

std::string format_double(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

Table::Table(std::vector<std::string> columns) : columns_(std::move(columns)) {}

void Table::add_row(std::vector<Cell> cells) {
  if (cells.size() != columns_.size())
    throw std::invalid_argument("Table::add_row: expected " + std::to_string(columns_.size()) +
                                " cells, got " + std::to_string(cells.size()));
  rows_.push_back(std::move(cells));
}

namespace {

std::string csv_cell(const Cell& cell) {
  struct Visitor {
    std::string operator()(std::int64_t v) const { return std::to_string(v); }
    std::string operator()(double v) const { return format_double(v); }
    std::string operator()(bool v) const { return v ? "true" : "false"; }
    std::string operator()(const std::string& v) const {
      if (v.find_first_of(",\"\n") == std::string::npos) return v;
      std::string quoted = "\"";
      for (char c : v) {
        if (c == '"') quoted += '"';
        quoted += c;
      }
      return quoted + '"';
    }
  };
  return std::visit(Visitor{}, cell);
}

}  // namespace

void Table::write_csv(std::ostream& os) const {
  for (std::size_t c = 0; c < columns_.size(); ++c) os << (c ? "," : "") << columns_[c];
  os << '\n';
  for (const auto& row : rows_) {
    for (std::size_t c = 0; c < row.size(); ++c) os << (c ? "," : "") << csv_cell(row[c]);
    os << '\n';
  }
}

void Table::write_json(std::ostream& os) const {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& row : rows_) {
    nlohmann::ordered_json obj = nlohmann::ordered_json::object();
    for (std::size_t c = 0; c < row.size(); ++c) {
      std::visit([&](const auto& v) { obj[columns_[c]] = v; }, row[c]);
    }
    arr.push_back(std::move(obj));
  }
  os << arr.dump(2) << '\n';
}

void Table::write(std::ostream& os, OutputFormat format) const {
  if (format == OutputFormat::csv) {
    write_csv(os);
  } else {
    write_json(os);
  }
}

void Table::write_file(const std::filesystem::path& path, OutputFormat format) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  write(os, format);
}

}  // namespace ahakv
