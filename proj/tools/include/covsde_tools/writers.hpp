#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace covsde_tools {

// Shortest decimal representation that round-trips to the same double
// (std::to_chars). Output is locale-independent and stable across runs, so
// repeated runs of any experiment are diff-identical.
std::string fmt_double(double x);

// One table cell: a real, an integer, or free text (labels).
using Cell = std::variant<double, long long, std::string>;

std::string cell_to_string(const Cell& cell);

// Ordered key=value pairs describing the fully resolved configuration of a
// run (every parameter after defaults and overrides, plus the master seed).
// Embedded verbatim in every output file.
using ConfigList = std::vector<std::pair<std::string, std::string>>;

// Rectangular record table: a header and one row per record.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<Cell>> rows;

  void add_row(std::vector<Cell> row) { rows.push_back(std::move(row)); }
};

// Writes dir/basename.csv or dir/basename.json depending on format
// ("csv" | "json"), creating dir if needed, and returns the path written.
// CSV layout: '#'-prefixed key=value preamble (the resolved config), then the
// header row, then one row per record. JSON layout mirrors the same records:
// {"config": {...}, "columns": [...], "records": [[...], ...]}.
std::filesystem::path write_table(const std::filesystem::path& dir, const std::string& basename,
                                  const std::string& format, const ConfigList& config,
                                  const Table& table);

// Writes pretty-printed JSON text (already serialized by the caller) with a
// trailing newline. Used for report files that are always JSON.
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace covsde_tools
