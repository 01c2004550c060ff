#include "covsde_tools/writers.hpp"

#include <charconv>
#include <fstream>
#include <stdexcept>
#include <system_error>

#include "json.hpp"

namespace covsde_tools {

std::string fmt_double(double x) {
  char buf[64];
  const std::to_chars_result res = std::to_chars(buf, buf + sizeof(buf), x);
  if (res.ec != std::errc()) throw std::runtime_error("fmt_double: to_chars failed");
  return std::string(buf, res.ptr);
}

std::string cell_to_string(const Cell& cell) {
  if (std::holds_alternative<double>(cell)) return fmt_double(std::get<double>(cell));
  if (std::holds_alternative<long long>(cell)) return std::to_string(std::get<long long>(cell));
  return std::get<std::string>(cell);
}

namespace {

std::ofstream open_for_write(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);  // binary: exactly '\n' line ends
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  return out;
}

void write_csv(const std::filesystem::path& path, const ConfigList& config, const Table& table) {
  std::ofstream out = open_for_write(path);
  for (const auto& [key, value] : config) out << "# " << key << "=" << value << "\n";
  for (std::size_t c = 0; c < table.header.size(); ++c) {
    if (c > 0) out << ",";
    out << table.header[c];
  }
  out << "\n";
  for (const auto& row : table.rows) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c > 0) out << ",";
      out << cell_to_string(row[c]);
    }
    out << "\n";
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

void write_json(const std::filesystem::path& path, const ConfigList& config, const Table& table) {
  nlohmann::ordered_json doc;
  nlohmann::ordered_json cfg = nlohmann::ordered_json::object();
  for (const auto& [key, value] : config) cfg[key] = value;
  doc["config"] = std::move(cfg);
  doc["columns"] = table.header;
  nlohmann::ordered_json records = nlohmann::ordered_json::array();
  for (const auto& row : table.rows) {
    nlohmann::ordered_json rec = nlohmann::ordered_json::array();
    for (const Cell& cell : row) {
      if (std::holds_alternative<double>(cell)) {
        rec.push_back(std::get<double>(cell));
      } else if (std::holds_alternative<long long>(cell)) {
        rec.push_back(std::get<long long>(cell));
      } else {
        rec.push_back(std::get<std::string>(cell));
      }
    }
    records.push_back(std::move(rec));
  }
  doc["records"] = std::move(records);
  std::ofstream out = open_for_write(path);
  out << doc.dump(2) << "\n";
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace

std::filesystem::path write_table(const std::filesystem::path& dir, const std::string& basename,
                                  const std::string& format, const ConfigList& config,
                                  const Table& table) {
  for (const auto& row : table.rows) {
    if (row.size() != table.header.size()) {
      throw std::invalid_argument("write_table: row width does not match header");
    }
  }
  if (format != "csv" && format != "json") {
    throw std::invalid_argument("write_table: format must be csv or json");
  }
  std::filesystem::create_directories(dir);
  const std::filesystem::path path = dir / (basename + "." + format);
  if (format == "csv") {
    write_csv(path, config, table);
  } else {
    write_json(path, config, table);
  }
  return path;
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream out = open_for_write(path);
  out << text;
  if (!text.empty() && text.back() != '\n') out << "\n";
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace covsde_tools
