#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include <unistd.h>

#include "bsepace/errors.hpp"

namespace bsepace {

/// Writes `content` to a sibling temp file and renames it over `path`, so
/// readers never see a half-written file.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  namespace fs = std::filesystem;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::InvalidArgument, "cannot write '" + tmp.string() + "'");
    out << content;
    out.flush();
    if (!out) throw Error(ErrorKind::InvalidArgument, "short write to '" + tmp.string() + "'");
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp);
    throw Error(ErrorKind::InvalidArgument, "cannot rename onto '" + path.string() + "': " + ec.message());
  }
}

using Cell = std::variant<std::string, double, std::int64_t>;

inline std::string format_cell(const Cell& c) {
  if (const auto* s = std::get_if<std::string>(&c)) {
    if (s->find_first_of(",\"\n") == std::string::npos) return *s;
    std::string q = "\"";
    for (char ch : *s) {
      if (ch == '"') q += '"';
      q += ch;
    }
    return q + "\"";
  }
  if (const auto* i = std::get_if<std::int64_t>(&c)) return std::to_string(*i);
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", std::get<double>(c));
  return buf;
}

/// CSV with optional leading "# key=value" comment lines.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

  void comment(const std::string& line) { comments_.push_back(line); }

  void row(std::vector<Cell> cells) {
    if (cells.size() != header_.size()) throw Error(ErrorKind::InvalidArgument, "CSV row width mismatch");
    rows_.push_back(std::move(cells));
  }

  std::size_t size() const { return rows_.size(); }

  std::string str() const {
    std::string out;
    for (const auto& c : comments_) out += "# " + c + "\n";
    for (std::size_t i = 0; i < header_.size(); ++i) out += (i ? "," : "") + header_[i];
    out += "\n";
    for (const auto& r : rows_) {
      for (std::size_t i = 0; i < r.size(); ++i) out += (i ? "," : "") + format_cell(r[i]);
      out += "\n";
    }
    return out;
  }

  void write(const std::filesystem::path& path) const { write_file_atomic(path, str()); }

 private:
  std::vector<std::string> header_;
  std::vector<std::string> comments_;
  std::vector<std::vector<Cell>> rows_;
};

}  // namespace bsepace
