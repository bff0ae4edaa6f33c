#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"

namespace rank1::cli {

// %.17g so every finite double round-trips; inf and nan spelled literally.
std::string fmt(double x);
std::string fmt(int x);
std::string fmt(std::uint64_t x);

// CSV file with '#'-prefixed metadata lines before the header row.  All
// content is deterministic; there are no timestamps anywhere.
class CsvWriter {
 public:
  explicit CsvWriter(const std::string& path);
  ~CsvWriter();

  void meta(const std::string& key, const std::string& value);
  void meta(const std::string& key, double value) { meta(key, fmt(value)); }
  void header(const std::vector<std::string>& columns);
  void row(const std::vector<std::string>& cells);

 private:
  std::ofstream out_;
  std::string path_;
  std::size_t columns_ = 0;
  bool header_written_ = false;
};

// JSON numbers cannot hold infinities; thresholds can be +inf, so those are
// emitted as the string "inf" and documented as such.
nlohmann::json json_number(double x);

void write_json(const std::string& path, const nlohmann::json& doc);

}  // namespace rank1::cli
