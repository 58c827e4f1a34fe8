#pragma once

#include <fstream>
#include <string>
#include <vector>

namespace sls {

// Shortest representation that round-trips a double exactly.
std::string fmt_full(double v);

// Comma-separated, LF line endings, '.' decimal separator.
class CsvWriter {
 public:
  explicit CsvWriter(const std::string& path);
  void row(const std::vector<std::string>& cells);

 private:
  std::ofstream out_;
  std::string path_;
};

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

CsvTable read_csv(const std::string& path);

}  // namespace sls
