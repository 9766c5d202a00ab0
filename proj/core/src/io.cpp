#include "treestream/io.hpp"

#include <fstream>
#include <sstream>

#include "treestream/errors.hpp"

namespace treestream {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << text;
  if (!out) throw IoError("write failed for " + path);
}

std::vector<std::uint8_t> read_binary(const std::string& path) {
  std::string s = read_file(path);
  return {s.begin(), s.end()};
}

void write_binary(const std::string& path,
                  const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path);
}

std::vector<std::vector<double>> parse_csv_doubles(const std::string& text) {
  std::vector<std::vector<double>> rows;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<double> row;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) {
      try {
        row.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw FormatError("CSV line " + std::to_string(lineno) +
                          ": bad number '" + cell + "'");
      }
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace treestream
