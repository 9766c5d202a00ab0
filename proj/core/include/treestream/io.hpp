#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace treestream {

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& text);
std::vector<std::uint8_t> read_binary(const std::string& path);
void write_binary(const std::string& path,
                  const std::vector<std::uint8_t>& bytes);

/// CSV of doubles, one record per line, no header.
std::vector<std::vector<double>> parse_csv_doubles(const std::string& text);

}  // namespace treestream
