#pragma once

#include <stdexcept>
#include <string>

namespace treestream {

// Error classes map 1:1 onto CLI exit codes; keep the hierarchy flat.
struct ParseError : std::runtime_error {
  explicit ParseError(const std::string& msg) : std::runtime_error(msg) {}
};

struct QuantOverflow : std::runtime_error {
  int feature;
  int distinct_thresholds;
  QuantOverflow(int f, int k, int width)
      : std::runtime_error("feature " + std::to_string(f) + " has " +
                           std::to_string(k) +
                           " distinct thresholds, exceeding 2^" +
                           std::to_string(width) + "-1"),
        feature(f),
        distinct_thresholds(k) {}
};

struct FormatError : std::runtime_error {
  explicit FormatError(const std::string& msg) : std::runtime_error(msg) {}
};

struct FxpRangeError : std::runtime_error {
  explicit FxpRangeError(const std::string& msg) : std::runtime_error(msg) {}
};

struct FitError : std::runtime_error {
  explicit FitError(const std::string& msg) : std::runtime_error(msg) {}
};

struct IoError : std::runtime_error {
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace treestream
