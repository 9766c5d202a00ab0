#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "treestream/model_ir.hpp"

namespace treestream {

/// Feature code vector: codes[f] = number of model thresholds <= raw[f].
using CodeVector = std::vector<std::uint16_t>;

/// Per-feature threshold rank tables plus the packed-record geometry.
/// Rank r (1-based) of a threshold is its position in the ascending
/// distinct list; rank 0 is reserved for the always-false comparator.
struct QuantSpec {
  int width = 4;                                   // bits per feature code
  std::vector<std::vector<double>> per_feature;    // ascending, distinct

  int feature_count() const { return static_cast<int>(per_feature.size()); }
  int thresholds(int f) const {
    return static_cast<int>(per_feature[f].size());
  }
  /// F*w rounded up to a multiple of 512, minimum one 512-bit word.
  std::size_t bits_per_record() const;
  std::size_t bytes_per_record() const { return bits_per_record() / 8; }
};

/// Collect distinct split thresholds per dense feature. Throws
/// QuantOverflow when any feature needs more than 2^w - 1 ranks.
QuantSpec build_quant_spec(const CanonicalForest& cf, int width);

/// Exact rank (1-based) of a threshold that appears in the spec.
std::uint16_t rank_of(const QuantSpec& spec, int feature, double threshold);

CodeVector encode_record(std::span<const double> raw, const QuantSpec& spec);

/// Bit-exact record layout: feature f occupies bits [w*f, w*(f+1)) of the
/// record read as a little-endian bit string; padding bits are zero.
std::vector<std::uint8_t> pack_records(std::span<const CodeVector> vecs,
                                       const QuantSpec& spec);
CodeVector unpack_record(std::span<const std::uint8_t> bytes,
                         const QuantSpec& spec);
std::vector<CodeVector> unpack_records(std::span<const std::uint8_t> bytes,
                                       const QuantSpec& spec);

}  // namespace treestream
