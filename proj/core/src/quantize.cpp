#include "treestream/quantize.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "treestream/errors.hpp"

namespace treestream {

std::size_t QuantSpec::bits_per_record() const {
  std::size_t bits = static_cast<std::size_t>(feature_count()) * width;
  std::size_t words = (bits + 511) / 512;
  if (words == 0) words = 1;
  return words * 512;
}

QuantSpec build_quant_spec(const CanonicalForest& cf, int width) {
  if (width < 1 || width > 16)
    throw FormatError("code width must be in [1, 16], got " +
                      std::to_string(width));
  int f_count = cf.feature_map.dense_count();
  std::vector<std::set<double>> sets(f_count);
  for (const CanonicalTree& t : cf.trees) {
    for (const CanonicalSlot& s : t.comparators) {
      if (s.always_false) continue;
      if (!std::isfinite(s.threshold))
        throw FormatError("non-finite threshold in canonical forest");
      sets[s.feature].insert(s.threshold);
    }
  }
  QuantSpec spec;
  spec.width = width;
  spec.per_feature.resize(f_count);
  int max_ranks = (1 << width) - 1;
  for (int f = 0; f < f_count; ++f) {
    if (static_cast<int>(sets[f].size()) > max_ranks)
      throw QuantOverflow(f, static_cast<int>(sets[f].size()), width);
    spec.per_feature[f].assign(sets[f].begin(), sets[f].end());
  }
  return spec;
}

std::uint16_t rank_of(const QuantSpec& spec, int feature, double threshold) {
  const auto& ts = spec.per_feature[feature];
  auto it = std::lower_bound(ts.begin(), ts.end(), threshold);
  if (it == ts.end() || *it != threshold)
    throw FormatError("threshold not present in quant spec for feature " +
                      std::to_string(feature));
  return static_cast<std::uint16_t>(it - ts.begin() + 1);
}

CodeVector encode_record(std::span<const double> raw, const QuantSpec& spec) {
  if (static_cast<int>(raw.size()) != spec.feature_count())
    throw FormatError("raw record has " + std::to_string(raw.size()) +
                      " entries, expected " +
                      std::to_string(spec.feature_count()));
  CodeVector codes(spec.feature_count());
  for (int f = 0; f < spec.feature_count(); ++f) {
    if (std::isnan(raw[f]))
      throw FormatError("NaN input for feature " + std::to_string(f));
    const auto& ts = spec.per_feature[f];
    // count of thresholds <= raw[f] (x == t counts: x < t is false)
    codes[f] = static_cast<std::uint16_t>(
        std::upper_bound(ts.begin(), ts.end(), raw[f]) - ts.begin());
  }
  return codes;
}

namespace {

inline void put_bits(std::vector<std::uint8_t>& out, std::size_t base_bit,
                     std::uint32_t value, int width) {
  for (int b = 0; b < width; ++b) {
    if (value >> b & 1u) {
      std::size_t bit = base_bit + b;
      out[bit / 8] |= static_cast<std::uint8_t>(1u << (bit % 8));
    }
  }
}

inline std::uint32_t get_bits(std::span<const std::uint8_t> in,
                              std::size_t base_bit, int width) {
  std::uint32_t v = 0;
  for (int b = 0; b < width; ++b) {
    std::size_t bit = base_bit + b;
    if (in[bit / 8] >> (bit % 8) & 1u) v |= 1u << b;
  }
  return v;
}

}  // namespace

std::vector<std::uint8_t> pack_records(std::span<const CodeVector> vecs,
                                       const QuantSpec& spec) {
  std::size_t rec_bytes = spec.bytes_per_record();
  std::vector<std::uint8_t> out(rec_bytes * vecs.size(), 0);
  std::uint32_t max_code = (1u << spec.width) - 1;
  for (std::size_t r = 0; r < vecs.size(); ++r) {
    const CodeVector& v = vecs[r];
    if (static_cast<int>(v.size()) != spec.feature_count())
      throw FormatError("code vector size mismatch");
    std::size_t rec_base = r * rec_bytes * 8;
    for (int f = 0; f < spec.feature_count(); ++f) {
      if (v[f] > max_code)
        throw FormatError("code out of range for width " +
                          std::to_string(spec.width));
      put_bits(out, rec_base + static_cast<std::size_t>(f) * spec.width, v[f],
               spec.width);
    }
  }
  return out;
}

CodeVector unpack_record(std::span<const std::uint8_t> bytes,
                         const QuantSpec& spec) {
  if (bytes.size() != spec.bytes_per_record())
    throw FormatError("record length " + std::to_string(bytes.size()) +
                      " != " + std::to_string(spec.bytes_per_record()));
  CodeVector v(spec.feature_count());
  for (int f = 0; f < spec.feature_count(); ++f)
    v[f] = static_cast<std::uint16_t>(
        get_bits(bytes, static_cast<std::size_t>(f) * spec.width, spec.width));
  // padding bits must be zero
  std::size_t used_bits = static_cast<std::size_t>(spec.feature_count()) *
                          spec.width;
  for (std::size_t bit = used_bits; bit < spec.bits_per_record(); ++bit) {
    if (bytes[bit / 8] >> (bit % 8) & 1u)
      throw FormatError("nonzero padding bit " + std::to_string(bit) +
                        " in packed record");
  }
  return v;
}

std::vector<CodeVector> unpack_records(std::span<const std::uint8_t> bytes,
                                       const QuantSpec& spec) {
  std::size_t rec_bytes = spec.bytes_per_record();
  if (bytes.size() % rec_bytes != 0)
    throw FormatError("packed stream length is not a multiple of " +
                      std::to_string(rec_bytes));
  std::vector<CodeVector> out;
  out.reserve(bytes.size() / rec_bytes);
  for (std::size_t off = 0; off < bytes.size(); off += rec_bytes)
    out.push_back(unpack_record(bytes.subspan(off, rec_bytes), spec));
  return out;
}

}  // namespace treestream
