#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "treestream/model_ir.hpp"
#include "treestream/quantize.hpp"

namespace treestream {

/// Q8.24 leaf storage, 64-bit accumulation at the same binary point.
/// |leaf| < 128 is enforced at quantization, so a 2^k-tree sum cannot
/// overflow the accumulator for any supported forest size.
struct FxpFormat {
  int leaf_bits = 32;
  int frac_bits = 24;
  int acc_bits = 64;
};

constexpr int kFracBits = 24;
constexpr double kFxpScale = 1 << kFracBits;

/// Round-half-to-even quantization of a leaf value to Q8.24.
std::int32_t quantize_leaf(double value);
double fxp_to_double(std::int64_t q);

/// One tree in hardware form: comparator constants, an encoder table
/// mapping comparator result bits to a leaf slot, and quantized leaves.
struct CompiledTree {
  std::vector<std::pair<std::uint16_t, std::uint16_t>> comparators;  // (feature, rank)
  std::vector<std::uint8_t> encoder;  // 2^(2^D-1) entries when D <= 4, else empty
  std::vector<std::int32_t> leaves;   // 2^D Q8.24 values
};

struct CompiledForest {
  int depth = 0;
  std::vector<CompiledTree> trees;  // padded to the next power of two
  std::size_t real_tree_count = 0;
  QuantSpec quant;
  FxpFormat fxp;
  std::int64_t base_score_q = 0;
  int adder_stages = 0;

  std::size_t padded_tree_count() const { return trees.size(); }
};

CompiledForest compile_forest(const CanonicalForest& cf, const QuantSpec& spec);

/// Comparator result bits for one tree: bit i = (codes[feature_i] < rank_i).
std::uint32_t comparator_bits(const CompiledTree& tree, const CodeVector& v);

/// Encoder semantics without the materialized table (path walk). Both
/// realizations are equivalent; the table is the hardware-shaped one.
int encoder_walk(std::uint32_t bits, int depth);

/// Evaluate one tree: parallel comparators -> encoder -> leaf mux.
std::pair<int, std::int32_t> tpu_eval(const CompiledTree& tree, int depth,
                                      const CodeVector& v);

/// Pairwise reduction over exactly 2^k inputs; exact integer sum.
std::int64_t adder_tree(std::span<const std::int64_t> values);

/// Fixed-point margin for one code vector.
std::int64_t score(const CompiledForest& cf, const CodeVector& v);

/// Float64 traversal oracle over the raw (unquantized) forest.
double score_reference(const Forest& forest, std::span<const double> raw);

double to_probability(double margin);

/// "cf-v1" JSON container (quant tables inline, leaf/encoder tables hex).
std::string serialize_compiled(const CompiledForest& cf);
CompiledForest parse_compiled(const std::string& text);

}  // namespace treestream
