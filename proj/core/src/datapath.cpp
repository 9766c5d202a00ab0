#include "treestream/datapath.hpp"

#include <bit>
#include <cmath>
#include <cstdio>

#include "json.hpp"
#include "treestream/errors.hpp"

namespace treestream {

using nlohmann::json;
using nlohmann::ordered_json;

std::int32_t quantize_leaf(double value) {
  if (!(std::fabs(value) < 128.0))
    throw FxpRangeError("leaf value " + std::to_string(value) +
                        " outside Q8.24 range (|v| < 128)");
  double scaled = value * kFxpScale;
  double q = std::nearbyint(scaled);  // ties to even under FE_TONEAREST
  return static_cast<std::int32_t>(q);
}

double fxp_to_double(std::int64_t q) {
  return static_cast<double>(q) / kFxpScale;
}

int encoder_walk(std::uint32_t bits, int depth) {
  int slot = 0;
  int leaf = 0;
  for (int level = 0; level < depth; ++level) {
    bool go_left = bits >> slot & 1u;
    leaf = leaf * 2 + (go_left ? 0 : 1);
    slot = go_left ? 2 * slot + 1 : 2 * slot + 2;
  }
  return leaf;
}

CompiledForest compile_forest(const CanonicalForest& cf,
                              const QuantSpec& spec) {
  CompiledForest out;
  out.depth = cf.depth;
  out.quant = spec;
  out.real_tree_count = cf.trees.size();
  out.base_score_q = static_cast<std::int64_t>(
      std::nearbyint(cf.base_score * kFxpScale));

  int slots = cf.comparator_slots();
  bool materialize = slots <= 15;  // table up to 2^15 entries (D <= 4)

  for (const CanonicalTree& ct : cf.trees) {
    CompiledTree t;
    t.comparators.reserve(slots);
    for (const CanonicalSlot& s : ct.comparators) {
      if (s.always_false) {
        t.comparators.emplace_back(0, 0);  // rank 0: code < 0 never holds
      } else {
        t.comparators.emplace_back(static_cast<std::uint16_t>(s.feature),
                                   rank_of(spec, s.feature, s.threshold));
      }
    }
    if (materialize) {
      t.encoder.resize(std::size_t{1} << slots);
      for (std::uint32_t bits = 0; bits < t.encoder.size(); ++bits)
        t.encoder[bits] =
            static_cast<std::uint8_t>(encoder_walk(bits, cf.depth));
    }
    t.leaves.reserve(ct.leaves.size());
    for (double leaf : ct.leaves) t.leaves.push_back(quantize_leaf(leaf));
    out.trees.push_back(std::move(t));
  }

  std::size_t padded = std::bit_ceil(std::max<std::size_t>(cf.trees.size(), 1));
  CompiledTree zero;
  zero.comparators.assign(slots, {0, 0});
  if (materialize) {
    zero.encoder.resize(std::size_t{1} << slots);
    for (std::uint32_t bits = 0; bits < zero.encoder.size(); ++bits)
      zero.encoder[bits] = static_cast<std::uint8_t>(encoder_walk(bits, cf.depth));
  }
  zero.leaves.assign(cf.leaf_slots(), 0);
  while (out.trees.size() < padded) out.trees.push_back(zero);
  out.adder_stages = std::bit_width(padded) - 1;
  return out;
}

std::uint32_t comparator_bits(const CompiledTree& tree, const CodeVector& v) {
  std::uint32_t bits = 0;
  for (std::size_t i = 0; i < tree.comparators.size(); ++i) {
    auto [feature, rank] = tree.comparators[i];
    if (v[feature] < rank) bits |= 1u << i;
  }
  return bits;
}

std::pair<int, std::int32_t> tpu_eval(const CompiledTree& tree, int depth,
                                      const CodeVector& v) {
  std::uint32_t bits = comparator_bits(tree, v);
  int leaf = tree.encoder.empty() ? encoder_walk(bits, depth)
                                  : tree.encoder[bits];
  return {leaf, tree.leaves[leaf]};
}

std::int64_t adder_tree(std::span<const std::int64_t> values) {
  if (!std::has_single_bit(values.size()))
    throw FormatError("adder tree needs a power-of-two input count");
  std::vector<std::int64_t> stage(values.begin(), values.end());
  while (stage.size() > 1) {
    for (std::size_t i = 0; i < stage.size() / 2; ++i)
      stage[i] = stage[2 * i] + stage[2 * i + 1];
    stage.resize(stage.size() / 2);
  }
  return stage[0];
}

std::int64_t score(const CompiledForest& cf, const CodeVector& v) {
  std::vector<std::int64_t> values(cf.trees.size());
  for (std::size_t t = 0; t < cf.trees.size(); ++t)
    values[t] = tpu_eval(cf.trees[t], cf.depth, v).second;
  return cf.base_score_q + adder_tree(values);
}

double score_reference(const Forest& forest, std::span<const double> raw) {
  for (std::size_t f = 0; f < raw.size(); ++f)
    if (std::isnan(raw[f]))
      throw FormatError("NaN input for feature " + std::to_string(f));
  double margin = forest.base_score;
  for (const Tree& tree : forest.trees) margin += traverse_tree(tree, raw);
  return margin;
}

double to_probability(double margin) { return 1.0 / (1.0 + std::exp(-margin)); }

namespace {

std::string to_hex(std::span<const std::uint8_t> bytes) {
  static const char digits[] = "0123456789abcdef";
  std::string s;
  s.reserve(bytes.size() * 2);
  for (std::uint8_t b : bytes) {
    s.push_back(digits[b >> 4]);
    s.push_back(digits[b & 0xf]);
  }
  return s;
}

std::vector<std::uint8_t> from_hex(const std::string& s) {
  if (s.size() % 2 != 0) throw FormatError("odd-length hex string");
  auto nib = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    throw FormatError("bad hex digit");
  };
  std::vector<std::uint8_t> out(s.size() / 2);
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = static_cast<std::uint8_t>(nib(s[2 * i]) << 4 | nib(s[2 * i + 1]));
  return out;
}

std::string leaves_hex(const std::vector<std::int32_t>& leaves) {
  std::vector<std::uint8_t> bytes;
  bytes.reserve(leaves.size() * 4);
  for (std::int32_t v : leaves) {
    std::uint32_t u = static_cast<std::uint32_t>(v);
    for (int b = 0; b < 4; ++b)
      bytes.push_back(static_cast<std::uint8_t>(u >> (8 * b)));
  }
  return to_hex(bytes);
}

std::vector<std::int32_t> leaves_from_hex(const std::string& s) {
  std::vector<std::uint8_t> bytes = from_hex(s);
  if (bytes.size() % 4 != 0) throw FormatError("leaf table length");
  std::vector<std::int32_t> leaves(bytes.size() / 4);
  for (std::size_t i = 0; i < leaves.size(); ++i) {
    std::uint32_t u = 0;
    for (int b = 0; b < 4; ++b)
      u |= static_cast<std::uint32_t>(bytes[4 * i + b]) << (8 * b);
    leaves[i] = static_cast<std::int32_t>(u);
  }
  return leaves;
}

}  // namespace

std::string serialize_compiled(const CompiledForest& cf) {
  ordered_json doc;
  doc["version"] = "cf-v1";
  doc["depth"] = cf.depth;
  doc["features"] = cf.quant.feature_count();
  doc["width"] = cf.quant.width;
  doc["fxp"] = {{"leaf_bits", cf.fxp.leaf_bits},
                {"frac_bits", cf.fxp.frac_bits},
                {"acc_bits", cf.fxp.acc_bits}};
  doc["adder_stages"] = cf.adder_stages;
  doc["base_score_q"] = cf.base_score_q;
  doc["real_tree_count"] = cf.real_tree_count;
  doc["quant_thresholds"] = cf.quant.per_feature;
  ordered_json trees = ordered_json::array();
  for (const CompiledTree& t : cf.trees) {
    ordered_json jt;
    ordered_json comps = ordered_json::array();
    for (auto [f, r] : t.comparators) comps.push_back({f, r});
    jt["comparators"] = std::move(comps);
    jt["encoder_hex"] = to_hex(t.encoder);
    jt["leaves_hex"] = leaves_hex(t.leaves);
    trees.push_back(std::move(jt));
  }
  doc["trees"] = std::move(trees);
  return doc.dump() + "\n";
}

CompiledForest parse_compiled(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed compiled JSON: ") + e.what());
  }
  if (doc.value("version", "") != "cf-v1")
    throw FormatError("unsupported compiled-forest version");
  CompiledForest cf;
  cf.depth = doc["depth"].get<int>();
  cf.adder_stages = doc["adder_stages"].get<int>();
  cf.base_score_q = doc["base_score_q"].get<std::int64_t>();
  cf.real_tree_count = doc["real_tree_count"].get<std::size_t>();
  cf.fxp.leaf_bits = doc["fxp"]["leaf_bits"].get<int>();
  cf.fxp.frac_bits = doc["fxp"]["frac_bits"].get<int>();
  cf.fxp.acc_bits = doc["fxp"]["acc_bits"].get<int>();
  cf.quant.width = doc["width"].get<int>();
  cf.quant.per_feature =
      doc["quant_thresholds"].get<std::vector<std::vector<double>>>();
  if (doc["features"].get<int>() != cf.quant.feature_count())
    throw FormatError("feature count mismatch in compiled container");
  for (const json& jt : doc["trees"]) {
    CompiledTree t;
    for (const json& jc : jt["comparators"])
      t.comparators.emplace_back(jc[0].get<std::uint16_t>(),
                                 jc[1].get<std::uint16_t>());
    std::vector<std::uint8_t> enc = from_hex(jt["encoder_hex"].get<std::string>());
    t.encoder = std::move(enc);
    t.leaves = leaves_from_hex(jt["leaves_hex"].get<std::string>());
    if (t.comparators.size() != (1u << cf.depth) - 1 ||
        t.leaves.size() != (1u << cf.depth))
      throw FormatError("compiled tree slot counts do not match depth");
    cf.trees.push_back(std::move(t));
  }
  if (!std::has_single_bit(cf.trees.size()))
    throw FormatError("compiled forest tree count is not a power of two");
  return cf;
}

}  // namespace treestream
