#include <random>

#include "doctest.h"
#include "test_util.hpp"
#include "treestream/errors.hpp"
#include "treestream/quantize.hpp"

using namespace treestream;

namespace {

// Canonical forest of depth-1 stumps, one split per tree, dense feature 0.
CanonicalForest stumps_on_feature0(const std::vector<double>& thresholds) {
  Forest f;
  f.num_raw_features = 1;
  for (double t : thresholds) {
    Tree tree;
    tree.nodes.resize(3);
    tree.nodes[0] = {false, 0, t, 1, 2, 0.0};
    tree.nodes[1] = {true, -1, 0.0, -1, -1, -1.0};
    tree.nodes[2] = {true, -1, 0.0, -1, -1, 1.0};
    f.trees.push_back(tree);
  }
  return canonicalize(f, 1);
}

}  // namespace

TEST_CASE("build_quant_spec: dedup and sort") {
  CanonicalForest cf = stumps_on_feature0({1.5, 0.5, 1.5});
  QuantSpec spec = build_quant_spec(cf, 4);
  REQUIRE(spec.feature_count() == 1);
  CHECK(spec.per_feature[0] == std::vector<double>({0.5, 1.5}));
  CHECK(rank_of(spec, 0, 0.5) == 1);
  CHECK(rank_of(spec, 0, 1.5) == 2);
  CHECK_THROWS_AS(rank_of(spec, 0, 0.7), FormatError);
}

TEST_CASE("build_quant_spec: overflow at 16 thresholds, w=4") {
  std::vector<double> ts;
  for (int i = 0; i < 16; ++i) ts.push_back(i * 0.25);
  CanonicalForest cf = stumps_on_feature0(ts);
  CHECK_THROWS_AS(build_quant_spec(cf, 4), QuantOverflow);
  CHECK_NOTHROW(build_quant_spec(cf, 5));

  ts.pop_back();  // 15 fits in 4 bits
  CHECK_NOTHROW(build_quant_spec(stumps_on_feature0(ts), 4));
}

TEST_CASE("paper-shaped model: F=112, 64-byte records") {
  Forest f = gen_synthetic(100, 3, 1146, 15, 1, 112);
  auto [pruned, map] = prune_features(f);
  CanonicalForest cf = canonicalize(pruned, 3);
  QuantSpec spec = build_quant_spec(cf, 4);
  CHECK(spec.feature_count() == 112);
  CHECK(spec.bits_per_record() == 512);
  CHECK(spec.bytes_per_record() == 64);
}

TEST_CASE("encode_record: boundaries and ties") {
  CanonicalForest cf = stumps_on_feature0({0.5, 1.5});
  QuantSpec spec = build_quant_spec(cf, 4);
  CHECK(encode_record(std::vector<double>{1.0}, spec)[0] == 1);
  CHECK(encode_record(std::vector<double>{0.5}, spec)[0] == 1);  // tie: >= t
  CHECK(encode_record(std::vector<double>{0.49}, spec)[0] == 0);
  CHECK(encode_record(std::vector<double>{1.5}, spec)[0] == 2);
  CHECK(encode_record(std::vector<double>{99.0}, spec)[0] == 2);
  double nan = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_WITH_AS(encode_record(std::vector<double>{nan}, spec),
                       doctest::Contains("feature 0"), FormatError);
}

TEST_CASE("order preservation: (x < t_r) iff (code < r)") {
  std::mt19937_64 rng(5);
  for (int it = 0; it < 50; ++it) {
    Forest f = gen_synthetic(10, 3, 8, 7, 3000 + it);
    auto [pruned, map] = prune_features(f);
    CanonicalForest cf = canonicalize(pruned, 3);
    QuantSpec spec = build_quant_spec(cf, 4);
    for (int rep = 0; rep < 40; ++rep) {
      std::vector<double> raw = testutil::random_raw_for_spec(spec, rng);
      CodeVector codes = encode_record(raw, spec);
      for (int fi = 0; fi < spec.feature_count(); ++fi) {
        for (int r = 1; r <= spec.thresholds(fi); ++r) {
          bool traversal = raw[fi] < spec.per_feature[fi][r - 1];
          bool quantized = codes[fi] < r;
          CHECK(traversal == quantized);
        }
      }
    }
  }
}

TEST_CASE("pack_records: nibble layout") {
  QuantSpec spec;
  spec.width = 4;
  spec.per_feature = {{0.1, 0.2, 0.3}, {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7,
                                        0.8, 0.9, 1.0}};
  REQUIRE(spec.bytes_per_record() == 64);
  std::vector<CodeVector> vecs = {{3, 10}};
  std::vector<std::uint8_t> bytes = pack_records(vecs, spec);
  REQUIRE(bytes.size() == 64);
  CHECK(bytes[0] == 0xA3);  // f0 low nibble, f1 high nibble
  for (std::size_t i = 1; i < 64; ++i) CHECK(bytes[i] == 0);
}

TEST_CASE("pack_records: 112-feature record pads bytes 56..63") {
  Forest f = gen_synthetic(100, 3, 1146, 15, 1, 112);
  auto [pruned, map] = prune_features(f);
  CanonicalForest cf = canonicalize(pruned, 3);
  QuantSpec spec = build_quant_spec(cf, 4);
  CodeVector v(112);
  for (int i = 0; i < 112; ++i)
    v[i] = static_cast<std::uint16_t>(
        std::min<int>(15, spec.thresholds(i)));
  std::vector<std::uint8_t> bytes = pack_records(std::vector<CodeVector>{v}, spec);
  REQUIRE(bytes.size() == 64);
  for (std::size_t i = 56; i < 64; ++i) CHECK(bytes[i] == 0);
}

TEST_CASE("pack/unpack round trip property") {
  std::mt19937_64 rng(17);
  for (int it = 0; it < 50; ++it) {
    QuantSpec spec;
    spec.width = 1 + static_cast<int>(rng() % 16);
    int features = 1 + static_cast<int>(rng() % 200);
    spec.per_feature.assign(features, {});
    for (auto& ts : spec.per_feature) {
      int k = static_cast<int>(rng() % ((1u << spec.width) - 1)) + 0;
      for (int i = 0; i < k; ++i) ts.push_back(i + 0.5);
    }
    CHECK(spec.bytes_per_record() % 64 == 0);
    std::vector<CodeVector> vecs(3);
    for (CodeVector& v : vecs) {
      v.resize(features);
      for (int f = 0; f < features; ++f)
        v[f] = static_cast<std::uint16_t>(rng() % (spec.thresholds(f) + 1));
    }
    std::vector<std::uint8_t> bytes = pack_records(vecs, spec);
    std::vector<CodeVector> back = unpack_records(bytes, spec);
    CHECK(back == vecs);
  }
}

TEST_CASE("unpack_record: format errors") {
  CanonicalForest cf = stumps_on_feature0({0.5});
  QuantSpec spec = build_quant_spec(cf, 4);
  std::vector<std::uint8_t> bytes(64, 0);
  CHECK_NOTHROW(unpack_record(bytes, spec));
  CHECK_THROWS_AS(
      unpack_record(std::span(bytes.data(), 63), spec), FormatError);
  bytes[10] = 1;  // padding byte (only feature 0 nibble is valid)
  CHECK_THROWS_AS(unpack_record(bytes, spec), FormatError);
}
