#include <cmath>
#include <random>

#include "doctest.h"
#include "test_util.hpp"
#include "treestream/datapath.hpp"
#include "treestream/errors.hpp"

using namespace treestream;

namespace {

struct Pipeline {
  Forest forest;
  FeatureMap map;
  CanonicalForest canon;
  QuantSpec spec;
  CompiledForest compiled;
};

Pipeline build(int trees, int depth, int raw_features, int thresholds,
               std::uint64_t seed, int used = 0) {
  Pipeline p;
  p.forest = gen_synthetic(trees, depth, raw_features, thresholds, seed, used);
  auto [pruned, map] = prune_features(p.forest);
  p.map = map;
  p.forest = pruned;
  p.canon = canonicalize(p.forest, depth);
  p.spec = build_quant_spec(p.canon, 4);
  p.compiled = compile_forest(p.canon, p.spec);
  return p;
}

}  // namespace

TEST_CASE("quantize_leaf: exact values and half-even ties") {
  CHECK(quantize_leaf(0.0) == 0);
  CHECK(quantize_leaf(1.0) == (1 << kFracBits));
  CHECK(quantize_leaf(-0.5) == -(1 << (kFracBits - 1)));
  // Ties at half a ULP round to even.
  CHECK(quantize_leaf(1.5 / kFxpScale) == 2);
  CHECK(quantize_leaf(2.5 / kFxpScale) == 2);
  CHECK(quantize_leaf(-1.5 / kFxpScale) == -2);
  CHECK(quantize_leaf(0.01) == 167772);  // round(0.01 * 2^24)
}

TEST_CASE("quantize_leaf: range enforcement") {
  CHECK_NOTHROW(quantize_leaf(127.999999));
  CHECK_THROWS_AS(quantize_leaf(128.0), FxpRangeError);
  CHECK_THROWS_AS(quantize_leaf(-128.0), FxpRangeError);
  CHECK_THROWS_AS(quantize_leaf(std::numeric_limits<double>::quiet_NaN()),
                  FxpRangeError);
}

TEST_CASE("compile_forest: stump geometry") {
  Pipeline p = build(1, 3, 4, 3, 21);
  CHECK(p.compiled.depth == 3);
  CHECK(p.compiled.real_tree_count == 1);
  CHECK(p.compiled.padded_tree_count() == 1);  // bit_ceil(1) == 1
  CHECK(p.compiled.adder_stages == 0);
  const CompiledTree& t = p.compiled.trees[0];
  CHECK(t.comparators.size() == 7);
  CHECK(t.encoder.size() == 128);  // 2^7, materialized at D=3
  CHECK(t.leaves.size() == 8);
}

TEST_CASE("compile_forest: 100 trees pad to 128") {
  Pipeline p = build(100, 3, 60, 10, 22);
  CHECK(p.compiled.real_tree_count == 100);
  CHECK(p.compiled.padded_tree_count() == 128);
  CHECK(p.compiled.adder_stages == 7);
  // Padding trees are all-zero and always route to a leaf worth 0.
  for (std::size_t i = 100; i < 128; ++i) {
    for (std::int32_t v : p.compiled.trees[i].leaves) CHECK(v == 0);
    for (auto [f, r] : p.compiled.trees[i].comparators) CHECK(r == 0);
  }
}

TEST_CASE("always-false comparator routes right: padded tree hits last leaf") {
  Forest f;
  f.num_raw_features = 1;
  Tree t;
  t.nodes.push_back({true, -1, 0.0, -1, -1, 0.25});
  f.trees.push_back(t);
  CanonicalForest cf = canonicalize(f, 3);
  QuantSpec spec = build_quant_spec(cf, 4);
  CompiledForest comp = compile_forest(cf, spec);
  CodeVector v(spec.feature_count(), 0);
  auto [leaf, value] = tpu_eval(comp.trees[0], 3, v);
  CHECK(leaf == (1 << 3) - 1);  // rank 0 never fires, all-right path
  CHECK(value == quantize_leaf(0.25));
}

TEST_CASE("adder_tree: exact sum, power-of-two arity") {
  std::vector<std::int64_t> vals = {1, -2, 3, 40, -500, 6, 7, 8};
  std::int64_t expect = 0;
  for (std::int64_t v : vals) expect += v;
  CHECK(adder_tree(vals) == expect);
  std::vector<std::int64_t> bad = {1, 2, 3};
  CHECK_THROWS_AS(adder_tree(bad), FormatError);
}

TEST_CASE("score: 100 identical 0.01 leaves sum without drift") {
  Forest f;
  f.num_raw_features = 1;
  for (int i = 0; i < 100; ++i) {
    Tree t;
    t.nodes.push_back({true, -1, 0.0, -1, -1, 0.01});
    f.trees.push_back(t);
  }
  CanonicalForest cf = canonicalize(f, 3);
  QuantSpec spec = build_quant_spec(cf, 4);
  CompiledForest comp = compile_forest(cf, spec);
  CodeVector v(spec.feature_count(), 0);
  CHECK(score(comp, v) == 100 * static_cast<std::int64_t>(quantize_leaf(0.01)));
}

TEST_CASE("leaf identity: quantized path equals float-domain path") {
  std::mt19937_64 rng(31);
  for (int it = 0; it < 30; ++it) {
    Pipeline p = build(25, 3, 30, 8, 4000 + it);
    for (int rep = 0; rep < 60; ++rep) {
      std::vector<double> dense = testutil::random_raw_for_spec(p.spec, rng);
      CodeVector codes = encode_record(dense, p.spec);
      for (std::size_t t = 0; t < p.canon.trees.size(); ++t) {
        int oracle = testutil::canonical_leaf_index(p.canon.trees[t], 3, dense);
        auto [leaf, value] = tpu_eval(p.compiled.trees[t], 3, codes);
        CHECK(leaf == oracle);
      }
    }
  }
}

TEST_CASE("margin matches float oracle within quantization bound") {
  std::mt19937_64 rng(37);
  for (int it = 0; it < 30; ++it) {
    Pipeline p = build(40, 3, 25, 9, 5000 + it);
    double bound =
        (p.compiled.padded_tree_count() + 1) * std::ldexp(1.0, -(kFracBits + 1));
    for (int rep = 0; rep < 60; ++rep) {
      std::vector<double> dense = testutil::random_raw_for_spec(p.spec, rng);
      CodeVector codes = encode_record(dense, p.spec);
      double margin = fxp_to_double(score(p.compiled, codes));
      double oracle = testutil::oracle_margin(p.forest, dense);
      CHECK(std::abs(margin - oracle) <= bound);
      CHECK(score_reference(p.forest, dense) == oracle);
    }
  }
}

TEST_CASE("encoder table agrees with path walk") {
  Pipeline p = build(12, 3, 15, 6, 41);
  for (const CompiledTree& t : p.compiled.trees) {
    REQUIRE(t.encoder.size() == 128);
    for (std::uint32_t bits = 0; bits < 128; ++bits)
      CHECK(static_cast<int>(t.encoder[bits]) == encoder_walk(bits, 3));
  }
}

TEST_CASE("encoder ignores off-path comparators") {
  Pipeline p = build(4, 3, 10, 5, 43);
  std::mt19937_64 rng(43);
  for (const CompiledTree& t : p.compiled.trees) {
    for (int rep = 0; rep < 200; ++rep) {
      std::uint32_t bits = static_cast<std::uint32_t>(rng() % 128);
      int leaf = encoder_walk(bits, 3);
      // Flipping a comparator not on the taken path leaves the leaf alone.
      int slot = 0;
      std::vector<bool> on_path(7, false);
      for (int level = 0; level < 3; ++level) {
        on_path[slot] = true;
        slot = (bits >> slot) & 1 ? 2 * slot + 1 : 2 * slot + 2;
      }
      for (int j = 0; j < 7; ++j) {
        if (on_path[j]) continue;
        CHECK(encoder_walk(bits ^ (1u << j), 3) == leaf);
      }
    }
  }
}

TEST_CASE("base score enters the fixed-point margin") {
  Forest f = gen_synthetic(8, 3, 10, 5, 51);
  f.base_score = -0.375;
  auto [pruned, map] = prune_features(f);
  CanonicalForest cf = canonicalize(pruned, 3);
  cf.base_score = f.base_score;
  QuantSpec spec = build_quant_spec(cf, 4);
  CompiledForest comp = compile_forest(cf, spec);
  CHECK(comp.base_score_q == quantize_leaf(-0.375));
  std::mt19937_64 rng(51);
  std::vector<double> dense = testutil::random_raw_for_spec(spec, rng);
  CodeVector codes = encode_record(dense, spec);
  double margin = fxp_to_double(score(comp, codes));
  double oracle = testutil::oracle_margin(pruned, dense);
  CHECK(std::abs(margin - oracle) <=
        (comp.padded_tree_count() + 1) * std::ldexp(1.0, -(kFracBits + 1)));
}

TEST_CASE("to_probability is the logistic map") {
  CHECK(to_probability(0.0) == 0.5);
  CHECK(to_probability(2.0) == doctest::Approx(1.0 / (1.0 + std::exp(-2.0))));
  CHECK(to_probability(-30.0) < 1e-12);
}

TEST_CASE("cf-v1 serialization round trip") {
  Pipeline p = build(10, 3, 20, 7, 61);
  std::string text = serialize_compiled(p.compiled);
  CompiledForest back = parse_compiled(text);
  CHECK(serialize_compiled(back) == text);
  std::mt19937_64 rng(61);
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<double> dense = testutil::random_raw_for_spec(p.spec, rng);
    CodeVector codes = encode_record(dense, p.spec);
    CHECK(score(back, codes) == score(p.compiled, codes));
  }
  CHECK_THROWS_AS(parse_compiled("{\"version\": \"cf-v0\"}"), FormatError);
}
