#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace treestream {

/// One node of a binary decision tree. Nodes live in a flat arena inside
/// Tree; `left` is the branch taken when feature < threshold.
struct TreeNode {
  bool is_leaf = false;
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double leaf_value = 0.0;
};

struct Tree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  int depth() const;
};

/// A parsed tree ensemble in raw-feature space.
struct Forest {
  std::vector<Tree> trees;
  int num_raw_features = 0;
  double base_score = 0.0;  // margin-space offset
  std::string name;
  std::string version;
};

/// Raw-feature-index -> dense-index map produced by pruning.
struct FeatureMap {
  std::map<int, int> raw_to_dense;
  std::vector<int> dense_to_raw;

  int dense_count() const { return static_cast<int>(dense_to_raw.size()); }
};

/// One comparator slot of a complete tree. `always_false` marks padding
/// introduced when the original tree was shallower than D.
struct CanonicalSlot {
  int feature = 0;
  double threshold = 0.0;
  bool always_false = true;
};

/// A tree filled out to fixed depth D: 2^D-1 comparator slots in heap
/// order (slot i has children 2i+1 left, 2i+2 right) and 2^D leaf slots.
struct CanonicalTree {
  std::vector<CanonicalSlot> comparators;
  std::vector<double> leaves;
};

struct CanonicalForest {
  int depth = 0;
  std::vector<CanonicalTree> trees;
  FeatureMap feature_map;
  double base_score = 0.0;

  int comparator_slots() const { return (1 << depth) - 1; }
  int leaf_slots() const { return 1 << depth; }
};

struct ParseOptions {
  int num_raw_features = 0;  // 0 = infer as max referenced feature + 1
  double base_score = 0.0;
};

/// Parse the JSON tree-dump format (array of trees, nodes carry
/// split/split_condition/yes/no/children or leaf).
Forest parse_model(const std::string& text, const ParseOptions& opts = {});

/// Inverse of parse_model, producing the same dump shape.
std::string serialize_model(const Forest& forest);

/// Drop unreferenced raw features; the returned forest speaks dense
/// indices 0..F-1. Dense order follows ascending raw index.
std::pair<Forest, FeatureMap> prune_features(const Forest& forest);

/// Fill every tree out to depth D, replicating shallow leaves into all
/// descendant leaf slots and marking vacated comparators always-false.
CanonicalForest canonicalize(const Forest& forest, int depth);

/// Deterministic random model generator. Distinct thresholds per feature
/// never exceed thresholds_per_feature. used_features limits the feature
/// pool (0 = all raw features eligible); when the pool is no larger than
/// the total split count every pool feature is referenced.
Forest gen_synthetic(int trees, int depth, int raw_features,
                     int thresholds_per_feature, std::uint64_t seed,
                     int used_features = 0);

/// "canon-v1" JSON container for CanonicalForest.
std::string serialize_canonical(const CanonicalForest& cf);
CanonicalForest parse_canonical(const std::string& text);

/// Root-to-leaf traversal of one tree (left iff x < threshold).
double traverse_tree(const Tree& tree, std::span<const double> raw);

/// Slot-walk evaluation of a canonical tree over dense features.
double canonical_tree_eval(const CanonicalTree& tree, int depth,
                           std::span<const double> dense);

}  // namespace treestream
