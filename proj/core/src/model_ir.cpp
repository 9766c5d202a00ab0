#include "treestream/model_ir.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "json.hpp"
#include "treestream/errors.hpp"

namespace treestream {

using nlohmann::json;
using nlohmann::ordered_json;

int Tree::depth() const {
  if (nodes.empty()) return 0;
  std::function<int(int)> walk = [&](int idx) -> int {
    const TreeNode& n = nodes[idx];
    if (n.is_leaf) return 0;
    return 1 + std::max(walk(n.left), walk(n.right));
  };
  return walk(0);
}

namespace {

int parse_split_field(const json& split, int tree_idx, int node_id) {
  if (split.is_number_integer()) return split.get<int>();
  if (split.is_string()) {
    std::string s = split.get<std::string>();
    if (!s.empty() && (s[0] == 'f' || s[0] == 'F')) s = s.substr(1);
    try {
      size_t pos = 0;
      int v = std::stoi(s, &pos);
      if (pos == s.size() && v >= 0) return v;
    } catch (const std::exception&) {
    }
  }
  throw ParseError("tree " + std::to_string(tree_idx) + " node " +
                   std::to_string(node_id) + ": unparseable split field");
}

// Walks one dumped tree, checking child ids resolve and no node is
// visited twice (cycles / shared subtrees are rejected).
void parse_tree_node(const json& obj, int tree_idx, Tree& tree,
                     std::unordered_set<int>& seen, int arena_slot) {
  int node_id = obj.value("nodeid", -1);
  if (node_id >= 0 && !seen.insert(node_id).second) {
    throw ParseError("tree " + std::to_string(tree_idx) + " node " +
                     std::to_string(node_id) + ": duplicate node id (cycle?)");
  }
  TreeNode& node = tree.nodes[arena_slot];
  if (obj.contains("leaf")) {
    node.is_leaf = true;
    if (!obj["leaf"].is_number())
      throw ParseError("tree " + std::to_string(tree_idx) + " node " +
                       std::to_string(node_id) + ": non-numeric leaf");
    node.leaf_value = obj["leaf"].get<double>();
    if (!std::isfinite(node.leaf_value))
      throw ParseError("tree " + std::to_string(tree_idx) + " node " +
                       std::to_string(node_id) + ": non-finite leaf value");
    return;
  }
  for (const char* field : {"split", "split_condition", "yes", "no", "children"}) {
    if (!obj.contains(field))
      throw ParseError("tree " + std::to_string(tree_idx) + " node " +
                       std::to_string(node_id) + ": missing field '" +
                       field + "'");
  }
  node.is_leaf = false;
  node.feature = parse_split_field(obj["split"], tree_idx, node_id);
  node.threshold = obj["split_condition"].get<double>();
  if (!std::isfinite(node.threshold))
    throw ParseError("tree " + std::to_string(tree_idx) + " node " +
                     std::to_string(node_id) + ": non-finite threshold");
  const json& children = obj["children"];
  if (!children.is_array() || children.size() != 2)
    throw ParseError("tree " + std::to_string(tree_idx) + " node " +
                     std::to_string(node_id) + ": non-binary node");
  int yes_id = obj["yes"].get<int>();
  int no_id = obj["no"].get<int>();
  const json* yes_child = nullptr;
  const json* no_child = nullptr;
  for (const json& c : children) {
    int cid = c.value("nodeid", -1);
    if (cid == yes_id) yes_child = &c;
    if (cid == no_id) no_child = &c;
  }
  if (!yes_child || !no_child || yes_child == no_child)
    throw ParseError("tree " + std::to_string(tree_idx) + " node " +
                     std::to_string(node_id) +
                     ": yes/no ids do not match the two children");
  int left = static_cast<int>(tree.nodes.size());
  int right = left + 1;
  tree.nodes.emplace_back();
  tree.nodes.emplace_back();  // invalidates `node`
  tree.nodes[arena_slot].left = left;
  tree.nodes[arena_slot].right = right;
  parse_tree_node(*yes_child, tree_idx, tree, seen, left);
  parse_tree_node(*no_child, tree_idx, tree, seen, right);
}

}  // namespace

Forest parse_model(const std::string& text, const ParseOptions& opts) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed JSON: ") + e.what());
  }
  Forest forest;
  forest.base_score = opts.base_score;
  const json* trees = nullptr;
  if (doc.is_array()) {
    trees = &doc;
  } else if (doc.is_object() && doc.contains("trees")) {
    // container form produced by serialize_model
    trees = &doc["trees"];
    forest.base_score = doc.value("base_score", opts.base_score);
    forest.name = doc.value("name", "");
    forest.version = doc.value("version", "");
    if (doc.contains("num_raw_features"))
      forest.num_raw_features = doc["num_raw_features"].get<int>();
  } else {
    throw ParseError("model must be a JSON array of trees");
  }
  if (!trees->is_array()) throw ParseError("'trees' must be an array");

  int max_feature = -1;
  for (size_t i = 0; i < trees->size(); ++i) {
    Tree tree;
    tree.nodes.emplace_back();
    std::unordered_set<int> seen;
    parse_tree_node((*trees)[i], static_cast<int>(i), tree, seen, 0);
    for (const TreeNode& n : tree.nodes)
      if (!n.is_leaf) max_feature = std::max(max_feature, n.feature);
    forest.trees.push_back(std::move(tree));
  }
  if (opts.num_raw_features > 0) forest.num_raw_features = opts.num_raw_features;
  if (forest.num_raw_features == 0) forest.num_raw_features = max_feature + 1;
  for (size_t i = 0; i < forest.trees.size(); ++i) {
    for (const TreeNode& n : forest.trees[i].nodes) {
      if (!n.is_leaf && n.feature >= forest.num_raw_features)
        throw ParseError("tree " + std::to_string(i) + ": feature " +
                         std::to_string(n.feature) + " out of range (" +
                         std::to_string(forest.num_raw_features) +
                         " raw features)");
    }
  }
  return forest;
}

namespace {

ordered_json dump_node(const Tree& tree, int idx, int node_id, int depth_level,
                       int& next_id) {
  const TreeNode& n = tree.nodes[idx];
  ordered_json obj;
  obj["nodeid"] = node_id;
  if (n.is_leaf) {
    obj["leaf"] = n.leaf_value;
    return obj;
  }
  obj["depth"] = depth_level;
  obj["split"] = "f" + std::to_string(n.feature);
  obj["split_condition"] = n.threshold;
  int yes_id = next_id++;
  int no_id = next_id++;
  obj["yes"] = yes_id;
  obj["no"] = no_id;
  obj["missing"] = yes_id;
  obj["children"] = ordered_json::array(
      {dump_node(tree, n.left, yes_id, depth_level + 1, next_id),
       dump_node(tree, n.right, no_id, depth_level + 1, next_id)});
  return obj;
}

}  // namespace

std::string serialize_model(const Forest& forest) {
  ordered_json doc;
  doc["name"] = forest.name;
  doc["version"] = forest.version;
  doc["num_raw_features"] = forest.num_raw_features;
  doc["base_score"] = forest.base_score;
  ordered_json trees = ordered_json::array();
  for (const Tree& tree : forest.trees) {
    int next_id = 1;
    trees.push_back(dump_node(tree, 0, 0, 0, next_id));
  }
  doc["trees"] = std::move(trees);
  return doc.dump(2) + "\n";
}

std::pair<Forest, FeatureMap> prune_features(const Forest& forest) {
  std::set<int> used;
  for (const Tree& tree : forest.trees)
    for (const TreeNode& n : tree.nodes)
      if (!n.is_leaf) used.insert(n.feature);

  FeatureMap map;
  for (int raw : used) {
    map.raw_to_dense[raw] = static_cast<int>(map.dense_to_raw.size());
    map.dense_to_raw.push_back(raw);
  }
  Forest pruned = forest;
  pruned.num_raw_features = map.dense_count();
  for (Tree& tree : pruned.trees)
    for (TreeNode& n : tree.nodes)
      if (!n.is_leaf) n.feature = map.raw_to_dense.at(n.feature);
  return {std::move(pruned), std::move(map)};
}

namespace {

// Recursively place nodes into the fixed comparator/leaf slot arrays.
// Leaves above the bottom level replicate into every descendant leaf slot.
void fill_slots(const Tree& tree, int node_idx, CanonicalTree& out, int slot,
                int level, int depth, int leaf_lo, int leaf_hi) {
  const TreeNode& n = tree.nodes[node_idx];
  if (n.is_leaf) {
    for (int l = leaf_lo; l < leaf_hi; ++l) out.leaves[l] = n.leaf_value;
    return;  // vacated comparator slots stay always_false
  }
  out.comparators[slot] = {n.feature, n.threshold, false};
  int mid = (leaf_lo + leaf_hi) / 2;
  fill_slots(tree, n.left, out, 2 * slot + 1, level + 1, depth, leaf_lo, mid);
  fill_slots(tree, n.right, out, 2 * slot + 2, level + 1, depth, mid, leaf_hi);
}

}  // namespace

CanonicalForest canonicalize(const Forest& forest, int depth) {
  CanonicalForest cf;
  cf.depth = depth;
  cf.base_score = forest.base_score;
  for (size_t i = 0; i < forest.trees.size(); ++i) {
    int d = forest.trees[i].depth();
    if (d > depth)
      throw ParseError("tree " + std::to_string(i) + " has depth " +
                       std::to_string(d) + " > configured depth " +
                       std::to_string(depth));
    CanonicalTree ct;
    ct.comparators.assign((1u << depth) - 1, CanonicalSlot{});
    ct.leaves.assign(1u << depth, 0.0);
    fill_slots(forest.trees[i], 0, ct, 0, 0, depth, 0, 1 << depth);
    cf.trees.push_back(std::move(ct));
  }
  // Identity map when the forest is already dense; callers normally
  // canonicalize the pruned forest.
  for (int f = 0; f < forest.num_raw_features; ++f) {
    cf.feature_map.raw_to_dense[f] = f;
    cf.feature_map.dense_to_raw.push_back(f);
  }
  return cf;
}

Forest gen_synthetic(int trees, int depth, int raw_features,
                     int thresholds_per_feature, std::uint64_t seed,
                     int used_features) {
  if (trees < 0 || depth < 0 || raw_features < 1 || thresholds_per_feature < 1)
    throw ParseError("gen_synthetic: invalid shape parameters");
  std::mt19937_64 rng(seed);

  int pool_size = used_features > 0
                      ? std::min(used_features, raw_features)
                      : raw_features;
  std::vector<int> pool(raw_features);
  for (int i = 0; i < raw_features; ++i) pool[i] = i;
  std::shuffle(pool.begin(), pool.end(), rng);
  pool.resize(pool_size);
  std::sort(pool.begin(), pool.end());

  // Fixed candidate thresholds per pool feature; drawing splits from
  // these keeps the per-feature distinct count bounded by k.
  std::uniform_real_distribution<double> thr_dist(-10.0, 10.0);
  std::unordered_map<int, std::vector<double>> candidates;
  for (int f : pool) {
    std::set<double> ts;
    while (static_cast<int>(ts.size()) < thresholds_per_feature)
      ts.insert(std::round(thr_dist(rng) * 1e4) / 1e4);
    candidates[f] = std::vector<double>(ts.begin(), ts.end());
  }

  std::uniform_real_distribution<double> leaf_dist(-2.0, 2.0);
  std::uniform_int_distribution<int> pool_pick(0, pool_size - 1);
  std::uniform_int_distribution<int> cand_pick(0, thresholds_per_feature - 1);
  std::uniform_real_distribution<double> coin(0.0, 1.0);

  Forest forest;
  forest.name = "synthetic";
  forest.version = "1";
  forest.num_raw_features = raw_features;
  forest.base_score = 0.0;

  std::vector<std::pair<int, int>> split_sites;  // (tree, node) in creation order
  for (int t = 0; t < trees; ++t) {
    Tree tree;
    // Grow a random tree of depth <= depth; interior nodes split with
    // probability rising toward the root so most trees reach full depth.
    std::function<int(int)> grow = [&](int level) -> int {
      int idx = static_cast<int>(tree.nodes.size());
      tree.nodes.emplace_back();
      bool split = level < depth && (level == 0 || coin(rng) < 0.85);
      if (!split) {
        tree.nodes[idx].is_leaf = true;
        tree.nodes[idx].leaf_value = std::round(leaf_dist(rng) * 1e6) / 1e6;
        return idx;
      }
      int f = pool[pool_pick(rng)];
      tree.nodes[idx].is_leaf = false;
      tree.nodes[idx].feature = f;
      tree.nodes[idx].threshold = candidates[f][cand_pick(rng)];
      split_sites.emplace_back(t, idx);
      int l = grow(level + 1);
      int r = grow(level + 1);
      tree.nodes[idx].left = l;
      tree.nodes[idx].right = r;
      return idx;
    };
    grow(0);
    forest.trees.push_back(std::move(tree));
  }

  // Guarantee pool coverage: rewrite split features so every pool
  // feature appears at least once when there are enough split sites.
  if (!split_sites.empty()) {
    std::set<int> present;
    for (auto [t, idx] : split_sites)
      present.insert(forest.trees[t].nodes[idx].feature);
    std::vector<int> missing;
    for (int f : pool)
      if (!present.count(f)) missing.push_back(f);
    std::vector<size_t> sites(split_sites.size());
    for (size_t i = 0; i < sites.size(); ++i) sites[i] = i;
    std::shuffle(sites.begin(), sites.end(), rng);
    size_t site_cursor = 0;
    for (int f : missing) {
      // find a site whose feature is duplicated elsewhere
      while (site_cursor < sites.size()) {
        auto [t, idx] = split_sites[sites[site_cursor++]];
        TreeNode& n = forest.trees[t].nodes[idx];
        int cnt = 0;
        for (auto [t2, i2] : split_sites)
          if (forest.trees[t2].nodes[i2].feature == n.feature) ++cnt;
        if (cnt > 1) {
          n.feature = f;
          n.threshold = candidates[f][cand_pick(rng)];
          break;
        }
      }
    }
  }
  return forest;
}

std::string serialize_canonical(const CanonicalForest& cf) {
  ordered_json doc;
  doc["version"] = "canon-v1";
  doc["depth"] = cf.depth;
  doc["base_score"] = cf.base_score;
  doc["dense_to_raw"] = cf.feature_map.dense_to_raw;
  ordered_json trees = ordered_json::array();
  for (const CanonicalTree& t : cf.trees) {
    ordered_json jt;
    ordered_json comps = ordered_json::array();
    for (const CanonicalSlot& s : t.comparators) {
      ordered_json js;
      js["feature"] = s.feature;
      js["threshold"] = s.threshold;
      js["always_false"] = s.always_false;
      comps.push_back(std::move(js));
    }
    jt["comparators"] = std::move(comps);
    jt["leaves"] = t.leaves;
    trees.push_back(std::move(jt));
  }
  doc["trees"] = std::move(trees);
  return doc.dump(2) + "\n";
}

CanonicalForest parse_canonical(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed canonical JSON: ") + e.what());
  }
  if (doc.value("version", "") != "canon-v1")
    throw FormatError("unsupported canonical version");
  CanonicalForest cf;
  cf.depth = doc["depth"].get<int>();
  cf.base_score = doc["base_score"].get<double>();
  cf.feature_map.dense_to_raw = doc["dense_to_raw"].get<std::vector<int>>();
  for (size_t i = 0; i < cf.feature_map.dense_to_raw.size(); ++i)
    cf.feature_map.raw_to_dense[cf.feature_map.dense_to_raw[i]] =
        static_cast<int>(i);
  for (const json& jt : doc["trees"]) {
    CanonicalTree t;
    for (const json& js : jt["comparators"]) {
      t.comparators.push_back({js["feature"].get<int>(),
                               js["threshold"].get<double>(),
                               js["always_false"].get<bool>()});
    }
    t.leaves = jt["leaves"].get<std::vector<double>>();
    if (t.comparators.size() != (1u << cf.depth) - 1 ||
        t.leaves.size() != (1u << cf.depth))
      throw FormatError("canonical tree slot counts do not match depth");
    cf.trees.push_back(std::move(t));
  }
  return cf;
}

double traverse_tree(const Tree& tree, std::span<const double> raw) {
  int idx = 0;
  while (!tree.nodes[idx].is_leaf) {
    const TreeNode& n = tree.nodes[idx];
    idx = raw[n.feature] < n.threshold ? n.left : n.right;
  }
  return tree.nodes[idx].leaf_value;
}

double canonical_tree_eval(const CanonicalTree& tree, int depth,
                           std::span<const double> dense) {
  int slot = 0;
  int leaf = 0;
  for (int level = 0; level < depth; ++level) {
    const CanonicalSlot& s = tree.comparators[slot];
    bool go_left = !s.always_false && dense[s.feature] < s.threshold;
    leaf = leaf * 2 + (go_left ? 0 : 1);
    slot = go_left ? 2 * slot + 1 : 2 * slot + 2;
  }
  return tree.leaves[leaf];
}

}  // namespace treestream
