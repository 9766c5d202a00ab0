#include "treestream/netlist.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"
#include "treestream/errors.hpp"

namespace treestream {

std::size_t Netlist::count(NodeKind kind) const {
  std::size_t n = 0;
  for (const NetNode& node : nodes)
    if (node.kind == kind) ++n;
  return n;
}

Netlist build_netlist(const CompiledForest& cf) {
  Netlist nl;
  nl.depth = cf.depth;
  nl.adder_stages = cf.adder_stages;
  nl.real_trees = cf.real_tree_count;
  nl.padded_trees = cf.padded_tree_count();
  nl.code_width = cf.quant.width;
  nl.record_bits = cf.quant.bits_per_record();
  nl.base_score_q = cf.base_score_q;

  auto add_node = [&](NetNode node) {
    nl.nodes.push_back(std::move(node));
    return static_cast<int>(nl.nodes.size() - 1);
  };

  std::vector<int> code_nodes(cf.quant.feature_count());
  for (int f = 0; f < cf.quant.feature_count(); ++f) {
    NetNode n;
    n.kind = NodeKind::input_code;
    n.name = "code_f" + std::to_string(f);
    n.feature = f;
    code_nodes[f] = add_node(std::move(n));
  }

  int slots = (1 << cf.depth) - 1;
  std::vector<int> stage1;  // per padded tree slot, the stage-1 register
  for (std::size_t t = 0; t < cf.trees.size(); ++t) {
    std::string tp = "t" + std::to_string(t) + "_";
    int value_node;
    if (t < cf.real_tree_count) {
      const CompiledTree& tree = cf.trees[t];
      std::vector<int> cmps;
      for (int j = 0; j < slots; ++j) {
        auto [feature, rank] = tree.comparators[j];
        NetNode rk;
        rk.kind = NodeKind::const_rank;
        rk.name = tp + "rank" + std::to_string(j);
        rk.rank = rank;
        int rk_id = add_node(std::move(rk));
        NetNode cmp;
        cmp.kind = NodeKind::compare;
        cmp.name = tp + "cmp" + std::to_string(j);
        cmp.inputs = {code_nodes[feature], rk_id};
        cmp.tree = static_cast<int>(t);
        cmps.push_back(add_node(std::move(cmp)));
      }
      NetNode enc;
      enc.kind = NodeKind::encode;
      enc.name = tp + "enc";
      enc.inputs = cmps;
      enc.tree = static_cast<int>(t);
      int enc_id = add_node(std::move(enc));
      NetNode sel;
      sel.kind = NodeKind::select;
      sel.name = tp + "sel";
      sel.inputs = {enc_id};
      sel.tree = static_cast<int>(t);
      sel.leaf_table = tree.leaves;
      value_node = add_node(std::move(sel));
    } else {
      NetNode zero;
      zero.kind = NodeKind::const_value;
      zero.name = tp + "zero";
      zero.value = 0;
      value_node = add_node(std::move(zero));
    }
    NetNode r;
    r.kind = NodeKind::reg;
    r.name = tp + "s1";
    r.inputs = {value_node};
    r.stage = 1;
    stage1.push_back(add_node(std::move(r)));
  }

  // Registered adder stages: stage s combines pairs of stage-s values.
  std::vector<int> current = stage1;
  for (int s = 1; s <= cf.adder_stages; ++s) {
    std::vector<int> next;
    for (std::size_t j = 0; j < current.size() / 2; ++j) {
      NetNode add;
      add.kind = NodeKind::add;
      add.name = "add_s" + std::to_string(s) + "_" + std::to_string(j);
      add.inputs = {current[2 * j], current[2 * j + 1]};
      int add_id = add_node(std::move(add));
      NetNode r;
      r.kind = NodeKind::reg;
      r.name = "r_s" + std::to_string(s + 1) + "_" + std::to_string(j);
      r.inputs = {add_id};
      r.stage = s + 1;
      next.push_back(add_node(std::move(r)));
    }
    current = std::move(next);
  }

  int margin_src = current[0];
  if (cf.base_score_q != 0) {
    NetNode base;
    base.kind = NodeKind::const_value;
    base.name = "base_const";
    base.value = cf.base_score_q;
    int base_id = add_node(std::move(base));
    NetNode add;
    add.kind = NodeKind::add;
    add.name = "margin_add";
    add.inputs = {margin_src, base_id};
    margin_src = add_node(std::move(add));
  }
  NetNode out;
  out.kind = NodeKind::output;
  out.name = "margin";
  out.inputs = {margin_src};
  nl.output_node = add_node(std::move(out));
  return nl;
}

std::int64_t eval_netlist(const Netlist& nl, const CodeVector& v) {
  std::vector<std::int64_t> value(nl.nodes.size(), 0);
  for (std::size_t i = 0; i < nl.nodes.size(); ++i) {
    const NetNode& n = nl.nodes[i];
    switch (n.kind) {
      case NodeKind::input_code:
        value[i] = v.at(n.feature);
        break;
      case NodeKind::const_rank:
        value[i] = n.rank;
        break;
      case NodeKind::compare:
        value[i] = value[n.inputs[0]] < value[n.inputs[1]] ? 1 : 0;
        break;
      case NodeKind::encode: {
        std::uint32_t bits = 0;
        for (std::size_t b = 0; b < n.inputs.size(); ++b)
          if (value[n.inputs[b]]) bits |= 1u << b;
        value[i] = encoder_walk(bits, nl.depth);
        break;
      }
      case NodeKind::select:
        value[i] = n.leaf_table.at(value[n.inputs[0]]);
        break;
      case NodeKind::add:
        value[i] = value[n.inputs[0]] + value[n.inputs[1]];
        break;
      case NodeKind::reg:
      case NodeKind::output:
        value[i] = value[n.inputs[0]];
        break;
      case NodeKind::const_value:
        value[i] = n.value;
        break;
    }
  }
  return value[nl.output_node];
}

std::vector<std::string> check_structure(const Netlist& nl) {
  std::vector<std::string> findings;
  // -1 = constant-only subtree (no input on any path)
  std::vector<int> reg_min(nl.nodes.size()), reg_max(nl.nodes.size());
  std::vector<int> stage_of(nl.nodes.size());  // stage of nearest registers

  for (std::size_t i = 0; i < nl.nodes.size(); ++i) {
    const NetNode& n = nl.nodes[i];
    for (int in : n.inputs) {
      if (in < 0 || in >= static_cast<int>(i)) {
        findings.push_back("node " + n.name + ": non-topological input edge");
        return findings;
      }
    }
    bool is_const = n.kind == NodeKind::const_value ||
                    n.kind == NodeKind::const_rank;
    int mn = -1, mx = -1, stage = -1;
    for (int in : n.inputs) {
      if (reg_min[in] < 0) continue;  // constant path, no constraint
      if (mn < 0) {
        mn = reg_min[in];
        mx = reg_max[in];
        stage = stage_of[in];
      } else {
        mn = std::min(mn, reg_min[in]);
        mx = std::max(mx, reg_max[in]);
        if (stage != stage_of[in])
          findings.push_back("node " + n.name +
                             ": inputs from different pipeline stages");
      }
    }
    if (is_const) {
      mn = mx = -1;
      stage = -1;
    } else if (mn < 0) {
      mn = mx = 0;  // primary input
      stage = 0;
    }
    if (n.kind == NodeKind::reg && mn >= 0) {
      // registers on constant-only paths carry no timing constraint
      if (stage + 1 != n.stage)
        findings.push_back("register " + n.name + ": stage tag " +
                           std::to_string(n.stage) + " but feeds from stage " +
                           std::to_string(stage));
      mn += 1;
      mx += 1;
      stage = n.stage;
    }
    reg_min[i] = mn;
    reg_max[i] = mx;
    stage_of[i] = stage;
  }
  int out = nl.output_node;
  if (reg_min[out] != reg_max[out])
    findings.push_back("unbalanced register counts across paths: " +
                       std::to_string(reg_min[out]) + " vs " +
                       std::to_string(reg_max[out]));
  else if (reg_min[out] != nl.compute_stages())
    findings.push_back("output register depth " + std::to_string(reg_min[out]) +
                       " != compute stages " +
                       std::to_string(nl.compute_stages()));
  return findings;
}

std::string netlist_to_json(const Netlist& nl) {
  static const char* kind_names[] = {"input_code", "const_rank", "compare",
                                     "encode", "select", "add", "reg",
                                     "const_value", "output"};
  nlohmann::ordered_json doc;
  doc["depth"] = nl.depth;
  doc["adder_stages"] = nl.adder_stages;
  doc["real_trees"] = nl.real_trees;
  doc["padded_trees"] = nl.padded_trees;
  doc["record_bits"] = nl.record_bits;
  nlohmann::ordered_json nodes = nlohmann::ordered_json::array();
  for (const NetNode& n : nl.nodes) {
    nlohmann::ordered_json jn;
    jn["name"] = n.name;
    jn["kind"] = kind_names[static_cast<int>(n.kind)];
    jn["inputs"] = n.inputs;
    if (n.kind == NodeKind::reg) jn["stage"] = n.stage;
    if (n.kind == NodeKind::const_rank) jn["rank"] = n.rank;
    if (n.kind == NodeKind::input_code) jn["feature"] = n.feature;
    if (n.kind == NodeKind::const_value) jn["value"] = n.value;
    nodes.push_back(std::move(jn));
  }
  doc["nodes"] = std::move(nodes);
  return doc.dump(2) + "\n";
}

}  // namespace treestream
