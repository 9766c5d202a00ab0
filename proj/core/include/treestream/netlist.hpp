#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "treestream/datapath.hpp"

namespace treestream {

enum class NodeKind {
  input_code,   // w-bit feature code extracted from the input word
  const_rank,   // comparator rank constant
  compare,      // a < b, 1 bit
  encode,       // comparator bits -> leaf index
  select,       // leaf table lookup
  add,          // 64-bit add
  reg,          // pipeline register (timing only)
  const_value,  // 64-bit constant (zero trees, base score)
  output        // margin port
};

struct NetNode {
  NodeKind kind;
  std::string name;
  std::vector<int> inputs;  // node ids, always lower than this node's id
  int stage = 0;            // registers: pipeline stage tag
  int feature = -1;         // input_code
  std::uint16_t rank = 0;   // const_rank
  int tree = -1;            // compare/encode/select: owning tree
  std::vector<std::int32_t> leaf_table;  // select
  std::int64_t value = 0;   // const_value
};

/// Hardware-shaped graph of the compiled forest. Node order is
/// topological; construction is deterministic.
struct Netlist {
  std::vector<NetNode> nodes;
  int output_node = -1;
  int depth = 0;
  int adder_stages = 0;
  std::size_t real_trees = 0;
  std::size_t padded_trees = 0;
  int code_width = 4;
  std::size_t record_bits = 512;
  std::int64_t base_score_q = 0;

  int compute_stages() const { return adder_stages + 1; }
  std::size_t count(NodeKind kind) const;
};

Netlist build_netlist(const CompiledForest& cf);

/// Registers are transparent for value computation; bit-exact with
/// datapath score().
std::int64_t eval_netlist(const Netlist& n, const CodeVector& v);

/// Structural checks: acyclicity, stage ordering, equal register count
/// on every input-to-output path. Empty result = clean.
std::vector<std::string> check_structure(const Netlist& n);

std::string netlist_to_json(const Netlist& n);

/// Deterministic Verilog: one module per tree plus a top module with a
/// record-wide input port and valid-in/valid-out handshake.
std::string emit_verilog(const Netlist& n);

struct LintFinding {
  int line = 0;  // 1-based; 0 = whole file
  std::string message;
};

/// Text-level structural lint of emitted Verilog: module balance,
/// declare-before-use, bit-select bounds, literal width consistency.
std::vector<LintFinding> lint_structure(const std::string& verilog);

}  // namespace treestream
