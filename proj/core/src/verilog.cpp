#include <cctype>
#include <map>
#include <regex>
#include <set>
#include <sstream>
#include <vector>

#include "treestream/errors.hpp"
#include "treestream/netlist.hpp"

namespace treestream {

namespace {

std::string unsigned_lit(int width, std::uint64_t value) {
  return std::to_string(width) + "'d" + std::to_string(value);
}

std::string signed_lit(int width, std::int64_t value) {
  if (value < 0)
    return "-" + std::to_string(width) + "'sd" + std::to_string(-value);
  return std::to_string(width) + "'sd" + std::to_string(value);
}

// casez pattern selecting leaf l: fix the comparator bits along the
// root-to-leaf path, leave every off-path bit as don't-care.
std::string leaf_pattern(int leaf, int depth, int slots) {
  std::string pat(slots, '?');
  int slot = 0;
  for (int level = 0; level < depth; ++level) {
    int dir = leaf >> (depth - 1 - level) & 1;  // 0 = left (cmp true)
    pat[slots - 1 - slot] = dir ? '0' : '1';
    slot = dir ? 2 * slot + 2 : 2 * slot + 1;
  }
  return pat;
}

struct TreeView {
  std::vector<std::pair<int, std::uint16_t>> comparators;  // (feature, rank)
  const std::vector<std::int32_t>* leaves = nullptr;
};

}  // namespace

std::string emit_verilog(const Netlist& nl) {
  int slots = (1 << nl.depth) - 1;
  int w = nl.code_width;

  // Reassemble per-tree views from the node graph.
  std::vector<TreeView> trees(nl.real_trees);
  for (const NetNode& n : nl.nodes) {
    if (n.kind == NodeKind::compare) {
      const NetNode& code = nl.nodes[n.inputs[0]];
      const NetNode& rank = nl.nodes[n.inputs[1]];
      trees[n.tree].comparators.emplace_back(code.feature, rank.rank);
    } else if (n.kind == NodeKind::select) {
      trees[n.tree].leaves = &n.leaf_table;
    }
  }

  std::ostringstream out;
  out << "// Streaming GBDT inference datapath\n";
  out << "// trees=" << nl.real_trees << " (padded " << nl.padded_trees
      << "), depth=" << nl.depth << ", code width=" << w << ", record "
      << nl.record_bits << " bits, adder stages=" << nl.adder_stages << "\n\n";

  // --- one module per tree ---
  for (std::size_t t = 0; t < trees.size(); ++t) {
    const TreeView& tv = trees[t];
    std::set<int> features;
    for (auto [f, r] : tv.comparators) features.insert(f);

    out << "module tree_" << t << " (\n";
    for (int f : features)
      out << "  input wire [" << w - 1 << ":0] code_f" << f << ",\n";
    out << "  output reg signed [31:0] tv\n);\n";
    for (int j = 0; j < slots; ++j) {
      auto [f, r] = tv.comparators[j];
      out << "  wire cmp_" << j << " = (code_f" << f << " < "
          << unsigned_lit(w, r) << ");\n";
    }
    out << "  reg [" << nl.depth - 1 << ":0] leaf_idx;\n";
    out << "  always @* begin\n    casez ({";
    for (int j = slots - 1; j >= 0; --j)
      out << "cmp_" << j << (j > 0 ? ", " : "");
    out << "})\n";
    for (int leaf = 0; leaf < (1 << nl.depth); ++leaf)
      out << "      " << slots << "'b" << leaf_pattern(leaf, nl.depth, slots)
          << ": leaf_idx = " << unsigned_lit(nl.depth, leaf) << ";\n";
    out << "      default: leaf_idx = " << unsigned_lit(nl.depth, 0)
        << ";\n    endcase\n  end\n";
    out << "  always @* begin\n    case (leaf_idx)\n";
    for (int leaf = 0; leaf < (1 << nl.depth); ++leaf)
      out << "      " << unsigned_lit(nl.depth, leaf)
          << ": tv = " << signed_lit(32, (*tv.leaves)[leaf]) << ";\n";
    out << "      default: tv = " << signed_lit(32, 0)
        << ";\n    endcase\n  end\nendmodule\n\n";
  }

  // --- top module ---
  int cs = nl.compute_stages();
  out << "module forest_top (\n"
      << "  input wire clk,\n"
      << "  input wire rst,\n"
      << "  input wire in_valid,\n"
      << "  input wire [" << nl.record_bits - 1 << ":0] in_data,\n"
      << "  output wire out_valid,\n"
      << "  output wire [63:0] out_data\n);\n";

  std::set<int> all_features;
  for (const TreeView& tv : trees)
    for (auto [f, r] : tv.comparators) all_features.insert(f);
  for (int f : all_features)
    out << "  wire [" << w - 1 << ":0] code_f" << f << " = in_data["
        << w * (f + 1) - 1 << ":" << w * f << "];\n";

  for (std::size_t t = 0; t < trees.size(); ++t) {
    out << "  wire signed [31:0] tv_" << t << ";\n";
    out << "  tree_" << t << " u_tree_" << t << " (\n";
    std::set<int> features;
    for (auto [f, r] : trees[t].comparators) features.insert(f);
    for (int f : features)
      out << "    .code_f" << f << "(code_f" << f << "),\n";
    out << "    .tv(tv_" << t << ")\n  );\n";
  }

  for (std::size_t t = 0; t < nl.padded_trees; ++t) {
    out << "  reg signed [63:0] t" << t << "_s1;\n";
    if (t < nl.real_trees) {
      out << "  always @(posedge clk) t" << t << "_s1 <= {{32{tv_" << t
          << "[31]}}, tv_" << t << "};\n";
    } else {
      out << "  always @(posedge clk) t" << t
          << "_s1 <= " << signed_lit(64, 0) << ";\n";
    }
  }

  std::vector<std::string> current;
  for (std::size_t t = 0; t < nl.padded_trees; ++t)
    current.push_back("t" + std::to_string(t) + "_s1");
  for (int s = 1; s <= nl.adder_stages; ++s) {
    std::vector<std::string> next;
    for (std::size_t j = 0; j < current.size() / 2; ++j) {
      std::string name = "r_s" + std::to_string(s + 1) + "_" + std::to_string(j);
      out << "  reg signed [63:0] " << name << ";\n";
      out << "  always @(posedge clk) " << name << " <= " << current[2 * j]
          << " + " << current[2 * j + 1] << ";\n";
      next.push_back(name);
    }
    current = std::move(next);
  }

  if (cs == 1) {
    out << "  reg [0:0] valid_pipe;\n";
    out << "  always @(posedge clk) valid_pipe <= rst ? " << unsigned_lit(1, 0)
        << " : in_valid;\n";
  } else {
    out << "  reg [" << cs - 1 << ":0] valid_pipe;\n";
    out << "  always @(posedge clk) valid_pipe <= rst ? "
        << unsigned_lit(cs, 0) << " : {valid_pipe[" << cs - 2
        << ":0], in_valid};\n";
  }
  out << "  assign out_valid = valid_pipe[" << cs - 1 << "];\n";

  if (nl.base_score_q != 0) {
    out << "  wire signed [63:0] margin = " << current[0]
        << (nl.base_score_q < 0 ? " - " : " + ")
        << signed_lit(64, std::abs(nl.base_score_q)) << ";\n";
    out << "  assign out_data = margin;\n";
  } else {
    out << "  assign out_data = " << current[0] << ";\n";
  }
  out << "endmodule\n";
  return out.str();
}

// ---------------------------------------------------------------------------
// Structural lint
// ---------------------------------------------------------------------------

namespace {

const std::set<std::string>& keywords() {
  static const std::set<std::string> kw = {
      "module", "endmodule", "input",  "output",  "wire", "reg",
      "signed", "assign",    "always", "posedge", "negedge",
      "begin",  "end",       "case",   "casez",   "endcase", "default",
      "if",     "else"};
  return kw;
}

struct ModuleInfo {
  std::map<std::string, int> widths;  // name -> bit width
  std::set<std::string> ports;
};

struct LintState {
  std::vector<LintFinding> findings;
  std::map<std::string, ModuleInfo> modules;
  std::string current;  // current module name, empty outside
  int pending_case_width = -1;

  void add(int line, std::string msg) {
    findings.push_back({line, std::move(msg)});
  }
};

std::string strip_literals(const std::string& s) {
  static const std::regex lit(R"(\d+'s?[bdh][0-9a-fA-FxXzZ?_]+)");
  return std::regex_replace(s, lit, " ");
}

void check_expr(LintState& st, const std::string& expr, int line) {
  ModuleInfo& mod = st.modules[st.current];
  // bit/part selects first, on the raw expression
  static const std::regex sel(R"(([A-Za-z_]\w*)\[(\d+)(?::(\d+))?\])");
  for (auto it = std::sregex_iterator(expr.begin(), expr.end(), sel);
       it != std::sregex_iterator(); ++it) {
    std::string name = (*it)[1];
    auto found = mod.widths.find(name);
    if (found == mod.widths.end()) continue;  // undeclared reported below
    int hi = std::stoi((*it)[2]);
    if (hi >= found->second)
      st.add(line, "bit select " + name + "[" + (*it)[2].str() +
                       "] exceeds declared width " +
                       std::to_string(found->second));
  }
  // sized-literal width in comparisons against a declared identifier
  static const std::regex cmp(R"(([A-Za-z_]\w*)\s*<\s*(\d+)')");
  for (auto it = std::sregex_iterator(expr.begin(), expr.end(), cmp);
       it != std::sregex_iterator(); ++it) {
    std::string name = (*it)[1];
    auto found = mod.widths.find(name);
    if (found != mod.widths.end() && std::stoi((*it)[2]) != found->second)
      st.add(line, "comparison literal width " + (*it)[2].str() +
                       " != width of " + name + " (" +
                       std::to_string(found->second) + ")");
  }
  // identifier usage
  std::string stripped = strip_literals(expr);
  static const std::regex ident(R"([A-Za-z_]\w*)");
  for (auto it = std::sregex_iterator(stripped.begin(), stripped.end(), ident);
       it != std::sregex_iterator(); ++it) {
    std::string name = it->str();
    if (keywords().count(name)) continue;
    if (!mod.widths.count(name))
      st.add(line, "identifier '" + name + "' used before declaration");
  }
}

int concat_or_ident_width(LintState& st, const std::string& expr) {
  ModuleInfo& mod = st.modules[st.current];
  std::string inner = expr;
  int total = 0;
  static const std::regex ident(R"([A-Za-z_]\w*)");
  for (auto it = std::sregex_iterator(inner.begin(), inner.end(), ident);
       it != std::sregex_iterator(); ++it) {
    auto found = mod.widths.find(it->str());
    total += found != mod.widths.end() ? found->second : 0;
  }
  return total;
}

}  // namespace

std::vector<LintFinding> lint_structure(const std::string& verilog) {
  LintState st;
  std::istringstream in(verilog);
  std::string line;
  int lineno = 0;
  bool in_portlist = false;
  std::string pending_instance_module;

  static const std::regex module_re(R"(^\s*module\s+([A-Za-z_]\w*)\s*\()");
  static const std::regex endmodule_re(R"(^\s*endmodule\b)");
  static const std::regex port_re(
      R"(^\s*(input|output)\s+(wire|reg)\s*(signed\s+)?(\[(\d+):(\d+)\])?\s*([A-Za-z_]\w*)\s*,?\s*$)");
  static const std::regex decl_re(
      R"(^\s*(wire|reg)\s*(signed\s+)?(\[(\d+):(\d+)\])?\s*([A-Za-z_]\w*)\s*(=\s*(.*))?;\s*$)");
  static const std::regex assign_re(
      R"(^\s*assign\s+([A-Za-z_]\w*)\s*=\s*(.*);\s*$)");
  static const std::regex always_assign_re(
      R"(^\s*always\s*@[^)]*\)\s*([A-Za-z_]\w*)\s*<=\s*(.*);\s*$)");
  static const std::regex instance_re(
      R"(^\s*([A-Za-z_]\w*)\s+([A-Za-z_]\w*)\s*\(\s*$)");
  static const std::regex conn_re(
      R"(^\s*\.([A-Za-z_]\w*)\(([^)]*)\)\s*,?\s*$)");
  static const std::regex case_re(R"(^\s*casez?\s*\((.*)\)\s*$)");
  static const std::regex case_item_re(
      R"(^\s*(\d+)'s?[bd]([0-9a-fA-FxXzZ?_]+)\s*:\s*([A-Za-z_]\w*)\s*=\s*(.*);\s*$)");
  static const std::regex default_item_re(
      R"(^\s*default\s*:\s*([A-Za-z_]\w*)\s*=\s*(.*);\s*$)");
  static const std::regex lit_assign_re(R"(^\s*-?(\d+)'s?[bd])");

  auto check_lhs_literal = [&](const std::string& lhs, const std::string& rhs,
                               int ln) {
    std::smatch m;
    if (std::regex_search(rhs, m, lit_assign_re)) {
      auto& widths = st.modules[st.current].widths;
      auto found = widths.find(lhs);
      if (found != widths.end() && std::stoi(m[1]) != found->second)
        st.add(ln, "literal width " + m[1].str() + " assigned to " + lhs +
                       " of width " + std::to_string(found->second));
    }
  };

  static const std::regex dec_lit_re(R"((\d+)'s?d(\d+))");

  while (std::getline(in, line)) {
    ++lineno;
    std::string code = line.substr(0, line.find("//"));
    if (code.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::smatch m;

    // Any decimal literal must fit its declared width.
    for (auto it = std::sregex_iterator(code.begin(), code.end(), dec_lit_re);
         it != std::sregex_iterator(); ++it) {
      int width = std::stoi((*it)[1]);
      unsigned long long value = std::stoull((*it)[2]);
      if (width < 64 && (value >> width) != 0)
        st.add(lineno, "literal " + it->str() + " does not fit in " +
                           std::to_string(width) + " bits");
    }

    if (std::regex_search(code, m, module_re)) {
      if (!st.current.empty())
        st.add(lineno, "nested module declaration");
      st.current = m[1];
      if (st.modules.count(st.current))
        st.add(lineno, "duplicate module name " + st.current);
      st.modules[st.current] = {};
      in_portlist = true;
      continue;
    }
    if (std::regex_search(code, m, endmodule_re)) {
      if (st.current.empty())
        st.add(lineno, "endmodule without module");
      st.current.clear();
      continue;
    }
    if (st.current.empty()) {
      st.add(lineno, "statement outside any module");
      continue;
    }
    ModuleInfo& mod = st.modules[st.current];

    if (in_portlist) {
      if (std::regex_match(code, m, port_re)) {
        int width = m[4].matched ? std::stoi(m[5]) - std::stoi(m[6]) + 1 : 1;
        mod.widths[m[7]] = width;
        mod.ports.insert(m[7]);
        continue;
      }
      if (code.find(");") != std::string::npos) {
        in_portlist = false;
        continue;
      }
      st.add(lineno, "unparseable port declaration");
      continue;
    }

    if (!pending_instance_module.empty()) {
      if (std::regex_match(code, m, conn_re)) {
        const ModuleInfo& target = st.modules[pending_instance_module];
        if (!target.ports.count(m[1]))
          st.add(lineno, "connection to unknown port ." + m[1].str() +
                             " of " + pending_instance_module);
        check_expr(st, m[2], lineno);
        continue;
      }
      if (code.find(");") != std::string::npos) {
        pending_instance_module.clear();
        continue;
      }
      st.add(lineno, "unparseable instance connection");
      continue;
    }

    if (std::regex_match(code, m, decl_re)) {
      int width = m[3].matched ? std::stoi(m[4]) - std::stoi(m[5]) + 1 : 1;
      if (m[7].matched) check_expr(st, m[8], lineno);
      mod.widths[m[6]] = width;
      continue;
    }
    if (std::regex_match(code, m, assign_re)) {
      check_expr(st, m[1], lineno);
      check_expr(st, m[2], lineno);
      check_lhs_literal(m[1], m[2], lineno);
      continue;
    }
    if (std::regex_match(code, m, always_assign_re)) {
      check_expr(st, m[1], lineno);
      check_expr(st, m[2], lineno);
      check_lhs_literal(m[1], m[2], lineno);
      continue;
    }
    if (std::regex_match(code, m, instance_re)) {
      std::string target = m[1];
      if (target == "always" || target == "module") continue;
      if (!st.modules.count(target)) {
        st.add(lineno, "instance of undeclared module " + target);
      }
      mod.widths[m[2]] = 0;  // instance name, not a value
      pending_instance_module = st.modules.count(target) ? target : "";
      continue;
    }
    if (std::regex_search(code, m, case_re)) {
      st.pending_case_width = concat_or_ident_width(st, m[1]);
      check_expr(st, m[1], lineno);
      continue;
    }
    if (std::regex_match(code, m, case_item_re)) {
      if (st.pending_case_width > 0 &&
          std::stoi(m[1]) != st.pending_case_width)
        st.add(lineno, "case item width " + m[1].str() +
                           " != selector width " +
                           std::to_string(st.pending_case_width));
      check_expr(st, m[3], lineno);
      check_lhs_literal(m[3], m[4], lineno);
      check_expr(st, m[4], lineno);
      continue;
    }
    if (std::regex_match(code, m, default_item_re)) {
      check_expr(st, m[1], lineno);
      check_lhs_literal(m[1], m[2], lineno);
      continue;
    }
    if (code.find("endcase") != std::string::npos) {
      st.pending_case_width = -1;
      continue;
    }
    if (code.find("begin") != std::string::npos ||
        code.find("end") != std::string::npos ||
        code.find("always") != std::string::npos) {
      continue;  // block scaffolding
    }
    st.add(lineno, "unrecognized statement");
  }
  if (!st.current.empty())
    st.add(0, "missing endmodule for module " + st.current);
  return st.findings;
}

}  // namespace treestream
