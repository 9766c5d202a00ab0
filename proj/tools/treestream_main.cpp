// Command-line front end: compile, encode, score, stream-bench, simulate,
// calibrate, emit-verilog, gen-model.
//
// Exit codes: 0 success, 2 model parse, 3 quantization overflow,
// 4 format/range, 5 I/O.

#include <cstdio>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "treestream/datapath.hpp"
#include "treestream/errors.hpp"
#include "treestream/io.hpp"
#include "treestream/model_ir.hpp"
#include "treestream/netlist.hpp"
#include "treestream/perf_model.hpp"
#include "treestream/quantize.hpp"
#include "treestream/stream_engine.hpp"

using namespace treestream;

namespace {

std::vector<std::size_t> parse_batches(const std::string& s) {
  std::vector<std::size_t> out;
  std::size_t pos = 0;
  while (pos < s.size()) {
    std::size_t comma = s.find(',', pos);
    if (comma == std::string::npos) comma = s.size();
    out.push_back(std::stoull(s.substr(pos, comma - pos)));
    pos = comma + 1;
  }
  if (out.empty()) throw FormatError("empty batch list");
  return out;
}

CompiledForest load_compiled(const std::string& path) {
  return parse_compiled(read_file(path));
}

// CSV rows are dense feature vectors matching the compiled quant spec.
std::vector<CodeVector> load_codes_csv(const std::string& path,
                                       const QuantSpec& spec) {
  std::vector<std::vector<double>> rows = parse_csv_doubles(read_file(path));
  std::vector<CodeVector> codes;
  codes.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (static_cast<int>(rows[i].size()) != spec.feature_count())
      throw FormatError("row " + std::to_string(i + 1) + " has " +
                        std::to_string(rows[i].size()) + " columns, expected " +
                        std::to_string(spec.feature_count()));
    codes.push_back(encode_record(rows[i], spec));
  }
  return codes;
}

int cmd_gen_model(const std::string& out, int trees, int depth, int features,
                  int thresholds, std::uint64_t seed, int used) {
  Forest f = gen_synthetic(trees, depth, features, thresholds, seed, used);
  write_file(out, serialize_model(f));
  std::printf("wrote %s: %d trees, depth <= %d, %d raw features\n",
              out.c_str(), trees, depth, features);
  return 0;
}

int cmd_compile(const std::string& model_path, const std::string& out,
                int depth, int width, const std::string& report_path) {
  Forest raw = parse_model(read_file(model_path));
  auto [pruned, map] = prune_features(raw);
  CanonicalForest canon = canonicalize(pruned, depth);
  QuantSpec spec = build_quant_spec(canon, width);
  CompiledForest cf = compile_forest(canon, spec);
  write_file(out, serialize_compiled(cf));

  nlohmann::ordered_json report;
  report["trees"] = cf.real_tree_count;
  report["padded_trees"] = cf.padded_tree_count();
  report["depth"] = cf.depth;
  report["raw_features"] = raw.num_raw_features;
  report["dense_features"] = map.dense_count();
  report["code_width"] = spec.width;
  report["bytes_per_record"] = spec.bytes_per_record();
  report["dense_to_raw"] = map.dense_to_raw;
  std::string text = report.dump(2) + "\n";
  if (!report_path.empty()) write_file(report_path, text);
  std::fputs(text.c_str(), stdout);
  return 0;
}

int cmd_encode(const std::string& cf_path, const std::string& input,
               const std::string& out) {
  CompiledForest cf = load_compiled(cf_path);
  std::vector<CodeVector> codes = load_codes_csv(input, cf.quant);
  write_binary(out, pack_records(codes, cf.quant));
  std::printf("wrote %s: %zu records, %zu bytes each\n", out.c_str(),
              codes.size(), cf.quant.bytes_per_record());
  return 0;
}

int cmd_score(const std::string& cf_path, const std::string& input,
              bool packed, bool probability, const std::string& out) {
  CompiledForest cf = load_compiled(cf_path);
  std::vector<CodeVector> codes;
  if (packed) {
    codes = unpack_records(read_binary(input), cf.quant);
  } else {
    codes = load_codes_csv(input, cf.quant);
  }
  std::string text;
  for (const CodeVector& v : codes) {
    double margin = fxp_to_double(score(cf, v));
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.10g\n",
                  probability ? to_probability(margin) : margin);
    text += buf;
  }
  if (out.empty()) {
    std::fputs(text.c_str(), stdout);
  } else {
    write_file(out, text);
  }
  return 0;
}

int cmd_stream_bench(const std::string& cf_path, const std::string& batches_s,
                     int repeats, std::uint64_t seed, std::size_t fifo_depth,
                     const std::string& csv_out, const std::string& json_out) {
  CompiledForest cf = load_compiled(cf_path);
  std::vector<std::size_t> batches = parse_batches(batches_s);
  StreamConfig cfg;
  cfg.fifo_depth = fifo_depth;
  std::vector<BenchRow> rows = bench(cf, batches, repeats, seed, cfg);

  std::printf("%10s %14s %14s %14s %8s\n", "batch", "mean_rec_s", "min_rec_s",
              "max_rec_s", "repeats");
  std::string csv = "batch,mean_throughput,min_throughput,max_throughput,repeats\n";
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const BenchRow& r : rows) {
    std::printf("%10zu %14.4g %14.4g %14.4g %8d\n", r.batch,
                r.mean_throughput, r.min_throughput, r.max_throughput,
                r.repeats);
    char line[160];
    std::snprintf(line, sizeof line, "%zu,%.6g,%.6g,%.6g,%d\n", r.batch,
                  r.mean_throughput, r.min_throughput, r.max_throughput,
                  r.repeats);
    csv += line;
    arr.push_back({{"batch", r.batch},
                   {"mean_throughput", r.mean_throughput},
                   {"min_throughput", r.min_throughput},
                   {"max_throughput", r.max_throughput},
                   {"repeats", r.repeats}});
  }
  if (!csv_out.empty()) write_file(csv_out, csv);
  if (!json_out.empty()) write_file(json_out, arr.dump(2) + "\n");
  return 0;
}

std::vector<std::pair<std::uint64_t, double>> load_measured(
    const std::string& path) {
  std::vector<std::vector<double>> rows = parse_csv_doubles(read_file(path));
  std::vector<std::pair<std::uint64_t, double>> out;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != 2)
      throw FormatError("measured row " + std::to_string(i + 1) +
                        " must be batch,throughput");
    out.push_back({static_cast<std::uint64_t>(rows[i][0]), rows[i][1]});
  }
  return out;
}

int cmd_simulate(const std::string& config_path, const std::string& batches_s,
                 const std::string& measured_path, const std::string& csv_out,
                 bool event_driven) {
  PerfConfig cfg = config_path.empty()
                       ? PerfConfig{}
                       : PerfConfig::from_json(read_file(config_path));
  std::vector<std::size_t> batches = parse_batches(batches_s);
  std::vector<std::pair<std::uint64_t, double>> measured;
  if (!measured_path.empty()) measured = load_measured(measured_path);

  std::printf("%10s %14s %14s %20s\n", "batch", "predicted_s",
              "rec_per_s", "bottleneck");
  std::string csv = "batch,predicted_throughput,measured_throughput\n";
  for (std::size_t batch : batches) {
    PerfReport rep = event_driven ? cycle_sim(cfg, batch)
                                  : analytic_throughput(cfg, batch);
    std::printf("%10zu %14.4g %14.4g %20s\n", batch, rep.total_time_s,
                rep.throughput, bottleneck_name(rep.bottleneck));
    double meas = 0.0;
    for (auto [b, thr] : measured)
      if (b == batch) meas = thr;
    char line[120];
    if (meas > 0) {
      std::snprintf(line, sizeof line, "%zu,%.6g,%.6g\n", batch,
                    rep.throughput, meas);
    } else {
      std::snprintf(line, sizeof line, "%zu,%.6g,\n", batch, rep.throughput);
    }
    csv += line;
  }
  if (!measured.empty()) {
    CalibrationFit fit = calibrate(measured, cfg);
    std::printf("calibrated: call_overhead %.4g us, bw_eff %.4g GB/s\n",
                fit.call_overhead_s * 1e6, fit.bw_eff / 1e9);
    for (std::size_t i = 0; i < measured.size(); ++i)
      std::printf("  batch %llu: residual %+.2f%%\n",
                  static_cast<unsigned long long>(measured[i].first),
                  100.0 * fit.relative_residual[i]);
  }
  if (!csv_out.empty()) write_file(csv_out, csv);
  return 0;
}

int cmd_calibrate(const std::string& measured_path,
                  const std::string& config_path) {
  PerfConfig cfg = config_path.empty()
                       ? PerfConfig{}
                       : PerfConfig::from_json(read_file(config_path));
  std::vector<std::pair<std::uint64_t, double>> measured =
      load_measured(measured_path);
  CalibrationFit fit = calibrate(measured, cfg);
  nlohmann::ordered_json doc;
  doc["call_overhead_s"] = fit.call_overhead_s;
  doc["bw_eff_bytes_per_s"] = fit.bw_eff;
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < measured.size(); ++i)
    rows.push_back({{"batch", measured[i].first},
                    {"throughput", measured[i].second},
                    {"residual_s", fit.residual_s[i]},
                    {"relative_residual", fit.relative_residual[i]}});
  doc["points"] = rows;
  std::fputs((doc.dump(2) + "\n").c_str(), stdout);
  return 0;
}

int cmd_emit_verilog(const std::string& cf_path, const std::string& out,
                     bool lint, const std::string& netlist_json) {
  CompiledForest cf = load_compiled(cf_path);
  Netlist n = build_netlist(cf);
  std::vector<std::string> structure = check_structure(n);
  if (!structure.empty()) {
    for (const std::string& s : structure)
      std::fprintf(stderr, "structure: %s\n", s.c_str());
    return 4;
  }
  std::string v = emit_verilog(n);
  write_file(out, v);
  if (!netlist_json.empty()) write_file(netlist_json, netlist_to_json(n));
  if (lint) {
    std::vector<LintFinding> findings = lint_structure(v);
    for (const LintFinding& f : findings)
      std::fprintf(stderr, "lint %s:%d: %s\n", out.c_str(), f.line,
                   f.message.c_str());
    if (!findings.empty()) return 4;
    std::printf("lint clean: %s\n", out.c_str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Decision forest streaming-inference toolchain"};
  app.require_subcommand(1);

  // gen-model
  auto* gen = app.add_subcommand("gen-model", "Generate a seeded random model");
  std::string gen_out = "model.json";
  int gen_trees = 100, gen_depth = 3, gen_features = 1146, gen_thresholds = 15;
  int gen_used = 0;
  std::uint64_t gen_seed = 1;
  gen->add_option("-o,--out", gen_out, "Output model JSON");
  gen->add_option("--trees", gen_trees)->check(CLI::PositiveNumber);
  gen->add_option("--depth", gen_depth)->check(CLI::Range(1, 8));
  gen->add_option("--features", gen_features)->check(CLI::PositiveNumber);
  gen->add_option("--thresholds", gen_thresholds)->check(CLI::PositiveNumber);
  gen->add_option("--used-features", gen_used)->check(CLI::NonNegativeNumber);
  gen->add_option("--seed", gen_seed);

  // compile
  auto* compile = app.add_subcommand("compile", "Model JSON to compiled forest");
  std::string c_model, c_out = "cf.json", c_report;
  int c_depth = 3, c_width = 4;
  compile->add_option("model", c_model, "Model JSON path")->required();
  compile->add_option("-o,--out", c_out, "Compiled forest output");
  compile->add_option("--depth", c_depth)->check(CLI::Range(1, 8));
  compile->add_option("--width", c_width)->check(CLI::Range(1, 16));
  compile->add_option("--report", c_report, "Feature-map report path");

  // encode
  auto* encode = app.add_subcommand("encode", "CSV features to packed records");
  std::string e_cf, e_input, e_out = "records.bin";
  encode->add_option("compiled", e_cf, "Compiled forest path")->required();
  encode->add_option("input", e_input, "Dense feature CSV")->required();
  encode->add_option("-o,--out", e_out, "Packed record output");

  // score
  auto* sc = app.add_subcommand("score", "Score records through the datapath");
  std::string s_cf, s_input, s_out;
  bool s_packed = false, s_prob = false;
  sc->add_option("compiled", s_cf, "Compiled forest path")->required();
  sc->add_option("input", s_input, "Dense feature CSV or packed binary")
      ->required();
  sc->add_flag("--packed", s_packed, "Input is packed binary records");
  sc->add_flag("--probability", s_prob, "Apply the logistic map");
  sc->add_option("-o,--out", s_out, "Results CSV (default stdout)");

  // stream-bench
  auto* sb = app.add_subcommand("stream-bench", "Streaming throughput ladder");
  std::string sb_cf, sb_batches = "1,10,100,1000,10000,100000";
  std::string sb_csv, sb_json;
  int sb_repeats = 10;
  std::uint64_t sb_seed = 1;
  std::size_t sb_fifo = 16;
  sb->add_option("compiled", sb_cf, "Compiled forest path")->required();
  sb->add_option("--batches", sb_batches, "Comma-separated batch sizes");
  sb->add_option("--repeats", sb_repeats)->check(CLI::PositiveNumber);
  sb->add_option("--seed", sb_seed);
  sb->add_option("--fifo-depth", sb_fifo)->check(CLI::PositiveNumber);
  sb->add_option("--csv", sb_csv, "CSV output path");
  sb->add_option("--json", sb_json, "JSON output path");

  // simulate
  auto* sim = app.add_subcommand("simulate", "Analytic/event-driven model");
  std::string sim_config, sim_batches = "1,10,100,1000,10000,100000";
  std::string sim_measured, sim_csv;
  bool sim_event = false;
  sim->add_option("--config", sim_config, "Perf config JSON");
  sim->add_option("--batches", sim_batches, "Comma-separated batch sizes");
  sim->add_option("--measured", sim_measured, "Measured batch,throughput CSV");
  sim->add_option("--csv", sim_csv, "CSV sweep output");
  sim->add_flag("--event-driven", sim_event, "Use the cycle-level simulator");

  // calibrate
  auto* cal = app.add_subcommand("calibrate", "Fit overhead and bandwidth");
  std::string cal_measured, cal_config;
  cal->add_option("measured", cal_measured, "Measured batch,throughput CSV")
      ->required();
  cal->add_option("--config", cal_config, "Perf config JSON");

  // emit-verilog
  auto* ev = app.add_subcommand("emit-verilog", "Compiled forest to Verilog");
  std::string ev_cf, ev_out = "forest.v", ev_netlist;
  bool ev_lint = false;
  ev->add_option("compiled", ev_cf, "Compiled forest path")->required();
  ev->add_option("-o,--out", ev_out, "Verilog output path");
  ev->add_flag("--lint", ev_lint, "Run the structural lint after emission");
  ev->add_option("--netlist-json", ev_netlist, "Netlist debug dump path");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed())
      return cmd_gen_model(gen_out, gen_trees, gen_depth, gen_features,
                           gen_thresholds, gen_seed, gen_used);
    if (compile->parsed())
      return cmd_compile(c_model, c_out, c_depth, c_width, c_report);
    if (encode->parsed()) return cmd_encode(e_cf, e_input, e_out);
    if (sc->parsed()) return cmd_score(s_cf, s_input, s_packed, s_prob, s_out);
    if (sb->parsed())
      return cmd_stream_bench(sb_cf, sb_batches, sb_repeats, sb_seed, sb_fifo,
                              sb_csv, sb_json);
    if (sim->parsed())
      return cmd_simulate(sim_config, sim_batches, sim_measured, sim_csv,
                          sim_event);
    if (cal->parsed()) return cmd_calibrate(cal_measured, cal_config);
    if (ev->parsed())
      return cmd_emit_verilog(ev_cf, ev_out, ev_lint, ev_netlist);
  } catch (const ParseError& e) {
    std::fprintf(stderr, "model parse error: %s\n", e.what());
    return 2;
  } catch (const QuantOverflow& e) {
    std::fprintf(stderr, "quantization error: %s\n", e.what());
    return 3;
  } catch (const IoError& e) {
    std::fprintf(stderr, "io error: %s\n", e.what());
    return 5;
  } catch (const std::exception& e) {
    // FormatError, FxpRangeError, FitError and anything else data-shaped.
    std::fprintf(stderr, "error: %s\n", e.what());
    return 4;
  }
  return 0;
}
