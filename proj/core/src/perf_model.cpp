#include "treestream/perf_model.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "json.hpp"
#include "treestream/errors.hpp"

namespace treestream {

using nlohmann::json;
using nlohmann::ordered_json;

void PerfConfig::validate() const {
  if (clock_hz <= 0 || bw_h2c <= 0 || bw_c2h <= 0 || link_bw <= 0 ||
      bytes_in <= 0 || bytes_out <= 0 || max_call_bytes <= 0)
    throw FormatError("perf config: all rates and sizes must be positive");
  if (ii < 1) throw FormatError("perf config: ii must be >= 1");
  if (pipeline_depth < 1)
    throw FormatError("perf config: pipeline_depth must be >= 1");
  if (fifo_extra < 0 || fifo_extra > fifo_depth)
    throw FormatError("perf config: fifo_extra must be in [0, fifo_depth]");
  if (call_overhead_s < 0)
    throw FormatError("perf config: call_overhead_s must be >= 0");
}

std::string PerfConfig::to_json() const {
  ordered_json doc;
  doc["clock_hz"] = clock_hz;
  doc["ii"] = ii;
  doc["pipeline_depth"] = pipeline_depth;
  doc["fifo_depth"] = fifo_depth;
  doc["fifo_extra"] = fifo_extra;
  doc["bytes_in"] = bytes_in;
  doc["bytes_out"] = bytes_out;
  doc["bw_h2c"] = bw_h2c;
  doc["bw_c2h"] = bw_c2h;
  doc["call_overhead_s"] = call_overhead_s;
  doc["max_call_bytes"] = max_call_bytes;
  doc["link_bw"] = link_bw;
  return doc.dump(2) + "\n";
}

PerfConfig PerfConfig::from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed perf config: ") + e.what());
  }
  PerfConfig cfg;
  cfg.clock_hz = doc.value("clock_hz", cfg.clock_hz);
  cfg.ii = doc.value("ii", cfg.ii);
  cfg.pipeline_depth = doc.value("pipeline_depth", cfg.pipeline_depth);
  cfg.fifo_depth = doc.value("fifo_depth", cfg.fifo_depth);
  cfg.fifo_extra = doc.value("fifo_extra", cfg.fifo_extra);
  cfg.bytes_in = doc.value("bytes_in", cfg.bytes_in);
  cfg.bytes_out = doc.value("bytes_out", cfg.bytes_out);
  cfg.bw_h2c = doc.value("bw_h2c", cfg.bw_h2c);
  cfg.bw_c2h = doc.value("bw_c2h", cfg.bw_c2h);
  cfg.call_overhead_s = doc.value("call_overhead_s", cfg.call_overhead_s);
  cfg.max_call_bytes = doc.value("max_call_bytes", cfg.max_call_bytes);
  cfg.link_bw = doc.value("link_bw", cfg.link_bw);
  cfg.validate();
  return cfg;
}

const char* bottleneck_name(Bottleneck b) {
  switch (b) {
    case Bottleneck::compute: return "compute";
    case Bottleneck::h2c: return "h2c";
    case Bottleneck::c2h: return "c2h";
    case Bottleneck::host_call_overhead: return "host_call_overhead";
  }
  return "?";
}

std::string PerfReport::to_json() const {
  ordered_json doc;
  doc["throughput"] = throughput;
  doc["latency_single_s"] = latency_single_s;
  doc["bottleneck"] = bottleneck_name(bottleneck);
  doc["steady_rate"] = steady_rate;
  doc["total_time_s"] = total_time_s;
  doc["first_output_cycle"] = first_output_cycle;
  doc["steady_issue_cycles"] = steady_issue_cycles;
  doc["util_h2c"] = util_h2c;
  doc["util_compute"] = util_compute;
  doc["util_c2h"] = util_c2h;
  doc["mm_serial_s"] = mm_serial_s;
  doc["mm_pipelined_s"] = mm_pipelined_s;
  return doc.dump(2) + "\n";
}

PerfReport analytic_throughput(const PerfConfig& cfg, std::uint64_t batch) {
  cfg.validate();
  if (batch < 1) throw FormatError("batch must be >= 1");
  double r_compute = cfg.clock_hz / cfg.ii;
  double r_h2c = cfg.bw_h2c / cfg.bytes_in;
  double r_c2h = cfg.bw_c2h / cfg.bytes_out;
  double r_inf = std::min({r_compute, r_h2c, r_c2h});

  int depth_total = cfg.pipeline_depth + cfg.fifo_extra;
  double stream_time = batch / r_inf;
  // One leading call overhead; later calls overlap with streaming.
  double total = cfg.call_overhead_s + stream_time + depth_total / cfg.clock_hz;

  PerfReport rep;
  rep.steady_rate = r_inf;
  rep.total_time_s = total;
  rep.throughput = batch / total;
  rep.latency_single_s = analytic_end_to_end_latency(cfg);
  if (cfg.call_overhead_s > stream_time) {
    rep.bottleneck = Bottleneck::host_call_overhead;
  } else if (r_inf == r_compute) {
    rep.bottleneck = Bottleneck::compute;
  } else if (r_inf == r_h2c) {
    rep.bottleneck = Bottleneck::h2c;
  } else {
    rep.bottleneck = Bottleneck::c2h;
  }
  return rep;
}

double analytic_core_latency(const PerfConfig& cfg) {
  // Tree stage + adder stages + output register = pipeline_depth - 2 + 1.
  int compute_stages = cfg.pipeline_depth - 2 + 1;
  return compute_stages / cfg.clock_hz;
}

double analytic_end_to_end_latency(const PerfConfig& cfg) {
  return analytic_core_latency(cfg) + 2 * cfg.call_overhead_s +
         (cfg.bytes_in / cfg.bw_h2c) + (cfg.bytes_out / cfg.bw_c2h);
}

PerfReport cycle_sim(const PerfConfig& cfg, std::uint64_t batch) {
  cfg.validate();
  if (batch < 1 || batch > 10'000'000)
    throw FormatError("cycle_sim batch must be in [1, 1e7]");

  double cin = cfg.bytes_in * cfg.clock_hz / cfg.bw_h2c;    // cycles/record
  double cout = cfg.bytes_out * cfg.clock_hz / cfg.bw_c2h;  // cycles/record
  double ovh = cfg.call_overhead_s * cfg.clock_hz;
  int depth_total = cfg.pipeline_depth + cfg.fifo_extra;
  std::uint64_t recs_per_call = std::max<std::uint64_t>(
      static_cast<std::uint64_t>(cfg.max_call_bytes / cfg.bytes_in), 1);

  // Rolling state; recv history bounded by the FIFO depth.
  std::vector<double> recv_hist(cfg.fifo_depth, 0.0);
  double sender_t = 0.0;
  double start_prev = -1e300;
  double recv_prev = 0.0;
  double first_out = 0.0;
  double mid_out = 0.0;
  std::uint64_t mid = batch / 2;

  for (std::uint64_t k = 0; k < batch; ++k) {
    if (k % recs_per_call == 0) sender_t += ovh;
    sender_t += cin;
    double t_in = sender_t;

    double start = t_in;
    if (k > 0) start = std::max(start, start_prev + cfg.ii);
    if (k >= static_cast<std::uint64_t>(cfg.fifo_depth)) {
      // FIFO full: stall issue until the oldest queued result leaves.
      double oldest = recv_hist[k % cfg.fifo_depth];
      start = std::max(start, oldest - depth_total);
    }
    double exit = start + depth_total;
    double recv = (k == 0 ? exit : std::max(exit, recv_prev)) + cout;

    recv_hist[k % cfg.fifo_depth] = recv;
    start_prev = start;
    recv_prev = recv;
    if (k == 0) first_out = recv;
    if (k == mid) mid_out = recv;
  }

  PerfReport rep;
  rep.first_output_cycle = first_out;
  rep.steady_issue_cycles =
      batch > 1 && batch - 1 > mid ? (recv_prev - mid_out) / (batch - 1 - mid)
                                   : 0.0;
  rep.total_time_s = recv_prev / cfg.clock_hz;
  rep.throughput = batch / rep.total_time_s;
  rep.steady_rate = rep.steady_issue_cycles > 0
                        ? cfg.clock_hz / rep.steady_issue_cycles
                        : rep.throughput;
  rep.latency_single_s = analytic_end_to_end_latency(cfg);
  rep.util_h2c = batch * cin / recv_prev;
  rep.util_compute = batch * cfg.ii / recv_prev;
  rep.util_c2h = batch * cout / recv_prev;

  std::uint64_t n_calls = (batch + recs_per_call - 1) / recs_per_call;
  if (n_calls * ovh > 0.5 * recv_prev) {
    rep.bottleneck = Bottleneck::host_call_overhead;
  } else if (rep.util_compute >= rep.util_h2c &&
             rep.util_compute >= rep.util_c2h) {
    rep.bottleneck = Bottleneck::compute;
  } else if (rep.util_h2c >= rep.util_c2h) {
    rep.bottleneck = Bottleneck::h2c;
  } else {
    rep.bottleneck = Bottleneck::c2h;
  }

  auto [serial_s, pipelined_s] = mm_schedule(cfg, batch, recs_per_call);
  rep.mm_serial_s = serial_s;
  rep.mm_pipelined_s = pipelined_s;
  return rep;
}

std::pair<double, double> mm_schedule(const PerfConfig& cfg,
                                      std::uint64_t batch,
                                      std::uint64_t records_per_batch) {
  cfg.validate();
  if (records_per_batch < 1) throw FormatError("records_per_batch must be >= 1");
  int depth_total = cfg.pipeline_depth + cfg.fifo_extra;
  std::uint64_t nb = (batch + records_per_batch - 1) / records_per_batch;

  double serial = 0.0;
  double tA = 0.0, tB = 0.0, tC = 0.0;  // phase completion times
  for (std::uint64_t i = 0; i < nb; ++i) {
    std::uint64_t recs =
        std::min(records_per_batch, batch - i * records_per_batch);
    double a = cfg.call_overhead_s + recs * cfg.bytes_in / cfg.bw_h2c;
    double b = (recs * cfg.ii + depth_total) / cfg.clock_hz;
    double c = cfg.call_overhead_s + recs * cfg.bytes_out / cfg.bw_c2h;
    serial += a + b + c;
    tA += a;
    tB = std::max(tA, tB) + b;
    tC = std::max(tB, tC) + c;
  }
  return {serial, tC};
}

CalibrationFit calibrate(
    const std::vector<std::pair<std::uint64_t, double>>& measured,
    const PerfConfig& cfg) {
  if (measured.size() < 2)
    throw FitError("calibration needs at least two (batch, throughput) points");
  // Model: T_i = a * single_call_i + b * batch_i, least squares in (a, b).
  double s_ss = 0, s_sb = 0, s_bb = 0, s_sT = 0, s_bT = 0;
  std::vector<double> times(measured.size());
  std::vector<double> singles(measured.size());
  for (std::size_t i = 0; i < measured.size(); ++i) {
    auto [batch, thr] = measured[i];
    if (batch < 1 || thr <= 0)
      throw FitError("calibration point " + std::to_string(i) + " is invalid");
    double T = batch / thr;
    double s = batch * cfg.bytes_in <= cfg.max_call_bytes ? 1.0 : 0.0;
    double bsz = static_cast<double>(batch);
    times[i] = T;
    singles[i] = s;
    s_ss += s * s;
    s_sb += s * bsz;
    s_bb += bsz * bsz;
    s_sT += s * T;
    s_bT += bsz * T;
  }
  double det = s_ss * s_bb - s_sb * s_sb;
  if (std::fabs(det) < 1e-12 * std::max(1.0, s_bb))
    throw FitError("degenerate calibration points (collinear or one-sided)");
  double a = (s_sT * s_bb - s_sb * s_bT) / det;
  double b = (s_ss * s_bT - s_sb * s_sT) / det;
  if (b <= 0) throw FitError("calibration produced a non-positive slope");

  CalibrationFit fit;
  fit.call_overhead_s = a;
  fit.bw_eff = cfg.bytes_in / b;
  for (std::size_t i = 0; i < measured.size(); ++i) {
    double predicted = a * singles[i] + b * measured[i].first;
    fit.residual_s.push_back(predicted - times[i]);
    fit.relative_residual.push_back((predicted - times[i]) / times[i]);
  }
  return fit;
}

}  // namespace treestream
