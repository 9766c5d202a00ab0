#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace treestream {

/// Parameters of the analytic and event-driven throughput models.
/// Defaults mirror the streaming setup: 250 MHz, II=1, 64-byte input
/// records, 8-byte results, 16 GB/s link in each direction.
struct PerfConfig {
  double clock_hz = 250e6;
  int ii = 1;                 // cycles per accepted input
  int pipeline_depth = 10;    // 8 compute + xdma in + xdma out
  int fifo_depth = 16;
  int fifo_extra = 0;         // FIFO stages added to the pipeline, <= fifo_depth
  double bytes_in = 64;
  double bytes_out = 8;
  double bw_h2c = 16e9;       // effective, bytes/s
  double bw_c2h = 16e9;
  double call_overhead_s = 0.0;
  double max_call_bytes = 1u << 20;
  double link_bw = 16e9;      // theoretical, bytes/s

  std::string to_json() const;
  static PerfConfig from_json(const std::string& text);
  void validate() const;
};

enum class Bottleneck { compute, h2c, c2h, host_call_overhead };

const char* bottleneck_name(Bottleneck b);

struct PerfReport {
  double throughput = 0.0;        // inferences/s
  double latency_single_s = 0.0;  // end-to-end, single record
  Bottleneck bottleneck = Bottleneck::compute;
  double steady_rate = 0.0;       // R_inf, inferences/s
  double total_time_s = 0.0;
  // event-driven extras
  double first_output_cycle = 0.0;
  double steady_issue_cycles = 0.0;
  double util_h2c = 0.0, util_compute = 0.0, util_c2h = 0.0;
  double mm_serial_s = 0.0, mm_pipelined_s = 0.0;

  std::string to_json() const;
};

/// Steady-state rate is the min of compute and the two transfer rates;
/// finite batches pay one leading call overhead plus the pipeline fill.
PerfReport analytic_throughput(const PerfConfig& cfg, std::uint64_t batch);

/// Compute-stage latency: (pipeline_depth - 2 + 1) cycles — tree stage,
/// adder stages, output register.
double analytic_core_latency(const PerfConfig& cfg);

/// Single-record latency seen by the host: core latency plus the write
/// and read call overheads.
double analytic_end_to_end_latency(const PerfConfig& cfg);

/// Event-driven record-level simulation of the streaming pipeline, plus
/// memory-mapped serial and 3-deep pipelined schedules for comparison.
PerfReport cycle_sim(const PerfConfig& cfg, std::uint64_t batch);

/// Memory-mapped schedule times for a given device-batch granularity.
std::pair<double, double> mm_schedule(const PerfConfig& cfg,
                                      std::uint64_t batch,
                                      std::uint64_t records_per_batch);

struct CalibrationFit {
  double call_overhead_s = 0.0;
  double bw_eff = 0.0;  // bytes/s
  std::vector<double> residual_s;          // predicted - measured batch time
  std::vector<double> relative_residual;   // residual / measured time
};

/// Fit (call_overhead_s, bw_eff) to measured (batch, throughput) points.
/// Model: batch time = bytes_in*batch/bw_eff, plus call_overhead_s for
/// runs that fit in a single call; multi-call runs overlap the per-call
/// overhead with streaming.
CalibrationFit calibrate(
    const std::vector<std::pair<std::uint64_t, double>>& measured,
    const PerfConfig& cfg);

}  // namespace treestream
