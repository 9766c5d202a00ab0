#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "treestream/datapath.hpp"

namespace treestream {

struct StreamConfig {
  std::size_t fifo_depth = 16;         // worker -> receiver, records
  std::size_t input_queue_depth = 256; // sender -> worker, records
  std::size_t max_call_bytes = 1u << 20;
};

struct CallStat {
  std::size_t bytes = 0;
  double start_s = 0.0;  // relative to run start
  double end_s = 0.0;
};

struct RunStats {
  std::size_t records_in = 0;
  std::size_t records_out = 0;
  double wall_start_s = 0.0;  // sender start (always 0)
  double wall_end_s = 0.0;    // receiver completion
  double throughput = 0.0;    // records_out / (wall_end - wall_start)
  std::vector<CallStat> write_calls;
  std::vector<CallStat> read_calls;

  std::string to_json() const;
};

/// Pack fixed-point margins into the result wire format: 8-byte
/// little-endian two's complement (24 fractional bits), 8 results per
/// 64-byte word, tail word zero-padded.
std::vector<std::uint8_t> pack_results(std::span<const std::int64_t> margins);
std::vector<std::int64_t> unpack_results(std::span<const std::uint8_t> bytes,
                                         std::size_t count);

/// Streaming pipeline: sender splits the input into calls of at most
/// max_call_bytes; worker scores one record per step; receiver drains a
/// bounded FIFO and packs results in input order.
std::pair<std::vector<std::uint8_t>, RunStats> run_streaming(
    const CompiledForest& cf, std::span<const std::uint8_t> packed,
    const StreamConfig& cfg = {});

enum class MmMode { serial, pipelined };

struct MmConfig {
  std::size_t batch_records = 1;
  MmMode mode = MmMode::serial;
  // Injected per-phase delays; zero for pure functional runs.
  double copy_in_s_per_byte = 0.0;
  double compute_s_per_record = 0.0;
  double copy_out_s_per_byte = 0.0;
};

/// Memory-mapped emulation: copy-in, compute, copy-out per batch, either
/// strictly serial or overlapped three deep. Results are byte-identical
/// in both modes.
std::pair<std::vector<std::uint8_t>, RunStats> run_memory_mapped(
    const CompiledForest& cf, std::span<const std::uint8_t> packed,
    const MmConfig& cfg);

struct BenchRow {
  std::size_t batch = 0;
  double mean_throughput = 0.0;
  double min_throughput = 0.0;
  double max_throughput = 0.0;
  int repeats = 0;
};

/// Streaming throughput per batch size, averaged over `repeats` runs on
/// seeded random inputs.
std::vector<BenchRow> bench(const CompiledForest& cf,
                            std::span<const std::size_t> batches,
                            int repeats = 10, std::uint64_t seed = 1,
                            const StreamConfig& cfg = {});

}  // namespace treestream
