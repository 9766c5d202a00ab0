#include "treestream/stream_engine.hpp"

#include <chrono>
#include <cstring>
#include <random>
#include <thread>

#include "json.hpp"
#include "treestream/bounded_queue.hpp"
#include "treestream/errors.hpp"

namespace treestream {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

}  // namespace

std::string RunStats::to_json() const {
  nlohmann::ordered_json doc;
  doc["records_in"] = records_in;
  doc["records_out"] = records_out;
  doc["wall_start_s"] = wall_start_s;
  doc["wall_end_s"] = wall_end_s;
  doc["throughput"] = throughput;
  auto calls = [](const std::vector<CallStat>& cs) {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const CallStat& c : cs)
      arr.push_back({{"bytes", c.bytes}, {"start_s", c.start_s}, {"end_s", c.end_s}});
    return arr;
  };
  doc["write_calls"] = calls(write_calls);
  doc["read_calls"] = calls(read_calls);
  return doc.dump(2) + "\n";
}

std::vector<std::uint8_t> pack_results(std::span<const std::int64_t> margins) {
  std::size_t words = (margins.size() + 7) / 8;
  std::vector<std::uint8_t> out(words * 64, 0);
  for (std::size_t i = 0; i < margins.size(); ++i) {
    std::uint64_t u = static_cast<std::uint64_t>(margins[i]);
    for (int b = 0; b < 8; ++b)
      out[i * 8 + b] = static_cast<std::uint8_t>(u >> (8 * b));
  }
  return out;
}

std::vector<std::int64_t> unpack_results(std::span<const std::uint8_t> bytes,
                                         std::size_t count) {
  if (bytes.size() < count * 8)
    throw FormatError("result stream too short");
  std::vector<std::int64_t> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::uint64_t u = 0;
    for (int b = 0; b < 8; ++b)
      u |= static_cast<std::uint64_t>(bytes[i * 8 + b]) << (8 * b);
    out[i] = static_cast<std::int64_t>(u);
  }
  return out;
}

std::pair<std::vector<std::uint8_t>, RunStats> run_streaming(
    const CompiledForest& cf, std::span<const std::uint8_t> packed,
    const StreamConfig& cfg) {
  std::size_t rec_bytes = cf.quant.bytes_per_record();
  if (cfg.fifo_depth < 1 || cfg.input_queue_depth < 1)
    throw FormatError("queue depths must be >= 1");
  if (cfg.max_call_bytes % 64 != 0)
    throw FormatError("max_call_bytes must be a multiple of 64");
  if (packed.size() % rec_bytes != 0)
    throw FormatError("input length is not a multiple of the record size");
  std::size_t n = packed.size() / rec_bytes;
  std::size_t recs_per_call = std::max<std::size_t>(
      cfg.max_call_bytes / rec_bytes, 1);

  RunStats stats;
  stats.records_in = n;
  std::vector<std::int64_t> margins(n);

  BoundedQueue<std::size_t> input_q(cfg.input_queue_depth);
  BoundedQueue<std::pair<std::size_t, std::int64_t>> fifo(cfg.fifo_depth);

  Clock::time_point t0 = Clock::now();
  std::vector<CallStat> write_calls;
  std::vector<CallStat> read_calls;

  std::thread sender([&] {
    for (std::size_t base = 0; base < n; base += recs_per_call) {
      std::size_t end = std::min(base + recs_per_call, n);
      CallStat call;
      call.bytes = (end - base) * rec_bytes;
      call.start_s = seconds_since(t0);
      for (std::size_t r = base; r < end; ++r) input_q.push(r);
      call.end_s = seconds_since(t0);
      write_calls.push_back(call);
    }
    input_q.close();
  });

  std::thread worker([&] {
    std::size_t r;
    while (input_q.pop(r)) {
      CodeVector v =
          unpack_record(packed.subspan(r * rec_bytes, rec_bytes), cf.quant);
      fifo.push({r, score(cf, v)});  // blocks on backpressure
    }
    fifo.close();
  });

  std::thread receiver([&] {
    std::pair<std::size_t, std::int64_t> item;
    CallStat call;
    std::size_t in_call = 0;
    call.start_s = seconds_since(t0);
    while (fifo.pop(item)) {
      margins[item.first] = item.second;
      ++stats.records_out;
      call.bytes += 8;
      if (++in_call == recs_per_call) {
        call.end_s = seconds_since(t0);
        read_calls.push_back(call);
        call = CallStat{};
        call.start_s = seconds_since(t0);
        in_call = 0;
      }
    }
    if (in_call > 0) {
      call.end_s = seconds_since(t0);
      read_calls.push_back(call);
    }
    stats.wall_end_s = seconds_since(t0);
  });

  sender.join();
  worker.join();
  receiver.join();

  stats.write_calls = std::move(write_calls);
  stats.read_calls = std::move(read_calls);
  stats.wall_start_s = 0.0;
  double elapsed = stats.wall_end_s - stats.wall_start_s;
  stats.throughput = elapsed > 0 ? stats.records_out / elapsed : 0.0;
  if (stats.records_out != stats.records_in)
    throw FormatError("record count mismatch across the pipeline");
  return {pack_results(margins), stats};
}

namespace {

struct MmBatch {
  std::size_t first = 0;
  std::size_t count = 0;
  std::vector<std::uint8_t> staged;     // after copy-in
  std::vector<std::int64_t> margins;    // after compute
};

void busy_delay(double seconds) {
  if (seconds <= 0) return;
  std::this_thread::sleep_for(std::chrono::duration<double>(seconds));
}

}  // namespace

std::pair<std::vector<std::uint8_t>, RunStats> run_memory_mapped(
    const CompiledForest& cf, std::span<const std::uint8_t> packed,
    const MmConfig& cfg) {
  std::size_t rec_bytes = cf.quant.bytes_per_record();
  if (cfg.batch_records < 1) throw FormatError("batch must be >= 1");
  if (packed.size() % rec_bytes != 0)
    throw FormatError("input length is not a multiple of the record size");
  std::size_t n = packed.size() / rec_bytes;
  std::size_t nb = (n + cfg.batch_records - 1) / cfg.batch_records;

  RunStats stats;
  stats.records_in = n;
  std::vector<std::int64_t> margins(n);
  Clock::time_point t0 = Clock::now();

  auto copy_in = [&](MmBatch& b) {
    b.staged.assign(packed.begin() + b.first * rec_bytes,
                    packed.begin() + (b.first + b.count) * rec_bytes);
    busy_delay(cfg.copy_in_s_per_byte * b.count * rec_bytes);
  };
  auto compute = [&](MmBatch& b) {
    b.margins.resize(b.count);
    for (std::size_t i = 0; i < b.count; ++i) {
      CodeVector v = unpack_record(
          std::span(b.staged).subspan(i * rec_bytes, rec_bytes), cf.quant);
      b.margins[i] = score(cf, v);
    }
    busy_delay(cfg.compute_s_per_record * b.count);
  };
  auto copy_out = [&](MmBatch& b) {
    std::copy(b.margins.begin(), b.margins.end(), margins.begin() + b.first);
    busy_delay(cfg.copy_out_s_per_byte * b.count * 8);
    stats.records_out += b.count;
  };
  auto make_batch = [&](std::size_t i) {
    MmBatch b;
    b.first = i * cfg.batch_records;
    b.count = std::min(cfg.batch_records, n - b.first);
    return b;
  };

  if (cfg.mode == MmMode::serial) {
    for (std::size_t i = 0; i < nb; ++i) {
      MmBatch b = make_batch(i);
      copy_in(b);
      compute(b);
      copy_out(b);
    }
  } else {
    // Three-deep pipeline: each phase runs on its own thread, batches
    // hand off through depth-1 queues so at most three are in flight.
    BoundedQueue<MmBatch> staged_q(1);
    BoundedQueue<MmBatch> computed_q(1);
    std::thread in_thread([&] {
      for (std::size_t i = 0; i < nb; ++i) {
        MmBatch b = make_batch(i);
        copy_in(b);
        staged_q.push(std::move(b));
      }
      staged_q.close();
    });
    std::thread compute_thread([&] {
      MmBatch b;
      while (staged_q.pop(b)) {
        compute(b);
        computed_q.push(std::move(b));
      }
      computed_q.close();
    });
    std::thread out_thread([&] {
      MmBatch b;
      while (computed_q.pop(b)) copy_out(b);
    });
    in_thread.join();
    compute_thread.join();
    out_thread.join();
  }

  stats.wall_end_s = seconds_since(t0);
  double elapsed = stats.wall_end_s;
  stats.throughput = elapsed > 0 ? stats.records_out / elapsed : 0.0;
  return {pack_results(margins), stats};
}

std::vector<BenchRow> bench(const CompiledForest& cf,
                            std::span<const std::size_t> batches, int repeats,
                            std::uint64_t seed, const StreamConfig& cfg) {
  std::vector<BenchRow> rows;
  std::mt19937_64 rng(seed);
  for (std::size_t batch : batches) {
    // Fresh random codes per batch size; reused across repeats.
    std::vector<CodeVector> vecs(batch);
    for (CodeVector& v : vecs) {
      v.resize(cf.quant.feature_count());
      for (int f = 0; f < cf.quant.feature_count(); ++f)
        v[f] = static_cast<std::uint16_t>(rng() % (cf.quant.thresholds(f) + 1));
    }
    std::vector<std::uint8_t> packed = pack_records(vecs, cf.quant);
    BenchRow row;
    row.batch = batch;
    row.repeats = repeats;
    double sum = 0.0;
    row.min_throughput = 1e300;
    for (int rep = 0; rep < repeats; ++rep) {
      auto [bytes, stats] = run_streaming(cf, packed, cfg);
      sum += stats.throughput;
      row.min_throughput = std::min(row.min_throughput, stats.throughput);
      row.max_throughput = std::max(row.max_throughput, stats.throughput);
    }
    row.mean_throughput = sum / repeats;
    rows.push_back(row);
  }
  return rows;
}

}  // namespace treestream
