#include <cmath>

#include "doctest.h"
#include "treestream/errors.hpp"
#include "treestream/perf_model.hpp"

using namespace treestream;

namespace {

// Measured (batch, inferences/s) points for the reference deployment:
// 250 MHz engine behind a 1 MB-call DMA link.
const std::vector<std::pair<std::uint64_t, double>> kMeasured = {
    {1, 2.2e3},      {10, 2.0e4},    {100, 1.9e5},
    {1000, 1.75e6},  {10000, 6.55e6}, {100000, 65.80e6},
};

}  // namespace

TEST_CASE("config: json round trip and validation") {
  PerfConfig cfg;
  cfg.bw_h2c = 4.2e9;
  cfg.call_overhead_s = 4.5e-4;
  PerfConfig back = PerfConfig::from_json(cfg.to_json());
  CHECK(back.bw_h2c == cfg.bw_h2c);
  CHECK(back.call_overhead_s == cfg.call_overhead_s);
  CHECK(back.clock_hz == cfg.clock_hz);

  CHECK_THROWS_AS(PerfConfig::from_json("{\"ii\": 0}"), FormatError);
  CHECK_THROWS_AS(PerfConfig::from_json("{\"clock_hz\": -1}"), FormatError);
  CHECK_THROWS_AS(PerfConfig::from_json("nope"), FormatError);
}

TEST_CASE("analytic: compute ceiling at full link bandwidth") {
  PerfConfig cfg;  // 250 MHz, II=1, 16 GB/s both ways
  PerfReport rep = analytic_throughput(cfg, 100'000'000);
  CHECK(rep.steady_rate == 250e6);
  CHECK(rep.bottleneck == Bottleneck::compute);
  CHECK(rep.throughput == doctest::Approx(250e6).epsilon(0.001));
}

TEST_CASE("analytic: h2c-limited rate at measured link bandwidth") {
  PerfConfig cfg;
  cfg.bw_h2c = 4.21e9;  // effective host-to-card rate
  PerfReport rep = analytic_throughput(cfg, 100'000'000);
  CHECK(rep.bottleneck == Bottleneck::h2c);
  CHECK(rep.steady_rate == doctest::Approx(65.78e6).epsilon(0.01));
}

TEST_CASE("analytic: single-record run is overhead-dominated") {
  PerfConfig cfg;
  cfg.bw_h2c = 4.211e9;
  cfg.call_overhead_s = 454.5e-6;
  PerfReport rep = analytic_throughput(cfg, 1);
  CHECK(rep.bottleneck == Bottleneck::host_call_overhead);
  CHECK(rep.throughput == doctest::Approx(2.2e3).epsilon(0.10));
}

TEST_CASE("analytic: core latency is 9 cycles at depth 10") {
  PerfConfig cfg;
  CHECK(analytic_core_latency(cfg) == doctest::Approx(36e-9));
  CHECK(analytic_end_to_end_latency(cfg) >= analytic_core_latency(cfg));
}

TEST_CASE("analytic: throughput is monotone in batch size") {
  PerfConfig cfg;
  cfg.call_overhead_s = 4.5e-4;
  cfg.bw_h2c = 4.2e9;
  double prev = 0.0;
  for (std::uint64_t b : {1u, 10u, 100u, 1000u, 100000u, 10000000u}) {
    double thr = analytic_throughput(cfg, b).throughput;
    CHECK(thr > prev);
    prev = thr;
  }
  CHECK(prev < analytic_throughput(cfg, 1).steady_rate * 1.0001);
}

TEST_CASE("cycle_sim: agrees with analytic ceiling at full bandwidth") {
  PerfConfig cfg;
  PerfReport rep = cycle_sim(cfg, 1'000'000);
  CHECK(rep.throughput == doctest::Approx(250e6).epsilon(0.01));
  CHECK(rep.steady_rate == doctest::Approx(250e6).epsilon(0.01));
  CHECK(rep.bottleneck == Bottleneck::compute);
  CHECK(rep.util_compute > 0.99);
}

TEST_CASE("cycle_sim: slow readback throttles issue through the FIFO") {
  PerfConfig cfg;
  cfg.bw_c2h = 500e6;  // 4 cycles per 8-byte result
  PerfReport rep = cycle_sim(cfg, 200'000);
  CHECK(rep.steady_rate == doctest::Approx(62.5e6).epsilon(0.01));
  CHECK(rep.bottleneck == Bottleneck::c2h);
  PerfReport an = analytic_throughput(cfg, 200'000);
  CHECK(rep.throughput == doctest::Approx(an.throughput).epsilon(0.02));
}

TEST_CASE("cycle_sim: first output after fill, call overhead counted") {
  PerfConfig cfg;
  cfg.call_overhead_s = 1e-4;  // 25000 cycles
  PerfReport rep = cycle_sim(cfg, 1);
  // overhead + 1 record in + depth + result out
  CHECK(rep.first_output_cycle ==
        doctest::Approx(25000 + 1 + 10 + 0.125));
  CHECK(rep.bottleneck == Bottleneck::host_call_overhead);
  CHECK_THROWS_AS(cycle_sim(cfg, 0), FormatError);
  CHECK_THROWS_AS(cycle_sim(cfg, 20'000'000), FormatError);
}

TEST_CASE("cycle_sim: overhead amortizes across 1 MB calls") {
  PerfConfig cfg;
  cfg.bw_h2c = 4.211e9;
  cfg.call_overhead_s = 454.5e-6;
  // 100000 records split into 7 calls; overhead is per call.
  PerfReport rep = cycle_sim(cfg, 100'000);
  double no_ovh =
      cycle_sim([] { PerfConfig c; c.bw_h2c = 4.211e9; return c; }(), 100'000)
          .total_time_s;
  CHECK(rep.total_time_s > no_ovh);
  CHECK(rep.total_time_s < no_ovh + 7.5 * cfg.call_overhead_s);
}

TEST_CASE("mm_schedule: pipelining gains at most 3x and hits it when equalized") {
  PerfConfig cfg;
  cfg.call_overhead_s = 0.0;
  // records_per_batch 1000: compute phase (1000 + 10) cycles = 4.04 us.
  // Feed bandwidths chosen so copy-in and copy-out take the same 4.04 us.
  double phase = 1010.0 / cfg.clock_hz;
  cfg.bw_h2c = 1000 * cfg.bytes_in / phase;
  cfg.bw_c2h = 1000 * cfg.bytes_out / phase;
  auto [serial, pipelined] = mm_schedule(cfg, 100'000, 1000);
  CHECK(serial == doctest::Approx(300 * phase).epsilon(1e-9));
  CHECK(pipelined == doctest::Approx(102 * phase).epsilon(1e-9));
  double speedup = serial / pipelined;
  CHECK(speedup <= 3.0);
  CHECK(speedup == doctest::Approx(3.0).epsilon(0.05));
}

TEST_CASE("mm_schedule: unbalanced phases cap below 3x") {
  PerfConfig cfg;
  auto [serial, pipelined] = mm_schedule(cfg, 100'000, 1000);
  CHECK(pipelined <= serial);
  CHECK(serial / pipelined < 3.0);
}

TEST_CASE("streaming beats batched memory-mapped transfers") {
  PerfConfig cfg;
  cfg.bw_h2c = 4.211e9;
  cfg.bw_c2h = 4.211e9;
  cfg.call_overhead_s = 50e-6;
  PerfReport rep = cycle_sim(cfg, 1'000'000);
  CHECK(rep.total_time_s < rep.mm_pipelined_s);
  CHECK(rep.mm_pipelined_s <= rep.mm_serial_s);
}

TEST_CASE("calibrate: two-point fit on the reference deployment") {
  PerfConfig cfg;
  // Smallest and largest measured batches pin overhead and bandwidth.
  CalibrationFit fit =
      calibrate({kMeasured.front(), kMeasured.back()}, cfg);
  CHECK(fit.call_overhead_s > 4.4e-4);
  CHECK(fit.call_overhead_s < 4.7e-4);
  CHECK(fit.bw_eff > 4.0e9);
  CHECK(fit.bw_eff < 4.4e9);
  for (double r : fit.relative_residual) CHECK(std::fabs(r) < 1e-9);

  // Intermediate rows are off-model; the batch-10000 knee shows up as a
  // large negative residual when predicted from the two-point fit.
  double slope = cfg.bytes_in / fit.bw_eff;
  double predicted = fit.call_overhead_s + slope * 10000;
  double measured_t = 10000 / 6.55e6;
  CHECK((predicted - measured_t) / measured_t < -0.3);
}

TEST_CASE("calibrate: recovers exact synthetic parameters") {
  PerfConfig cfg;
  double a_true = 4.545e-4;
  double bw_true = 4.211e9;
  std::vector<std::pair<std::uint64_t, double>> pts;
  for (std::uint64_t batch : {1u, 10u, 1000u, 10000u, 50000u, 100000u}) {
    double single = batch * cfg.bytes_in <= cfg.max_call_bytes ? 1.0 : 0.0;
    double T = a_true * single + batch * cfg.bytes_in / bw_true;
    pts.push_back({batch, batch / T});
  }
  CalibrationFit fit = calibrate(pts, cfg);
  CHECK(fit.call_overhead_s == doctest::Approx(a_true).epsilon(1e-6));
  CHECK(fit.bw_eff == doctest::Approx(bw_true).epsilon(1e-6));
  for (double r : fit.relative_residual) CHECK(std::fabs(r) < 1e-9);
}

TEST_CASE("calibrate: rejects degenerate inputs") {
  PerfConfig cfg;
  CHECK_THROWS_AS(calibrate({{100, 1e5}}, cfg), FitError);
  CHECK_THROWS_AS(calibrate({{100, 1e5}, {100, 1.1e5}}, cfg), FitError);
  // All multi-call points leave the overhead column empty.
  CHECK_THROWS_AS(calibrate({{20000, 1e6}, {40000, 2e6}}, cfg), FitError);
  // Decreasing batch times imply a negative slope.
  CHECK_THROWS_AS(calibrate({{1, 1.0}, {10000, 20000.0}}, cfg), FitError);
  CHECK_THROWS_AS(calibrate({{0, 1e5}, {10, 1e5}}, cfg), FitError);
  CHECK_THROWS_AS(calibrate({{10, -1.0}, {100, 1e5}}, cfg), FitError);
}
