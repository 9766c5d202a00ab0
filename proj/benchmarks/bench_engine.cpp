#include <random>
#include <span>

#include <benchmark/benchmark.h>

#include "treestream/datapath.hpp"
#include "treestream/model_ir.hpp"
#include "treestream/quantize.hpp"
#include "treestream/stream_engine.hpp"

using namespace treestream;

namespace {

struct Setup {
  CompiledForest cf;
  std::vector<CodeVector> codes;
  std::vector<std::uint8_t> packed;
};

// 100 trees, depth 3, 112 of 1146 features used: 64-byte records.
const Setup& setup(std::size_t records) {
  static Setup s = [] {
    Setup out;
    Forest f = gen_synthetic(100, 3, 1146, 15, 1, 112);
    auto [pruned, map] = prune_features(f);
    CanonicalForest canon = canonicalize(pruned, 3);
    QuantSpec spec = build_quant_spec(canon, 4);
    out.cf = compile_forest(canon, spec);
    std::mt19937_64 rng(9);
    out.codes.resize(1 << 17);
    for (CodeVector& v : out.codes) {
      v.resize(spec.feature_count());
      for (int fi = 0; fi < spec.feature_count(); ++fi)
        v[fi] = static_cast<std::uint16_t>(rng() % (spec.thresholds(fi) + 1));
    }
    out.packed = pack_records(out.codes, spec);
    return out;
  }();
  (void)records;
  return s;
}

void BM_score(benchmark::State& state) {
  const Setup& s = setup(1);
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(score(s.cf, s.codes[i]));
    i = (i + 1) & (s.codes.size() - 1);
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_score);

void BM_encode_record(benchmark::State& state) {
  const Setup& s = setup(1);
  std::vector<double> raw(s.cf.quant.feature_count(), 0.5);
  for (auto _ : state)
    benchmark::DoNotOptimize(encode_record(raw, s.cf.quant));
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_encode_record);

void BM_unpack_record(benchmark::State& state) {
  const Setup& s = setup(1);
  std::span<const std::uint8_t> rec(s.packed.data(), 64);
  for (auto _ : state)
    benchmark::DoNotOptimize(unpack_record(rec, s.cf.quant));
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_unpack_record);

void BM_streaming(benchmark::State& state) {
  std::size_t records = static_cast<std::size_t>(state.range(0));
  const Setup& s = setup(records);
  std::span<const std::uint8_t> packed(s.packed.data(), records * 64);
  for (auto _ : state) {
    auto [bytes, stats] = run_streaming(s.cf, packed);
    benchmark::DoNotOptimize(bytes.data());
  }
  state.SetItemsProcessed(state.iterations() * records);
}
BENCHMARK(BM_streaming)->Arg(1)->Arg(1000)->Arg(100000)
    ->Unit(benchmark::kMicrosecond);

void BM_memory_mapped(benchmark::State& state) {
  std::size_t records = static_cast<std::size_t>(state.range(0));
  const Setup& s = setup(records);
  std::span<const std::uint8_t> packed(s.packed.data(), records * 64);
  MmConfig cfg;
  cfg.batch_records = 1024;
  cfg.mode = MmMode::pipelined;
  for (auto _ : state) {
    auto [bytes, stats] = run_memory_mapped(s.cf, packed, cfg);
    benchmark::DoNotOptimize(bytes.data());
  }
  state.SetItemsProcessed(state.iterations() * records);
}
BENCHMARK(BM_memory_mapped)->Arg(100000)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
