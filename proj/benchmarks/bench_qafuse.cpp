#include <benchmark/benchmark.h>

#include <string>
#include <vector>

#include "qafuse/extract.hpp"
#include "qafuse/match.hpp"
#include "qafuse/prob.hpp"
#include "qafuse/random.hpp"
#include "qafuse/synth.hpp"

namespace {

const std::vector<qafuse::SoftMatchCase>& cases() {
  static const auto c = [] {
    qafuse::SoftMatchWorkload w;
    w.passages = 512;
    return qafuse::make_softmatch_cases(w);
  }();
  return c;
}

void BM_SoftMatchPruned(benchmark::State& state) {
  std::size_t i = 0;
  for (auto _ : state) {
    const auto& c = cases()[i++ % cases().size()];
    benchmark::DoNotOptimize(qafuse::soft_match_best(c.passage, c.answer));
  }
}
BENCHMARK(BM_SoftMatchPruned);

void BM_SoftMatchBruteForce(benchmark::State& state) {
  std::size_t i = 0;
  for (auto _ : state) {
    const auto& c = cases()[i++ % cases().size()];
    benchmark::DoNotOptimize(qafuse::brute_force_best(c.passage, c.answer));
  }
}
BENCHMARK(BM_SoftMatchBruteForce);

void BM_Softmax(benchmark::State& state) {
  qafuse::Rng rng(3);
  std::vector<std::pair<std::string, double>> scores;
  for (int i = 0; i < state.range(0); ++i) scores.push_back({"p" + std::to_string(i), rng.uniform(-10, 10)});
  for (auto _ : state) benchmark::DoNotOptimize(qafuse::softmax_over_set(scores));
}
BENCHMARK(BM_Softmax)->Arg(24)->Arg(200);

void BM_DecodeTopM(benchmark::State& state) {
  qafuse::Rng rng(5);
  std::vector<qafuse::ReaderScores> batch;
  for (int p = 0; p < state.range(0); ++p) {
    auto r = qafuse::ReaderScores::uniform("p" + std::to_string(p), 200, 30);
    for (auto& v : r.s_start) v = rng.uniform(-5, 5);
    for (auto& v : r.s_end) v = rng.uniform(-5, 5);
    for (auto& v : r.s_joint) v = rng.uniform(-5, 5);
    r.s_passage = rng.uniform(-5, 5);
    batch.push_back(std::move(r));
  }
  for (auto _ : state) benchmark::DoNotOptimize(qafuse::decode_top_m(batch, 25));
}
BENCHMARK(BM_DecodeTopM)->Arg(1)->Arg(24);

}  // namespace

BENCHMARK_MAIN();
