#include "qafuse/synth.hpp"

#include <algorithm>
#include <chrono>
#include <optional>

#include "qafuse/match.hpp"
#include "qafuse/random.hpp"

namespace qafuse {

std::vector<SoftMatchCase> make_softmatch_cases(const SoftMatchWorkload& w) {
  if (w.answer_length == 0 || w.passage_length == 0 || w.vocabulary == 0)
    throw Error("soft-match workload sizes must be positive");
  Rng rng(w.seed);
  std::vector<SoftMatchCase> cases(w.passages);
  for (auto& c : cases) {
    c.passage.reserve(w.passage_length);
    for (std::size_t i = 0; i < w.passage_length; ++i)
      c.passage.push_back("w" + std::to_string(rng.uniform_index(w.vocabulary)));

    std::size_t copied = 0;
    if (w.answer_length > 1 && rng.uniform_index(20) != 0)
      copied = 1 + rng.uniform_index(std::min(w.answer_length - 1, w.passage_length));
    const std::size_t at = rng.uniform_index(w.passage_length - copied + 1);
    for (std::size_t i = 0; i < copied; ++i) c.answer.push_back(c.passage[at + i]);
    while (c.answer.size() < w.answer_length)
      c.answer.push_back("x" + std::to_string(rng.uniform_index(w.vocabulary)));
    c.answer = rng.sample_without_replacement(std::move(c.answer), w.answer_length);
  }
  return cases;
}

SoftMatchTiming time_softmatch(const std::vector<SoftMatchCase>& cases) {
  using Clock = std::chrono::steady_clock;
  SoftMatchTiming t;
  t.cases = cases.size();
  if (cases.empty()) return t;

  std::vector<std::optional<MatchSpan>> brute(cases.size()), pruned(cases.size());
  MatchStats brute_stats, pruned_stats;

  auto t0 = Clock::now();
  for (std::size_t i = 0; i < cases.size(); ++i)
    brute[i] = brute_force_best(cases[i].passage, cases[i].answer, &brute_stats);
  auto t1 = Clock::now();
  for (std::size_t i = 0; i < cases.size(); ++i)
    pruned[i] = soft_match_best(cases[i].passage, cases[i].answer, &pruned_stats);
  auto t2 = Clock::now();

  for (std::size_t i = 0; i < cases.size(); ++i)
    if (brute[i] != pruned[i]) ++t.mismatches;
  const double n = static_cast<double>(cases.size());
  t.brute_force_ms_per_passage = std::chrono::duration<double, std::milli>(t1 - t0).count() / n;
  t.pruned_ms_per_passage = std::chrono::duration<double, std::milli>(t2 - t1).count() / n;
  t.brute_force_spans = brute_stats.spans_scored;
  t.pruned_spans = pruned_stats.spans_scored;
  return t;
}

}  // namespace qafuse
