#pragma once

// Synthetic soft-matching workload: random passages over a fixed vocabulary with
// short answers that partially overlap them.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace qafuse {

struct SoftMatchCase {
  std::vector<std::string> passage;
  std::vector<std::string> answer;
};

struct SoftMatchWorkload {
  std::size_t passages = 16741;
  std::size_t passage_length = 100;
  std::size_t answer_length = 3;
  std::size_t vocabulary = 400;
  std::uint64_t seed = 0;
};

/// Each answer copies a contiguous run of 1 to answer_length - 1 passage tokens
/// (or nothing, for a few cases) and fills the rest with out-of-passage words.
std::vector<SoftMatchCase> make_softmatch_cases(const SoftMatchWorkload& workload);

struct SoftMatchTiming {
  std::size_t cases = 0;
  std::size_t mismatches = 0;
  double brute_force_ms_per_passage = 0.0;
  double pruned_ms_per_passage = 0.0;
  std::size_t brute_force_spans = 0;
  std::size_t pruned_spans = 0;

  double speedup() const {
    return pruned_ms_per_passage > 0 ? brute_force_ms_per_passage / pruned_ms_per_passage : 0.0;
  }
};

/// Times both matchers over every case and counts result disagreements.
SoftMatchTiming time_softmatch(const std::vector<SoftMatchCase>& cases);

}  // namespace qafuse
