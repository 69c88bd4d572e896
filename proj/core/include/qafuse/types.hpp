#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "qafuse/prob.hpp"

namespace qafuse {

struct Question {
  std::string id;
  std::string text;
  std::vector<std::string> gold_answers;
  /// Annotated evidence passage, when the dataset provides one.
  std::optional<std::string> golden_passage_id;
};

struct Passage {
  std::string id;
  std::string title;
  std::string context;
};

using LogDist = BasicLogDist<std::string>;

struct ScoredEntry {
  std::string passage_id;
  double score = 0.0;

  bool operator==(const ScoredEntry&) const = default;
};

/// A question's passages ordered by score descending, ties by passage id.
class ScoredList {
 public:
  ScoredList() = default;

  /// Sorts `entries`; throws on duplicate passage ids or non-finite scores.
  ScoredList(std::string question_id, std::vector<ScoredEntry> entries);

  const std::string& question_id() const { return question_id_; }
  const std::vector<ScoredEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const ScoredEntry& operator[](std::size_t i) const { return entries_[i]; }

  /// First `k` entries (or all of them).
  ScoredList prefix(std::size_t k) const;

  /// Softmax of the raw scores over exactly this set of passages.
  LogDist log_probs() const;

 private:
  std::string question_id_;
  std::vector<ScoredEntry> entries_;
};

/// Ranked lists keyed by question id.
using RunSet = std::map<std::string, ScoredList>;

}  // namespace qafuse
