#include "qafuse/types.hpp"

#include <algorithm>
#include <cmath>

namespace qafuse {

ScoredList::ScoredList(std::string question_id, std::vector<ScoredEntry> entries)
    : question_id_(std::move(question_id)), entries_(std::move(entries)) {
  for (const auto& e : entries_)
    if (!std::isfinite(e.score))
      throw Error("non-finite score for passage " + e.passage_id + " (question " + question_id_ + ")");
  std::sort(entries_.begin(), entries_.end(), [](const ScoredEntry& a, const ScoredEntry& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.passage_id < b.passage_id;
  });
  std::vector<const std::string*> ids;
  ids.reserve(entries_.size());
  for (const auto& e : entries_) ids.push_back(&e.passage_id);
  std::sort(ids.begin(), ids.end(), [](const auto* a, const auto* b) { return *a < *b; });
  for (std::size_t i = 1; i < ids.size(); ++i)
    if (*ids[i] == *ids[i - 1])
      throw Error("duplicate passage " + *ids[i] + " in list for question " + question_id_);
}

ScoredList ScoredList::prefix(std::size_t k) const {
  ScoredList out;
  out.question_id_ = question_id_;
  out.entries_.assign(entries_.begin(),
                      entries_.begin() + static_cast<std::ptrdiff_t>(std::min(k, entries_.size())));
  return out;
}

LogDist ScoredList::log_probs() const {
  std::vector<std::pair<std::string, double>> scores;
  scores.reserve(entries_.size());
  for (const auto& e : entries_) scores.emplace_back(e.passage_id, e.score);
  return softmax_over_set(std::move(scores));
}

}  // namespace qafuse
