#pragma once

// Log-domain probability utilities shared by every pipeline stage.
//
// Ordering convention used everywhere: score descending, key ascending.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "qafuse/error.hpp"

namespace qafuse {

/// log(sum(exp(v))) shifted by the maximum. Throws on empty or non-finite input.
double log_sum_exp(std::span<const double> values);

/// Numerically stable log(1 + exp(x)).
double softplus(double x);

double sigmoid(double x);

/// A normalized distribution stored as log-probabilities, sorted by key.
template <class Key>
class BasicLogDist {
 public:
  using Item = std::pair<Key, double>;

  BasicLogDist() = default;

  /// Wraps already-normalized items; `items` must be sorted by key without duplicates.
  static BasicLogDist from_sorted(std::vector<Item> items) {
    BasicLogDist d;
    d.items_ = std::move(items);
    return d;
  }

  const std::vector<Item>& items() const { return items_; }
  std::size_t size() const { return items_.size(); }
  bool empty() const { return items_.empty(); }

  std::optional<double> log_prob(const Key& key) const {
    auto it = std::lower_bound(items_.begin(), items_.end(), key,
                               [](const Item& item, const Key& k) { return item.first < k; });
    if (it == items_.end() || key < it->first) return std::nullopt;
    return it->second;
  }

  double prob(const Key& key) const {
    auto lp = log_prob(key);
    return lp ? std::exp(*lp) : 0.0;
  }

  /// Sum of probabilities; 1 up to rounding for a well-formed distribution.
  double total_mass() const {
    double sum = 0.0;
    for (const auto& [key, lp] : items_) sum += std::exp(lp);
    return sum;
  }

  /// Highest-probability key, ties broken by smaller key.
  const Key& argmax() const {
    if (items_.empty()) throw Error("argmax of empty distribution");
    const Item* best = &items_.front();
    for (const auto& item : items_)
      if (item.second > best->second) best = &item;
    return best->first;
  }

 private:
  std::vector<Item> items_;
};

/// Softmax over an arbitrary finite set: log p(y) = f(y) - logsumexp_x f(x).
///
/// The result does not depend on input order: items are sorted by key before
/// the normalizer is summed.
template <class Key>
BasicLogDist<Key> softmax_over_set(std::vector<std::pair<Key, double>> scores) {
  if (scores.empty()) throw Error("empty domain");
  std::sort(scores.begin(), scores.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<double> values;
  values.reserve(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!std::isfinite(scores[i].second)) throw Error("non-finite score");
    if (i > 0 && !(scores[i - 1].first < scores[i].first)) throw Error("duplicate key in domain");
    values.push_back(scores[i].second);
  }
  const double norm = log_sum_exp(values);
  for (auto& item : scores) item.second -= norm;
  return BasicLogDist<Key>::from_sorted(std::move(scores));
}

/// Strict weak order for (key, score) pairs: score descending, then key ascending.
template <class Key>
bool ranks_before(const std::pair<Key, double>& a, const std::pair<Key, double>& b) {
  if (a.second != b.second) return a.second > b.second;
  return a.first < b.first;
}

/// The k best entries under `ranks_before`, sorted. Requires k >= 1.
template <class Key>
std::vector<std::pair<Key, double>> top_k(std::vector<std::pair<Key, double>> entries,
                                          std::size_t k) {
  if (k == 0) throw Error("top_k requires k >= 1");
  auto cmp = [](const auto& a, const auto& b) { return ranks_before(a, b); };
  if (k < entries.size()) {
    std::partial_sort(entries.begin(), entries.begin() + static_cast<std::ptrdiff_t>(k),
                      entries.end(), cmp);
    entries.resize(k);
  } else {
    std::sort(entries.begin(), entries.end(), cmp);
  }
  return entries;
}

}  // namespace qafuse
