#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "qafuse/text.hpp"
#include "qafuse/types.hpp"

namespace qafuse {

/// Immutable passage collection with tokenized titles and contexts.
class Corpus {
 public:
  Corpus() = default;
  /// Throws on duplicate ids or empty contexts.
  explicit Corpus(std::vector<Passage> passages);

  std::size_t size() const { return passages_.size(); }
  bool empty() const { return passages_.empty(); }
  const Passage& at(std::size_t i) const { return passages_.at(i); }
  const std::vector<Passage>& passages() const { return passages_; }

  std::optional<std::size_t> index_of(std::string_view id) const;
  /// Index of `id`, throwing an Error naming the passage when unknown.
  std::size_t require(std::string_view id) const;

  const TokenSeq& context_tokens(std::size_t i) const { return context_tokens_.at(i); }
  const TokenSeq& title_tokens(std::size_t i) const { return title_tokens_.at(i); }

 private:
  std::vector<Passage> passages_;
  std::vector<TokenSeq> context_tokens_;
  std::vector<TokenSeq> title_tokens_;
  std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace qafuse
