#include "qafuse/corpus.hpp"

namespace qafuse {

Corpus::Corpus(std::vector<Passage> passages) : passages_(std::move(passages)) {
  context_tokens_.reserve(passages_.size());
  title_tokens_.reserve(passages_.size());
  for (std::size_t i = 0; i < passages_.size(); ++i) {
    const Passage& p = passages_[i];
    if (p.context.empty()) throw Error("passage " + p.id + " has empty context");
    if (!index_.emplace(p.id, i).second) throw Error("duplicate passage id " + p.id);
    context_tokens_.push_back(tokenize(p.context));
    title_tokens_.push_back(tokenize(p.title));
  }
}

std::optional<std::size_t> Corpus::index_of(std::string_view id) const {
  auto it = index_.find(std::string(id));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::size_t Corpus::require(std::string_view id) const {
  auto idx = index_of(id);
  if (!idx) throw Error("unknown passage id " + std::string(id));
  return *idx;
}

}  // namespace qafuse
