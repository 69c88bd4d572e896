#include "qafuse/rank.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_set>

#include "qafuse/match.hpp"

namespace qafuse {
namespace {

std::vector<std::string> passage_tokens(const Corpus& corpus, std::size_t i) {
  std::vector<std::string> toks = corpus.title_tokens(i).tokens;
  const auto& ctx = corpus.context_tokens(i).tokens;
  toks.insert(toks.end(), ctx.begin(), ctx.end());
  return toks;
}

std::vector<std::string> passage_tokens(const Passage& p) {
  std::vector<std::string> toks = tokenize(p.title).tokens;
  auto ctx = tokenize(p.context).tokens;
  toks.insert(toks.end(), ctx.begin(), ctx.end());
  return toks;
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error("dimension mismatch");
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

}  // namespace

TfidfRetriever::TfidfRetriever(const Corpus& corpus) : corpus_(corpus) {
  if (corpus.empty()) throw Error("empty corpus");
  std::vector<std::vector<std::string>> docs;
  docs.reserve(corpus.size());
  std::vector<std::size_t> df;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    docs.push_back(passage_tokens(corpus, i));
    std::unordered_set<std::string_view> distinct(docs.back().begin(), docs.back().end());
    std::vector<std::string_view> sorted(distinct.begin(), distinct.end());
    std::sort(sorted.begin(), sorted.end());  // fixed term-id assignment
    for (auto tok : sorted) {
      auto [it, inserted] = term_ids_.emplace(std::string(tok), static_cast<std::uint32_t>(df.size()));
      if (inserted) df.push_back(0);
      ++df[it->second];
    }
  }
  const double n = static_cast<double>(corpus.size());
  idf_.resize(df.size());
  for (std::size_t t = 0; t < df.size(); ++t)
    idf_[t] = std::log((1.0 + n) / (1.0 + static_cast<double>(df[t]))) + 1.0;
  postings_.resize(df.size());
  doc_vectors_.reserve(docs.size());
  for (std::size_t i = 0; i < docs.size(); ++i) {
    doc_vectors_.push_back(vectorize_known(docs[i]));
    for (const auto& [term, w] : doc_vectors_.back())
      postings_[term].emplace_back(static_cast<std::uint32_t>(i), w);
  }
}

double TfidfRetriever::idf(std::string_view token) const {
  auto it = term_ids_.find(std::string(token));
  if (it != term_ids_.end()) return idf_[it->second];
  return std::log(1.0 + static_cast<double>(corpus_.size())) + 1.0;
}

// Sublinear tf times idf, l2-normalized; terms unseen in the corpus are dropped
// since they cannot contribute to a dot product with any document.
TfidfRetriever::SparseVec TfidfRetriever::vectorize_known(const std::vector<std::string>& tokens) const {
  std::unordered_map<std::uint32_t, double> tf;
  for (const auto& tok : tokens) {
    auto it = term_ids_.find(tok);
    if (it != term_ids_.end()) tf[it->second] += 1.0;
  }
  SparseVec vec(tf.begin(), tf.end());
  std::sort(vec.begin(), vec.end());
  double norm = 0.0;
  for (auto& [term, w] : vec) {
    w = (1.0 + std::log(w)) * idf_[term];
    norm += w * w;
  }
  norm = std::sqrt(norm);
  if (norm > 0)
    for (auto& [term, w] : vec) w /= norm;
  return vec;
}

double TfidfRetriever::score(const Question& question, const Passage& passage, std::size_t) const {
  const SparseVec q = vectorize_known(tokenize(question.text).tokens);
  SparseVec d;
  auto idx = corpus_.index_of(passage.id);
  if (idx && corpus_.at(*idx).context == passage.context && corpus_.at(*idx).title == passage.title)
    d = doc_vectors_[*idx];
  else
    d = vectorize_known(passage_tokens(passage));
  double s = 0.0;
  std::size_t i = 0, j = 0;
  while (i < q.size() && j < d.size()) {
    if (q[i].first < d[j].first) {
      ++i;
    } else if (d[j].first < q[i].first) {
      ++j;
    } else {
      s += q[i++].second * d[j++].second;
    }
  }
  return s;
}

ScoredList TfidfRetriever::retrieve(const Question& question, std::size_t k) const {
  if (k == 0) throw Error("retrieve requires K >= 1");
  const SparseVec q = vectorize_known(tokenize(question.text).tokens);
  std::vector<double> acc(corpus_.size(), 0.0);
  for (const auto& [term, qw] : q)
    for (const auto& [doc, dw] : postings_[term]) acc[doc] += qw * dw;
  std::vector<std::pair<std::string, double>> scored;
  scored.reserve(acc.size());
  for (std::size_t i = 0; i < acc.size(); ++i) scored.emplace_back(corpus_.at(i).id, acc[i]);
  auto best = top_k(std::move(scored), k);
  std::vector<ScoredEntry> entries;
  entries.reserve(best.size());
  for (auto& [pid, s] : best) entries.push_back({std::move(pid), s});
  return ScoredList(question.id, std::move(entries));
}

ScoredList retrieve(const Question& question, const Corpus& corpus, const ScoreProvider& provider,
                    std::size_t k) {
  if (corpus.empty()) throw Error("empty corpus");
  if (k == 0) throw Error("retrieve requires K >= 1");
  std::vector<std::pair<std::string, double>> scored;
  scored.reserve(corpus.size());
  for (const auto& p : corpus.passages()) scored.emplace_back(p.id, provider.score(question, p));
  auto best = top_k(std::move(scored), k);
  std::vector<ScoredEntry> entries;
  for (auto& [pid, s] : best) entries.push_back({std::move(pid), s});
  return ScoredList(question.id, std::move(entries));
}

std::vector<std::string> LexicalRerankFeatures::names() const {
  return {"overlap_count", "idf_overlap", "reciprocal_rank", "length_ratio"};
}

std::vector<double> LexicalRerankFeatures::compute(const Question& question, const Passage& passage,
                                                   std::size_t rank) const {
  const auto q_tokens = tokenize(question.text).tokens;
  const auto p_tokens = passage_tokens(passage);
  std::unordered_set<std::string_view> in_passage(p_tokens.begin(), p_tokens.end());
  std::unordered_set<std::string_view> q_distinct(q_tokens.begin(), q_tokens.end());
  double overlap = 0.0, idf_hit = 0.0, idf_total = 0.0;
  for (auto tok : q_distinct) {
    const double w = idf_.idf(tok);
    idf_total += w;
    if (in_passage.count(tok)) {
      overlap += 1.0;
      idf_hit += w;
    }
  }
  return {
      overlap,
      idf_total > 0 ? idf_hit / idf_total : 0.0,
      rank > 0 ? 1.0 / static_cast<double>(rank) : 0.0,
      p_tokens.empty() ? 0.0 : static_cast<double>(q_tokens.size()) / static_cast<double>(p_tokens.size()),
  };
}

LinearReranker::LinearReranker(std::shared_ptr<const RerankFeatures> features,
                               std::vector<double> weights)
    : features_(std::move(features)), weights_(std::move(weights)) {
  if (!features_) throw Error("reranker requires a feature extractor");
  if (weights_.size() != features_->names().size())
    throw Error("reranker weight count does not match feature count");
}

double LinearReranker::score(const Question& question, const Passage& passage, std::size_t rank) const {
  return dot(weights_, features_->compute(question, passage, rank));
}

void LinearReranker::set_parameters(std::span<const double> params) {
  if (params.size() != weights_.size()) throw Error("parameter dimension mismatch");
  weights_.assign(params.begin(), params.end());
}

std::vector<double> LinearReranker::gradient(const Question& question, const Passage& passage,
                                             std::size_t rank) const {
  return features_->compute(question, passage, rank);
}

std::vector<double> LinearReranker::default_lexical_weights() { return {0.5, 4.0, 1.0, 0.0}; }

ScoredList rerank(const Question& question, const ScoredList& retrieved, const Corpus& corpus,
                  const ScoreProvider& reranker, std::size_t depth) {
  if (retrieved.empty()) throw Error("no candidates to rerank for question " + question.id);
  std::vector<ScoredEntry> entries;
  const std::size_t n = std::min(depth, retrieved.size());
  entries.reserve(n);
  for (std::size_t r = 0; r < n; ++r) {
    const Passage& p = corpus.at(corpus.require(retrieved[r].passage_id));
    entries.push_back({p.id, reranker.score(question, p, r + 1)});
  }
  return ScoredList(question.id, std::move(entries));
}

LogDist rerank_probs(const ScoredList& candidates) {
  if (candidates.empty()) throw Error("empty candidate set");
  return candidates.log_probs();
}

void RerankHyper::validate() const {
  if (instance_size < 2) throw Error("reranker instance size must be >= 2");
  if (negative_pool < instance_size) throw Error("negative pool K must be >= instance size n");
  if (!std::isfinite(learning_rate) || learning_rate < 0) throw Error("invalid learning rate");
}

std::optional<TrainingInstance> build_training_instance(const Question& question,
                                                        const ScoredList& retrieved,
                                                        const Corpus& corpus,
                                                        const RerankHyper& hyper, Rng& rng) {
  hyper.validate();
  const auto answers = tokenize_answers(question.gold_answers);
  auto has_answer = [&](const std::string& pid) {
    return contains_any(corpus.context_tokens(corpus.require(pid)).tokens, answers);
  };

  TrainingInstance inst;
  inst.question_id = question.id;
  if (question.golden_passage_id) {
    corpus.require(*question.golden_passage_id);
    inst.positive = *question.golden_passage_id;
  } else {
    auto it = std::find_if(retrieved.entries().begin(), retrieved.entries().end(),
                           [&](const ScoredEntry& e) { return has_answer(e.passage_id); });
    if (it == retrieved.entries().end())
      throw Error("question " + question.id + " has neither a golden passage nor a matching passage");
    inst.positive = it->passage_id;
  }

  std::vector<std::string> pool;
  const std::size_t depth = std::min(hyper.negative_pool, retrieved.size());
  for (std::size_t r = 0; r < depth; ++r) {
    const auto& pid = retrieved[r].passage_id;
    if (pid != inst.positive && !has_answer(pid)) pool.push_back(pid);
  }
  const std::size_t need = hyper.instance_size - 1;
  if (pool.size() < need) return std::nullopt;
  inst.negatives = rng.sample_without_replacement(std::move(pool), need);
  return inst;
}

double rerank_ce_loss(std::span<const std::pair<std::string, double>> scores,
                      std::string_view positive) {
  std::vector<double> values;
  values.reserve(scores.size());
  std::optional<double> pos;
  for (const auto& [pid, s] : scores) {
    values.push_back(s);
    if (pid == positive) pos = s;
  }
  if (!pos) throw Error("positive passage " + std::string(positive) + " missing from scores");
  return log_sum_exp(values) - *pos;
}

RerankGroup resolve_instance(const TrainingInstance& instance, const Question& question,
                             const ScoredList& retrieved, const Corpus& corpus) {
  std::unordered_map<std::string_view, std::size_t> rank_of;
  for (std::size_t r = 0; r < retrieved.size(); ++r) rank_of.emplace(retrieved[r].passage_id, r + 1);
  RerankGroup g;
  g.question = &question;
  auto add = [&](const std::string& pid) {
    g.passages.push_back(&corpus.at(corpus.require(pid)));
    auto it = rank_of.find(pid);
    g.ranks.push_back(it == rank_of.end() ? 0 : it->second);
  };
  add(instance.positive);
  for (const auto& n : instance.negatives) add(n);
  return g;
}

double rerank_batch_loss(const TrainableScoreProvider& provider, std::span<const RerankGroup> groups,
                         std::vector<double>* grad) {
  if (groups.empty()) throw Error("empty reranker training set");
  const std::size_t dim = provider.parameters().size();
  if (grad) grad->assign(dim, 0.0);
  double total = 0.0;
  for (const auto& g : groups) {
    std::vector<double> scores(g.passages.size());
    for (std::size_t i = 0; i < scores.size(); ++i)
      scores[i] = provider.score(*g.question, *g.passages[i], g.ranks[i]);
    const double norm = log_sum_exp(scores);
    total += norm - scores[0];
    if (!grad) continue;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      const double coef = std::exp(scores[i] - norm) - (i == 0 ? 1.0 : 0.0);
      const auto d = provider.gradient(*g.question, *g.passages[i], g.ranks[i]);
      for (std::size_t k = 0; k < dim; ++k) (*grad)[k] += coef * d[k];
    }
  }
  const double n = static_cast<double>(groups.size());
  if (grad)
    for (auto& v : *grad) v /= n;
  return total / n;
}

TrainTrace train_reranker(std::span<const RerankGroup> dataset, TrainableScoreProvider& provider,
                          const RerankHyper& hyper) {
  hyper.validate();
  TrainTrace trace;
  std::vector<double> params(provider.parameters().begin(), provider.parameters().end());
  std::vector<double> grad;
  for (std::size_t epoch = 0; epoch < hyper.epochs; ++epoch) {
    trace.loss_trace.push_back(rerank_batch_loss(provider, dataset, &grad));
    for (std::size_t k = 0; k < params.size(); ++k) {
      if (!std::isfinite(grad[k]))
        throw Error("non-finite reranker gradient at epoch " + std::to_string(epoch) +
                    ", parameter " + std::to_string(k));
      params[k] -= hyper.learning_rate * grad[k];
    }
    provider.set_parameters(params);
  }
  trace.loss_trace.push_back(rerank_batch_loss(provider, dataset, nullptr));
  trace.parameters = params;
  return trace;
}

}  // namespace qafuse
