#pragma once

// Retrieval and passage reranking.

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "qafuse/corpus.hpp"
#include "qafuse/random.hpp"
#include "qafuse/types.hpp"

namespace qafuse {

/// Scores a (question, passage) pair. `rank` is the passage's 1-based position
/// in the list being rescored, or 0 when there is no such list.
class ScoreProvider {
 public:
  virtual ~ScoreProvider() = default;
  virtual double score(const Question& question, const Passage& passage,
                       std::size_t rank = 0) const = 0;
};

/// A provider whose score is differentiable in a flat parameter vector.
class TrainableScoreProvider : public ScoreProvider {
 public:
  virtual std::span<const double> parameters() const = 0;
  virtual void set_parameters(std::span<const double> params) = 0;
  /// d score / d parameters.
  virtual std::vector<double> gradient(const Question& question, const Passage& passage,
                                       std::size_t rank = 0) const = 0;
};

/// TF-IDF weighted cosine similarity over title and context word tokens.
class TfidfRetriever : public ScoreProvider {
 public:
  explicit TfidfRetriever(const Corpus& corpus);

  double score(const Question& question, const Passage& passage,
               std::size_t rank = 0) const override;

  /// Smoothed inverse document frequency: ln((1 + N) / (1 + df)) + 1.
  double idf(std::string_view token) const;

  /// Top-k passages of the corpus via the inverted index.
  ScoredList retrieve(const Question& question, std::size_t k) const;

  const Corpus& corpus() const { return corpus_; }

 private:
  using SparseVec = std::vector<std::pair<std::uint32_t, double>>;  // sorted by term id
  SparseVec vectorize_known(const std::vector<std::string>& tokens) const;

  const Corpus& corpus_;
  std::unordered_map<std::string, std::uint32_t> term_ids_;
  std::vector<double> idf_;
  std::vector<SparseVec> doc_vectors_;
  std::vector<std::vector<std::pair<std::uint32_t, double>>> postings_;  // term -> (doc, weight)
};

/// Top-k passages of `corpus` under an arbitrary provider, by exhaustive scoring.
ScoredList retrieve(const Question& question, const Corpus& corpus,
                    const ScoreProvider& provider, std::size_t k);

/// Per-candidate features for a linear reranker.
class RerankFeatures {
 public:
  virtual ~RerankFeatures() = default;
  virtual std::vector<std::string> names() const = 0;
  virtual std::vector<double> compute(const Question& question, const Passage& passage,
                                      std::size_t rank) const = 0;
};

/// Question-token overlap count, IDF-weighted overlap fraction, reciprocal
/// retrieval rank and question/passage length ratio.
class LexicalRerankFeatures : public RerankFeatures {
 public:
  explicit LexicalRerankFeatures(const TfidfRetriever& idf_source) : idf_(idf_source) {}
  std::vector<std::string> names() const override;
  std::vector<double> compute(const Question& question, const Passage& passage,
                              std::size_t rank) const override;

 private:
  const TfidfRetriever& idf_;
};

/// score = w . features(question, passage, rank).
class LinearReranker : public TrainableScoreProvider {
 public:
  LinearReranker(std::shared_ptr<const RerankFeatures> features, std::vector<double> weights);

  double score(const Question& question, const Passage& passage,
               std::size_t rank = 0) const override;
  std::span<const double> parameters() const override { return weights_; }
  void set_parameters(std::span<const double> params) override;
  std::vector<double> gradient(const Question& question, const Passage& passage,
                               std::size_t rank = 0) const override;

  std::vector<std::string> feature_names() const { return features_->names(); }

  /// Weights for LexicalRerankFeatures used when no trained model is supplied.
  static std::vector<double> default_lexical_weights();

 private:
  std::shared_ptr<const RerankFeatures> features_;
  std::vector<double> weights_;
};

/// Rescores the first `depth` retrieved passages; scores are raw rerank scores.
ScoredList rerank(const Question& question, const ScoredList& retrieved, const Corpus& corpus,
                  const ScoreProvider& reranker, std::size_t depth);

/// P_rr(p | q, C_r): softmax of rerank scores over exactly the candidate set.
LogDist rerank_probs(const ScoredList& candidates);

struct TrainingInstance {
  std::string question_id;
  std::string positive;
  std::vector<std::string> negatives;
};

struct RerankHyper {
  std::size_t instance_size = 24;    // one positive plus n - 1 negatives
  std::size_t negative_pool = 400;   // negatives are drawn from this retrieval depth
  std::size_t rescore_depth = 200;   // inference-time rescoring depth
  double learning_rate = 0.1;
  std::size_t epochs = 100;
  std::uint64_t seed = 0;

  void validate() const;
};

/// One positive and n - 1 uniformly sampled answer-free negatives, or nullopt
/// when the pool holds too few negatives.
std::optional<TrainingInstance> build_training_instance(const Question& question,
                                                        const ScoredList& retrieved,
                                                        const Corpus& corpus,
                                                        const RerankHyper& hyper, Rng& rng);

/// -log softmax(scores)[positive].
double rerank_ce_loss(std::span<const std::pair<std::string, double>> scores,
                      std::string_view positive);

/// A training instance resolved against the corpus; passages[0] is the positive.
struct RerankGroup {
  const Question* question = nullptr;
  std::vector<const Passage*> passages;
  std::vector<std::size_t> ranks;  // 1-based retrieval rank, 0 if not retrieved
};

RerankGroup resolve_instance(const TrainingInstance& instance, const Question& question,
                             const ScoredList& retrieved, const Corpus& corpus);

/// Mean cross-entropy over groups; fills `grad` (d loss / d params) when given.
double rerank_batch_loss(const TrainableScoreProvider& provider,
                         std::span<const RerankGroup> groups, std::vector<double>* grad);

struct TrainTrace {
  std::vector<double> parameters;
  std::vector<double> loss_trace;  // mean loss before each epoch's update, plus the final loss
};

/// Full-batch gradient descent on the mean reranking cross-entropy.
TrainTrace train_reranker(std::span<const RerankGroup> dataset, TrainableScoreProvider& provider,
                          const RerankHyper& hyper);

}  // namespace qafuse
