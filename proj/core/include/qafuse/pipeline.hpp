#pragma once

// End-to-end question processing: retrieve, rerank, read extractively, rerank
// the candidate spans generatively and hand everything to fusion.

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "qafuse/corpus.hpp"
#include "qafuse/eval.hpp"
#include "qafuse/extract.hpp"
#include "qafuse/fuse.hpp"
#include "qafuse/generate.hpp"
#include "qafuse/rank.hpp"
#include "qafuse/reader.hpp"

namespace qafuse {

struct RunConfig {
  std::size_t K = 200;   // retrieval depth
  std::size_t n = 24;    // reranker instance size
  std::size_t V = 24;    // extractive reader passages
  std::size_t V2 = 25;   // generative reader passages
  std::size_t M = 25;    // fusion candidates
  std::size_t max_span_len = 30;
  std::size_t negative_pool = 400;
  std::uint64_t seed = 0;
  FusionMode mode = FusionMode::kNaive;
  FeatureConfig features;
  Factorization factorization;
  bool use_reranker = true;
  std::size_t jobs = 1;

  void validate() const;
};

class Pipeline {
 public:
  Pipeline(const Corpus& corpus, const TfidfRetriever& retriever, RunConfig config);

  const RunConfig& config() const { return config_; }

  void set_reranker_weights(std::vector<double> weights);
  void set_reader_params(std::vector<double> params);
  void set_generative(std::shared_ptr<const GenerativeScorer> scorer);

  const DeskReader& reader() const { return reader_; }
  const LinearReranker& reranker() const { return reranker_; }

  ScoredList retrieve(const Question& question) const;
  /// Reranked candidate list (the retrieved list itself when the reranker is off).
  ScoredList rerank(const Question& question, const ScoredList& retrieved) const;
  /// Top-M spans with surfaces over the first V passages of `ranked`.
  std::vector<AnswerSpan> read_extractive(const Question& question, const ScoredList& ranked) const;
  std::vector<AnswerSpan> read_extractive(const Question& question, const ScoredList& ranked,
                                          const DeskReader& reader) const;
  GenerativeOutput read_generative(const Question& question, const ScoredList& ranked,
                                   std::span<const AnswerSpan> spans) const;

  QuestionOutputs process(const Question& question) const;
  /// Outputs in input order, computed on up to config().jobs threads.
  std::vector<QuestionOutputs> process_all(std::span<const Question> questions) const;

  std::vector<Prediction> predict(std::span<const Question> questions,
                                  const AggregationModel* aggregation,
                                  const BinaryDecider* decider) const;

  /// Posterior averaging over desk readers that differ only in parameters.
  std::vector<Prediction> predict_ensemble(std::span<const Question> questions,
                                           std::span<const std::vector<double>> member_params) const;

 private:
  const Corpus& corpus_;
  const TfidfRetriever& retriever_;
  RunConfig config_;
  std::shared_ptr<const LexicalRerankFeatures> rerank_features_;
  LinearReranker reranker_;
  DeskReader reader_;
  std::shared_ptr<const GenerativeScorer> generative_;
};

/// Stable key of a span: passage id, tab, zero-padded start and end.
std::string span_key(const AnswerSpan& span);

/// Each member's distribution over the union of the members' top-M spans,
/// renormalized over that union with its own log_p_e.
std::vector<LogDist> ensemble_span_dists(std::span<const std::vector<ReaderScores>> members,
                                         std::size_t m, Factorization factorization);

}  // namespace qafuse
