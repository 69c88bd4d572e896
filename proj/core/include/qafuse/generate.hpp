#pragma once

// Generative reader boundary: answer-conditional log-probabilities and a
// greedy free-form answer from a pluggable scorer.

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "qafuse/corpus.hpp"
#include "qafuse/extract.hpp"
#include "qafuse/types.hpp"

namespace qafuse {

class GenerativeScorer {
 public:
  virtual ~GenerativeScorer() = default;

  /// log P_g(answer | question, passages), always <= 0.
  virtual double answer_log_prob(const Question& question, std::span<const Passage> passages,
                                 const std::string& answer) const = 0;

  /// Batched form; implementations may share per-question state across answers.
  virtual std::vector<double> answer_log_probs(const Question& question,
                                               std::span<const Passage> passages,
                                               std::span<const std::string> answers) const;

  /// Deterministic highest-probability answer and its log-probability.
  virtual std::pair<std::string, double> generate(const Question& question,
                                                  std::span<const Passage> passages) const = 0;
};

/// Scores looked up in explicit per-question tables (fixtures, or outputs of an
/// external model ingested from file).
class TableScorer : public GenerativeScorer {
 public:
  struct Entry {
    std::string greedy;
    double greedy_log_prob = 0.0;
    std::map<std::string, double> answers;
  };

  TableScorer() = default;
  /// One table shared by every question.
  explicit TableScorer(Entry shared);

  void add(const std::string& question_id, Entry entry);

  double answer_log_prob(const Question& question, std::span<const Passage> passages,
                         const std::string& answer) const override;
  std::pair<std::string, double> generate(const Question& question,
                                          std::span<const Passage> passages) const override;

 private:
  const Entry& entry_for(const Question& question) const;

  std::map<std::string, Entry> entries_;
  std::optional<Entry> shared_;
};

/// Add-one smoothed unigram model of the concatenated input passages (title and
/// context tokens), with one extra slot for unseen tokens. An answer's log-prob
/// is the sum over its tokens; the greedy answer is the most probable single token.
class UnigramScorer : public GenerativeScorer {
 public:
  explicit UnigramScorer(bool length_normalize = false) : length_normalize_(length_normalize) {}

  double answer_log_prob(const Question& question, std::span<const Passage> passages,
                         const std::string& answer) const override;
  std::vector<double> answer_log_probs(const Question& question, std::span<const Passage> passages,
                                       std::span<const std::string> answers) const override;
  std::pair<std::string, double> generate(const Question& question,
                                          std::span<const Passage> passages) const override;

  struct Model {
    std::map<std::string, std::size_t> counts;
    double total = 0.0;       // token count
    double denominator = 0.0; // total + |vocabulary| + 1
    double log_prob(const std::string& token) const;
  };
  static Model fit(std::span<const Passage> passages);

 private:
  double score(const Model& model, const std::string& answer) const;
  bool length_normalize_;
};

struct GenerativeOutput {
  std::string question_id;
  std::string greedy_answer;
  double greedy_log_prob = 0.0;
  std::map<std::string, double> reranked;
};

/// {log P_g(a) : a in spans}, keyed by surface string (duplicates scored once).
std::map<std::string, double> rerank_answers(const GenerativeScorer& scorer, const Question& question,
                                             std::span<const Passage> passages,
                                             std::span<const AnswerSpan> spans);

std::pair<std::string, double> greedy_answer(const GenerativeScorer& scorer, const Question& question,
                                             std::span<const Passage> passages);

/// The first V2 reranked passages, in rank order.
std::vector<Passage> assemble_reader_input(const ScoredList& reranked, const Corpus& corpus,
                                           std::size_t v2);

GenerativeOutput run_generative(const GenerativeScorer& scorer, const Question& question,
                                std::span<const Passage> passages, std::span<const AnswerSpan> spans);

}  // namespace qafuse
