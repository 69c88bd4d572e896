#pragma once

// Desk-scale extractive reader: a linear model over lexical token features that
// emits the start, end, joint and passage score tensors consumed by extract.hpp.
//
// The reader's token sequence for a passage is its title tokens followed by its
// context tokens; title positions are masked out of every span.

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "qafuse/corpus.hpp"
#include "qafuse/extract.hpp"
#include "qafuse/match.hpp"
#include "qafuse/rank.hpp"

namespace qafuse {

class DeskReader {
 public:
  static constexpr std::size_t kTokenFeatures = 6;
  static constexpr std::size_t kJointFeatures = 5;
  static constexpr std::size_t kPassageFeatures = 2;
  static constexpr std::size_t kParams = 2 * kTokenFeatures + kJointFeatures + kPassageFeatures;

  DeskReader(const TfidfRetriever& idf_source, std::vector<double> params,
             std::size_t max_span_len = 30);

  static std::vector<std::string> param_names();
  static std::vector<double> default_params();

  const std::vector<double>& params() const { return params_; }
  void set_params(std::vector<double> params);
  std::size_t max_span_len() const { return max_span_len_; }

  ReaderScores score(const Question& question, std::size_t passage_index) const;
  std::vector<ReaderScores> score_batch(const Question& question,
                                        std::span<const std::string> passage_ids) const;

  /// Chain rule from score gradients to parameter gradients, accumulated into `grad`.
  void accumulate_gradient(const Question& question, std::span<const std::string> passage_ids,
                           std::span<const ReaderScoreGrad> score_grad,
                           std::vector<double>& grad) const;

 private:
  struct Features {
    std::vector<std::array<double, kTokenFeatures>> token;
    std::vector<double> question_prefix;  // prefix counts of question tokens
    std::vector<double> symbol_prefix;    // prefix counts of symbol tokens
    std::array<double, kPassageFeatures> passage{};
    std::size_t title_len = 0;
  };
  Features features(const Question& question, std::size_t passage_index) const;
  std::array<double, kJointFeatures> joint_features(const Features& f, std::size_t s,
                                                    std::size_t e) const;

  const TfidfRetriever& idf_;
  std::vector<double> params_;
  std::size_t max_span_len_;
};

/// Number of title tokens preceding the context in the reader sequence.
std::size_t reader_title_length(const Corpus& corpus, std::size_t passage_index);

/// Context substring for reader positions [start, end].
std::string reader_span_surface(const Corpus& corpus, std::string_view passage_id,
                                std::size_t start, std::size_t end);

/// Converts context-token annotations into reader-sequence span annotations.
std::vector<SpanAnnotation> to_reader_annotations(const Corpus& corpus,
                                                  std::span<const AnswerAnnotation> annotations,
                                                  std::size_t max_span_len);

struct ReaderTrainingItem {
  const Question* question = nullptr;
  std::vector<std::string> passage_ids;
  std::vector<SpanAnnotation> annotations;
};

struct ReaderTrainTrace {
  std::vector<double> params;
  std::vector<double> loss_trace;
};

/// Full-batch gradient descent of the desk reader on the mean independent loss.
ReaderTrainTrace train_desk_reader(DeskReader& reader, std::span<const ReaderTrainingItem> items,
                                   double learning_rate, std::size_t epochs,
                                   Factorization factorization = {});

}  // namespace qafuse
