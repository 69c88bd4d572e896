#pragma once

// Exact match and Accuracy@K metrics.

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "qafuse/corpus.hpp"
#include "qafuse/text.hpp"
#include "qafuse/types.hpp"

namespace qafuse {

enum class AnswerSource { kExtractive, kAbstractive };

std::string_view to_string(AnswerSource source);
AnswerSource parse_answer_source(std::string_view text);

struct Prediction {
  std::string question_id;
  std::string answer;
  AnswerSource source = AnswerSource::kExtractive;
  double score = 0.0;
};

enum class PunctuationMode {
  kUnicode,  // every character in a P* category
  kAscii,    // only the 32 ASCII punctuation characters
};

/// Lowercase, drop punctuation, drop standalone "a"/"an"/"the", collapse whitespace.
std::string normalize_answer(std::string_view text, PunctuationMode mode = PunctuationMode::kUnicode);

bool exact_match(std::string_view prediction, std::span<const std::string> gold_answers,
                 PunctuationMode mode = PunctuationMode::kUnicode);

struct EmResult {
  double em = 0.0;
  std::size_t n = 0;                    // questions scored
  std::size_t correct = 0;
  std::size_t skipped_no_gold = 0;      // excluded, not scored as wrong
  std::size_t missing_predictions = 0;  // scored as wrong
};

/// Mean EM over the questions that have gold answers.
EmResult em_score(std::span<const Prediction> predictions, std::span<const Question> questions,
                  PunctuationMode mode = PunctuationMode::kUnicode);

/// True iff some gold answer's token sequence occurs contiguously in the passage context.
bool has_answer(const TokenSeq& passage, std::span<const std::string> gold_answers);

/// Fraction of questions (with gold answers) whose top-k passages contain an answer, per k.
std::map<std::size_t, double> accuracy_at_k(const RunSet& runs, std::span<const Question> questions,
                                            const Corpus& corpus, std::span<const std::size_t> ks);

enum class OverlapSubset { kQuestionOverlap, kAnswerOverlapOnly, kNoOverlap };

std::string_view to_string(OverlapSubset subset);
OverlapSubset parse_overlap_subset(std::string_view text);

struct OverlapReport {
  std::map<OverlapSubset, EmResult> subsets;
  EmResult total;
};

OverlapReport overlap_report(std::span<const Prediction> predictions, std::span<const Question> questions,
                             const std::map<std::string, OverlapSubset>& labels,
                             PunctuationMode mode = PunctuationMode::kUnicode);

/// One line of a metrics report.
struct ReportRow {
  std::string metric;
  std::string key;  // k, subset name, or empty
  double value = 0.0;
  std::size_t n = 0;
};

}  // namespace qafuse
