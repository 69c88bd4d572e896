#pragma once

// Distant-supervision answer matching: exact token matches, F1 soft matching
// with length-limit pruning, and the dataset filters built on top of them.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qafuse/corpus.hpp"
#include "qafuse/text.hpp"
#include "qafuse/types.hpp"

namespace qafuse {

using Tokens = std::span<const std::string>;

/// Inclusive token range.
struct TokenSpan {
  std::size_t start = 0;
  std::size_t end = 0;

  std::size_t length() const { return end - start + 1; }
  bool operator==(const TokenSpan&) const = default;
};

struct MatchSpan {
  std::size_t start = 0;
  std::size_t end = 0;  // inclusive
  double f1 = 0.0;

  std::size_t length() const { return end - start + 1; }
  bool operator==(const MatchSpan&) const = default;
};

/// Instrumentation for the matchers.
struct MatchStats {
  std::size_t spans_scored = 0;
};

/// Every occurrence of `answer` as a contiguous sublist of `passage`, left to right.
std::vector<TokenSpan> exact_match_spans(Tokens passage, Tokens answer);

/// True when any non-empty answer occurs contiguously in `passage`.
bool contains_any(Tokens passage, std::span<const TokenSeq> answers);

/// Size of the multiset intersection of the two token bags.
std::size_t shared_tokens(Tokens t, Tokens a);

/// 2s / (|t| + |a|) with s the bag intersection size.
double f1_overlap(Tokens t, Tokens a);

/// |a| (|t| + |a| - s) / s: spans at least this long cannot beat a span with
/// length |t| and s shared tokens.
double length_limit(std::size_t t_len, std::size_t a_len, std::size_t shared);

/// Best soft match found by growing span sizes until the length limit of the
/// current best is reached. Equal F1 resolves to the shortest, then leftmost span.
std::optional<MatchSpan> soft_match_best(Tokens passage, Tokens answer,
                                         MatchStats* stats = nullptr);

/// Exhaustive O(L^2) search with the same result contract as soft_match_best.
std::optional<MatchSpan> brute_force_best(Tokens passage, Tokens answer,
                                          MatchStats* stats = nullptr);

struct AnswerAnnotation {
  std::string passage_id;
  std::size_t answer_index = 0;
  std::size_t start = 0;  // context token index
  std::size_t end = 0;    // inclusive
  double f1 = 1.0;
  bool soft = false;

  bool operator==(const AnswerAnnotation&) const = default;
};

/// Span annotations for one question over the reader's input passages.
///
/// Exact matches of every gold answer are collected in each passage. In the
/// golden passage an answer without an exact match falls back to its best
/// soft match. Answers matched nowhere are dropped.
std::vector<AnswerAnnotation> annotate_example(const Question& question, const Corpus& corpus,
                                               std::span<const std::string> passage_ids,
                                               const std::optional<std::string>& golden_passage);

struct FilterReport {
  std::size_t kept = 0;
  std::size_t dropped_no_positive = 0;
  std::size_t dropped_no_annotation = 0;
};

struct FilterResult {
  std::vector<Question> kept;
  FilterReport report;
};

/// Keeps questions with a golden passage or an exact answer match in the top-K run.
FilterResult filter_for_reranker(std::span<const Question> questions, const RunSet& runs,
                                 const Corpus& corpus, std::size_t k);

/// Keeps questions with an exact answer match in the top-1 passage or the golden passage.
FilterResult filter_for_extractive(std::span<const Question> questions, const RunSet& runs,
                                   const Corpus& corpus);

/// Tokenized gold answers, skipping answers without tokens.
std::vector<TokenSeq> tokenize_answers(std::span<const std::string> answers);

}  // namespace qafuse
