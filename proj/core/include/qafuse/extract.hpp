#pragma once

// Extractive reader mathematics over externally produced score tensors.
//
// Every distribution is normalized across the whole batch of passages: start
// and end positions, (start, end) pairs and passages are each pooled before
// the softmax. Positions are indices into the reader's token sequence.

#include <compare>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "qafuse/prob.hpp"
#include "qafuse/types.hpp"

namespace qafuse {

/// Score tensors for one passage. The joint scores and the span mask are bands:
/// entry (s, e) with 0 <= e - s < max_span_len lives at s * max_span_len + (e - s).
struct ReaderScores {
  std::string passage_id;
  std::size_t length = 0;
  std::size_t max_span_len = 30;
  std::vector<double> s_start;
  std::vector<double> s_end;
  std::vector<double> s_joint;
  double s_passage = 0.0;
  std::vector<std::uint8_t> span_mask;

  /// Zero scores with every in-band span valid.
  static ReaderScores uniform(std::string passage_id, std::size_t length, std::size_t max_span_len);

  std::size_t band_index(std::size_t s, std::size_t e) const { return s * max_span_len + (e - s); }
  bool in_band(std::size_t s, std::size_t e) const {
    return s <= e && e < length && e - s < max_span_len;
  }
  bool valid(std::size_t s, std::size_t e) const {
    return in_band(s, e) && span_mask[band_index(s, e)] != 0;
  }
  double joint(std::size_t s, std::size_t e) const { return s_joint[band_index(s, e)]; }

  /// Throws when tensor sizes disagree with length and max_span_len, or on non-finite scores.
  void validate() const;
};

enum class Factor : unsigned {
  kIndependent = 1,  // P_start(s) P_end(e)
  kJoint = 2,        // P_joint(s, e)
  kPassage = 4,      // P_passage(p)
};

/// Non-empty subset of {I, J, C}.
class Factorization {
 public:
  /// All three factors.
  Factorization() = default;
  explicit Factorization(unsigned flags);

  static Factorization full() { return Factorization(); }
  /// Parses letters such as "IJC", "J,C" or "I+C".
  static Factorization parse(std::string_view text);
  /// The seven non-empty subsets.
  static std::vector<Factorization> all();

  bool has(Factor f) const { return (flags_ & static_cast<unsigned>(f)) != 0; }
  unsigned flags() const { return flags_; }
  std::string to_string() const;

  bool operator==(const Factorization&) const = default;

 private:
  unsigned flags_ = 7;
};

struct TokenKey {
  std::size_t passage = 0;  // batch index
  std::size_t position = 0;
  auto operator<=>(const TokenKey&) const = default;
};

struct SpanKey {
  std::size_t passage = 0;
  std::size_t start = 0;
  std::size_t end = 0;
  auto operator<=>(const SpanKey&) const = default;
};

/// The four batch-pooled distributions, stored densely per passage.
/// Positions outside a distribution's support hold -infinity.
class ReaderDists {
 public:
  std::size_t passages() const { return log_passage_.size(); }
  double log_start(std::size_t p, std::size_t pos) const { return log_start_[p][pos]; }
  double log_end(std::size_t p, std::size_t pos) const { return log_end_[p][pos]; }
  double log_joint(std::size_t p, std::size_t band) const { return log_joint_[p][band]; }
  double log_passage(std::size_t p) const { return log_passage_[p]; }

  BasicLogDist<TokenKey> start_dist() const;
  BasicLogDist<TokenKey> end_dist() const;
  BasicLogDist<SpanKey> joint_dist(std::span<const ReaderScores> batch) const;
  BasicLogDist<std::size_t> passage_dist() const;

 private:
  friend ReaderDists normalize_reader_scores(std::span<const ReaderScores> batch);
  std::vector<std::vector<double>> log_start_, log_end_, log_joint_;
  std::vector<double> log_passage_;
};

/// Pools and normalizes the batch. Start (end) positions are those that begin
/// (finish) at least one valid span; joint entries are the valid spans.
ReaderDists normalize_reader_scores(std::span<const ReaderScores> batch);

struct AnswerSpan {
  std::string passage_id;
  std::size_t start = 0;
  std::size_t end = 0;  // inclusive
  std::string surface;
  double log_p_start = 0.0;
  double log_p_end = 0.0;
  double log_p_joint = 0.0;
  double log_p_passage = 0.0;
  double log_p_e = 0.0;  // sum of the active factors
};

/// Log of the (unnormalized) product of the active factors for one span.
double span_log_prob(const ReaderDists& dists, std::size_t passage, std::size_t start,
                     std::size_t end, std::size_t band, Factorization factorization);

/// Top-M valid spans, ordered by (log_p_e desc, passage_id, start, end). Surfaces are left empty.
std::vector<AnswerSpan> decode_top_m(std::span<const ReaderScores> batch, const ReaderDists& dists,
                                     std::size_t m, Factorization factorization = {});
std::vector<AnswerSpan> decode_top_m(std::span<const ReaderScores> batch, std::size_t m,
                                     Factorization factorization = {});

struct SpanAnnotation {
  std::string passage_id;
  std::size_t start = 0;
  std::size_t end = 0;  // inclusive
};

/// Sum of -log of the annotated mass in each active distribution (start and end
/// for I, joint for J, passages holding an annotation for C).
double loss_independent(std::span<const ReaderScores> batch,
                        std::span<const SpanAnnotation> annotations,
                        Factorization factorization = {});

/// -log sum over annotated spans of the active product.
double loss_joint_marginalized(std::span<const ReaderScores> batch,
                               std::span<const SpanAnnotation> annotations,
                               Factorization factorization = {});

/// Start plus end terms of the independent loss (first) and the same quantity
/// written as one sum over every annotated start x annotated end pair (second).
std::pair<double, double> verify_inter_intra_identity(std::span<const ReaderScores> batch,
                                                      std::span<const SpanAnnotation> annotations);

/// d loss_independent / d scores, laid out like the batch's tensors.
struct ReaderScoreGrad {
  std::vector<double> d_start, d_end, d_joint;
  double d_passage = 0.0;
};
std::vector<ReaderScoreGrad> loss_independent_grad(std::span<const ReaderScores> batch,
                                                   std::span<const SpanAnnotation> annotations,
                                                   Factorization factorization = {});

/// Passages ordered by raw s_passage.
ScoredList reader_passage_ordering(std::span<const ReaderScores> batch,
                                   const std::string& question_id = {});

}  // namespace qafuse
