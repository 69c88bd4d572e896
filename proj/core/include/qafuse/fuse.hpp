#pragma once

// Component fusion: logistic-regression score aggregation over component
// log-probabilities, the extractive/abstractive binary decision, and the
// posterior-averaging ensemble baseline.

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "qafuse/eval.hpp"
#include "qafuse/extract.hpp"
#include "qafuse/generate.hpp"
#include "qafuse/types.hpp"

namespace qafuse {

/// Component log-probabilities of one candidate span.
struct FusionFeatures {
  double log_p_e = 0.0;   // extractive reader
  double log_p_g = 0.0;   // generative reader
  double log_p_r = 0.0;   // retriever, for the span's passage
  double log_p_rr = 0.0;  // reranker, for the span's passage
};

/// Which components enter the aggregation. Order of features is e, g, r, rr.
struct FeatureConfig {
  bool e = true;
  bool g = true;
  bool r = true;
  bool rr = true;

  /// Comma-separated subset of "e,g,r,rr".
  static FeatureConfig parse(std::string_view text);
  static FeatureConfig from_names(std::span<const std::string> names);

  void validate() const;
  std::vector<std::string> names() const;
  std::vector<double> select(const FusionFeatures& f) const;
  std::string to_string() const;
};

struct AggregationModel {
  std::vector<std::string> feature_names;
  std::vector<double> w;
  double b = 0.0;

  static AggregationModel zeros(const FeatureConfig& config);
  FeatureConfig config() const { return FeatureConfig::from_names(feature_names); }
  /// w . log x(a) + b over the active features.
  double score(const FusionFeatures& f) const;
  void validate() const;
};

struct FusionCandidate {
  AnswerSpan span;  // with surface
  FusionFeatures features;
  bool correct = false;
};

/// Everything fusion needs for one question.
struct QuestionOutputs {
  std::string question_id;
  std::vector<AnswerSpan> spans;  // top-M extractive spans with surfaces
  GenerativeOutput generative;
  LogDist retriever;  // P_r over the retrieved set
  LogDist reranker;   // P_rr over the reranked set
};

/// Feature vectors for every span of a question; features outside `config`
/// stay zero. Throws naming the missing component.
std::vector<FusionCandidate> fusion_candidates(const QuestionOutputs& outputs, const FeatureConfig& config);
std::vector<FusionCandidate> fusion_candidates(const QuestionOutputs& outputs);

struct FusionItem {
  std::string question_id;
  std::vector<FusionCandidate> candidates;
};

/// Questions with at least one EM-correct candidate; every correct candidate is marked.
std::vector<FusionItem> build_aggregation_dataset(std::span<const QuestionOutputs> outputs,
                                                  std::span<const Question> gold,
                                                  const FeatureConfig& config);
std::vector<FusionItem> build_aggregation_dataset(std::span<const QuestionOutputs> outputs,
                                                  std::span<const Question> gold);

/// -log of the softmax mass on the correct candidates.
double aggregation_loss(const AggregationModel& model, const FusionItem& item);

/// Mean aggregation loss; `grad` receives d/dw followed by d/db.
double aggregation_batch_loss(const AggregationModel& model, std::span<const FusionItem> items,
                              std::vector<double>* grad);

struct FuseHyper {
  double learning_rate = 0.05;
  std::size_t epochs = 2000;
};

struct AggregationTraining {
  AggregationModel model;
  std::vector<double> loss_trace;  // before each epoch, plus the final loss
};

/// Gradient descent from w = 0, b = 0.
AggregationTraining train_aggregation(std::span<const FusionItem> dataset, const FeatureConfig& config,
                                      const FuseHyper& hyper);

struct Selection {
  std::size_t index = 0;
  double s_agg = 0.0;
};

/// Highest aggregated score; ties go to the smaller (passage_id, start, end).
Selection aggregate_and_select(const AggregationModel& model, std::span<const FusionCandidate> candidates);

struct BdCase {
  std::string question_id;
  std::string extractive_answer;
  double s_agg = 0.0;
  std::string abstractive_answer;
  double s_g_star = 0.0;
};

struct BdItem {
  std::string question_id;
  double s_agg = 0.0;
  double s_g_star = 0.0;
  int target = 0;  // 1 iff the abstractive answer is the correct one
};

/// Cases where exactly one of the two predictions is EM-correct.
std::vector<BdItem> build_bd_dataset(std::span<const BdCase> cases, std::span<const Question> gold);

struct BinaryDecider {
  std::array<double, 2> w{};  // s_agg, s_g_star
  double b = 0.0;

  double logit(double s_agg, double s_g_star) const { return w[0] * s_agg + w[1] * s_g_star + b; }
};

/// Mean binary cross-entropy with logits; `grad` receives (w0, w1, b).
double bd_loss(const BinaryDecider& decider, std::span<const BdItem> items, std::vector<double>* grad);

struct BdTraining {
  BinaryDecider decider;
  std::vector<double> loss_trace;
};

BdTraining train_binary_decider(std::span<const BdItem> dataset, const FuseHyper& hyper);

/// Abstractive iff sigmoid(logit) > 0.5.
AnswerSource decide(const BinaryDecider& decider, double s_agg, double s_g_star);

/// Argmax of the mean linear-domain probability; ties go to the smaller key.
std::string posterior_average_ensemble(std::span<const LogDist> dists);

enum class FusionMode { kNaive, kAggr, kAggrBd };

std::string_view to_string(FusionMode mode);
FusionMode parse_fusion_mode(std::string_view text);

/// The final answer of one question under the chosen fusion mode.
Prediction run_fusion_pipeline(const QuestionOutputs& outputs, FusionMode mode,
                               const AggregationModel* aggregation, const BinaryDecider* decider);

}  // namespace qafuse
