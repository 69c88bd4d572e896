#include "qafuse/fuse.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <unordered_map>

namespace qafuse {
namespace {

bool span_key_less(const AnswerSpan& a, const AnswerSpan& b) {
  if (a.passage_id != b.passage_id) return a.passage_id < b.passage_id;
  if (a.start != b.start) return a.start < b.start;
  return a.end < b.end;
}

std::unordered_map<std::string_view, const Question*> index_questions(std::span<const Question> qs) {
  std::unordered_map<std::string_view, const Question*> index;
  for (const auto& q : qs) index.emplace(q.id, &q);
  return index;
}

void check_finite(const std::vector<double>& grad, const char* what, std::size_t epoch) {
  for (double g : grad)
    if (!std::isfinite(g))
      throw Error(std::string("non-finite ") + what + " gradient at epoch " + std::to_string(epoch));
}

}  // namespace

FeatureConfig FeatureConfig::parse(std::string_view text) {
  FeatureConfig c{false, false, false, false};
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t comma = std::min(text.find(',', pos), text.size());
    const std::string_view item = text.substr(pos, comma - pos);
    if (item == "e") c.e = true;
    else if (item == "g") c.g = true;
    else if (item == "r") c.r = true;
    else if (item == "rr") c.rr = true;
    else if (!item.empty()) throw Error("unknown fusion feature '" + std::string(item) + "'");
    pos = comma + 1;
  }
  c.validate();
  return c;
}

FeatureConfig FeatureConfig::from_names(std::span<const std::string> names) {
  FeatureConfig c{false, false, false, false};
  for (const auto& n : names) {
    if (n == "log_p_e") c.e = true;
    else if (n == "log_p_g") c.g = true;
    else if (n == "log_p_r") c.r = true;
    else if (n == "log_p_rr") c.rr = true;
    else throw Error("unknown fusion feature name '" + n + "'");
  }
  c.validate();
  if (c.names() != std::vector<std::string>(names.begin(), names.end()))
    throw Error("fusion feature names must be distinct and ordered log_p_e, log_p_g, log_p_r, log_p_rr");
  return c;
}

void FeatureConfig::validate() const {
  if (!e && !g) throw Error("fusion needs at least one reader feature (e or g)");
}

std::vector<std::string> FeatureConfig::names() const {
  std::vector<std::string> out;
  if (e) out.push_back("log_p_e");
  if (g) out.push_back("log_p_g");
  if (r) out.push_back("log_p_r");
  if (rr) out.push_back("log_p_rr");
  return out;
}

std::vector<double> FeatureConfig::select(const FusionFeatures& f) const {
  std::vector<double> out;
  if (e) out.push_back(f.log_p_e);
  if (g) out.push_back(f.log_p_g);
  if (r) out.push_back(f.log_p_r);
  if (rr) out.push_back(f.log_p_rr);
  return out;
}

std::string FeatureConfig::to_string() const {
  std::string s;
  for (auto [on, name] : {std::pair{e, "e"}, std::pair{g, "g"}, std::pair{r, "r"}, std::pair{rr, "rr"}})
    if (on) s += (s.empty() ? "" : ",") + std::string(name);
  return s;
}

AggregationModel AggregationModel::zeros(const FeatureConfig& config) {
  AggregationModel m;
  m.feature_names = config.names();
  m.w.assign(m.feature_names.size(), 0.0);
  return m;
}

void AggregationModel::validate() const {
  config();
  if (w.size() != feature_names.size()) throw Error("aggregation weights do not match feature names");
  for (double v : w)
    if (!std::isfinite(v)) throw Error("non-finite aggregation weight");
  if (!std::isfinite(b)) throw Error("non-finite aggregation bias");
}

double AggregationModel::score(const FusionFeatures& f) const {
  const auto x = config().select(f);
  double z = b;
  for (std::size_t k = 0; k < x.size(); ++k) z += w[k] * x[k];
  return z;
}

std::vector<FusionCandidate> fusion_candidates(const QuestionOutputs& outputs, const FeatureConfig& config) {
  std::vector<FusionCandidate> out;
  out.reserve(outputs.spans.size());
  for (const auto& span : outputs.spans) {
    FusionCandidate c;
    c.span = span;
    c.features.log_p_e = span.log_p_e;
    if (config.g) {
      auto it = outputs.generative.reranked.find(span.surface);
      if (it == outputs.generative.reranked.end())
        throw Error("generative reader has no score for span '" + span.surface + "' (question " +
                    outputs.question_id + ")");
      c.features.log_p_g = it->second;
    }
    if (config.r) {
      auto lp = outputs.retriever.log_prob(span.passage_id);
      if (!lp)
        throw Error("retriever has no probability for passage " + span.passage_id + " (question " +
                    outputs.question_id + ")");
      c.features.log_p_r = *lp;
    }
    if (config.rr) {
      auto lp = outputs.reranker.log_prob(span.passage_id);
      if (!lp)
        throw Error("reranker has no probability for passage " + span.passage_id + " (question " +
                    outputs.question_id + ")");
      c.features.log_p_rr = *lp;
    }
    out.push_back(std::move(c));
  }
  return out;
}

std::vector<FusionCandidate> fusion_candidates(const QuestionOutputs& outputs) {
  return fusion_candidates(outputs, FeatureConfig{});
}

std::vector<FusionItem> build_aggregation_dataset(std::span<const QuestionOutputs> outputs,
                                                  std::span<const Question> gold,
                                                  const FeatureConfig& config) {
  const auto index = index_questions(gold);
  std::vector<FusionItem> items;
  for (const auto& o : outputs) {
    auto it = index.find(o.question_id);
    if (it == index.end() || it->second->gold_answers.empty()) continue;
    FusionItem item;
    item.question_id = o.question_id;
    item.candidates = fusion_candidates(o, config);
    bool any = false;
    for (auto& c : item.candidates) {
      c.correct = exact_match(c.span.surface, it->second->gold_answers);
      any = any || c.correct;
    }
    if (any) items.push_back(std::move(item));
  }
  return items;
}

std::vector<FusionItem> build_aggregation_dataset(std::span<const QuestionOutputs> outputs,
                                                  std::span<const Question> gold) {
  return build_aggregation_dataset(outputs, gold, FeatureConfig{});
}

double aggregation_batch_loss(const AggregationModel& model, std::span<const FusionItem> items,
                              std::vector<double>* grad) {
  if (items.empty()) throw Error("empty aggregation dataset");
  const FeatureConfig config = model.config();
  const std::size_t dim = model.w.size();
  if (grad) grad->assign(dim + 1, 0.0);
  double total = 0.0;
  std::vector<double> z, z_correct;
  std::vector<std::vector<double>> x;
  for (const auto& item : items) {
    if (item.candidates.empty()) throw Error("aggregation item without candidates: " + item.question_id);
    z.clear();
    z_correct.clear();
    x.clear();
    for (const auto& c : item.candidates) {
      x.push_back(config.select(c.features));
      double v = model.b;
      for (std::size_t k = 0; k < dim; ++k) v += model.w[k] * x.back()[k];
      z.push_back(v);
      if (c.correct) z_correct.push_back(v);
    }
    if (z_correct.empty()) throw Error("aggregation item without a correct candidate: " + item.question_id);
    const double lse_all = log_sum_exp(z);
    const double lse_correct = log_sum_exp(z_correct);
    total += lse_all - lse_correct;
    if (!grad) continue;
    for (std::size_t a = 0; a < z.size(); ++a) {
      double coef = std::exp(z[a] - lse_all);
      if (item.candidates[a].correct) coef -= std::exp(z[a] - lse_correct);
      for (std::size_t k = 0; k < dim; ++k) (*grad)[k] += coef * x[a][k];
      (*grad)[dim] += coef;
    }
  }
  const double n = static_cast<double>(items.size());
  if (grad)
    for (auto& g : *grad) g /= n;
  return total / n;
}

double aggregation_loss(const AggregationModel& model, const FusionItem& item) {
  return aggregation_batch_loss(model, std::span<const FusionItem>(&item, 1), nullptr);
}

AggregationTraining train_aggregation(std::span<const FusionItem> dataset, const FeatureConfig& config,
                                      const FuseHyper& hyper) {
  if (dataset.empty()) throw Error("empty aggregation dataset");
  config.validate();
  AggregationTraining t;
  t.model = AggregationModel::zeros(config);
  std::vector<double> grad;
  for (std::size_t epoch = 0; epoch < hyper.epochs; ++epoch) {
    t.loss_trace.push_back(aggregation_batch_loss(t.model, dataset, &grad));
    check_finite(grad, "aggregation", epoch);
    for (std::size_t k = 0; k < t.model.w.size(); ++k) t.model.w[k] -= hyper.learning_rate * grad[k];
    t.model.b -= hyper.learning_rate * grad.back();
  }
  t.loss_trace.push_back(aggregation_batch_loss(t.model, dataset, nullptr));
  return t;
}

Selection aggregate_and_select(const AggregationModel& model, std::span<const FusionCandidate> candidates) {
  if (candidates.empty()) throw Error("no candidates to aggregate");
  Selection best{0, model.score(candidates[0].features)};
  for (std::size_t i = 1; i < candidates.size(); ++i) {
    const double s = model.score(candidates[i].features);
    if (s > best.s_agg || (s == best.s_agg && span_key_less(candidates[i].span, candidates[best.index].span)))
      best = {i, s};
  }
  return best;
}

std::vector<BdItem> build_bd_dataset(std::span<const BdCase> cases, std::span<const Question> gold) {
  const auto index = index_questions(gold);
  std::vector<BdItem> items;
  for (const auto& c : cases) {
    auto it = index.find(c.question_id);
    if (it == index.end() || it->second->gold_answers.empty()) continue;
    const bool ext = exact_match(c.extractive_answer, it->second->gold_answers);
    const bool abs = exact_match(c.abstractive_answer, it->second->gold_answers);
    if (ext != abs) items.push_back({c.question_id, c.s_agg, c.s_g_star, abs ? 1 : 0});
  }
  return items;
}

double bd_loss(const BinaryDecider& decider, std::span<const BdItem> items, std::vector<double>* grad) {
  if (items.empty()) throw Error("empty binary-decision dataset");
  if (grad) grad->assign(3, 0.0);
  double total = 0.0;
  for (const auto& it : items) {
    const double z = decider.logit(it.s_agg, it.s_g_star);
    total += softplus(z) - it.target * z;
    if (grad) {
      const double d = sigmoid(z) - it.target;
      (*grad)[0] += d * it.s_agg;
      (*grad)[1] += d * it.s_g_star;
      (*grad)[2] += d;
    }
  }
  const double n = static_cast<double>(items.size());
  if (grad)
    for (auto& g : *grad) g /= n;
  return total / n;
}

BdTraining train_binary_decider(std::span<const BdItem> dataset, const FuseHyper& hyper) {
  if (dataset.empty()) throw Error("empty binary-decision dataset");
  BdTraining t;
  std::vector<double> grad;
  for (std::size_t epoch = 0; epoch < hyper.epochs; ++epoch) {
    t.loss_trace.push_back(bd_loss(t.decider, dataset, &grad));
    check_finite(grad, "binary-decision", epoch);
    t.decider.w[0] -= hyper.learning_rate * grad[0];
    t.decider.w[1] -= hyper.learning_rate * grad[1];
    t.decider.b -= hyper.learning_rate * grad[2];
  }
  t.loss_trace.push_back(bd_loss(t.decider, dataset, nullptr));
  return t;
}

AnswerSource decide(const BinaryDecider& decider, double s_agg, double s_g_star) {
  return sigmoid(decider.logit(s_agg, s_g_star)) > 0.5 ? AnswerSource::kAbstractive
                                                       : AnswerSource::kExtractive;
}

std::string posterior_average_ensemble(std::span<const LogDist> dists) {
  if (dists.size() < 2) throw Error("posterior averaging needs at least two distributions");
  const auto& ref = dists[0].items();
  if (ref.empty()) throw Error("posterior averaging over an empty candidate set");
  for (const auto& d : dists) {
    const auto& items = d.items();
    if (items.size() != ref.size() ||
        !std::equal(items.begin(), items.end(), ref.begin(),
                    [](const auto& a, const auto& b) { return a.first == b.first; }))
      throw Error("posterior averaging requires identical candidate sets");
  }
  std::size_t best = 0;
  double best_mean = -1.0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    double sum = 0.0;
    for (const auto& d : dists) sum += std::exp(d.items()[i].second);
    const double mean = sum / static_cast<double>(dists.size());
    if (mean > best_mean) {
      best_mean = mean;
      best = i;
    }
  }
  return ref[best].first;
}

std::string_view to_string(FusionMode mode) {
  switch (mode) {
    case FusionMode::kNaive: return "naive";
    case FusionMode::kAggr: return "aggr";
    case FusionMode::kAggrBd: return "aggr+bd";
  }
  return "";
}

FusionMode parse_fusion_mode(std::string_view text) {
  for (auto m : {FusionMode::kNaive, FusionMode::kAggr, FusionMode::kAggrBd})
    if (to_string(m) == text) return m;
  throw Error("unknown fusion mode '" + std::string(text) + "' (expected naive, aggr or aggr+bd)");
}

Prediction run_fusion_pipeline(const QuestionOutputs& outputs, FusionMode mode,
                               const AggregationModel* aggregation, const BinaryDecider* decider) {
  if (outputs.spans.empty()) throw Error("extractive reader produced no spans for question " + outputs.question_id);
  Prediction p;
  p.question_id = outputs.question_id;
  p.source = AnswerSource::kExtractive;

  if (mode == FusionMode::kNaive) {
    if (outputs.generative.reranked.empty())
      throw Error("naive fusion needs generative reranking scores (question " + outputs.question_id + ")");
    const std::string* best = nullptr;
    double best_lp = 0.0;
    for (const auto& span : outputs.spans) {
      auto it = outputs.generative.reranked.find(span.surface);
      if (it == outputs.generative.reranked.end())
        throw Error("generative reader has no score for span '" + span.surface + "' (question " +
                    outputs.question_id + ")");
      if (!best || it->second > best_lp || (it->second == best_lp && span.surface < *best)) {
        best = &span.surface;
        best_lp = it->second;
      }
    }
    p.answer = *best;
    p.score = best_lp;
    return p;
  }

  if (!aggregation) throw Error("fusion mode " + std::string(to_string(mode)) + " needs an aggregation model");
  const auto candidates = fusion_candidates(outputs, aggregation->config());
  const Selection sel = aggregate_and_select(*aggregation, candidates);
  p.answer = candidates[sel.index].span.surface;
  p.score = sel.s_agg;
  if (mode == FusionMode::kAggr) return p;

  if (!decider) throw Error("fusion mode aggr+bd needs a binary-decision model");
  const double s_g_star = outputs.generative.greedy_log_prob;
  if (decide(*decider, sel.s_agg, s_g_star) == AnswerSource::kAbstractive) {
    p.answer = outputs.generative.greedy_answer;
    p.source = AnswerSource::kAbstractive;
    p.score = s_g_star;
  }
  return p;
}

}  // namespace qafuse
