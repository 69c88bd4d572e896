#include "qafuse/reader.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>
#include <unordered_set>

namespace qafuse {
namespace {

constexpr std::size_t kWindow = 4;
constexpr std::size_t kStartOff = 0;
constexpr std::size_t kEndOff = DeskReader::kTokenFeatures;
constexpr std::size_t kJointOff = 2 * DeskReader::kTokenFeatures;
constexpr std::size_t kPassageOff = kJointOff + DeskReader::kJointFeatures;

bool is_symbol_token(const std::string& tok) {
  std::size_t len = 0;
  return char_class(decode_utf8(tok, 0, &len)) != CharClass::kWord;
}

}  // namespace

DeskReader::DeskReader(const TfidfRetriever& idf_source, std::vector<double> params,
                       std::size_t max_span_len)
    : idf_(idf_source), max_span_len_(max_span_len) {
  if (max_span_len == 0) throw Error("max_span_len must be >= 1");
  set_params(std::move(params));
}

std::vector<std::string> DeskReader::param_names() {
  std::vector<std::string> names;
  for (const char* head : {"start", "end"})
    for (const char* f : {"in_question", "idf", "position", "left_context", "right_context", "symbol"})
      names.push_back(std::string(head) + "." + f);
  for (const char* f : {"left_context", "right_context", "length", "question_inside", "symbol_inside"})
    names.push_back(std::string("joint.") + f);
  for (const char* f : {"idf_overlap", "overlap_fraction"}) names.push_back(std::string("passage.") + f);
  return names;
}

std::vector<double> DeskReader::default_params() {
  return {
      // start
      -3.0, 1.0, 0.5, 4.0, 0.0, -4.0,
      // end
      -3.0, 1.0, 0.0, 2.0, 0.0, -4.0,
      // joint
      2.0, 1.0, -1.5, -3.0, -3.0,
      // passage
      6.0, 1.0,
  };
}

void DeskReader::set_params(std::vector<double> params) {
  if (params.size() != kParams)
    throw Error("desk reader expects " + std::to_string(kParams) + " parameters, got " +
                std::to_string(params.size()));
  for (double p : params)
    if (!std::isfinite(p)) throw Error("non-finite desk reader parameter");
  params_ = std::move(params);
}

std::size_t reader_title_length(const Corpus& corpus, std::size_t passage_index) {
  return corpus.title_tokens(passage_index).size();
}

DeskReader::Features DeskReader::features(const Question& question, std::size_t passage_index) const {
  const Corpus& corpus = idf_.corpus();
  const auto& title = corpus.title_tokens(passage_index).tokens;
  const auto& context = corpus.context_tokens(passage_index).tokens;
  std::vector<const std::string*> seq;
  seq.reserve(title.size() + context.size());
  for (const auto& t : title) seq.push_back(&t);
  for (const auto& t : context) seq.push_back(&t);

  const auto q_tokens = tokenize(question.text).tokens;
  std::unordered_map<std::string_view, double> q_idf;
  for (const auto& t : q_tokens) q_idf.emplace(t, idf_.idf(t));
  double q_total = 0.0;
  for (const auto& [t, w] : q_idf) q_total += w;
  const double max_idf = std::log(1.0 + static_cast<double>(corpus.size())) + 1.0;

  Features f;
  f.title_len = title.size();
  const std::size_t n = seq.size();
  f.token.resize(n);
  f.question_prefix.assign(n + 1, 0.0);
  f.symbol_prefix.assign(n + 1, 0.0);

  auto window_mass = [&](std::size_t from, std::size_t to) {  // [from, to)
    std::unordered_set<std::string_view> seen;
    double mass = 0.0;
    for (std::size_t j = from; j < to; ++j) {
      auto it = q_idf.find(*seq[j]);
      if (it != q_idf.end() && seen.insert(it->first).second) mass += it->second;
    }
    return q_total > 0 ? mass / q_total : 0.0;
  };

  for (std::size_t i = 0; i < n; ++i) {
    const std::string& tok = *seq[i];
    const bool in_q = q_idf.count(tok) > 0;
    const bool sym = is_symbol_token(tok);
    auto& row = f.token[i];
    row[0] = in_q ? 1.0 : 0.0;
    row[1] = idf_.idf(tok) / max_idf;
    row[2] = i >= f.title_len ? 1.0 / (1.0 + static_cast<double>(i - f.title_len)) : 0.0;
    row[3] = window_mass(i >= kWindow ? i - kWindow : 0, i);
    row[4] = window_mass(i + 1, std::min(n, i + 1 + kWindow));
    row[5] = sym ? 1.0 : 0.0;
    f.question_prefix[i + 1] = f.question_prefix[i] + row[0];
    f.symbol_prefix[i + 1] = f.symbol_prefix[i] + row[5];
  }

  std::unordered_set<std::string_view> present;
  for (const auto* t : seq) present.insert(*t);
  double hit = 0.0, count = 0.0;
  for (const auto& [t, w] : q_idf)
    if (present.count(t)) {
      hit += w;
      count += 1.0;
    }
  f.passage[0] = q_total > 0 ? hit / q_total : 0.0;
  f.passage[1] = q_idf.empty() ? 0.0 : count / static_cast<double>(q_idf.size());
  return f;
}

std::array<double, DeskReader::kJointFeatures> DeskReader::joint_features(const Features& f,
                                                                         std::size_t s,
                                                                         std::size_t e) const {
  return {
      f.token[s][3],
      f.token[e][4],
      static_cast<double>(e - s),
      f.question_prefix[e + 1] - f.question_prefix[s],
      f.symbol_prefix[e + 1] - f.symbol_prefix[s],
  };
}

ReaderScores DeskReader::score(const Question& question, std::size_t passage_index) const {
  const Features f = features(question, passage_index);
  const std::size_t n = f.token.size();
  ReaderScores r = ReaderScores::uniform(idf_.corpus().at(passage_index).id, n, max_span_len_);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0, e = 0.0;
    for (std::size_t k = 0; k < kTokenFeatures; ++k) {
      s += params_[kStartOff + k] * f.token[i][k];
      e += params_[kEndOff + k] * f.token[i][k];
    }
    r.s_start[i] = s;
    r.s_end[i] = e;
  }
  for (std::size_t s = 0; s < n; ++s)
    for (std::size_t e = s; e < n && e - s < max_span_len_; ++e) {
      const auto jf = joint_features(f, s, e);
      double v = 0.0;
      for (std::size_t k = 0; k < kJointFeatures; ++k) v += params_[kJointOff + k] * jf[k];
      const std::size_t b = r.band_index(s, e);
      r.s_joint[b] = v;
      if (s < f.title_len) r.span_mask[b] = 0;
    }
  r.s_passage = params_[kPassageOff] * f.passage[0] + params_[kPassageOff + 1] * f.passage[1];
  return r;
}

std::vector<ReaderScores> DeskReader::score_batch(const Question& question,
                                                  std::span<const std::string> passage_ids) const {
  std::vector<ReaderScores> batch;
  batch.reserve(passage_ids.size());
  for (const auto& pid : passage_ids) batch.push_back(score(question, idf_.corpus().require(pid)));
  return batch;
}

void DeskReader::accumulate_gradient(const Question& question, std::span<const std::string> passage_ids,
                                     std::span<const ReaderScoreGrad> score_grad,
                                     std::vector<double>& grad) const {
  if (grad.size() != kParams) grad.assign(kParams, 0.0);
  for (std::size_t p = 0; p < passage_ids.size(); ++p) {
    const Features f = features(question, idf_.corpus().require(passage_ids[p]));
    const auto& g = score_grad[p];
    for (std::size_t i = 0; i < f.token.size(); ++i)
      for (std::size_t k = 0; k < kTokenFeatures; ++k) {
        grad[kStartOff + k] += g.d_start[i] * f.token[i][k];
        grad[kEndOff + k] += g.d_end[i] * f.token[i][k];
      }
    for (std::size_t b = 0; b < g.d_joint.size(); ++b) {
      if (g.d_joint[b] == 0.0) continue;
      const std::size_t s = b / max_span_len_, e = s + b % max_span_len_;
      const auto jf = joint_features(f, s, e);
      for (std::size_t k = 0; k < kJointFeatures; ++k) grad[kJointOff + k] += g.d_joint[b] * jf[k];
    }
    for (std::size_t k = 0; k < kPassageFeatures; ++k) grad[kPassageOff + k] += g.d_passage * f.passage[k];
  }
}

std::string reader_span_surface(const Corpus& corpus, std::string_view passage_id, std::size_t start,
                                std::size_t end) {
  const std::size_t idx = corpus.require(passage_id);
  const std::size_t title_len = reader_title_length(corpus, idx);
  if (start < title_len) throw Error("span starts inside the title of passage " + std::string(passage_id));
  return std::string(surface(corpus.at(idx).context, corpus.context_tokens(idx), start - title_len,
                             end - title_len));
}

std::vector<SpanAnnotation> to_reader_annotations(const Corpus& corpus,
                                                  std::span<const AnswerAnnotation> annotations,
                                                  std::size_t max_span_len) {
  std::vector<SpanAnnotation> out;
  for (const auto& a : annotations) {
    if (a.end - a.start >= max_span_len) continue;
    const std::size_t off = reader_title_length(corpus, corpus.require(a.passage_id));
    out.push_back({a.passage_id, a.start + off, a.end + off});
  }
  return out;
}

ReaderTrainTrace train_desk_reader(DeskReader& reader, std::span<const ReaderTrainingItem> items,
                                   double learning_rate, std::size_t epochs,
                                   Factorization factorization) {
  if (items.empty()) throw Error("empty reader training set");
  ReaderTrainTrace trace;
  auto evaluate = [&](std::vector<double>* grad) {
    double total = 0.0;
    if (grad) grad->assign(DeskReader::kParams, 0.0);
    for (const auto& item : items) {
      const auto batch = reader.score_batch(*item.question, item.passage_ids);
      total += loss_independent(batch, item.annotations, factorization);
      if (grad) {
        const auto sg = loss_independent_grad(batch, item.annotations, factorization);
        reader.accumulate_gradient(*item.question, item.passage_ids, sg, *grad);
      }
    }
    const double n = static_cast<double>(items.size());
    if (grad)
      for (auto& g : *grad) g /= n;
    return total / n;
  };
  std::vector<double> grad;
  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    trace.loss_trace.push_back(evaluate(&grad));
    std::vector<double> params = reader.params();
    for (std::size_t k = 0; k < params.size(); ++k) {
      if (!std::isfinite(grad[k])) throw Error("non-finite reader gradient at epoch " + std::to_string(epoch));
      params[k] -= learning_rate * grad[k];
    }
    reader.set_params(std::move(params));
  }
  trace.loss_trace.push_back(evaluate(nullptr));
  trace.params = reader.params();
  return trace;
}

}  // namespace qafuse
