#include "qafuse/generate.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

#include "qafuse/text.hpp"

namespace qafuse {
namespace {

void check_log_prob(double lp, const std::string& question_id, const std::string& answer) {
  if (!std::isfinite(lp) || lp > 1e-12)
    throw Error("generative scorer returned invalid log-probability " + std::to_string(lp) +
                " for answer '" + answer + "' (question " + question_id + ")");
}

}  // namespace

std::vector<double> GenerativeScorer::answer_log_probs(const Question& question,
                                                       std::span<const Passage> passages,
                                                       std::span<const std::string> answers) const {
  std::vector<double> out;
  out.reserve(answers.size());
  for (const auto& a : answers) out.push_back(answer_log_prob(question, passages, a));
  return out;
}

TableScorer::TableScorer(Entry shared) : shared_(std::move(shared)) {}

void TableScorer::add(const std::string& question_id, Entry entry) {
  entries_[question_id] = std::move(entry);
}

const TableScorer::Entry& TableScorer::entry_for(const Question& question) const {
  auto it = entries_.find(question.id);
  if (it != entries_.end()) return it->second;
  if (shared_) return *shared_;
  throw Error("no generative scores for question " + question.id);
}

double TableScorer::answer_log_prob(const Question& question, std::span<const Passage>,
                                    const std::string& answer) const {
  const Entry& e = entry_for(question);
  auto it = e.answers.find(answer);
  if (it != e.answers.end()) return it->second;
  if (answer == e.greedy) return e.greedy_log_prob;
  throw Error("no generative score for answer '" + answer + "' (question " + question.id + ")");
}

std::pair<std::string, double> TableScorer::generate(const Question& question,
                                                     std::span<const Passage>) const {
  const Entry& e = entry_for(question);
  return {e.greedy, e.greedy_log_prob};
}

double UnigramScorer::Model::log_prob(const std::string& token) const {
  auto it = counts.find(token);
  const double c = it == counts.end() ? 0.0 : static_cast<double>(it->second);
  return std::log((c + 1.0) / denominator);
}

UnigramScorer::Model UnigramScorer::fit(std::span<const Passage> passages) {
  if (passages.empty()) throw Error("unigram scorer requires at least one passage");
  Model m;
  for (const auto& p : passages)
    for (const auto* text : {&p.title, &p.context})
      for (auto& tok : tokenize(*text).tokens) {
        ++m.counts[tok];
        m.total += 1.0;
      }
  m.denominator = m.total + static_cast<double>(m.counts.size()) + 1.0;
  return m;
}

double UnigramScorer::score(const Model& model, const std::string& answer) const {
  const auto tokens = tokenize(answer).tokens;
  if (tokens.empty()) return std::log(1.0 / model.denominator);
  double lp = 0.0;
  for (const auto& t : tokens) lp += model.log_prob(t);
  if (length_normalize_) lp /= static_cast<double>(tokens.size());
  return lp;
}

double UnigramScorer::answer_log_prob(const Question&, std::span<const Passage> passages,
                                      const std::string& answer) const {
  return score(fit(passages), answer);
}

std::vector<double> UnigramScorer::answer_log_probs(const Question&, std::span<const Passage> passages,
                                                    std::span<const std::string> answers) const {
  const Model m = fit(passages);
  std::vector<double> out;
  out.reserve(answers.size());
  for (const auto& a : answers) out.push_back(score(m, a));
  return out;
}

std::pair<std::string, double> UnigramScorer::generate(const Question&,
                                                       std::span<const Passage> passages) const {
  const Model m = fit(passages);
  // counts is key-ordered, so the first maximum is the smallest token.
  const std::string* best = nullptr;
  std::size_t best_count = 0;
  for (const auto& [tok, c] : m.counts)
    if (!best || c > best_count) {
      best = &tok;
      best_count = c;
    }
  return {*best, score(m, *best)};
}

std::map<std::string, double> rerank_answers(const GenerativeScorer& scorer, const Question& question,
                                             std::span<const Passage> passages,
                                             std::span<const AnswerSpan> spans) {
  if (spans.empty()) throw Error("no answer spans to rerank for question " + question.id);
  std::vector<std::string> unique;
  {
    std::map<std::string, bool> seen;
    for (const auto& s : spans)
      if (seen.emplace(s.surface, true).second) unique.push_back(s.surface);
  }
  std::vector<double> lps;
  try {
    lps = scorer.answer_log_probs(question, passages, unique);
  } catch (const Error& e) {
    throw Error("generative reranking failed for question " + question.id + ": " + e.what());
  }
  if (lps.size() != unique.size()) throw Error("generative scorer returned wrong number of scores");
  std::map<std::string, double> out;
  for (std::size_t i = 0; i < unique.size(); ++i) {
    check_log_prob(lps[i], question.id, unique[i]);
    out.emplace(unique[i], lps[i]);
  }
  return out;
}

std::pair<std::string, double> greedy_answer(const GenerativeScorer& scorer, const Question& question,
                                             std::span<const Passage> passages) {
  if (passages.empty()) throw Error("no passages for generative reader (question " + question.id + ")");
  auto result = scorer.generate(question, passages);
  check_log_prob(result.second, question.id, result.first);
  return result;
}

std::vector<Passage> assemble_reader_input(const ScoredList& reranked, const Corpus& corpus,
                                           std::size_t v2) {
  if (v2 == 0) throw Error("V2 must be >= 1");
  std::vector<Passage> out;
  for (std::size_t i = 0; i < std::min(v2, reranked.size()); ++i)
    out.push_back(corpus.at(corpus.require(reranked[i].passage_id)));
  return out;
}

GenerativeOutput run_generative(const GenerativeScorer& scorer, const Question& question,
                                std::span<const Passage> passages, std::span<const AnswerSpan> spans) {
  GenerativeOutput out;
  out.question_id = question.id;
  std::tie(out.greedy_answer, out.greedy_log_prob) = greedy_answer(scorer, question, passages);
  out.reranked = rerank_answers(scorer, question, passages, spans);
  return out;
}

}  // namespace qafuse
