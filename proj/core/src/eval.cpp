#include "qafuse/eval.hpp"

#include <algorithm>
#include <unordered_map>

#include "qafuse/match.hpp"

namespace qafuse {
namespace {

bool is_ascii_punct(char32_t cp) {
  return (cp >= 0x21 && cp <= 0x2F) || (cp >= 0x3A && cp <= 0x40) || (cp >= 0x5B && cp <= 0x60) ||
         (cp >= 0x7B && cp <= 0x7E);
}

bool is_word_char(char32_t cp) { return cp == '_' || char_class(cp) == CharClass::kWord; }

}  // namespace

std::string_view to_string(AnswerSource source) {
  return source == AnswerSource::kExtractive ? "extractive" : "abstractive";
}

AnswerSource parse_answer_source(std::string_view text) {
  if (text == "extractive") return AnswerSource::kExtractive;
  if (text == "abstractive") return AnswerSource::kAbstractive;
  throw Error("unknown answer source '" + std::string(text) + "'");
}

std::string normalize_answer(std::string_view text, PunctuationMode mode) {
  const std::string lower = to_lower(text);

  std::u32string chars;
  for (std::size_t pos = 0; pos < lower.size();) {
    std::size_t len = 0;
    const char32_t cp = decode_utf8(lower, pos, &len);
    pos += len;
    const bool punct = mode == PunctuationMode::kAscii ? is_ascii_punct(cp)
                                                       : char_class(cp) == CharClass::kPunctuation;
    if (!punct) chars.push_back(cp);
  }

  // Articles are whole runs of word characters, as with a \b...\b regex.
  std::u32string no_articles;
  for (std::size_t i = 0; i < chars.size();) {
    if (!is_word_char(chars[i])) {
      no_articles.push_back(chars[i++]);
      continue;
    }
    std::size_t j = i;
    while (j < chars.size() && is_word_char(chars[j])) ++j;
    const std::u32string_view word(chars.data() + i, j - i);
    if (word == U"a" || word == U"an" || word == U"the")
      no_articles.push_back(U' ');
    else
      no_articles.append(word);
    i = j;
  }

  std::string out;
  bool pending_space = false;
  for (char32_t cp : no_articles) {
    if (is_whitespace(cp)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    append_utf8(out, cp);
  }
  return out;
}

bool exact_match(std::string_view prediction, std::span<const std::string> gold_answers,
                 PunctuationMode mode) {
  const std::string pred = normalize_answer(prediction, mode);
  return std::any_of(gold_answers.begin(), gold_answers.end(),
                     [&](const std::string& g) { return normalize_answer(g, mode) == pred; });
}

EmResult em_score(std::span<const Prediction> predictions, std::span<const Question> questions,
                  PunctuationMode mode) {
  std::unordered_map<std::string_view, const Prediction*> by_question;
  for (const auto& p : predictions)
    if (!by_question.emplace(p.question_id, &p).second)
      throw Error("more than one prediction for question " + p.question_id);
  EmResult r;
  for (const auto& q : questions) {
    if (q.gold_answers.empty()) {
      ++r.skipped_no_gold;
      continue;
    }
    ++r.n;
    auto it = by_question.find(q.id);
    if (it == by_question.end()) {
      ++r.missing_predictions;
      continue;
    }
    if (exact_match(it->second->answer, q.gold_answers, mode)) ++r.correct;
  }
  r.em = r.n == 0 ? 0.0 : static_cast<double>(r.correct) / static_cast<double>(r.n);
  return r;
}

bool has_answer(const TokenSeq& passage, std::span<const std::string> gold_answers) {
  const auto answers = tokenize_answers(gold_answers);
  return contains_any(passage.tokens, answers);
}

std::map<std::size_t, double> accuracy_at_k(const RunSet& runs, std::span<const Question> questions,
                                            const Corpus& corpus, std::span<const std::size_t> ks) {
  std::map<std::size_t, double> out;
  if (ks.empty()) return out;
  const std::size_t max_k = *std::max_element(ks.begin(), ks.end());
  if (*std::min_element(ks.begin(), ks.end()) == 0) throw Error("accuracy@k requires k >= 1");
  std::map<std::size_t, std::size_t> hits;
  std::size_t n = 0;
  for (const auto& q : questions) {
    if (q.gold_answers.empty()) continue;
    auto it = runs.find(q.id);
    if (it == runs.end()) throw Error("no run for question " + q.id);
    const ScoredList& run = it->second;
    if (run.size() < max_k)
      throw Error("run for question " + q.id + " has depth " + std::to_string(run.size()) +
                  ", need " + std::to_string(max_k));
    ++n;
    const auto answers = tokenize_answers(q.gold_answers);
    std::size_t first_hit = max_k + 1;
    for (std::size_t r = 0; r < max_k; ++r)
      if (contains_any(corpus.context_tokens(corpus.require(run[r].passage_id)).tokens, answers)) {
        first_hit = r + 1;
        break;
      }
    for (std::size_t k : ks)
      if (first_hit <= k) ++hits[k];
  }
  for (std::size_t k : ks)
    out[k] = n == 0 ? 0.0 : static_cast<double>(hits[k]) / static_cast<double>(n);
  return out;
}

std::string_view to_string(OverlapSubset subset) {
  switch (subset) {
    case OverlapSubset::kQuestionOverlap: return "question_overlap";
    case OverlapSubset::kAnswerOverlapOnly: return "answer_overlap_only";
    case OverlapSubset::kNoOverlap: return "no_overlap";
  }
  return "";
}

OverlapSubset parse_overlap_subset(std::string_view text) {
  for (auto s : {OverlapSubset::kQuestionOverlap, OverlapSubset::kAnswerOverlapOnly, OverlapSubset::kNoOverlap})
    if (to_string(s) == text) return s;
  throw Error("unknown overlap subset '" + std::string(text) + "'");
}

OverlapReport overlap_report(std::span<const Prediction> predictions, std::span<const Question> questions,
                             const std::map<std::string, OverlapSubset>& labels, PunctuationMode mode) {
  std::map<OverlapSubset, std::vector<Question>> groups;
  for (const auto& q : questions) {
    auto it = labels.find(q.id);
    if (it == labels.end()) throw Error("question " + q.id + " has no overlap label");
    groups[it->second].push_back(q);
  }
  OverlapReport report;
  for (const auto& [subset, qs] : groups) {
    std::vector<Prediction> preds;
    for (const auto& p : predictions)
      if (auto it = labels.find(p.question_id); it != labels.end() && it->second == subset) preds.push_back(p);
    report.subsets[subset] = em_score(preds, qs, mode);
  }
  report.total = em_score(predictions, questions, mode);
  return report;
}

}  // namespace qafuse
