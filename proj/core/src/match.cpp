#include "qafuse/match.hpp"

#include <algorithm>
#include <unordered_map>
#include <unordered_set>

namespace qafuse {
namespace {

// Passage tokens mapped onto the answer's vocabulary; -1 marks tokens absent from the answer.
struct Encoded {
  std::vector<int> passage;
  std::vector<int> need;  // answer count per vocabulary id
};

Encoded encode(Tokens passage, Tokens answer) {
  Encoded enc;
  std::vector<const std::string*> vocab;
  for (const auto& tok : answer) {
    auto it = std::find_if(vocab.begin(), vocab.end(), [&](const auto* v) { return *v == tok; });
    if (it == vocab.end()) {
      vocab.push_back(&tok);
      enc.need.push_back(1);
    } else {
      ++enc.need[static_cast<std::size_t>(it - vocab.begin())];
    }
  }
  enc.passage.assign(passage.size(), -1);
  for (std::size_t i = 0; i < passage.size(); ++i) {
    const std::string& tok = passage[i];
    for (std::size_t v = 0; v < vocab.size(); ++v) {
      const std::string& w = *vocab[v];
      if (w.size() == tok.size() && (w.empty() || (w[0] == tok[0] && w == tok))) {
        enc.passage[i] = static_cast<int>(v);
        break;
      }
    }
  }
  return enc;
}

// Incrementally maintained bag intersection of a window with the answer.
class Window {
 public:
  explicit Window(const std::vector<int>& need) : need_(need), have_(need.size(), 0) {}

  void add(int id) {
    if (id < 0) return;
    auto& h = have_[static_cast<std::size_t>(id)];
    if (h < need_[static_cast<std::size_t>(id)]) ++shared_;
    ++h;
  }

  void remove(int id) {
    if (id < 0) return;
    auto& h = have_[static_cast<std::size_t>(id)];
    --h;
    if (h < need_[static_cast<std::size_t>(id)]) --shared_;
  }

  void clear() {
    std::fill(have_.begin(), have_.end(), 0);
    shared_ = 0;
  }

  std::size_t shared() const { return shared_; }

 private:
  const std::vector<int>& need_;
  std::vector<int> have_;
  std::size_t shared_ = 0;
};

// F1 of (s, len) against an answer of length a, compared exactly as rationals 2s/(len+a).
bool f1_greater(std::size_t s1, std::size_t len1, std::size_t s2, std::size_t len2, std::size_t a) {
  return s1 * (len2 + a) > s2 * (len1 + a);
}

bool f1_equal(std::size_t s1, std::size_t len1, std::size_t s2, std::size_t len2, std::size_t a) {
  return s1 * (len2 + a) == s2 * (len1 + a);
}

MatchSpan make_match(std::size_t start, std::size_t len, std::size_t s, std::size_t a) {
  return {start, start + len - 1, 2.0 * static_cast<double>(s) / static_cast<double>(len + a)};
}

}  // namespace

std::vector<TokenSpan> exact_match_spans(Tokens passage, Tokens answer) {
  if (answer.empty()) throw Error("empty answer");
  std::vector<TokenSpan> spans;
  if (answer.size() > passage.size()) return spans;
  for (std::size_t i = 0; i + answer.size() <= passage.size(); ++i) {
    if (std::equal(answer.begin(), answer.end(), passage.begin() + static_cast<std::ptrdiff_t>(i)))
      spans.push_back({i, i + answer.size() - 1});
  }
  return spans;
}

bool contains_any(Tokens passage, std::span<const TokenSeq> answers) {
  for (const auto& a : answers) {
    if (a.empty() || a.size() > passage.size()) continue;
    auto it = std::search(passage.begin(), passage.end(), a.tokens.begin(), a.tokens.end());
    if (it != passage.end()) return true;
  }
  return false;
}

std::size_t shared_tokens(Tokens t, Tokens a) {
  std::unordered_map<std::string_view, std::size_t> need;
  for (const auto& tok : a) ++need[tok];
  std::size_t s = 0;
  for (const auto& tok : t) {
    auto it = need.find(tok);
    if (it != need.end() && it->second > 0) {
      --it->second;
      ++s;
    }
  }
  return s;
}

double f1_overlap(Tokens t, Tokens a) {
  if (t.empty() || a.empty()) throw Error("f1_overlap requires non-empty token sequences");
  const auto s = shared_tokens(t, a);
  return 2.0 * static_cast<double>(s) / static_cast<double>(t.size() + a.size());
}

double length_limit(std::size_t t_len, std::size_t a_len, std::size_t shared) {
  if (shared == 0) throw Error("no shared tokens");
  if (t_len == 0 || shared > a_len) throw Error("length_limit requires 0 < s <= |a| and |t| >= 1");
  return static_cast<double>(a_len * (t_len + a_len - shared)) / static_cast<double>(shared);
}

std::optional<MatchSpan> soft_match_best(Tokens passage, Tokens answer, MatchStats* stats) {
  if (answer.empty()) throw Error("empty answer");
  const Encoded enc = encode(passage, answer);
  const std::size_t n = passage.size();
  const std::size_t a = answer.size();
  Window window(enc.need);

  // A window without any answer token never beats the best, so each size only
  // visits the starts whose window covers at least one hit.
  std::vector<std::size_t> hits;
  for (std::size_t i = 0; i < n; ++i)
    if (enc.passage[i] >= 0) hits.push_back(i);

  std::size_t best_start = 0, best_len = 0, best_shared = 0;
  double limit = 2.0;

  auto scan = [&](std::size_t size, std::size_t lo, std::size_t hi) {
    window.clear();
    for (std::size_t i = lo; i < lo + size; ++i) window.add(enc.passage[i]);
    for (std::size_t start = lo; start <= hi; ++start) {
      if (start > lo) {
        window.remove(enc.passage[start - 1]);
        window.add(enc.passage[start + size - 1]);
      }
      if (stats) ++stats->spans_scored;
      const std::size_t s = window.shared();
      if (s > 0 && (best_len == 0 || f1_greater(s, size, best_shared, best_len, a))) {
        best_start = start;
        best_len = size;
        best_shared = s;
        limit = length_limit(size, a, s);
      }
    }
  };

  for (std::size_t size = 1; static_cast<double>(size) < limit && size <= n; ++size) {
    bool open = false;
    std::size_t lo = 0, hi = 0;
    for (std::size_t m : hits) {
      const std::size_t first = m + 1 >= size ? m + 1 - size : 0;
      const std::size_t last = std::min(m, n - size);
      if (open && first <= hi + 1) {
        hi = std::max(hi, last);
        continue;
      }
      if (open) scan(size, lo, hi);
      open = true;
      lo = first;
      hi = last;
    }
    if (open) scan(size, lo, hi);
  }
  if (best_len == 0) return std::nullopt;
  return make_match(best_start, best_len, best_shared, a);
}

std::optional<MatchSpan> brute_force_best(Tokens passage, Tokens answer, MatchStats* stats) {
  if (answer.empty()) throw Error("empty answer");
  const Encoded enc = encode(passage, answer);
  const std::size_t n = passage.size();
  const std::size_t a = answer.size();
  Window window(enc.need);

  std::size_t best_start = 0, best_len = 0, best_shared = 0;
  for (std::size_t start = 0; start < n; ++start) {
    window.clear();
    for (std::size_t end = start; end < n; ++end) {
      window.add(enc.passage[end]);
      if (stats) ++stats->spans_scored;
      const std::size_t s = window.shared();
      if (s == 0) continue;
      const std::size_t len = end - start + 1;
      bool better = best_len == 0 || f1_greater(s, len, best_shared, best_len, a);
      if (!better && f1_equal(s, len, best_shared, best_len, a))
        better = len < best_len || (len == best_len && start < best_start);
      if (better) {
        best_start = start;
        best_len = len;
        best_shared = s;
      }
    }
  }
  if (best_len == 0) return std::nullopt;
  return make_match(best_start, best_len, best_shared, a);
}

std::vector<TokenSeq> tokenize_answers(std::span<const std::string> answers) {
  std::vector<TokenSeq> out;
  for (const auto& a : answers) {
    TokenSeq seq = tokenize(a);
    if (!seq.empty()) out.push_back(std::move(seq));
  }
  return out;
}

std::vector<AnswerAnnotation> annotate_example(const Question& question, const Corpus& corpus,
                                               std::span<const std::string> passage_ids,
                                               const std::optional<std::string>& golden_passage) {
  std::vector<std::size_t> order;
  std::unordered_set<std::size_t> seen;
  for (const auto& pid : passage_ids) {
    const std::size_t idx = corpus.require(pid);
    if (seen.insert(idx).second) order.push_back(idx);
  }
  std::optional<std::size_t> golden;
  if (golden_passage) {
    golden = corpus.require(*golden_passage);
    if (seen.insert(*golden).second) order.push_back(*golden);
  }

  std::vector<AnswerAnnotation> out;
  for (std::size_t ai = 0; ai < question.gold_answers.size(); ++ai) {
    const TokenSeq answer = tokenize(question.gold_answers[ai]);
    if (answer.empty()) continue;
    bool golden_exact = false;
    for (std::size_t idx : order) {
      const auto& ctx = corpus.context_tokens(idx);
      const auto spans = exact_match_spans(ctx.tokens, answer.tokens);
      if (golden && idx == *golden && !spans.empty()) golden_exact = true;
      for (const auto& span : spans)
        out.push_back({corpus.at(idx).id, ai, span.start, span.end, 1.0, false});
    }
    if (golden && !golden_exact) {
      if (auto soft = soft_match_best(corpus.context_tokens(*golden).tokens, answer.tokens))
        out.push_back({corpus.at(*golden).id, ai, soft->start, soft->end, soft->f1, true});
    }
  }
  return out;
}

namespace {

const ScoredList& require_run(const RunSet& runs, const Question& q) {
  auto it = runs.find(q.id);
  if (it == runs.end()) throw Error("missing retrieval run for question " + q.id);
  return it->second;
}

bool passage_matches(const Corpus& corpus, std::string_view pid, std::span<const TokenSeq> answers) {
  return contains_any(corpus.context_tokens(corpus.require(pid)).tokens, answers);
}

}  // namespace

FilterResult filter_for_reranker(std::span<const Question> questions, const RunSet& runs,
                                 const Corpus& corpus, std::size_t k) {
  FilterResult result;
  for (const auto& q : questions) {
    const ScoredList& run = require_run(runs, q);
    bool keep = q.golden_passage_id.has_value();
    if (!keep) {
      const auto answers = tokenize_answers(q.gold_answers);
      for (std::size_t r = 0; r < std::min(k, run.size()) && !keep; ++r)
        keep = passage_matches(corpus, run[r].passage_id, answers);
    }
    if (keep) {
      result.kept.push_back(q);
      ++result.report.kept;
    } else {
      ++result.report.dropped_no_positive;
    }
  }
  return result;
}

FilterResult filter_for_extractive(std::span<const Question> questions, const RunSet& runs,
                                   const Corpus& corpus) {
  FilterResult result;
  for (const auto& q : questions) {
    const ScoredList& run = require_run(runs, q);
    const auto answers = tokenize_answers(q.gold_answers);
    bool keep = !run.empty() && passage_matches(corpus, run[0].passage_id, answers);
    if (!keep && q.golden_passage_id)
      keep = passage_matches(corpus, *q.golden_passage_id, answers);
    if (keep) {
      result.kept.push_back(q);
      ++result.report.kept;
    } else {
      ++result.report.dropped_no_annotation;
    }
  }
  return result;
}

}  // namespace qafuse
