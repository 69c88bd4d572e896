#include "support.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "qafuse/corpus.hpp"

namespace qafuse::testing {

std::vector<std::string> random_tokens(Rng& rng, std::size_t n, std::size_t alphabet) {
  std::vector<std::string> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(std::string(1, static_cast<char>('a' + rng.uniform_index(alphabet))));
  return out;
}

std::optional<MatchSpan> naive_soft_match(const std::vector<std::string>& passage,
                                          const std::vector<std::string>& answer) {
  const std::size_t a = answer.size();
  std::optional<MatchSpan> best;
  std::size_t best_s = 0, best_len = 0;
  for (std::size_t len = 1; len <= passage.size(); ++len) {
    for (std::size_t i = 0; i + len <= passage.size(); ++i) {
      std::map<std::string, long> need;
      for (const auto& t : answer) ++need[t];
      std::size_t s = 0;
      for (std::size_t j = i; j < i + len; ++j) {
        auto it = need.find(passage[j]);
        if (it != need.end() && it->second > 0) {
          --it->second;
          ++s;
        }
      }
      if (s == 0) continue;
      // Sizes grow and starts move right, so only a strictly larger F1 replaces.
      if (!best || s * (best_len + a) > best_s * (len + a)) {
        best = MatchSpan{i, i + len - 1, 2.0 * static_cast<double>(s) / static_cast<double>(len + a)};
        best_s = s;
        best_len = len;
      }
    }
  }
  return best;
}

std::vector<ReaderScores> random_batch(Rng& rng, std::size_t max_passages, std::size_t max_len,
                                       std::size_t max_span_len, bool quantized) {
  auto draw = [&] {
    const double v = rng.uniform(-4.0, 4.0);
    return quantized ? std::round(v * 2.0) / 2.0 : v;
  };
  const std::size_t n = 1 + rng.uniform_index(max_passages);
  // Ids deliberately out of batch order so the id tie-break is exercised.
  std::vector<std::string> ids;
  for (std::size_t p = 0; p < n; ++p) ids.push_back("p" + std::to_string(p));
  ids = rng.sample_without_replacement(std::move(ids), n);

  std::vector<ReaderScores> batch;
  bool any = false;
  for (std::size_t p = 0; p < n; ++p) {
    const std::size_t len = 1 + rng.uniform_index(max_len);
    const std::size_t w = 1 + rng.uniform_index(max_span_len);
    ReaderScores r = ReaderScores::uniform(ids[p], len, w);
    for (auto& v : r.s_start) v = draw();
    for (auto& v : r.s_end) v = draw();
    for (std::size_t b = 0; b < r.s_joint.size(); ++b) {
      r.s_joint[b] = draw();
      if (r.span_mask[b] && rng.uniform01() < 0.2) r.span_mask[b] = 0;
      any = any || r.span_mask[b];
    }
    r.s_passage = draw();
    batch.push_back(std::move(r));
  }
  if (!any) batch[0].span_mask[0] = 1;
  return batch;
}

std::vector<SpanAnnotation> random_annotations(Rng& rng, const std::vector<ReaderScores>& batch,
                                               std::size_t count) {
  std::vector<SpanAnnotation> valid;
  for (const auto& r : batch)
    for (std::size_t s = 0; s < r.length; ++s)
      for (std::size_t e = s; e < r.length; ++e)
        if (r.valid(s, e)) valid.push_back({r.passage_id, s, e});
  std::vector<SpanAnnotation> out;
  for (std::size_t i = 0; i < std::max<std::size_t>(count, 1); ++i) out.push_back(valid[rng.uniform_index(valid.size())]);
  return out;
}

double naive_log_sum_exp(const std::vector<double>& v) {
  const double m = *std::max_element(v.begin(), v.end());
  double sum = 0.0;
  for (double x : v) sum += std::exp(x - m);
  return m + std::log(sum);
}

std::vector<OracleSpan> oracle_decode(const std::vector<ReaderScores>& batch, Factorization fact) {
  std::vector<double> starts, ends, joints, passages;
  for (const auto& r : batch) {
    std::vector<bool> st(r.length, false), en(r.length, false);
    for (std::size_t s = 0; s < r.length; ++s)
      for (std::size_t e = s; e < r.length; ++e)
        if (r.valid(s, e)) {
          st[s] = en[e] = true;
          joints.push_back(r.joint(s, e));
        }
    for (std::size_t i = 0; i < r.length; ++i) {
      if (st[i]) starts.push_back(r.s_start[i]);
      if (en[i]) ends.push_back(r.s_end[i]);
    }
    passages.push_back(r.s_passage);
  }
  const double zs = naive_log_sum_exp(starts), ze = naive_log_sum_exp(ends);
  const double zj = naive_log_sum_exp(joints), zp = naive_log_sum_exp(passages);

  std::vector<OracleSpan> out;
  for (std::size_t p = 0; p < batch.size(); ++p) {
    const auto& r = batch[p];
    for (std::size_t s = 0; s < r.length; ++s)
      for (std::size_t e = s; e < r.length; ++e) {
        if (!r.valid(s, e)) continue;
        double lp = 0.0;
        if (fact.has(Factor::kIndependent)) lp += (r.s_start[s] - zs) + (r.s_end[e] - ze);
        if (fact.has(Factor::kJoint)) lp += r.joint(s, e) - zj;
        if (fact.has(Factor::kPassage)) lp += r.s_passage - zp;
        out.push_back({p, s, e, lp});
      }
  }
  std::sort(out.begin(), out.end(), [&](const OracleSpan& a, const OracleSpan& b) {
    if (a.log_p != b.log_p) return a.log_p > b.log_p;
    if (batch[a.passage].passage_id != batch[b.passage].passage_id)
      return batch[a.passage].passage_id < batch[b.passage].passage_id;
    if (a.start != b.start) return a.start < b.start;
    return a.end < b.end;
  });
  return out;
}

LinearDists linear_dists(const std::vector<ReaderScores>& batch) {
  LinearDists d;
  double zs = 0, ze = 0, zj = 0, zp = 0;
  for (const auto& r : batch) {
    std::vector<double> st(r.length, 0.0), en(r.length, 0.0), jo(r.s_joint.size(), 0.0);
    for (std::size_t s = 0; s < r.length; ++s)
      for (std::size_t e = s; e < r.length; ++e)
        if (r.valid(s, e)) {
          st[s] = std::exp(r.s_start[s]);
          en[e] = std::exp(r.s_end[e]);
          jo[r.band_index(s, e)] = std::exp(r.joint(s, e));
        }
    for (double v : st) zs += v;
    for (double v : en) ze += v;
    for (double v : jo) zj += v;
    zp += std::exp(r.s_passage);
    d.start.push_back(st);
    d.end.push_back(en);
    d.joint.push_back(jo);
    d.passage.push_back(std::exp(r.s_passage));
  }
  for (auto& v : d.start) for (auto& x : v) x /= zs;
  for (auto& v : d.end) for (auto& x : v) x /= ze;
  for (auto& v : d.joint) for (auto& x : v) x /= zj;
  for (auto& x : d.passage) x /= zp;
  return d;
}

FusionItem random_fusion_item(Rng& rng, std::size_t n) {
  FusionItem item;
  item.question_id = "q";
  for (std::size_t i = 0; i < n; ++i) {
    FusionCandidate c;
    c.span.passage_id = "p" + std::to_string(i);
    c.span.surface = "s" + std::to_string(i);
    c.features = {rng.uniform(-8, 0), rng.uniform(-8, 0), rng.uniform(-8, 0), rng.uniform(-8, 0)};
    c.correct = rng.uniform01() < 0.3;
    item.candidates.push_back(c);
  }
  item.candidates[rng.uniform_index(n)].correct = true;
  return item;
}

std::string random_unicode_string(Rng& rng, std::size_t max_len) {
  static const std::vector<std::string> pieces = {
      "a", "an", "the", "The", "A", "AN", " ", "  ", "\t", "\n", ".", ",", "!", "?", "'", "\"", "-", "_",
      "(", ")", "$", "%", "+", "x", "Q", "7", "é", "É", "ň", "Ň", "ß", "İ", "ﬁ", "—", "«", "»", "¿",
      "・", "日", "本", " ", " ", "́", "ab", "the cat", "An", "thé", "a.", ".the"};
  std::string s;
  const std::size_t n = rng.uniform_index(max_len + 1);
  for (std::size_t i = 0; i < n; ++i) s += pieces[rng.uniform_index(pieces.size())];
  return s;
}

}  // namespace qafuse::testing

namespace qafuse::testing {

std::vector<std::string> TableFeatures::names() const {
  std::vector<std::string> out;
  for (std::size_t k = 0; k < dim_; ++k) out.push_back("x" + std::to_string(k));
  return out;
}

std::vector<double> TableFeatures::compute(const Question& question, const Passage& passage,
                                           std::size_t) const {
  auto it = table_.find({question.id, passage.id});
  if (it == table_.end()) throw Error("no table features for " + question.id + "/" + passage.id);
  return it->second;
}

namespace {

std::unique_ptr<RerankFixture> rerank_fixture(Rng& rng, std::size_t questions, std::size_t dim,
                                              std::size_t min_group, std::size_t max_group,
                                              bool separable) {
  auto fx = std::make_unique<RerankFixture>();
  fx->features = std::make_shared<TableFeatures>(dim);
  std::vector<Passage> passages;
  std::vector<std::vector<std::string>> members(questions);
  for (std::size_t q = 0; q < questions; ++q) {
    const std::string qid = "q" + std::to_string(q);
    fx->questions.push_back({qid, "question " + qid, {"answer"}, std::nullopt});
    const std::size_t n = min_group + rng.uniform_index(max_group - min_group + 1);
    for (std::size_t i = 0; i < n; ++i) {
      const std::string pid = qid + "-p" + std::to_string(i);
      passages.push_back({pid, "", "passage " + pid});
      members[q].push_back(pid);
      std::vector<double> x(dim);
      for (auto& v : x) v = rng.uniform(-1.0, 1.0);
      if (separable) x[0] = i == 0 ? rng.uniform(1.5, 3.0) : rng.uniform(-1.0, 0.5);
      fx->features->set(qid, pid, std::move(x));
    }
  }
  fx->corpus = std::make_unique<Corpus>(std::move(passages));
  for (std::size_t q = 0; q < questions; ++q) {
    RerankGroup g;
    g.question = &fx->questions[q];
    for (std::size_t i = 0; i < members[q].size(); ++i) {
      g.passages.push_back(&fx->corpus->at(fx->corpus->require(members[q][i])));
      g.ranks.push_back(i + 1);
    }
    fx->groups.push_back(std::move(g));
  }
  return fx;
}

}  // namespace

std::unique_ptr<RerankFixture> separable_rerank_fixture(std::uint64_t seed, std::size_t questions,
                                                        std::size_t group_size) {
  Rng rng(seed);
  return rerank_fixture(rng, questions, 3, group_size, group_size, true);
}

std::unique_ptr<RerankFixture> random_rerank_fixture(Rng& rng, std::size_t questions, std::size_t dim) {
  return rerank_fixture(rng, questions, dim, 2, 10, false);
}

std::vector<FusionItem> separable_aggregation_fixture(std::uint64_t seed, std::size_t items) {
  Rng rng(seed);
  std::vector<FusionItem> out;
  for (std::size_t q = 0; q < items; ++q) {
    FusionItem item = random_fusion_item(rng, 2 + rng.uniform_index(8));
    item.question_id = "q" + std::to_string(q);
    for (auto& c : item.candidates)
      c.features.log_p_e = c.correct ? rng.uniform(-1.0, 0.0) : rng.uniform(-8.0, -3.0);
    out.push_back(std::move(item));
  }
  return out;
}

std::vector<BdItem> separable_bd_fixture(std::uint64_t seed, std::size_t items) {
  Rng rng(seed);
  std::vector<BdItem> out;
  for (std::size_t i = 0; i < items; ++i) {
    const int t = static_cast<int>(rng.uniform_index(2));
    const double s_g_star = rng.uniform(-6.0, 0.0);
    const double gap = rng.uniform(1.0, 3.0);
    out.push_back({"q" + std::to_string(i), t ? s_g_star - gap : s_g_star + gap, s_g_star, t});
  }
  return out;
}

std::vector<BdItem> abstractive_always_fixture(std::uint64_t seed, std::size_t items) {
  Rng rng(seed);
  std::vector<BdItem> out;
  for (std::size_t i = 0; i < items; ++i) {
    const double s_agg = rng.uniform(-8.0, -1.0);
    out.push_back({"q" + std::to_string(i), s_agg, rng.uniform(s_agg + 0.1, 0.0), 1});
  }
  return out;
}

}  // namespace qafuse::testing
