#include "qafuse/extract.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <queue>
#include <set>
#include <unordered_map>

namespace qafuse {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void require_nonempty(std::span<const ReaderScores> batch) {
  if (batch.empty()) throw Error("empty reader batch");
}

std::unordered_map<std::string_view, std::size_t> index_batch(std::span<const ReaderScores> batch) {
  std::unordered_map<std::string_view, std::size_t> index;
  for (std::size_t p = 0; p < batch.size(); ++p)
    if (!index.emplace(batch[p].passage_id, p).second)
      throw Error("duplicate passage " + batch[p].passage_id + " in reader batch");
  return index;
}

struct ResolvedAnnotations {
  std::set<TokenKey> starts;
  std::set<TokenKey> ends;
  std::set<SpanKey> spans;
  std::set<std::size_t> passages;
};

ResolvedAnnotations resolve(std::span<const ReaderScores> batch,
                            std::span<const SpanAnnotation> annotations) {
  if (annotations.empty()) throw Error("no supervision");
  const auto index = index_batch(batch);
  ResolvedAnnotations r;
  for (const auto& a : annotations) {
    auto it = index.find(a.passage_id);
    if (it == index.end()) throw Error("annotation refers to passage " + a.passage_id + " outside the batch");
    const std::size_t p = it->second;
    if (!batch[p].valid(a.start, a.end))
      throw Error("annotation (" + std::to_string(a.start) + ", " + std::to_string(a.end) +
                  ") in passage " + a.passage_id + " is not a valid span");
    r.starts.insert({p, a.start});
    r.ends.insert({p, a.end});
    r.spans.insert({p, a.start, a.end});
    r.passages.insert(p);
  }
  return r;
}

// -log of the total probability of a set, given member log-probabilities.
double neg_log_mass(const std::vector<double>& log_probs) { return -log_sum_exp(log_probs); }

}  // namespace

ReaderScores ReaderScores::uniform(std::string passage_id, std::size_t length, std::size_t max_span_len) {
  ReaderScores r;
  r.passage_id = std::move(passage_id);
  r.length = length;
  r.max_span_len = max_span_len;
  r.s_start.assign(length, 0.0);
  r.s_end.assign(length, 0.0);
  r.s_joint.assign(length * max_span_len, 0.0);
  r.span_mask.assign(length * max_span_len, 0);
  for (std::size_t s = 0; s < length; ++s)
    for (std::size_t e = s; e < length && e - s < max_span_len; ++e) r.span_mask[r.band_index(s, e)] = 1;
  return r;
}

void ReaderScores::validate() const {
  const std::string where = "reader scores for passage " + passage_id + ": ";
  if (max_span_len == 0) throw Error(where + "max_span_len must be >= 1");
  if (s_start.size() != length || s_end.size() != length)
    throw Error(where + "start/end vectors must have length L");
  if (s_joint.size() != length * max_span_len || span_mask.size() != length * max_span_len)
    throw Error(where + "joint/mask bands must have L * max_span_len entries");
  auto finite = [](double v) { return std::isfinite(v); };
  if (!std::all_of(s_start.begin(), s_start.end(), finite) ||
      !std::all_of(s_end.begin(), s_end.end(), finite) ||
      !std::all_of(s_joint.begin(), s_joint.end(), finite) || !std::isfinite(s_passage))
    throw Error(where + "non-finite score");
  for (std::size_t s = 0; s < length; ++s)
    for (std::size_t k = 0; k < max_span_len; ++k)
      if (s + k >= length && span_mask[s * max_span_len + k])
        throw Error(where + "mask marks a span past the end of the passage");
}

Factorization::Factorization(unsigned flags) : flags_(flags) {
  if (flags == 0 || flags > 7) throw Error("factorization must be a non-empty subset of {I, J, C}");
}

Factorization Factorization::parse(std::string_view text) {
  unsigned flags = 0;
  for (char c : text) {
    switch (c) {
      case 'I': case 'i': flags |= static_cast<unsigned>(Factor::kIndependent); break;
      case 'J': case 'j': flags |= static_cast<unsigned>(Factor::kJoint); break;
      case 'C': case 'c': flags |= static_cast<unsigned>(Factor::kPassage); break;
      case ',': case '+': case ' ': break;
      default: throw Error("unknown factorization component '" + std::string(1, c) + "'");
    }
  }
  return Factorization(flags);
}

std::vector<Factorization> Factorization::all() {
  std::vector<Factorization> out;
  for (unsigned f = 1; f <= 7; ++f) out.emplace_back(f);
  return out;
}

std::string Factorization::to_string() const {
  std::string s;
  if (has(Factor::kIndependent)) s += 'I';
  if (has(Factor::kJoint)) s += 'J';
  if (has(Factor::kPassage)) s += 'C';
  return s;
}

ReaderDists normalize_reader_scores(std::span<const ReaderScores> batch) {
  require_nonempty(batch);
  index_batch(batch);
  ReaderDists d;
  const std::size_t n = batch.size();
  d.log_start_.resize(n);
  d.log_end_.resize(n);
  d.log_joint_.resize(n);
  d.log_passage_.resize(n);

  std::vector<double> starts, ends, joints, passages;
  std::vector<std::vector<std::uint8_t>> start_ok(n), end_ok(n);
  for (std::size_t p = 0; p < n; ++p) {
    const auto& r = batch[p];
    r.validate();
    start_ok[p].assign(r.length, 0);
    end_ok[p].assign(r.length, 0);
    for (std::size_t s = 0; s < r.length; ++s)
      for (std::size_t e = s; e < r.length && e - s < r.max_span_len; ++e)
        if (r.span_mask[r.band_index(s, e)]) {
          start_ok[p][s] = 1;
          end_ok[p][e] = 1;
          joints.push_back(r.joint(s, e));
        }
    for (std::size_t i = 0; i < r.length; ++i) {
      if (start_ok[p][i]) starts.push_back(r.s_start[i]);
      if (end_ok[p][i]) ends.push_back(r.s_end[i]);
    }
    passages.push_back(r.s_passage);
  }
  if (joints.empty()) throw Error("no decodable span");

  const double z_start = log_sum_exp(starts);
  const double z_end = log_sum_exp(ends);
  const double z_joint = log_sum_exp(joints);
  const double z_passage = log_sum_exp(passages);
  for (std::size_t p = 0; p < n; ++p) {
    const auto& r = batch[p];
    d.log_start_[p].assign(r.length, kNegInf);
    d.log_end_[p].assign(r.length, kNegInf);
    d.log_joint_[p].assign(r.s_joint.size(), kNegInf);
    for (std::size_t i = 0; i < r.length; ++i) {
      if (start_ok[p][i]) d.log_start_[p][i] = r.s_start[i] - z_start;
      if (end_ok[p][i]) d.log_end_[p][i] = r.s_end[i] - z_end;
    }
    for (std::size_t b = 0; b < r.s_joint.size(); ++b)
      if (r.span_mask[b]) d.log_joint_[p][b] = r.s_joint[b] - z_joint;
    d.log_passage_[p] = r.s_passage - z_passage;
  }
  return d;
}

BasicLogDist<TokenKey> ReaderDists::start_dist() const {
  std::vector<std::pair<TokenKey, double>> items;
  for (std::size_t p = 0; p < log_start_.size(); ++p)
    for (std::size_t i = 0; i < log_start_[p].size(); ++i)
      if (log_start_[p][i] != kNegInf) items.push_back({{p, i}, log_start_[p][i]});
  return BasicLogDist<TokenKey>::from_sorted(std::move(items));
}

BasicLogDist<TokenKey> ReaderDists::end_dist() const {
  std::vector<std::pair<TokenKey, double>> items;
  for (std::size_t p = 0; p < log_end_.size(); ++p)
    for (std::size_t i = 0; i < log_end_[p].size(); ++i)
      if (log_end_[p][i] != kNegInf) items.push_back({{p, i}, log_end_[p][i]});
  return BasicLogDist<TokenKey>::from_sorted(std::move(items));
}

BasicLogDist<SpanKey> ReaderDists::joint_dist(std::span<const ReaderScores> batch) const {
  std::vector<std::pair<SpanKey, double>> items;
  for (std::size_t p = 0; p < log_joint_.size(); ++p) {
    const auto& r = batch[p];
    for (std::size_t s = 0; s < r.length; ++s)
      for (std::size_t e = s; e < r.length && e - s < r.max_span_len; ++e) {
        const double v = log_joint_[p][r.band_index(s, e)];
        if (v != kNegInf) items.push_back({{p, s, e}, v});
      }
  }
  return BasicLogDist<SpanKey>::from_sorted(std::move(items));
}

BasicLogDist<std::size_t> ReaderDists::passage_dist() const {
  std::vector<std::pair<std::size_t, double>> items;
  for (std::size_t p = 0; p < log_passage_.size(); ++p) items.emplace_back(p, log_passage_[p]);
  return BasicLogDist<std::size_t>::from_sorted(std::move(items));
}

double span_log_prob(const ReaderDists& dists, std::size_t passage, std::size_t start,
                     std::size_t end, std::size_t band, Factorization factorization) {
  double lp = 0.0;
  if (factorization.has(Factor::kIndependent))
    lp += dists.log_start(passage, start) + dists.log_end(passage, end);
  if (factorization.has(Factor::kJoint)) lp += dists.log_joint(passage, band);
  if (factorization.has(Factor::kPassage)) lp += dists.log_passage(passage);
  return lp;
}

std::vector<AnswerSpan> decode_top_m(std::span<const ReaderScores> batch, const ReaderDists& dists,
                                     std::size_t m, Factorization factorization) {
  if (m == 0) throw Error("decode_top_m requires M >= 1");
  require_nonempty(batch);
  if (dists.passages() != batch.size()) throw Error("distributions do not match the batch");

  struct Cand {
    double score;
    std::size_t p, s, e;
  };
  auto better = [&](const Cand& a, const Cand& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.p != b.p) {
      const int c = batch[a.p].passage_id.compare(batch[b.p].passage_id);
      if (c != 0) return c < 0;
    }
    if (a.s != b.s) return a.s < b.s;
    return a.e < b.e;
  };
  // Max-heap on "worse", so the top is the weakest kept candidate.
  std::priority_queue<Cand, std::vector<Cand>, decltype(better)> heap(better);
  for (std::size_t p = 0; p < batch.size(); ++p) {
    const auto& r = batch[p];
    for (std::size_t s = 0; s < r.length; ++s)
      for (std::size_t e = s; e < r.length && e - s < r.max_span_len; ++e) {
        const std::size_t band = r.band_index(s, e);
        if (!r.span_mask[band]) continue;
        Cand c{span_log_prob(dists, p, s, e, band, factorization), p, s, e};
        if (heap.size() < m) {
          heap.push(c);
        } else if (better(c, heap.top())) {
          heap.pop();
          heap.push(c);
        }
      }
  }
  std::vector<Cand> kept;
  kept.reserve(heap.size());
  while (!heap.empty()) {
    kept.push_back(heap.top());
    heap.pop();
  }
  std::reverse(kept.begin(), kept.end());

  std::vector<AnswerSpan> out;
  out.reserve(kept.size());
  for (const auto& c : kept) {
    const auto& r = batch[c.p];
    AnswerSpan a;
    a.passage_id = r.passage_id;
    a.start = c.s;
    a.end = c.e;
    a.log_p_start = dists.log_start(c.p, c.s);
    a.log_p_end = dists.log_end(c.p, c.e);
    a.log_p_joint = dists.log_joint(c.p, r.band_index(c.s, c.e));
    a.log_p_passage = dists.log_passage(c.p);
    a.log_p_e = c.score;
    out.push_back(std::move(a));
  }
  return out;
}

std::vector<AnswerSpan> decode_top_m(std::span<const ReaderScores> batch, std::size_t m,
                                     Factorization factorization) {
  return decode_top_m(batch, normalize_reader_scores(batch), m, factorization);
}

double loss_independent(std::span<const ReaderScores> batch,
                        std::span<const SpanAnnotation> annotations, Factorization factorization) {
  const ResolvedAnnotations ann = resolve(batch, annotations);
  const ReaderDists d = normalize_reader_scores(batch);
  double loss = 0.0;
  if (factorization.has(Factor::kIndependent)) {
    std::vector<double> lp;
    for (const auto& k : ann.starts) lp.push_back(d.log_start(k.passage, k.position));
    loss += neg_log_mass(lp);
    lp.clear();
    for (const auto& k : ann.ends) lp.push_back(d.log_end(k.passage, k.position));
    loss += neg_log_mass(lp);
  }
  if (factorization.has(Factor::kJoint)) {
    std::vector<double> lp;
    for (const auto& k : ann.spans) lp.push_back(d.log_joint(k.passage, batch[k.passage].band_index(k.start, k.end)));
    loss += neg_log_mass(lp);
  }
  if (factorization.has(Factor::kPassage)) {
    std::vector<double> lp;
    for (std::size_t p : ann.passages) lp.push_back(d.log_passage(p));
    loss += neg_log_mass(lp);
  }
  return loss;
}

double loss_joint_marginalized(std::span<const ReaderScores> batch,
                               std::span<const SpanAnnotation> annotations,
                               Factorization factorization) {
  const ResolvedAnnotations ann = resolve(batch, annotations);
  const ReaderDists d = normalize_reader_scores(batch);
  std::vector<double> lp;
  for (const auto& k : ann.spans)
    lp.push_back(span_log_prob(d, k.passage, k.start, k.end, batch[k.passage].band_index(k.start, k.end),
                               factorization));
  return neg_log_mass(lp);
}

std::pair<double, double> verify_inter_intra_identity(std::span<const ReaderScores> batch,
                                                      std::span<const SpanAnnotation> annotations) {
  const ResolvedAnnotations ann = resolve(batch, annotations);
  const ReaderDists d = normalize_reader_scores(batch);
  std::vector<double> ls, le;
  for (const auto& k : ann.starts) ls.push_back(d.log_start(k.passage, k.position));
  for (const auto& k : ann.ends) le.push_back(d.log_end(k.passage, k.position));
  const double lhs = neg_log_mass(ls) + neg_log_mass(le);
  std::vector<double> cross;
  cross.reserve(ls.size() * le.size());
  for (double a : ls)
    for (double b : le) cross.push_back(a + b);
  return {lhs, neg_log_mass(cross)};
}

std::vector<ReaderScoreGrad> loss_independent_grad(std::span<const ReaderScores> batch,
                                                   std::span<const SpanAnnotation> annotations,
                                                   Factorization factorization) {
  const ResolvedAnnotations ann = resolve(batch, annotations);
  const ReaderDists d = normalize_reader_scores(batch);
  std::vector<ReaderScoreGrad> grad(batch.size());
  for (std::size_t p = 0; p < batch.size(); ++p) {
    grad[p].d_start.assign(batch[p].length, 0.0);
    grad[p].d_end.assign(batch[p].length, 0.0);
    grad[p].d_joint.assign(batch[p].s_joint.size(), 0.0);
  }
  // d/ds [logsumexp(all) - logsumexp(annotated)] = P(i) - P(i | annotated).
  auto pooled = [](auto&& each_member, auto&& log_prob_of, auto&& annotated, auto&& add) {
    std::vector<double> lp;
    for (const auto& k : annotated) lp.push_back(log_prob_of(k));
    const double z = log_sum_exp(lp);
    each_member([&](const auto& key, double log_p) { add(key, std::exp(log_p)); });
    for (const auto& k : annotated) add(k, -std::exp(log_prob_of(k) - z));
  };
  if (factorization.has(Factor::kIndependent)) {
    pooled(
        [&](auto&& f) {
          for (std::size_t p = 0; p < batch.size(); ++p)
            for (std::size_t i = 0; i < batch[p].length; ++i)
              if (d.log_start(p, i) != kNegInf) f(TokenKey{p, i}, d.log_start(p, i));
        },
        [&](const TokenKey& k) { return d.log_start(k.passage, k.position); }, ann.starts,
        [&](const TokenKey& k, double v) { grad[k.passage].d_start[k.position] += v; });
    pooled(
        [&](auto&& f) {
          for (std::size_t p = 0; p < batch.size(); ++p)
            for (std::size_t i = 0; i < batch[p].length; ++i)
              if (d.log_end(p, i) != kNegInf) f(TokenKey{p, i}, d.log_end(p, i));
        },
        [&](const TokenKey& k) { return d.log_end(k.passage, k.position); }, ann.ends,
        [&](const TokenKey& k, double v) { grad[k.passage].d_end[k.position] += v; });
  }
  if (factorization.has(Factor::kJoint)) {
    auto band = [&](const SpanKey& k) { return batch[k.passage].band_index(k.start, k.end); };
    pooled(
        [&](auto&& f) {
          for (std::size_t p = 0; p < batch.size(); ++p)
            for (std::size_t b = 0; b < batch[p].s_joint.size(); ++b)
              if (d.log_joint(p, b) != kNegInf) {
                const std::size_t w = batch[p].max_span_len;
                f(SpanKey{p, b / w, b / w + b % w}, d.log_joint(p, b));
              }
        },
        [&](const SpanKey& k) { return d.log_joint(k.passage, band(k)); }, ann.spans,
        [&](const SpanKey& k, double v) { grad[k.passage].d_joint[band(k)] += v; });
  }
  if (factorization.has(Factor::kPassage)) {
    pooled(
        [&](auto&& f) {
          for (std::size_t p = 0; p < batch.size(); ++p) f(p, d.log_passage(p));
        },
        [&](std::size_t p) { return d.log_passage(p); }, ann.passages,
        [&](std::size_t p, double v) { grad[p].d_passage += v; });
  }
  return grad;
}

ScoredList reader_passage_ordering(std::span<const ReaderScores> batch, const std::string& question_id) {
  require_nonempty(batch);
  std::vector<ScoredEntry> entries;
  entries.reserve(batch.size());
  for (const auto& r : batch) entries.push_back({r.passage_id, r.s_passage});
  return ScoredList(question_id, std::move(entries));
}

}  // namespace qafuse
