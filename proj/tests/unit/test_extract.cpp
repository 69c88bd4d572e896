#include <cmath>
#include <set>
#include <tuple>

#include "doctest.h"
#include "qafuse/corpus.hpp"
#include "qafuse/extract.hpp"
#include "qafuse/reader.hpp"
#include "support.hpp"

using namespace qafuse;
namespace qt = qafuse::testing;

namespace {

ReaderScores point_mass(const std::string& id) {
  ReaderScores r = ReaderScores::uniform(id, 1, 1);
  r.s_start = {0.3};
  r.s_end = {-1.0};
  r.s_joint = {2.0};
  r.s_passage = 5.0;
  return r;
}

ReaderScores with_scores(const std::string& id, std::vector<double> start, std::vector<double> end,
                         std::size_t w, double passage) {
  ReaderScores r = ReaderScores::uniform(id, start.size(), w);
  r.s_start = std::move(start);
  r.s_end = std::move(end);
  r.s_passage = passage;
  return r;
}

// Sum over annotated spans of the explicit product, in the linear domain.
double explicit_marginal(const std::vector<ReaderScores>& batch, const std::vector<SpanAnnotation>& ann,
                         Factorization f) {
  const auto d = qt::linear_dists(batch);
  std::set<std::tuple<std::size_t, std::size_t, std::size_t>> seen;
  double total = 0.0;
  for (const auto& a : ann) {
    std::size_t p = 0;
    while (batch[p].passage_id != a.passage_id) ++p;
    if (!seen.insert({p, a.start, a.end}).second) continue;
    double v = 1.0;
    if (f.has(Factor::kIndependent)) v *= d.start[p][a.start] * d.end[p][a.end];
    if (f.has(Factor::kJoint)) v *= d.joint[p][batch[p].band_index(a.start, a.end)];
    if (f.has(Factor::kPassage)) v *= d.passage[p];
    total += v;
  }
  return -std::log(total);
}

// Explicit evaluation of the independent loss in the linear domain.
double explicit_independent(const std::vector<ReaderScores>& batch, const std::vector<SpanAnnotation>& ann,
                            Factorization f) {
  const auto d = qt::linear_dists(batch);
  std::set<std::pair<std::size_t, std::size_t>> starts, ends;
  std::set<std::tuple<std::size_t, std::size_t, std::size_t>> spans;
  std::set<std::size_t> passages;
  for (const auto& a : ann) {
    std::size_t p = 0;
    while (batch[p].passage_id != a.passage_id) ++p;
    starts.insert({p, a.start});
    ends.insert({p, a.end});
    spans.insert({p, a.start, a.end});
    passages.insert(p);
  }
  double loss = 0.0;
  if (f.has(Factor::kIndependent)) {
    double s = 0, e = 0;
    for (auto [p, i] : starts) s += d.start[p][i];
    for (auto [p, i] : ends) e += d.end[p][i];
    loss += -std::log(s) - std::log(e);
  }
  if (f.has(Factor::kJoint)) {
    double j = 0;
    for (auto [p, s, e] : spans) j += d.joint[p][batch[p].band_index(s, e)];
    loss += -std::log(j);
  }
  if (f.has(Factor::kPassage)) {
    double c = 0;
    for (auto p : passages) c += d.passage[p];
    loss += -std::log(c);
  }
  return loss;
}

}  // namespace

TEST_SUITE("extract") {

TEST_CASE("factorization parsing") {
  CHECK(Factorization::parse("IJC") == Factorization::full());
  CHECK(Factorization::parse("J,C").to_string() == "JC");
  CHECK(Factorization::parse("i+c").to_string() == "IC");
  CHECK(Factorization::all().size() == 7);
  CHECK_THROWS_AS(Factorization::parse(""), Error);
  CHECK_THROWS_AS(Factorization::parse("IX"), Error);
}

TEST_CASE("one valid token gives point masses") {
  const std::vector<ReaderScores> batch{point_mass("p")};
  const auto d = normalize_reader_scores(batch);
  CHECK(d.log_start(0, 0) == 0.0);
  CHECK(d.log_end(0, 0) == 0.0);
  CHECK(d.log_joint(0, 0) == 0.0);
  CHECK(d.log_passage(0) == 0.0);
  const auto spans = decode_top_m(batch, 5);
  REQUIRE(spans.size() == 1);
  CHECK(spans[0].log_p_e == 0.0);
  CHECK(loss_independent(batch, std::vector<SpanAnnotation>{{"p", 0, 0}}) == 0.0);
  CHECK(loss_joint_marginalized(batch, std::vector<SpanAnnotation>{{"p", 0, 0}}) == 0.0);
}

TEST_CASE("identical passages split the passage distribution") {
  const std::vector<ReaderScores> batch{point_mass("a"), point_mass("b")};
  const auto d = normalize_reader_scores(batch);
  CHECK(std::exp(d.log_passage(0)) == doctest::Approx(0.5));
  CHECK(std::exp(d.log_passage(1)) == doctest::Approx(0.5));
}

TEST_CASE("start distribution pools both passages") {
  const std::vector<ReaderScores> batch{with_scores("a", {1, 2, 3}, {0, 0, 0}, 3, 0),
                                        with_scores("b", {0.5, -1, 4}, {0, 0, 0}, 3, 0)};
  const auto d = normalize_reader_scores(batch);
  const std::vector<double> pooled{1, 2, 3, 0.5, -1, 4};
  double z = 0;
  for (double v : pooled) z += std::exp(v);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(std::exp(d.log_start(0, i)) == doctest::Approx(std::exp(pooled[i]) / z).epsilon(1e-12));
    CHECK(std::exp(d.log_start(1, i)) == doctest::Approx(std::exp(pooled[3 + i]) / z).epsilon(1e-12));
  }
}

TEST_CASE("normalization errors") {
  ReaderScores r = ReaderScores::uniform("a", 3, 2);
  std::fill(r.span_mask.begin(), r.span_mask.end(), 0);
  CHECK_THROWS_WITH_AS(normalize_reader_scores(std::vector<ReaderScores>{r}), "no decodable span", Error);
  CHECK_THROWS_AS(normalize_reader_scores(std::vector<ReaderScores>{}), Error);
  ReaderScores bad = ReaderScores::uniform("a", 3, 2);
  bad.s_start.pop_back();
  CHECK_THROWS_AS(normalize_reader_scores(std::vector<ReaderScores>{bad}), Error);
  ReaderScores past = ReaderScores::uniform("a", 3, 2);
  past.span_mask[past.band_index(2, 2) + 1] = 1;
  CHECK_THROWS_AS(normalize_reader_scores(std::vector<ReaderScores>{past}), Error);
  CHECK_THROWS_AS(normalize_reader_scores(std::vector<ReaderScores>{point_mass("a"), point_mass("a")}), Error);
}

TEST_CASE("pooled distributions sum to one") {
  Rng rng(41);
  for (int trial = 0; trial < 200; ++trial) {
    const auto batch = qt::random_batch(rng, 5, 30, 8, false);
    const auto d = normalize_reader_scores(batch);
    CHECK(d.start_dist().total_mass() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(d.end_dist().total_mass() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(d.joint_dist(batch).total_mass() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(d.passage_dist().total_mass() == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("uniform scores give ln N terms") {
  const std::vector<ReaderScores> batch{ReaderScores::uniform("a", 4, 1), ReaderScores::uniform("b", 4, 1)};
  const std::vector<SpanAnnotation> ann{{"a", 2, 2}};
  // 8 starts, 8 ends, 8 single-token spans, 2 passages.
  const double expected = 3 * std::log(8.0) + std::log(2.0);
  CHECK(loss_independent(batch, ann) == doctest::Approx(expected));
  CHECK(loss_independent(batch, ann, Factorization::parse("J")) == doctest::Approx(std::log(8.0)));
}

TEST_CASE("two equally likely annotated spans") {
  const std::vector<ReaderScores> batch{ReaderScores::uniform("a", 5, 2)};
  const std::vector<SpanAnnotation> ann{{"a", 0, 0}, {"a", 3, 3}};
  const double p = std::exp(span_log_prob(normalize_reader_scores(batch), 0, 0, 0, 0, Factorization::parse("J")));
  CHECK(loss_joint_marginalized(batch, ann, Factorization::parse("J")) == doctest::Approx(-std::log(2 * p)));
}

TEST_CASE("losses match explicit summation") {
  Rng rng(42);
  for (int trial = 0; trial < 300; ++trial) {
    const auto batch = qt::random_batch(rng, 4, 10, 4, false);
    const auto ann = qt::random_annotations(rng, batch, 1 + rng.uniform_index(4));
    for (auto f : Factorization::all()) {
      CHECK(loss_independent(batch, ann, f) ==
            doctest::Approx(explicit_independent(batch, ann, f)).epsilon(1e-10));
      CHECK(loss_joint_marginalized(batch, ann, f) ==
            doctest::Approx(explicit_marginal(batch, ann, f)).epsilon(1e-10));
    }
  }
}

TEST_CASE("loss is zero exactly when the annotated mass is total") {
  Rng rng(43);
  for (int trial = 0; trial < 200; ++trial) {
    const auto batch = qt::random_batch(rng, 3, 6, 3, false);
    const auto ann = qt::random_annotations(rng, batch, 2);
    CHECK(loss_independent(batch, ann, Factorization::parse("JC")) >= 0.0);
  }
  const std::vector<ReaderScores> single{point_mass("a")};
  CHECK(loss_independent(single, std::vector<SpanAnnotation>{{"a", 0, 0}}, Factorization::parse("JC")) == 0.0);
}

TEST_CASE("annotation errors") {
  const std::vector<ReaderScores> batch{ReaderScores::uniform("a", 3, 2)};
  CHECK_THROWS_WITH_AS(loss_independent(batch, std::vector<SpanAnnotation>{}), "no supervision", Error);
  CHECK_THROWS_AS(loss_independent(batch, std::vector<SpanAnnotation>{{"zz", 0, 0}}), Error);
  CHECK_THROWS_AS(loss_independent(batch, std::vector<SpanAnnotation>{{"a", 0, 2}}), Error);
}

TEST_CASE("inter and intra passage identity") {
  const std::vector<ReaderScores> batch{with_scores("a", {0.1, 0.7, -0.4, 1.2}, {0.3, -0.2, 0.9, 0.0}, 4, 0),
                                        with_scores("b", {0.5, 0.2, 1.0}, {-0.6, 0.4, 0.8}, 3, 0)};
  const std::vector<SpanAnnotation> single{{"a", 1, 2}};
  const auto d = normalize_reader_scores(batch);
  auto [l1, r1] = verify_inter_intra_identity(batch, single);
  CHECK(l1 == doctest::Approx(-d.log_start(0, 1) - d.log_end(0, 2)));
  CHECK(r1 == doctest::Approx(l1).epsilon(1e-12));

  // Starts {a0, a1, b0} and ends {a2, b1}: six cross terms.
  const std::vector<SpanAnnotation> ann{{"a", 0, 2}, {"a", 1, 2}, {"b", 0, 1}};
  const auto lin = qt::linear_dists(batch);
  const double starts[] = {lin.start[0][0], lin.start[0][1], lin.start[1][0]};
  const double ends[] = {lin.end[0][2], lin.end[1][1]};
  double cross = 0;
  for (double s : starts)
    for (double e : ends) cross += s * e;
  auto [l2, r2] = verify_inter_intra_identity(batch, ann);
  CHECK(r2 == doctest::Approx(-std::log(cross)).epsilon(1e-12));
  CHECK(l2 == doctest::Approx(r2).epsilon(1e-12));
}

TEST_CASE("decode agrees with brute-force enumeration") {
  Rng rng(44);
  for (int trial = 0; trial < 100; ++trial) {
    const auto batch = qt::random_batch(rng, 5, 30, 6, trial % 2 == 0);
    for (auto f : Factorization::all()) {
      const auto oracle = qt::oracle_decode(batch, f);
      const std::size_t m = 1 + rng.uniform_index(oracle.size() + 5);
      const auto spans = decode_top_m(batch, m, f);
      REQUIRE(spans.size() == std::min(m, oracle.size()));
      for (std::size_t i = 0; i < spans.size(); ++i) {
        CHECK(spans[i].passage_id == batch[oracle[i].passage].passage_id);
        CHECK(spans[i].start == oracle[i].start);
        CHECK(spans[i].end == oracle[i].end);
        CHECK(spans[i].log_p_e == doctest::Approx(oracle[i].log_p).epsilon(1e-12));
        CHECK(batch[oracle[i].passage].valid(spans[i].start, spans[i].end));
      }
    }
  }
}

TEST_CASE("decoded log_p_e is the sum of the components") {
  Rng rng(45);
  const auto batch = qt::random_batch(rng, 4, 12, 5, false);
  for (const auto& s : decode_top_m(batch, 30))
    CHECK(s.log_p_e == doctest::Approx(s.log_p_start + s.log_p_end + s.log_p_joint + s.log_p_passage));
}

TEST_CASE("passage factor favors the dominant passage") {
  auto a = with_scores("a", {0, 0, 0}, {0, 0, 0}, 3, 10.0);
  auto b = with_scores("b", {0, 0, 0}, {0, 0, 0}, 3, 0.0);
  a.s_joint[a.band_index(0, 0)] = 0.5;
  b.s_joint[b.band_index(0, 0)] = 1.0;
  const std::vector<ReaderScores> batch{a, b};
  CHECK(decode_top_m(batch, 1, Factorization::parse("J"))[0].passage_id == "b");
  const auto full = decode_top_m(batch, 12);
  for (std::size_t i = 0; i < 6; ++i) CHECK(full[i].passage_id == "a");
}

TEST_CASE("decode returns every valid span when M is large and skips masked ones") {
  Rng rng(46);
  for (int trial = 0; trial < 50; ++trial) {
    const auto batch = qt::random_batch(rng, 3, 10, 4, false);
    std::size_t valid = 0;
    for (const auto& r : batch)
      for (std::size_t s = 0; s < r.length; ++s)
        for (std::size_t e = s; e < r.length; ++e) valid += r.valid(s, e);
    const auto spans = decode_top_m(batch, valid + 10);
    CHECK(spans.size() == valid);
  }
  CHECK_THROWS_AS(decode_top_m(std::vector<ReaderScores>{point_mass("a")}, 0), Error);
}

TEST_CASE("a constant added to every joint score keeps the decoded order") {
  Rng rng(47);
  for (int trial = 0; trial < 50; ++trial) {
    auto batch = qt::random_batch(rng, 4, 12, 4, false);
    const auto before = decode_top_m(batch, 20);
    const double c = rng.uniform(-20, 20);
    for (auto& r : batch)
      for (auto& v : r.s_joint) v += c;
    const auto after = decode_top_m(batch, 20);
    REQUIRE(before.size() == after.size());
    for (std::size_t i = 0; i < before.size(); ++i) {
      CHECK(before[i].passage_id == after[i].passage_id);
      CHECK(before[i].start == after[i].start);
      CHECK(before[i].end == after[i].end);
    }
  }
}

TEST_CASE("loss gradient matches central differences") {
  Rng rng(48);
  for (int trial = 0; trial < 30; ++trial) {
    auto batch = qt::random_batch(rng, 3, 6, 3, false);
    const auto ann = qt::random_annotations(rng, batch, 2);
    const Factorization f = Factorization::all()[rng.uniform_index(7)];
    const auto grad = loss_independent_grad(batch, ann, f);
    auto probe = [&](double& slot, double analytic) {
      const double keep = slot;
      slot = keep + 1e-5;
      const double up = loss_independent(batch, ann, f);
      slot = keep - 1e-5;
      const double down = loss_independent(batch, ann, f);
      slot = keep;
      const double numeric = (up - down) / 2e-5;
      CHECK(analytic == doctest::Approx(numeric).epsilon(1e-5).scale(1.0));
    };
    for (std::size_t p = 0; p < batch.size(); ++p) {
      for (std::size_t i = 0; i < batch[p].length; ++i) {
        probe(batch[p].s_start[i], grad[p].d_start[i]);
        probe(batch[p].s_end[i], grad[p].d_end[i]);
      }
      for (std::size_t b = 0; b < batch[p].s_joint.size(); ++b)
        if (batch[p].span_mask[b]) probe(batch[p].s_joint[b], grad[p].d_joint[b]);
      probe(batch[p].s_passage, grad[p].d_passage);
    }
  }
}

TEST_CASE("reader passage ordering") {
  std::vector<ReaderScores> batch{point_mass("p0"), point_mass("p1"), point_mass("p2")};
  batch[0].s_passage = 3;
  batch[1].s_passage = 1;
  batch[2].s_passage = 2;
  auto order = reader_passage_ordering(batch);
  CHECK(order[0].passage_id == "p0");
  CHECK(order[1].passage_id == "p2");
  CHECK(order[2].passage_id == "p1");
  for (auto& r : batch) r.s_passage = 0;
  auto tied = reader_passage_ordering(batch);
  CHECK(tied[0].passage_id == "p0");
  CHECK(tied[1].passage_id == "p1");
  CHECK(tied[2].passage_id == "p2");
}

}

TEST_SUITE("reader") {

TEST_CASE("desk reader masks the title and finds the answer after the question context") {
  Corpus corpus({{"p", "Plzen", "the capital of bokami is dorelu and the river is tesani"},
                 {"q", "Other", "some unrelated filler text about nothing in particular"}});
  TfidfRetriever r(corpus);
  DeskReader reader(r, DeskReader::default_params(), 10);
  Question question{"q1", "what is the capital of bokami?", {"dorelu"}, std::nullopt};
  const auto scores = reader.score(question, 0);
  CHECK(scores.length == 12);
  CHECK_FALSE(scores.valid(0, 0));
  CHECK(scores.valid(1, 1));
  const std::vector<std::string> ids{"p", "q"};
  const auto batch = reader.score_batch(question, ids);
  const auto top = decode_top_m(batch, 1);
  REQUIRE(top.size() == 1);
  CHECK(reader_span_surface(corpus, top[0].passage_id, top[0].start, top[0].end) == "dorelu");
  CHECK_THROWS_AS(reader_span_surface(corpus, "p", 0, 1), Error);
}

TEST_CASE("desk reader parameter gradient matches central differences") {
  Corpus corpus({{"p", "T", "alpha beta gamma delta answer epsilon"}, {"q", "", "beta zeta answer eta"}});
  TfidfRetriever r(corpus);
  DeskReader reader(r, DeskReader::default_params(), 4);
  Question question{"q1", "beta gamma?", {"answer"}, std::nullopt};
  const std::vector<std::string> ids{"p", "q"};
  const std::vector<SpanAnnotation> ann{{"p", 5, 5}, {"q", 2, 2}};
  std::vector<double> grad;
  reader.accumulate_gradient(question, ids, loss_independent_grad(reader.score_batch(question, ids), ann), grad);
  const auto base = reader.params();
  for (std::size_t k = 0; k < base.size(); ++k) {
    auto up = base, down = base;
    up[k] += 1e-5;
    down[k] -= 1e-5;
    reader.set_params(up);
    const double lu = loss_independent(reader.score_batch(question, ids), ann);
    reader.set_params(down);
    const double ld = loss_independent(reader.score_batch(question, ids), ann);
    CHECK(grad[k] == doctest::Approx((lu - ld) / 2e-5).epsilon(1e-5).scale(1.0));
  }
  reader.set_params(base);
  CHECK_THROWS_AS(reader.set_params({1.0}), Error);
  CHECK(DeskReader::param_names().size() == DeskReader::kParams);
}

}
