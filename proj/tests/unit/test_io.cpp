#include <filesystem>
#include <fstream>
#include <unistd.h>

#include "doctest.h"
#include "qafuse/io.hpp"
#include "qafuse/toy.hpp"
#include "support.hpp"

using namespace qafuse;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    static int counter = 0;
    path = fs::temp_directory_path() / ("qafuse-io-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  fs::path operator/(const std::string& name) const { return path / name; }
};

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

}  // namespace

TEST_SUITE("io") {

TEST_CASE("questions and corpus round-trip") {
  TempDir dir;
  const std::vector<Question> qs{{"q1", "what is \"x\"?", {"a", "b\tc"}, std::nullopt},
                                 {"q2", "ünïcode ✓", {}, std::string("p9")}};
  io::write_questions(dir / "q.jsonl", qs);
  const auto back = io::read_questions(dir / "q.jsonl");
  REQUIRE(back.size() == 2);
  CHECK(back[0].text == qs[0].text);
  CHECK(back[0].gold_answers == qs[0].gold_answers);
  CHECK_FALSE(back[0].golden_passage_id);
  CHECK(back[1].golden_passage_id == std::optional<std::string>("p9"));

  const std::vector<Passage> ps{{"p1", "", "text one"}, {"p2", "Title", "text\ntwo"}};
  io::write_corpus(dir / "c.jsonl", ps);
  const auto cb = io::read_corpus(dir / "c.jsonl");
  REQUIRE(cb.size() == 2);
  CHECK(cb[1].title == "Title");
  CHECK(cb[1].context == "text\ntwo");
}

TEST_CASE("the toy fixture round-trips through its files") {
  TempDir dir;
  const auto fx = make_toy_fixture();
  write_toy_fixture(fx, dir.path);
  const auto corpus = io::read_corpus(dir / "corpus.jsonl");
  REQUIRE(corpus.size() == fx.corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    CHECK(corpus[i].id == fx.corpus[i].id);
    CHECK(corpus[i].context == fx.corpus[i].context);
  }
  CHECK(io::read_questions(dir / "test.jsonl").size() == fx.test.size());
  CHECK(io::read_labels(dir / "test-labels.jsonl") == fx.test_labels);
  CHECK(io::read_reader_model(dir / "reader.json").params == fx.reader_params);
  CHECK(io::read_reader_model(dir / "reader-variant.json").params == fx.reader_variant_params);
}

TEST_CASE("corpus TSV and headerless JSONL") {
  TempDir dir;
  write_text(dir / "c.tsv", "id\ttext\ttitle\np1\t\"quoted, text\"\tT1\np2\tplain\t\n");
  const auto tsv = io::read_corpus_any(dir / "c.tsv");
  REQUIRE(tsv.size() == 2);
  CHECK(tsv[0].context == "quoted, text");
  CHECK(tsv[0].title == "T1");
  CHECK(tsv[1].title == "");

  write_text(dir / "raw.jsonl", "{\"id\":\"a\",\"title\":\"\",\"context\":\"x\"}\n");
  CHECK(io::read_corpus_any(dir / "raw.jsonl").size() == 1);
  write_text(dir / "bad.tsv", "id\tbody\np1\tx\n");
  CHECK_THROWS_AS(io::read_corpus_tsv(dir / "bad.tsv"), SchemaError);
}

TEST_CASE("runs round-trip and ranks must agree with scores") {
  TempDir dir;
  RunSet runs;
  runs.emplace("q", ScoredList("q", {{"a", 0.5}, {"b", 1.25}, {"c", -3.0}}));
  runs.emplace("r", ScoredList("r", {{"x", 0.1}}));
  io::write_run(dir / "run.jsonl", runs);
  const auto back = io::read_run(dir / "run.jsonl");
  REQUIRE(back.size() == 2);
  CHECK(back.at("q").entries() == runs.at("q").entries());

  write_text(dir / "bad.jsonl",
             "{\"format\":\"qafuse.run\",\"version\":1}\n"
             "{\"qid\":\"q\",\"pid\":\"a\",\"score\":1.0,\"rank\":2}\n"
             "{\"qid\":\"q\",\"pid\":\"b\",\"score\":2.0,\"rank\":1}\n"
             "{\"qid\":\"q\",\"pid\":\"c\",\"score\":3.0,\"rank\":3}\n");
  try {
    io::read_run(dir / "bad.jsonl");
    FAIL("expected a schema error");
  } catch (const SchemaError& e) {
    CHECK(e.line() >= 2);
  }
}

TEST_CASE("schema errors carry the line number") {
  TempDir dir;
  write_text(dir / "q.jsonl", "{\"format\":\"qafuse.questions\",\"version\":1}\n{\"id\":\"a\",\"text\":5,\"answers\":[]}\n");
  try {
    io::read_questions(dir / "q.jsonl");
    FAIL("expected a schema error");
  } catch (const SchemaError& e) {
    CHECK(e.line() == 2);
    CHECK(std::string(e.what()).find("text") != std::string::npos);
  }
  write_text(dir / "wrong.jsonl", "{\"format\":\"qafuse.run\",\"version\":1}\n");
  CHECK_THROWS_AS(io::read_questions(dir / "wrong.jsonl"), SchemaError);
  write_text(dir / "v2.jsonl", "{\"format\":\"qafuse.questions\",\"version\":2}\n");
  CHECK_THROWS_AS(io::read_questions(dir / "v2.jsonl"), SchemaError);
  write_text(dir / "junk.jsonl", "{\"format\":\"qafuse.questions\",\"version\":1}\nnot json\n");
  CHECK_THROWS_AS(io::read_questions(dir / "junk.jsonl"), SchemaError);
  CHECK_THROWS_AS(io::read_questions(dir / "absent.jsonl"), Error);
}

TEST_CASE("reader scores round-trip inline and through the float64 side file") {
  TempDir dir;
  Rng rng(81);
  std::vector<io::ReaderScoresRecord> records;
  for (int q = 0; q < 3; ++q)
    for (auto& r : qafuse::testing::random_batch(rng, 3, 9, 4, false))
      records.push_back({"q" + std::to_string(q), r});
  for (bool binary : {false, true}) {
    const fs::path p = dir / (binary ? "bin.jsonl" : "inline.jsonl");
    io::write_reader_scores(p, records, binary);
    CHECK(fs::exists(fs::path(p.string() + ".f64")) == binary);
    const auto back = io::read_reader_scores(p);
    REQUIRE(back.size() == records.size());
    for (std::size_t i = 0; i < back.size(); ++i) {
      const auto& a = records[i].scores;
      const auto& b = back[i].scores;
      CHECK(back[i].question_id == records[i].question_id);
      CHECK(b.passage_id == a.passage_id);
      CHECK(b.length == a.length);
      CHECK(b.max_span_len == a.max_span_len);
      CHECK(b.s_start == a.s_start);
      CHECK(b.s_end == a.s_end);
      CHECK(b.s_joint == a.s_joint);
      CHECK(b.span_mask == a.span_mask);
      CHECK(b.s_passage == a.s_passage);
    }
  }
}

TEST_CASE("spans, generative outputs, predictions, labels and annotations round-trip") {
  TempDir dir;
  AnswerSpan s;
  s.passage_id = "p";
  s.start = 3;
  s.end = 5;
  s.surface = "New York";
  s.log_p_start = -0.1;
  s.log_p_end = -0.2;
  s.log_p_joint = -0.3;
  s.log_p_passage = -0.4;
  s.log_p_e = -1.0;
  const std::vector<io::SpansRecord> spans{{"q", {s, s}}};
  io::write_spans(dir / "s.jsonl", spans);
  const auto sb = io::read_spans(dir / "s.jsonl");
  REQUIRE(sb.size() == 1);
  REQUIRE(sb[0].spans.size() == 2);
  CHECK(sb[0].spans[1].surface == "New York");
  CHECK(sb[0].spans[1].log_p_e == -1.0);
  CHECK(sb[0].spans[1].log_p_passage == -0.4);

  const std::vector<GenerativeOutput> gens{{"q", "york", -0.7, {{"New York", -1.5}, {"york", -0.7}}}};
  io::write_generative(dir / "g.jsonl", gens);
  const auto gb = io::read_generative(dir / "g.jsonl");
  CHECK(gb[0].reranked == gens[0].reranked);
  CHECK(gb[0].greedy_log_prob == -0.7);

  write_text(dir / "pos.jsonl",
             "{\"format\":\"qafuse.generative\",\"version\":1}\n"
             "{\"qid\":\"q\",\"greedy\":\"a\",\"greedy_logp\":0.5,\"reranked\":{}}\n");
  CHECK_THROWS_AS(io::read_generative(dir / "pos.jsonl"), SchemaError);

  const std::vector<Prediction> preds{{"q", "New York", AnswerSource::kAbstractive, -0.25}};
  io::write_predictions(dir / "p.jsonl", preds);
  const auto pb = io::read_predictions(dir / "p.jsonl");
  CHECK(pb[0].source == AnswerSource::kAbstractive);
  CHECK(pb[0].score == -0.25);

  const std::map<std::string, OverlapSubset> labels{{"a", OverlapSubset::kNoOverlap}, {"b", OverlapSubset::kQuestionOverlap}};
  io::write_labels(dir / "l.jsonl", labels);
  CHECK(io::read_labels(dir / "l.jsonl") == labels);

  const std::vector<io::AnnotationsRecord> ann{{"q", {{"p", 0, 1, 2, 0.8, true}, {"r", 1, 4, 4, 1.0, false}}}};
  io::write_annotations(dir / "a.jsonl", ann);
  CHECK(io::read_annotations(dir / "a.jsonl")[0].annotations == ann[0].annotations);
}

TEST_CASE("model files round-trip") {
  TempDir dir;
  AggregationModel m = AggregationModel::zeros(FeatureConfig::parse("e,g,rr"));
  m.w = {0.1, -2.5, 1e-3};
  m.b = 0.75;
  io::write_aggregation_model(dir / "agg.json", m);
  const auto mb = io::read_aggregation_model(dir / "agg.json");
  CHECK(mb.feature_names == m.feature_names);
  CHECK(mb.w == m.w);
  CHECK(mb.b == m.b);

  BinaryDecider d;
  d.w = {1.5, -0.5};
  d.b = 0.125;
  io::write_binary_decider(dir / "bd.json", d);
  const auto db = io::read_binary_decider(dir / "bd.json");
  CHECK(db.w == d.w);
  CHECK(db.b == d.b);

  io::write_reranker_model(dir / "rr.json", {{"x", "y"}, {0.5, 2.0}});
  CHECK(io::read_reranker_model(dir / "rr.json").w == std::vector<double>{0.5, 2.0});

  const std::vector<ReportRow> rows{{"em", "", 0.5, 10}, {"accuracy", "20", 0.75, 10}, {"em", "no_overlap", 1.0, 3}};
  io::write_report(dir / "r.json", rows);
  const auto rb = io::read_report(dir / "r.json");
  REQUIRE(rb.size() == 3);
  CHECK(rb[1].key == "20");
  CHECK(rb[2].key == "no_overlap");
  CHECK(rb[0].value == 0.5);

  write_text(dir / "badagg.json", "{\"feature_names\":[\"log_p_e\"],\"w\":[1,2],\"b\":0}");
  CHECK_THROWS_AS(io::read_aggregation_model(dir / "badagg.json"), Error);
}

TEST_CASE("atomic writer leaves nothing behind unless committed") {
  TempDir dir;
  {
    io::AtomicWriter w(dir / "out.txt");
    w.stream() << "partial";
  }
  CHECK_FALSE(fs::exists(dir / "out.txt"));
  CHECK_FALSE(fs::exists(dir / "out.txt.tmp"));
  write_text(dir / "keep.txt", "old");
  {
    io::AtomicWriter w(dir / "keep.txt");
    w.stream() << "new";
  }
  CHECK(read_text(dir / "keep.txt") == "old");
  {
    io::AtomicWriter w(dir / "keep.txt");
    w.stream() << "new";
    w.commit();
  }
  CHECK(read_text(dir / "keep.txt") == "new");
  CHECK_THROWS_AS(io::require_file(dir / "nope", "retrieve"), MissingInputError);
}

TEST_CASE("writing twice gives identical bytes") {
  TempDir dir;
  const auto fx = make_toy_fixture();
  io::write_corpus(dir / "a.jsonl", fx.corpus);
  io::write_corpus(dir / "b.jsonl", fx.corpus);
  CHECK(read_text(dir / "a.jsonl") == read_text(dir / "b.jsonl"));
}

}
