#include "cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <map>
#include <memory>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "qafuse/error.hpp"
#include "qafuse/eval.hpp"
#include "qafuse/fuse.hpp"
#include "qafuse/io.hpp"
#include "qafuse/match.hpp"
#include "qafuse/parallel.hpp"
#include "qafuse/pipeline.hpp"
#include "qafuse/rank.hpp"
#include "qafuse/reader.hpp"
#include "qafuse/synth.hpp"
#include "qafuse/toy.hpp"

namespace qafuse::cli {
namespace {

namespace fs = std::filesystem;

constexpr int kUsage = 1;
constexpr int kSchema = 2;
constexpr int kRuntime = 3;

struct Args {
  std::string data_dir;

  std::string input, output, corpus, questions, run, reranked, spans, generative, scores, scores_output;
  std::string reader, reranker_model, aggregation, bd, predictions, labels, split, stage;
  std::vector<std::string> ensemble_readers;
  std::string features = "e,g,r,rr";
  std::string factorization = "IJC";
  std::string mode = "naive";
  std::string punctuation = "unicode";
  std::string ks = "1,5,20,100";

  RunConfig config;
  bool no_reranker = false;
  bool binary_tensors = false;
  bool v_set = false;
  double learning_rate = 0.0;
  std::size_t epochs = 0;

  SoftMatchWorkload workload;

  fs::path path(const std::string& p) const {
    fs::path out(p);
    if (out.is_relative() && !data_dir.empty()) return fs::path(data_dir) / out;
    return out;
  }
  fs::path in(const std::string& p, const std::string& stage) const {
    fs::path resolved = path(p);
    io::require_file(resolved, stage);
    return resolved;
  }
};

std::vector<std::size_t> parse_ks(const std::string& text) {
  std::vector<std::size_t> ks;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty() || item.find_first_not_of("0123456789") != std::string::npos)
      throw Error("invalid k value '" + item + "'");
    ks.push_back(std::stoul(item));
  }
  if (ks.empty()) throw Error("no k values given");
  return ks;
}

// Applies the string-valued config flags onto RunConfig.
void finish_config(Args& a) {
  a.config.mode = parse_fusion_mode(a.mode);
  a.config.features = FeatureConfig::parse(a.features);
  a.config.factorization = Factorization::parse(a.factorization);
  a.config.use_reranker = !a.no_reranker;
  if (a.no_reranker && !a.v_set) a.config.V = 128;
  a.config.validate();
}

std::unique_ptr<Corpus> load_corpus(const Args& a) {
  return std::make_unique<Corpus>(io::read_corpus(a.in(a.corpus, "ingest-corpus")));
}

std::vector<Question> load_questions(const Args& a) {
  return io::read_questions(a.in(a.questions, "make-toy"));
}

const ScoredList& run_for(const RunSet& runs, const std::string& qid, const std::string& what) {
  auto it = runs.find(qid);
  if (it == runs.end()) throw Error("no " + what + " entry for question " + qid);
  return it->second;
}

template <class Record>
std::map<std::string, const Record*> by_question(const std::vector<Record>& records) {
  std::map<std::string, const Record*> out;
  for (const auto& r : records)
    if (!out.emplace(r.question_id, &r).second) throw Error("duplicate record for question " + r.question_id);
  return out;
}

// Reassembles per-question component outputs from stage files.
std::vector<QuestionOutputs> load_outputs(const Args& a, std::span<const Question> questions,
                                          const FeatureConfig& features) {
  const RunSet runs = io::read_run(a.in(a.run, "retrieve"));
  RunSet reranked;
  if (!a.reranked.empty()) reranked = io::read_run(a.in(a.reranked, "rerank"));
  else if (features.rr) throw Error("feature rr needs --reranked");
  const auto spans = io::read_spans(a.in(a.spans, "read-extractive"));
  const auto generative = io::read_generative(a.in(a.generative, "read-generative"));
  const auto spans_by_q = by_question(spans);
  std::map<std::string, const GenerativeOutput*> gen_by_q;
  for (const auto& g : generative)
    if (!gen_by_q.emplace(g.question_id, &g).second) throw Error("duplicate generative record for " + g.question_id);

  std::vector<QuestionOutputs> out;
  for (const auto& q : questions) {
    QuestionOutputs o;
    o.question_id = q.id;
    o.retriever = run_for(runs, q.id, "retrieval run").prefix(a.config.K).log_probs();
    o.reranker = reranked.empty() ? o.retriever : rerank_probs(run_for(reranked, q.id, "reranked run"));
    auto s = spans_by_q.find(q.id);
    if (s == spans_by_q.end()) throw Error("no extractive spans for question " + q.id);
    o.spans = s->second->spans;
    auto g = gen_by_q.find(q.id);
    if (g == gen_by_q.end()) throw Error("no generative output for question " + q.id);
    o.generative = *g->second;
    out.push_back(std::move(o));
  }
  return out;
}

std::vector<double> load_reader_params(const Args& a, const std::string& file) {
  if (file.empty()) return DeskReader::default_params();
  auto model = io::read_reader_model(a.in(file, "make-toy"));
  if (model.param_names != DeskReader::param_names())
    throw SchemaError(file, 1, "reader parameters do not match the desk reader's feature set");
  return model.params;
}

std::vector<double> load_reranker_weights(const Args& a, const LexicalRerankFeatures& features) {
  if (a.reranker_model.empty()) return LinearReranker::default_lexical_weights();
  auto model = io::read_reranker_model(a.in(a.reranker_model, "rerank-train"));
  if (model.feature_names != features.names())
    throw SchemaError(a.reranker_model, 1, "reranker features do not match the lexical feature set");
  return model.w;
}

// Subcommands.

int cmd_ingest(const Args& a, std::ostream& out) {
  auto passages = io::read_corpus_any(a.in(a.input, "ingest-corpus"));
  Corpus check(passages);
  io::write_corpus(a.path(a.output), passages);
  out << "ingested " << passages.size() << " passages\n";
  return 0;
}

int cmd_retrieve(const Args& a, std::ostream& out) {
  auto corpus = load_corpus(a);
  const auto questions = load_questions(a);
  TfidfRetriever retriever(*corpus);
  std::vector<ScoredList> lists(questions.size());
  parallel_for(questions.size(), a.config.jobs,
               [&](std::size_t i) { lists[i] = retriever.retrieve(questions[i], a.config.K); });
  RunSet runs;
  for (std::size_t i = 0; i < questions.size(); ++i) runs[questions[i].id] = std::move(lists[i]);
  io::write_run(a.path(a.output), runs);
  out << "retrieved top-" << a.config.K << " for " << questions.size() << " questions\n";
  return 0;
}

int cmd_rerank_train(const Args& a, std::ostream& out) {
  auto corpus = load_corpus(a);
  const auto questions = load_questions(a);
  const RunSet runs = io::read_run(a.in(a.run, "retrieve"));
  TfidfRetriever retriever(*corpus);
  auto features = std::make_shared<LexicalRerankFeatures>(retriever);

  RerankHyper hyper;
  hyper.instance_size = a.config.n;
  hyper.negative_pool = a.config.negative_pool;
  hyper.rescore_depth = a.config.K;
  hyper.seed = a.config.seed;
  if (a.learning_rate > 0) hyper.learning_rate = a.learning_rate;
  if (a.epochs > 0) hyper.epochs = a.epochs;
  hyper.validate();

  Rng rng(hyper.seed);
  std::vector<RerankGroup> groups;
  std::size_t skipped = 0;
  for (const auto& q : questions) {
    const ScoredList& run = run_for(runs, q.id, "retrieval run");
    auto instance = build_training_instance(q, run, *corpus, hyper, rng);
    if (!instance) {
      ++skipped;
      continue;
    }
    groups.push_back(resolve_instance(*instance, q, run, *corpus));
  }
  if (groups.empty()) throw Error("no reranker training instances could be built");

  LinearReranker reranker(features, LinearReranker::default_lexical_weights());
  const TrainTrace trace = train_reranker(groups, reranker, hyper);
  io::write_reranker_model(a.path(a.output), {features->names(), trace.parameters});
  out << "trained on " << groups.size() << " instances (" << skipped << " skipped), loss "
      << trace.loss_trace.front() << " -> " << trace.loss_trace.back() << "\n";
  return 0;
}

int cmd_rerank(const Args& a, std::ostream& out) {
  auto corpus = load_corpus(a);
  const auto questions = load_questions(a);
  const RunSet runs = io::read_run(a.in(a.run, "retrieve"));
  TfidfRetriever retriever(*corpus);
  auto features = std::make_shared<LexicalRerankFeatures>(retriever);
  LinearReranker reranker(features, load_reranker_weights(a, *features));
  std::vector<ScoredList> lists(questions.size());
  parallel_for(questions.size(), a.config.jobs, [&](std::size_t i) {
    lists[i] = rerank(questions[i], run_for(runs, questions[i].id, "retrieval run"), *corpus, reranker,
                      a.config.K);
  });
  RunSet out_runs;
  for (std::size_t i = 0; i < questions.size(); ++i) out_runs[questions[i].id] = std::move(lists[i]);
  io::write_run(a.path(a.output), out_runs);
  out << "reranked " << questions.size() << " questions\n";
  return 0;
}

int cmd_annotate(const Args& a, std::ostream& out) {
  auto corpus = load_corpus(a);
  const auto questions = load_questions(a);
  const RunSet runs = io::read_run(a.in(a.run, "retrieve"));
  std::vector<io::AnnotationsRecord> records(questions.size());
  parallel_for(questions.size(), a.config.jobs, [&](std::size_t i) {
    const Question& q = questions[i];
    const ScoredList top = run_for(runs, q.id, "run").prefix(a.config.V);
    std::vector<std::string> ids;
    for (const auto& e : top.entries()) ids.push_back(e.passage_id);
    records[i] = {q.id, annotate_example(q, *corpus, ids, q.golden_passage_id)};
  });
  std::size_t total = 0;
  for (const auto& r : records) total += r.annotations.size();
  io::write_annotations(a.path(a.output), records);
  out << "annotated " << questions.size() << " questions with " << total << " spans\n";
  return 0;
}

int cmd_filter(const Args& a, std::ostream& out) {
  auto corpus = load_corpus(a);
  const auto questions = load_questions(a);
  const RunSet runs = io::read_run(a.in(a.run, "retrieve"));
  const FilterResult result = a.stage == "reranker"
                                  ? filter_for_reranker(questions, runs, *corpus, a.config.K)
                                  : filter_for_extractive(questions, runs, *corpus);
  io::write_questions(a.path(a.output), result.kept);
  out << "kept " << result.report.kept << ", dropped_no_positive " << result.report.dropped_no_positive
      << ", dropped_no_annotation " << result.report.dropped_no_annotation << "\n";
  return 0;
}

int cmd_read_extractive(const Args& a, std::ostream& out) {
  auto corpus = load_corpus(a);
  const auto questions = load_questions(a);
  std::vector<io::SpansRecord> records(questions.size());

  if (!a.scores.empty()) {
    const auto scores = io::read_reader_scores(a.in(a.scores, "read-extractive"));
    std::map<std::string, std::vector<ReaderScores>> batches;
    for (const auto& r : scores) batches[r.question_id].push_back(r.scores);
    parallel_for(questions.size(), a.config.jobs, [&](std::size_t i) {
      auto it = batches.find(questions[i].id);
      if (it == batches.end()) throw Error("no reader scores for question " + questions[i].id);
      auto spans = decode_top_m(it->second, a.config.M, a.config.factorization);
      for (auto& s : spans) s.surface = reader_span_surface(*corpus, s.passage_id, s.start, s.end);
      records[i] = {questions[i].id, std::move(spans)};
    });
  } else {
    const RunSet runs = io::read_run(a.in(a.run, "rerank"));
    TfidfRetriever retriever(*corpus);
    Pipeline pipe(*corpus, retriever, a.config);
    pipe.set_reader_params(load_reader_params(a, a.reader));
    std::vector<std::vector<io::ReaderScoresRecord>> dumped(questions.size());
    parallel_for(questions.size(), a.config.jobs, [&](std::size_t i) {
      const Question& q = questions[i];
      const ScoredList& ranked = run_for(runs, q.id, "reranked run");
      records[i] = {q.id, pipe.read_extractive(q, ranked)};
      if (!a.scores_output.empty()) {
        const ScoredList top = ranked.prefix(a.config.V);
        std::vector<std::string> ids;
        for (const auto& e : top.entries()) ids.push_back(e.passage_id);
        for (auto& s : pipe.reader().score_batch(q, ids)) dumped[i].push_back({q.id, std::move(s)});
      }
    });
    if (!a.scores_output.empty()) {
      std::vector<io::ReaderScoresRecord> flat;
      for (auto& d : dumped)
        for (auto& r : d) flat.push_back(std::move(r));
      io::write_reader_scores(a.path(a.scores_output), flat, a.binary_tensors);
    }
  }
  io::write_spans(a.path(a.output), records);
  out << "decoded top-" << a.config.M << " spans for " << questions.size() << " questions\n";
  return 0;
}

int cmd_read_generative(const Args& a, std::ostream& out) {
  auto corpus = load_corpus(a);
  const auto questions = load_questions(a);
  const RunSet runs = io::read_run(a.in(a.run, "rerank"));
  const auto spans = io::read_spans(a.in(a.spans, "read-extractive"));
  const auto spans_by_q = by_question(spans);
  UnigramScorer scorer;
  std::vector<GenerativeOutput> outputs(questions.size());
  parallel_for(questions.size(), a.config.jobs, [&](std::size_t i) {
    const Question& q = questions[i];
    auto s = spans_by_q.find(q.id);
    if (s == spans_by_q.end()) throw Error("no extractive spans for question " + q.id);
    const auto passages = assemble_reader_input(run_for(runs, q.id, "reranked run"), *corpus, a.config.V2);
    outputs[i] = run_generative(scorer, q, passages, s->second->spans);
  });
  io::write_generative(a.path(a.output), outputs);
  out << "scored generative answers for " << questions.size() << " questions\n";
  return 0;
}

int cmd_fuse_train(const Args& a, std::ostream& out) {
  const auto questions = load_questions(a);
  const auto outputs = load_outputs(a, questions, a.config.features);
  const auto dataset = build_aggregation_dataset(outputs, questions, a.config.features);
  if (dataset.empty()) throw Error("no " + a.split + " question has an EM-correct candidate");
  FuseHyper hyper;
  if (a.learning_rate > 0) hyper.learning_rate = a.learning_rate;
  if (a.epochs > 0) hyper.epochs = a.epochs;
  const auto trained = train_aggregation(dataset, a.config.features, hyper);
  io::write_aggregation_model(a.path(a.output), trained.model);
  out << "aggregation trained on " << dataset.size() << " " << a.split << " questions, loss "
      << trained.loss_trace.front() << " -> " << trained.loss_trace.back() << "\n";
  return 0;
}

int cmd_bd_train(const Args& a, std::ostream& out) {
  const auto questions = load_questions(a);
  const auto model = io::read_aggregation_model(a.in(a.aggregation, "fuse-train"));
  const auto outputs = load_outputs(a, questions, model.config());
  std::vector<BdCase> cases;
  for (const auto& o : outputs) {
    const auto candidates = fusion_candidates(o, model.config());
    const Selection sel = aggregate_and_select(model, candidates);
    cases.push_back({o.question_id, candidates[sel.index].span.surface, sel.s_agg, o.generative.greedy_answer,
                     o.generative.greedy_log_prob});
  }
  const auto dataset = build_bd_dataset(cases, questions);
  if (dataset.empty()) throw Error("no " + a.split + " question has exactly one correct prediction");
  FuseHyper hyper;
  if (a.learning_rate > 0) hyper.learning_rate = a.learning_rate;
  if (a.epochs > 0) hyper.epochs = a.epochs;
  const auto trained = train_binary_decider(dataset, hyper);
  io::write_binary_decider(a.path(a.output), trained.decider);
  out << "binary decider trained on " << dataset.size() << " " << a.split << " questions, loss "
      << trained.loss_trace.front() << " -> " << trained.loss_trace.back() << "\n";
  return 0;
}

int cmd_predict(const Args& a, std::ostream& out) {
  auto corpus = load_corpus(a);
  const auto questions = load_questions(a);
  TfidfRetriever retriever(*corpus);
  Pipeline pipe(*corpus, retriever, a.config);
  pipe.set_reader_params(load_reader_params(a, a.reader));
  pipe.set_reranker_weights(load_reranker_weights(a, LexicalRerankFeatures(retriever)));

  if (!a.generative.empty()) {
    auto table = std::make_shared<TableScorer>();
    for (const auto& g : io::read_generative(a.in(a.generative, "read-generative")))
      table->add(g.question_id, {g.greedy_answer, g.greedy_log_prob, g.reranked});
    pipe.set_generative(table);
  }

  std::vector<Prediction> predictions;
  if (!a.ensemble_readers.empty()) {
    std::vector<std::vector<double>> members{pipe.reader().params()};
    for (const auto& file : a.ensemble_readers) members.push_back(load_reader_params(a, file));
    predictions = pipe.predict_ensemble(questions, members);
  } else {
    std::optional<AggregationModel> agg;
    std::optional<BinaryDecider> bd;
    if (a.config.mode != FusionMode::kNaive) {
      if (a.aggregation.empty()) throw Error("mode " + a.mode + " needs --aggregation");
      agg = io::read_aggregation_model(a.in(a.aggregation, "fuse-train"));
    }
    if (a.config.mode == FusionMode::kAggrBd) {
      if (a.bd.empty()) throw Error("mode aggr+bd needs --bd");
      bd = io::read_binary_decider(a.in(a.bd, "bd-train"));
    }
    predictions = pipe.predict(questions, agg ? &*agg : nullptr, bd ? &*bd : nullptr);
  }
  io::write_predictions(a.path(a.output), predictions);
  out << "wrote " << predictions.size() << " predictions\n";
  return 0;
}

void print_row(std::ostream& out, const ReportRow& row) {
  out << std::left << std::setw(14) << row.metric << std::setw(22) << row.key << std::right
      << std::fixed << std::setprecision(4) << std::setw(8) << row.value << std::setw(8) << row.n << "\n";
  out.unsetf(std::ios::floatfield);
}

int cmd_evaluate(const Args& a, std::ostream& out) {
  const auto questions = load_questions(a);
  const PunctuationMode mode = a.punctuation == "ascii" ? PunctuationMode::kAscii : PunctuationMode::kUnicode;
  std::vector<ReportRow> rows;

  if (!a.predictions.empty()) {
    const auto predictions = io::read_predictions(a.in(a.predictions, "predict"));
    const EmResult em = em_score(predictions, questions, mode);
    rows.push_back({"em", "", em.em, em.n});
    if (em.skipped_no_gold > 0) out << "warning: " << em.skipped_no_gold << " questions without gold answers skipped\n";
    if (!a.labels.empty()) {
      const auto labels = io::read_labels(a.in(a.labels, "make-toy"));
      const OverlapReport report = overlap_report(predictions, questions, labels, mode);
      for (const auto& [subset, r] : report.subsets) rows.push_back({"em", std::string(to_string(subset)), r.em, r.n});
    }
  }
  if (!a.run.empty()) {
    auto corpus = load_corpus(a);
    const RunSet runs = io::read_run(a.in(a.run, "retrieve"));
    const auto ks = parse_ks(a.ks);
    std::size_t n = 0;
    for (const auto& q : questions) n += q.gold_answers.empty() ? 0 : 1;
    for (const auto& [k, acc] : accuracy_at_k(runs, questions, *corpus, ks))
      rows.push_back({"accuracy", std::to_string(k), acc, n});
  }
  if (rows.empty()) throw Error("nothing to evaluate: give --predictions and/or --run");

  for (const auto& row : rows) print_row(out, row);
  if (!a.output.empty()) io::write_report(a.path(a.output), rows);
  return 0;
}

int cmd_bench(const Args& a, std::ostream& out) {
  const auto cases = make_softmatch_cases(a.workload);
  const SoftMatchTiming t = time_softmatch(cases);
  out << "passages              " << t.cases << "\n"
      << "brute_force_ms        " << t.brute_force_ms_per_passage << "\n"
      << "pruned_ms             " << t.pruned_ms_per_passage << "\n"
      << "speedup               " << t.speedup() << "\n"
      << "spans_scored          " << t.brute_force_spans << " vs " << t.pruned_spans << "\n"
      << "identical             " << (t.mismatches == 0 ? "100%" : "NO (" + std::to_string(t.mismatches) + " differ)")
      << "\n";
  return t.mismatches == 0 ? 0 : kRuntime;
}

int cmd_make_toy(const Args& a, std::ostream& out) {
  const auto fixture = make_toy_fixture(a.config.seed);
  write_toy_fixture(fixture, a.path(a.output));
  out << "toy fixture: " << fixture.corpus.size() << " passages, " << fixture.validation.size()
      << " validation and " << fixture.test.size() << " test questions\n";
  return 0;
}

// Option registration helpers.

void opt_corpus(CLI::App* c, Args& a) { c->add_option("--corpus", a.corpus, "corpus JSONL")->required(); }
void opt_questions(CLI::App* c, Args& a) { c->add_option("--questions", a.questions, "questions JSONL")->required(); }
void opt_output(CLI::App* c, Args& a) { c->add_option("--output,-o", a.output, "output file")->required(); }
void opt_jobs(CLI::App* c, Args& a) {
  c->add_option("--jobs", a.config.jobs, "worker threads")->check(CLI::PositiveNumber);
}
void opt_K(CLI::App* c, Args& a) { c->add_option("--K", a.config.K, "retrieval depth")->check(CLI::PositiveNumber); }
void opt_reader_shape(CLI::App* c, Args& a) {
  c->add_option("--V", a.config.V, "extractive reader passages")->check(CLI::PositiveNumber)
      ->each([&a](const std::string&) { a.v_set = true; });
  c->add_option("--M", a.config.M, "fusion candidates")->check(CLI::PositiveNumber);
  c->add_option("--max_span_len", a.config.max_span_len, "longest decodable span")->check(CLI::PositiveNumber);
  c->add_option("--factorization", a.factorization, "active factors among I, J, C");
}
void opt_training(CLI::App* c, Args& a) {
  c->add_option("--learning_rate", a.learning_rate, "gradient descent step")->check(CLI::PositiveNumber);
  c->add_option("--epochs", a.epochs, "gradient descent epochs")->check(CLI::PositiveNumber);
}
void opt_fusion_inputs(CLI::App* c, Args& a) {
  opt_questions(c, a);
  c->add_option("--split", a.split, "which split the questions come from")
      ->required()
      ->check(CLI::IsMember({"train", "validation"}));
  c->add_option("--run", a.run, "retrieval run")->required();
  c->add_option("--reranked", a.reranked, "reranked run");
  c->add_option("--spans", a.spans, "extractive spans")->required();
  c->add_option("--generative", a.generative, "generative outputs")->required();
  opt_K(c, a);
  opt_training(c, a);
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  Args a;
  if (const char* dir = std::getenv("QAFUSE_DATA_DIR")) a.data_dir = dir;

  CLI::App app{"qafuse: retriever, reranker and reader fusion for open-domain QA"};
  app.require_subcommand(1);
  app.add_option("--data-dir", a.data_dir, "base directory for relative paths (default: $QAFUSE_DATA_DIR)");

  std::map<CLI::App*, int (*)(const Args&, std::ostream&)> handlers;

  auto* c = app.add_subcommand("ingest-corpus", "validate a corpus (JSONL or id/text/title TSV) and write it");
  c->add_option("--input", a.input, "source corpus")->required();
  opt_output(c, a);
  handlers[c] = cmd_ingest;

  c = app.add_subcommand("retrieve", "TF-IDF retrieval of the top-K passages");
  opt_corpus(c, a), opt_questions(c, a), opt_output(c, a), opt_K(c, a), opt_jobs(c, a);
  handlers[c] = cmd_retrieve;

  c = app.add_subcommand("rerank-train", "train the linear passage reranker");
  opt_corpus(c, a), opt_questions(c, a), opt_output(c, a), opt_training(c, a);
  c->add_option("--run", a.run, "retrieval run")->required();
  c->add_option("--n", a.config.n, "instance size (one positive, n-1 negatives)")->check(CLI::Range(2, 1 << 20));
  c->add_option("--negative_pool", a.config.negative_pool, "negatives are sampled from this depth")
      ->check(CLI::PositiveNumber);
  c->add_option("--K", a.config.K, "inference rescoring depth")->check(CLI::PositiveNumber);
  c->add_option("--seed", a.config.seed, "sampling seed");
  handlers[c] = cmd_rerank_train;

  c = app.add_subcommand("rerank", "rescore a retrieval run with the reranker");
  opt_corpus(c, a), opt_questions(c, a), opt_output(c, a), opt_K(c, a), opt_jobs(c, a);
  c->add_option("--run", a.run, "retrieval run")->required();
  c->add_option("--model", a.reranker_model, "trained reranker (default weights otherwise)");
  handlers[c] = cmd_rerank;

  c = app.add_subcommand("annotate", "distant-supervision span annotations over the top-V passages");
  opt_corpus(c, a), opt_questions(c, a), opt_output(c, a), opt_jobs(c, a);
  c->add_option("--run", a.run, "retrieval or reranked run")->required();
  c->add_option("--V", a.config.V, "passages to annotate")->check(CLI::PositiveNumber);
  handlers[c] = cmd_annotate;

  c = app.add_subcommand("filter", "drop training questions without usable supervision");
  opt_corpus(c, a), opt_questions(c, a), opt_output(c, a), opt_K(c, a);
  c->add_option("--run", a.run, "retrieval run")->required();
  c->add_option("--stage", a.stage, "reranker or extractive")->required()->check(CLI::IsMember({"reranker", "extractive"}));
  handlers[c] = cmd_filter;

  c = app.add_subcommand("read-extractive", "decode top-M answer spans");
  opt_corpus(c, a), opt_questions(c, a), opt_output(c, a), opt_reader_shape(c, a), opt_jobs(c, a);
  c->add_option("--run", a.run, "reranked run (desk reader)");
  c->add_option("--reader", a.reader, "desk reader parameters");
  c->add_option("--scores", a.scores, "precomputed reader scores instead of the desk reader");
  c->add_option("--scores-output", a.scores_output, "also write the desk reader's score tensors");
  c->add_flag("--binary-tensors", a.binary_tensors, "store tensors in a float64 side file");
  c->add_flag("--no-reranker", a.no_reranker, "the run is a plain retrieval run (V defaults to 128)");
  handlers[c] = cmd_read_extractive;

  c = app.add_subcommand("read-generative", "generative reranking of the extractive spans");
  opt_corpus(c, a), opt_questions(c, a), opt_output(c, a), opt_jobs(c, a);
  c->add_option("--run", a.run, "reranked run")->required();
  c->add_option("--spans", a.spans, "extractive spans")->required();
  c->add_option("--V2", a.config.V2, "generative reader passages")->check(CLI::PositiveNumber);
  handlers[c] = cmd_read_generative;

  c = app.add_subcommand("fuse-train", "fit the score aggregation on validation data");
  opt_fusion_inputs(c, a), opt_output(c, a);
  c->add_option("--features", a.features, "comma-separated subset of e,g,r,rr");
  handlers[c] = cmd_fuse_train;

  c = app.add_subcommand("bd-train", "fit the extractive/abstractive binary decider");
  opt_fusion_inputs(c, a), opt_output(c, a);
  c->add_option("--aggregation", a.aggregation, "aggregation model")->required();
  handlers[c] = cmd_bd_train;

  c = app.add_subcommand("predict", "run the full pipeline and write predictions");
  opt_corpus(c, a), opt_questions(c, a), opt_output(c, a), opt_K(c, a), opt_reader_shape(c, a), opt_jobs(c, a);
  c->add_option("--V2", a.config.V2, "generative reader passages")->check(CLI::PositiveNumber);
  c->add_option("--mode", a.mode, "naive, aggr or aggr+bd")->check(CLI::IsMember({"naive", "aggr", "aggr+bd"}));
  c->add_option("--seed", a.config.seed, "run seed");
  c->add_option("--reader", a.reader, "desk reader parameters");
  c->add_option("--reranker", a.reranker_model, "trained reranker");
  c->add_option("--aggregation", a.aggregation, "aggregation model");
  c->add_option("--bd", a.bd, "binary decider model");
  c->add_option("--generative", a.generative, "generative scores to use instead of the unigram reader");
  c->add_option("--ensemble-reader", a.ensemble_readers,
                "posterior-average --reader with these desk readers instead of fusing");
  c->add_flag("--no-reranker", a.no_reranker, "read retrieval order directly (V defaults to 128)");
  handlers[c] = cmd_predict;

  c = app.add_subcommand("evaluate", "exact match, overlap subsets and Accuracy@K");
  opt_questions(c, a);
  c->add_option("--predictions", a.predictions, "predictions JSONL");
  c->add_option("--labels", a.labels, "overlap labels JSONL");
  c->add_option("--run", a.run, "run for Accuracy@K");
  c->add_option("--corpus", a.corpus, "corpus, needed with --run");
  c->add_option("--ks", a.ks, "comma-separated K values");
  c->add_option("--punctuation", a.punctuation, "unicode or ascii")->check(CLI::IsMember({"unicode", "ascii"}));
  c->add_option("--output,-o", a.output, "report JSON");
  handlers[c] = cmd_evaluate;

  c = app.add_subcommand("bench-softmatch", "time pruned against brute-force soft matching");
  c->add_option("--passages", a.workload.passages)->check(CLI::PositiveNumber);
  c->add_option("--passage_length", a.workload.passage_length)->check(CLI::PositiveNumber);
  c->add_option("--answer_length", a.workload.answer_length)->check(CLI::PositiveNumber);
  c->add_option("--vocabulary", a.workload.vocabulary)->check(CLI::PositiveNumber);
  c->add_option("--seed", a.workload.seed);
  handlers[c] = cmd_bench;

  c = app.add_subcommand("make-toy", "write the bundled toy fixture");
  c->add_option("--output,-o", a.output, "directory")->required();
  c->add_option("--seed", a.config.seed, "fixture seed");
  handlers[c] = cmd_make_toy;

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? 0 : kUsage;
  }

  try {
    finish_config(a);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  }

  try {
    for (auto* sub : app.get_subcommands()) return handlers.at(sub)(a, out);
  } catch (const SchemaError& e) {
    err << "schema error: " << e.what() << "\n";
    return kSchema;
  } catch (const MissingInputError& e) {
    err << "error: " << e.what() << "\n";
    return kRuntime;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kRuntime;
  }
  return kUsage;
}

}  // namespace qafuse::cli
