#include "qafuse/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <map>

#include "qafuse/error.hpp"
#include "qafuse/parallel.hpp"

namespace qafuse {

void RunConfig::validate() const {
  if (K == 0 || V == 0 || V2 == 0 || M == 0 || n < 2 || max_span_len == 0)
    throw Error("K, V, V2, M and max_span_len must be positive and n at least 2");
  if (V > K) throw Error("V (" + std::to_string(V) + ") exceeds K (" + std::to_string(K) + ")");
  if (V2 > K) throw Error("V2 (" + std::to_string(V2) + ") exceeds K (" + std::to_string(K) + ")");
  if (jobs == 0) throw Error("jobs must be at least 1");
  features.validate();
}

Pipeline::Pipeline(const Corpus& corpus, const TfidfRetriever& retriever, RunConfig config)
    : corpus_(corpus),
      retriever_(retriever),
      config_(std::move(config)),
      rerank_features_(std::make_shared<LexicalRerankFeatures>(retriever)),
      reranker_(rerank_features_, LinearReranker::default_lexical_weights()),
      reader_(retriever, DeskReader::default_params(), config_.max_span_len),
      generative_(std::make_shared<UnigramScorer>()) {
  config_.validate();
}

void Pipeline::set_reranker_weights(std::vector<double> weights) { reranker_.set_parameters(weights); }

void Pipeline::set_reader_params(std::vector<double> params) { reader_.set_params(std::move(params)); }

void Pipeline::set_generative(std::shared_ptr<const GenerativeScorer> scorer) {
  if (!scorer) throw Error("null generative scorer");
  generative_ = std::move(scorer);
}

ScoredList Pipeline::retrieve(const Question& question) const {
  return retriever_.retrieve(question, config_.K);
}

ScoredList Pipeline::rerank(const Question& question, const ScoredList& retrieved) const {
  if (!config_.use_reranker) return retrieved;
  return qafuse::rerank(question, retrieved, corpus_, reranker_, config_.K);
}

std::vector<AnswerSpan> Pipeline::read_extractive(const Question& question,
                                                  const ScoredList& ranked) const {
  return read_extractive(question, ranked, reader_);
}

std::vector<AnswerSpan> Pipeline::read_extractive(const Question& question, const ScoredList& ranked,
                                                  const DeskReader& reader) const {
  std::vector<std::string> ids;
  const ScoredList top = ranked.prefix(config_.V);
    for (const auto& e : top.entries()) ids.push_back(e.passage_id);
  if (ids.empty()) throw Error("no passages to read for question " + question.id);
  const auto batch = reader.score_batch(question, ids);
  auto spans = decode_top_m(batch, config_.M, config_.factorization);
  for (auto& s : spans) s.surface = reader_span_surface(corpus_, s.passage_id, s.start, s.end);
  return spans;
}

GenerativeOutput Pipeline::read_generative(const Question& question, const ScoredList& ranked,
                                           std::span<const AnswerSpan> spans) const {
  const auto passages = assemble_reader_input(ranked, corpus_, config_.V2);
  return run_generative(*generative_, question, passages, spans);
}

QuestionOutputs Pipeline::process(const Question& question) const {
  QuestionOutputs out;
  out.question_id = question.id;
  const ScoredList retrieved = retrieve(question);
  const ScoredList ranked = rerank(question, retrieved);
  out.retriever = retrieved.log_probs();
  out.reranker = rerank_probs(ranked);
  out.spans = read_extractive(question, ranked);
  out.generative = read_generative(question, ranked, out.spans);
  return out;
}

std::vector<QuestionOutputs> Pipeline::process_all(std::span<const Question> questions) const {
  std::vector<QuestionOutputs> out(questions.size());
  parallel_for(questions.size(), config_.jobs, [&](std::size_t i) { out[i] = process(questions[i]); });
  return out;
}

std::vector<Prediction> Pipeline::predict(std::span<const Question> questions,
                                          const AggregationModel* aggregation,
                                          const BinaryDecider* decider) const {
  std::vector<Prediction> out(questions.size());
  parallel_for(questions.size(), config_.jobs, [&](std::size_t i) {
    out[i] = run_fusion_pipeline(process(questions[i]), config_.mode, aggregation, decider);
  });
  return out;
}

std::vector<Prediction> Pipeline::predict_ensemble(
    std::span<const Question> questions, std::span<const std::vector<double>> member_params) const {
  if (member_params.size() < 2) throw Error("an ensemble needs at least two members");
  std::vector<DeskReader> members;
  for (const auto& params : member_params) members.emplace_back(retriever_, params, config_.max_span_len);

  std::vector<Prediction> out(questions.size());
  parallel_for(questions.size(), config_.jobs, [&](std::size_t i) {
    const Question& q = questions[i];
    const ScoredList ranked = rerank(q, retrieve(q));
    std::vector<std::string> ids;
    const ScoredList top = ranked.prefix(config_.V);
    for (const auto& e : top.entries()) ids.push_back(e.passage_id);
    std::vector<std::vector<ReaderScores>> batches;
    for (const auto& m : members) batches.push_back(m.score_batch(q, ids));
    const auto dists = ensemble_span_dists(batches, config_.M, config_.factorization);
    const std::string key = posterior_average_ensemble(dists);

    const auto tab = key.find('\t');
    const std::string pid = key.substr(0, tab);
    const std::size_t start = std::stoul(key.substr(tab + 1, 8));
    const std::size_t end = std::stoul(key.substr(tab + 10, 8));
    Prediction p;
    p.question_id = q.id;
    p.answer = reader_span_surface(corpus_, pid, start, end);
    p.source = AnswerSource::kExtractive;
    double mean = 0.0;
    for (const auto& d : dists) mean += d.prob(key);
    p.score = mean / static_cast<double>(dists.size());
    out[i] = std::move(p);
  });
  return out;
}

std::string span_key(const AnswerSpan& span) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "\t%08zu\t%08zu", span.start, span.end);
  return span.passage_id + buf;
}

std::vector<LogDist> ensemble_span_dists(std::span<const std::vector<ReaderScores>> members,
                                         std::size_t m, Factorization factorization) {
  if (members.empty()) throw Error("no ensemble members");
  const auto& ref = members.front();
  for (const auto& batch : members) {
    if (batch.size() != ref.size()) throw Error("ensemble members read different passages");
    for (std::size_t p = 0; p < batch.size(); ++p)
      if (batch[p].passage_id != ref[p].passage_id || batch[p].length != ref[p].length ||
          batch[p].max_span_len != ref[p].max_span_len)
        throw Error("ensemble members read different passages");
  }
  std::map<std::string, std::size_t> batch_index;
  for (std::size_t p = 0; p < ref.size(); ++p) batch_index[ref[p].passage_id] = p;

  std::vector<ReaderDists> dists;
  std::map<std::string, SpanKey> candidates;
  for (const auto& batch : members) {
    dists.push_back(normalize_reader_scores(batch));
    for (const auto& span : decode_top_m(batch, dists.back(), m, factorization))
      candidates.emplace(span_key(span), SpanKey{batch_index.at(span.passage_id), span.start, span.end});
  }

  std::vector<LogDist> out;
  for (std::size_t i = 0; i < members.size(); ++i) {
    std::vector<std::pair<std::string, double>> scores;
    for (const auto& [key, sk] : candidates) {
      const auto& scores_p = members[i][sk.passage];
      if (!scores_p.valid(sk.start, sk.end)) throw Error("ensemble member cannot decode span " + key);
      scores.emplace_back(key, span_log_prob(dists[i], sk.passage, sk.start, sk.end,
                                             scores_p.band_index(sk.start, sk.end), factorization));
    }
    out.push_back(softmax_over_set(std::move(scores)));
  }
  return out;
}

}  // namespace qafuse
