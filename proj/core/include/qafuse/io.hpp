#pragma once

// JSONL interchange formats. Every file starts with a header record
// {"format": "qafuse.<kind>", "version": 1}; each following line is one record.
// Writers go through AtomicWriter so a failed stage never leaves a partial file.

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qafuse/eval.hpp"
#include "qafuse/extract.hpp"
#include "qafuse/fuse.hpp"
#include "qafuse/generate.hpp"
#include "qafuse/match.hpp"
#include "qafuse/types.hpp"

namespace qafuse::io {

inline constexpr int kFormatVersion = 1;

/// Writes to `<path>.tmp` and renames onto `path` on commit(); the temporary is
/// removed if the writer is destroyed uncommitted.
class AtomicWriter {
 public:
  explicit AtomicWriter(std::filesystem::path path, bool binary = false);
  ~AtomicWriter();
  AtomicWriter(const AtomicWriter&) = delete;
  AtomicWriter& operator=(const AtomicWriter&) = delete;

  std::ostream& stream() { return out_; }
  void commit();

 private:
  std::filesystem::path path_;
  std::filesystem::path tmp_;
  std::ofstream out_;
  bool committed_ = false;
};

/// Throws MissingInputError naming `stage` when `path` does not exist.
void require_file(const std::filesystem::path& path, const std::string& stage);

std::vector<Question> read_questions(const std::filesystem::path& path);
void write_questions(const std::filesystem::path& path, std::span<const Question> questions);

std::vector<Passage> read_corpus(const std::filesystem::path& path);
void write_corpus(const std::filesystem::path& path, std::span<const Passage> passages);
/// Tab-separated id, text, title rows with a header line (the common dump layout).
std::vector<Passage> read_corpus_tsv(const std::filesystem::path& path);
/// Headerless {id, title, context} JSONL or a qafuse corpus file.
std::vector<Passage> read_corpus_any(const std::filesystem::path& path);

/// Records {qid, pid, score, rank}; rank is 1-based and must agree with score order.
RunSet read_run(const std::filesystem::path& path);
void write_run(const std::filesystem::path& path, const RunSet& runs);

struct ReaderScoresRecord {
  std::string question_id;
  ReaderScores scores;
};

/// With `binary_tensors`, tensors go to a little-endian float64 container
/// `<path>.f64` referenced from each record instead of inline arrays.
std::vector<ReaderScoresRecord> read_reader_scores(const std::filesystem::path& path);
void write_reader_scores(const std::filesystem::path& path, std::span<const ReaderScoresRecord> records,
                         bool binary_tensors = false);

struct SpansRecord {
  std::string question_id;
  std::vector<AnswerSpan> spans;
};
std::vector<SpansRecord> read_spans(const std::filesystem::path& path);
void write_spans(const std::filesystem::path& path, std::span<const SpansRecord> records);

std::vector<GenerativeOutput> read_generative(const std::filesystem::path& path);
void write_generative(const std::filesystem::path& path, std::span<const GenerativeOutput> outputs);

std::vector<Prediction> read_predictions(const std::filesystem::path& path);
void write_predictions(const std::filesystem::path& path, std::span<const Prediction> predictions);

std::map<std::string, OverlapSubset> read_labels(const std::filesystem::path& path);
void write_labels(const std::filesystem::path& path, const std::map<std::string, OverlapSubset>& labels);

struct AnnotationsRecord {
  std::string question_id;
  std::vector<AnswerAnnotation> annotations;
};
std::vector<AnnotationsRecord> read_annotations(const std::filesystem::path& path);
void write_annotations(const std::filesystem::path& path, std::span<const AnnotationsRecord> records);

/// {feature_names: [...], w: [...], b: real}
AggregationModel read_aggregation_model(const std::filesystem::path& path);
void write_aggregation_model(const std::filesystem::path& path, const AggregationModel& model);

/// {feature_names: ["s_agg", "s_g_star"], w: [w0, w1], b: real}
BinaryDecider read_binary_decider(const std::filesystem::path& path);
void write_binary_decider(const std::filesystem::path& path, const BinaryDecider& decider);

/// {feature_names: [...], w: [...]} for the linear reranker.
struct RerankerModel {
  std::vector<std::string> feature_names;
  std::vector<double> w;
};
RerankerModel read_reranker_model(const std::filesystem::path& path);
void write_reranker_model(const std::filesystem::path& path, const RerankerModel& model);

/// {param_names: [...], params: [...], max_span_len: int} for the desk reader.
struct ReaderModel {
  std::vector<std::string> param_names;
  std::vector<double> params;
  std::size_t max_span_len = 30;
};
ReaderModel read_reader_model(const std::filesystem::path& path);
void write_reader_model(const std::filesystem::path& path, const ReaderModel& model);

/// JSON array of {metric, k | subset, value, n}.
void write_report(const std::filesystem::path& path, std::span<const ReportRow> rows);
std::vector<ReportRow> read_report(const std::filesystem::path& path);

}  // namespace qafuse::io
