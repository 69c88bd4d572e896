#include "qafuse/io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <limits>
#include <sstream>

#include "json.hpp"

#include "qafuse/error.hpp"

namespace qafuse::io {

namespace fs = std::filesystem;
using nlohmann::json;

AtomicWriter::AtomicWriter(fs::path path, bool binary) : path_(std::move(path)) {
  tmp_ = path_;
  tmp_ += ".tmp";
  if (path_.has_parent_path()) fs::create_directories(path_.parent_path());
  out_.open(tmp_, binary ? std::ios::out | std::ios::trunc | std::ios::binary
                         : std::ios::out | std::ios::trunc);
  if (!out_) throw Error("cannot open " + tmp_.string() + " for writing");
}

AtomicWriter::~AtomicWriter() {
  if (committed_) return;
  out_.close();
  std::error_code ec;
  fs::remove(tmp_, ec);
}

void AtomicWriter::commit() {
  out_.flush();
  if (!out_) throw Error("write failed: " + tmp_.string());
  out_.close();
  fs::rename(tmp_, path_);
  committed_ = true;
}

void require_file(const fs::path& path, const std::string& stage) {
  if (!fs::exists(path)) throw MissingInputError(path.string(), stage);
}

namespace {

std::string format_name(std::string_view kind) { return "qafuse." + std::string(kind); }

// Reads a headed JSONL file record by record.
class JsonlReader {
 public:
  JsonlReader(const fs::path& path, std::string_view kind) : file_(path.string()), in_(path) {
    if (!in_) throw Error("cannot open " + file_);
    json header;
    if (!next(header)) throw SchemaError(file_, 1, "missing header record");
    if (!header.is_object() || !header.contains("format") || !header.contains("version"))
      fail("first record must be a {format, version} header");
    if (header["format"] != format_name(kind))
      fail("expected format " + format_name(kind) + ", got " + header["format"].dump());
    if (header["version"] != kFormatVersion)
      fail("unsupported version " + header["version"].dump());
  }

  bool next(json& record) {
    std::string line;
    while (std::getline(in_, line)) {
      ++line_;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      try {
        record = json::parse(line);
      } catch (const json::parse_error& e) {
        fail(std::string("invalid JSON: ") + e.what());
      }
      if (!record.is_object()) fail("record is not an object");
      return true;
    }
    return false;
  }

  [[noreturn]] void fail(const std::string& what) const { throw SchemaError(file_, line_, what); }

  template <class T>
  T get(const json& record, const char* key) const {
    auto it = record.find(key);
    if (it == record.end()) fail(std::string("missing field '") + key + "'");
    try {
      return it->get<T>();
    } catch (const json::exception&) {
      fail(std::string("field '") + key + "' has the wrong type");
    }
  }

  double real(const json& record, const char* key) const {
    auto it = record.find(key);
    if (it == record.end()) fail(std::string("missing field '") + key + "'");
    if (!it->is_number()) fail(std::string("field '") + key + "' is not a number");
    double v = it->get<double>();
    if (!std::isfinite(v)) fail(std::string("field '") + key + "' is not finite");
    return v;
  }

  std::size_t count(const json& record, const char* key) const {
    auto it = record.find(key);
    if (it == record.end()) fail(std::string("missing field '") + key + "'");
    if (!it->is_number_unsigned()) fail(std::string("field '") + key + "' is not a non-negative integer");
    return it->get<std::size_t>();
  }

  const std::string& file() const { return file_; }
  std::size_t line() const { return line_; }

 private:
  std::string file_;
  std::ifstream in_;
  std::size_t line_ = 0;
};

class JsonlWriter {
 public:
  JsonlWriter(const fs::path& path, std::string_view kind) : w_(path) {
    json header = {{"format", format_name(kind)}, {"version", kFormatVersion}};
    w_.stream() << header.dump() << '\n';
  }
  void put(const json& record) { w_.stream() << record.dump() << '\n'; }
  void commit() { w_.commit(); }

 private:
  AtomicWriter w_;
};

// Runs `fn` and rewrites library errors as schema errors at the reader's line.
template <class Fn>
auto at_line(const JsonlReader& r, Fn&& fn) {
  try {
    return fn();
  } catch (const SchemaError&) {
    throw;
  } catch (const Error& e) {
    r.fail(e.what());
  }
}

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw SchemaError(path.string(), 1, std::string("invalid JSON: ") + e.what());
  }
}

void write_json_file(const fs::path& path, const json& value) {
  AtomicWriter w(path);
  w.stream() << value.dump(2) << '\n';
  w.commit();
}

template <class T>
T field(const json& obj, const fs::path& path, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end()) throw SchemaError(path.string(), 1, std::string("missing field '") + key + "'");
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw SchemaError(path.string(), 1, std::string("field '") + key + "' has the wrong type");
  }
}

Passage passage_from(const JsonlReader& r, const json& rec) {
  return {r.get<std::string>(rec, "id"), r.get<std::string>(rec, "title"),
          r.get<std::string>(rec, "context")};
}

}  // namespace

// questions

std::vector<Question> read_questions(const fs::path& path) {
  JsonlReader r(path, "questions");
  std::vector<Question> out;
  json rec;
  while (r.next(rec)) {
    Question q;
    q.id = r.get<std::string>(rec, "id");
    q.text = r.get<std::string>(rec, "text");
    q.gold_answers = r.get<std::vector<std::string>>(rec, "answers");
    if (auto it = rec.find("golden_pid"); it != rec.end() && !it->is_null())
      q.golden_passage_id = r.get<std::string>(rec, "golden_pid");
    out.push_back(std::move(q));
  }
  return out;
}

void write_questions(const fs::path& path, std::span<const Question> questions) {
  JsonlWriter w(path, "questions");
  for (const auto& q : questions) {
    json rec = {{"id", q.id}, {"text", q.text}, {"answers", q.gold_answers}};
    if (q.golden_passage_id) rec["golden_pid"] = *q.golden_passage_id;
    w.put(rec);
  }
  w.commit();
}

// corpus

std::vector<Passage> read_corpus(const fs::path& path) {
  JsonlReader r(path, "corpus");
  std::vector<Passage> out;
  json rec;
  while (r.next(rec)) out.push_back(passage_from(r, rec));
  return out;
}

void write_corpus(const fs::path& path, std::span<const Passage> passages) {
  JsonlWriter w(path, "corpus");
  for (const auto& p : passages) w.put({{"id", p.id}, {"title", p.title}, {"context", p.context}});
  w.commit();
}

std::vector<Passage> read_corpus_tsv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::string line;
  std::size_t line_no = 0;
  std::vector<Passage> out;
  int col_id = -1, col_text = -1, col_title = -1;
  auto split = [](const std::string& s) {
    std::vector<std::string> cols;
    std::size_t start = 0;
    for (;;) {
      auto tab = s.find('\t', start);
      cols.push_back(s.substr(start, tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    return cols;
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    auto cols = split(line);
    if (line_no == 1) {
      for (int i = 0; i < static_cast<int>(cols.size()); ++i) {
        if (cols[i] == "id") col_id = i;
        if (cols[i] == "text") col_text = i;
        if (cols[i] == "title") col_title = i;
      }
      if (col_id < 0 || col_text < 0 || col_title < 0)
        throw SchemaError(path.string(), 1, "header must name id, text and title columns");
      continue;
    }
    if (line.empty()) continue;
    int need = std::max({col_id, col_text, col_title});
    if (static_cast<int>(cols.size()) <= need)
      throw SchemaError(path.string(), line_no, "expected at least " + std::to_string(need + 1) + " columns");
    auto unquote = [](std::string s) {
      if (s.size() >= 2 && s.front() == '"' && s.back() == '"') {
        s = s.substr(1, s.size() - 2);
        std::string o;
        for (std::size_t i = 0; i < s.size(); ++i) {
          o += s[i];
          if (s[i] == '"' && i + 1 < s.size() && s[i + 1] == '"') ++i;
        }
        return o;
      }
      return s;
    };
    out.push_back({cols[col_id], unquote(cols[col_title]), unquote(cols[col_text])});
  }
  return out;
}

std::vector<Passage> read_corpus_any(const fs::path& path) {
  if (path.extension() == ".tsv") return read_corpus_tsv(path);
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::string first;
  while (std::getline(in, first) && first.find_first_not_of(" \t\r") == std::string::npos) {
  }
  json head;
  try {
    head = json::parse(first);
  } catch (const json::parse_error& e) {
    throw SchemaError(path.string(), 1, std::string("invalid JSON: ") + e.what());
  }
  if (head.is_object() && head.contains("format")) return read_corpus(path);

  // Headerless {id, title, context} lines.
  in.clear();
  in.seekg(0);
  std::vector<Passage> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      json rec = json::parse(line);
      out.push_back({rec.at("id").get<std::string>(), rec.value("title", std::string()),
                     rec.at("context").get<std::string>()});
    } catch (const json::exception& e) {
      throw SchemaError(path.string(), line_no, e.what());
    }
  }
  return out;
}

// run

RunSet read_run(const fs::path& path) {
  JsonlReader r(path, "run");
  struct Row {
    std::string pid;
    double score;
    std::size_t rank;
    std::size_t line;
  };
  std::map<std::string, std::vector<Row>> rows;
  json rec;
  while (r.next(rec)) {
    auto qid = r.get<std::string>(rec, "qid");
    Row row{r.get<std::string>(rec, "pid"), r.real(rec, "score"), r.count(rec, "rank"), r.line()};
    if (row.rank == 0) r.fail("rank is 1-based");
    rows[qid].push_back(std::move(row));
  }
  RunSet runs;
  for (auto& [qid, list] : rows) {
    std::vector<ScoredEntry> entries;
    entries.reserve(list.size());
    for (const auto& row : list) entries.push_back({row.pid, row.score});
    ScoredList sorted;
    try {
      sorted = ScoredList(qid, std::move(entries));
    } catch (const Error& e) {
      throw SchemaError(path.string(), list.front().line, e.what());
    }
    std::map<std::string, std::size_t> position;
    for (std::size_t i = 0; i < sorted.size(); ++i) position[sorted[i].passage_id] = i + 1;
    for (const auto& row : list)
      if (position[row.pid] != row.rank)
        throw SchemaError(path.string(), row.line,
                          "rank " + std::to_string(row.rank) + " of passage " + row.pid +
                              " disagrees with score order (expected " +
                              std::to_string(position[row.pid]) + ")");
    runs.emplace(qid, std::move(sorted));
  }
  return runs;
}

void write_run(const fs::path& path, const RunSet& runs) {
  JsonlWriter w(path, "run");
  for (const auto& [qid, list] : runs)
    for (std::size_t i = 0; i < list.size(); ++i)
      w.put({{"qid", qid}, {"pid", list[i].passage_id}, {"score", list[i].score}, {"rank", i + 1}});
  w.commit();
}

// reader scores

namespace {

void put_f64(std::ostream& out, double v) {
  auto bits = std::bit_cast<std::uint64_t>(v);
  char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
  out.write(buf, 8);
}

std::vector<double> get_f64(std::ifstream& in, std::size_t offset, std::size_t n) {
  in.seekg(static_cast<std::streamoff>(offset * 8));
  std::vector<char> raw(n * 8);
  in.read(raw.data(), static_cast<std::streamsize>(raw.size()));
  if (static_cast<std::size_t>(in.gcount()) != raw.size()) throw Error("tensor container truncated");
  std::vector<double> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i)
      bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(raw[k * 8 + i])) << (8 * i);
    out[k] = std::bit_cast<double>(bits);
  }
  return out;
}

json band_rows(const std::vector<double>& band, std::size_t length, std::size_t width) {
  json rows = json::array();
  for (std::size_t s = 0; s < length; ++s)
    rows.push_back(std::vector<double>(band.begin() + static_cast<std::ptrdiff_t>(s * width),
                                       band.begin() + static_cast<std::ptrdiff_t>((s + 1) * width)));
  return rows;
}

}  // namespace

std::vector<ReaderScoresRecord> read_reader_scores(const fs::path& path) {
  JsonlReader r(path, "reader-scores");
  std::vector<ReaderScoresRecord> out;
  std::map<std::string, std::ifstream> containers;
  json rec;
  while (r.next(rec)) {
    ReaderScoresRecord item;
    item.question_id = r.get<std::string>(rec, "qid");
    auto& s = item.scores;
    s.passage_id = r.get<std::string>(rec, "pid");
    s.length = r.count(rec, "L");
    s.max_span_len = r.count(rec, "max_span_len");
    if (s.max_span_len == 0) r.fail("max_span_len must be positive");
    s.s_passage = r.real(rec, "s_passage");
    const std::size_t L = s.length, W = s.max_span_len;
    if (rec.contains("tensor_file")) {
      auto name = r.get<std::string>(rec, "tensor_file");
      auto offset = r.count(rec, "tensor_offset");
      auto& in = containers[name];
      if (!in.is_open()) {
        in.open(path.parent_path() / name, std::ios::binary);
        if (!in) r.fail("cannot open tensor container " + name);
      }
      auto data = at_line(r, [&] { return get_f64(in, offset, 2 * L + 2 * L * W); });
      auto at = data.begin();
      s.s_start.assign(at, at + L);
      at += L;
      s.s_end.assign(at, at + L);
      at += L;
      s.s_joint.assign(at, at + L * W);
      at += L * W;
      s.span_mask.resize(L * W);
      for (std::size_t i = 0; i < L * W; ++i) s.span_mask[i] = at[i] != 0.0;
    } else {
      s.s_start = r.get<std::vector<double>>(rec, "s_start");
      s.s_end = r.get<std::vector<double>>(rec, "s_end");
      auto joint = r.get<std::vector<std::vector<double>>>(rec, "s_joint_band");
      auto mask = r.get<std::vector<std::vector<int>>>(rec, "mask_band");
      if (joint.size() != L || mask.size() != L) r.fail("band tensors must have L rows");
      for (std::size_t i = 0; i < L; ++i) {
        if (joint[i].size() != W || mask[i].size() != W)
          r.fail("band row " + std::to_string(i) + " must have max_span_len entries");
        s.s_joint.insert(s.s_joint.end(), joint[i].begin(), joint[i].end());
        for (int m : mask[i]) {
          if (m != 0 && m != 1) r.fail("mask entries must be 0 or 1");
          s.span_mask.push_back(static_cast<std::uint8_t>(m));
        }
      }
    }
    at_line(r, [&] { s.validate(); });
    out.push_back(std::move(item));
  }
  return out;
}

void write_reader_scores(const fs::path& path, std::span<const ReaderScoresRecord> records,
                         bool binary_tensors) {
  std::optional<AtomicWriter> container;
  fs::path container_path = path;
  container_path += ".f64";
  if (binary_tensors) container.emplace(container_path, true);
  std::size_t offset = 0;

  JsonlWriter w(path, "reader-scores");
  for (const auto& item : records) {
    const auto& s = item.scores;
    s.validate();
    json rec = {{"qid", item.question_id}, {"pid", s.passage_id}, {"L", s.length},
                {"max_span_len", s.max_span_len}, {"s_passage", s.s_passage}};
    if (container) {
      auto& out = container->stream();
      for (double v : s.s_start) put_f64(out, v);
      for (double v : s.s_end) put_f64(out, v);
      for (double v : s.s_joint) put_f64(out, v);
      for (auto m : s.span_mask) put_f64(out, m ? 1.0 : 0.0);
      rec["tensor_file"] = container_path.filename().string();
      rec["tensor_offset"] = offset;
      offset += 2 * s.length + 2 * s.length * s.max_span_len;
    } else {
      rec["s_start"] = s.s_start;
      rec["s_end"] = s.s_end;
      rec["s_joint_band"] = band_rows(s.s_joint, s.length, s.max_span_len);
      json mask = json::array();
      for (std::size_t i = 0; i < s.length; ++i) {
        json row = json::array();
        for (std::size_t j = 0; j < s.max_span_len; ++j)
          row.push_back(static_cast<int>(s.span_mask[i * s.max_span_len + j]));
        mask.push_back(std::move(row));
      }
      rec["mask_band"] = std::move(mask);
    }
    w.put(rec);
  }
  if (container) container->commit();
  w.commit();
}

// spans

std::vector<SpansRecord> read_spans(const fs::path& path) {
  JsonlReader r(path, "spans");
  std::vector<SpansRecord> out;
  json rec;
  while (r.next(rec)) {
    SpansRecord item;
    item.question_id = r.get<std::string>(rec, "qid");
    auto spans = r.get<json>(rec, "spans");
    if (!spans.is_array()) r.fail("'spans' must be an array");
    for (const auto& js : spans) {
      if (!js.is_object()) r.fail("span entries must be objects");
      AnswerSpan a;
      a.passage_id = r.get<std::string>(js, "pid");
      a.start = r.count(js, "start");
      a.end = r.count(js, "end");
      if (a.end < a.start) r.fail("span end precedes start");
      a.surface = r.get<std::string>(js, "surface");
      a.log_p_start = r.get<double>(js, "log_p_start");
      a.log_p_end = r.get<double>(js, "log_p_end");
      a.log_p_joint = r.get<double>(js, "log_p_joint");
      a.log_p_passage = r.get<double>(js, "log_p_passage");
      a.log_p_e = r.real(js, "log_p_e");
      item.spans.push_back(std::move(a));
    }
    out.push_back(std::move(item));
  }
  return out;
}

void write_spans(const fs::path& path, std::span<const SpansRecord> records) {
  JsonlWriter w(path, "spans");
  for (const auto& item : records) {
    json spans = json::array();
    for (const auto& a : item.spans)
      spans.push_back({{"pid", a.passage_id}, {"start", a.start}, {"end", a.end},
                       {"surface", a.surface}, {"log_p_start", a.log_p_start},
                       {"log_p_end", a.log_p_end}, {"log_p_joint", a.log_p_joint},
                       {"log_p_passage", a.log_p_passage}, {"log_p_e", a.log_p_e}});
    w.put({{"qid", item.question_id}, {"spans", std::move(spans)}});
  }
  w.commit();
}

// generative

std::vector<GenerativeOutput> read_generative(const fs::path& path) {
  JsonlReader r(path, "generative");
  std::vector<GenerativeOutput> out;
  json rec;
  while (r.next(rec)) {
    GenerativeOutput g;
    g.question_id = r.get<std::string>(rec, "qid");
    g.greedy_answer = r.get<std::string>(rec, "greedy");
    g.greedy_log_prob = r.real(rec, "greedy_logp");
    g.reranked = r.get<std::map<std::string, double>>(rec, "reranked");
    if (g.greedy_log_prob > 0.0) r.fail("greedy_logp must be <= 0");
    for (const auto& [answer, lp] : g.reranked)
      if (!std::isfinite(lp) || lp > 0.0) r.fail("reranked log-prob of '" + answer + "' must be finite and <= 0");
    out.push_back(std::move(g));
  }
  return out;
}

void write_generative(const fs::path& path, std::span<const GenerativeOutput> outputs) {
  JsonlWriter w(path, "generative");
  for (const auto& g : outputs)
    w.put({{"qid", g.question_id}, {"greedy", g.greedy_answer}, {"greedy_logp", g.greedy_log_prob},
           {"reranked", g.reranked}});
  w.commit();
}

// predictions

std::vector<Prediction> read_predictions(const fs::path& path) {
  JsonlReader r(path, "predictions");
  std::vector<Prediction> out;
  json rec;
  while (r.next(rec)) {
    Prediction p;
    p.question_id = r.get<std::string>(rec, "qid");
    p.answer = r.get<std::string>(rec, "answer");
    p.source = at_line(r, [&] { return parse_answer_source(r.get<std::string>(rec, "source")); });
    p.score = r.get<double>(rec, "score");
    out.push_back(std::move(p));
  }
  return out;
}

void write_predictions(const fs::path& path, std::span<const Prediction> predictions) {
  JsonlWriter w(path, "predictions");
  for (const auto& p : predictions)
    w.put({{"qid", p.question_id}, {"answer", p.answer}, {"source", std::string(to_string(p.source))},
           {"score", p.score}});
  w.commit();
}

// labels

std::map<std::string, OverlapSubset> read_labels(const fs::path& path) {
  JsonlReader r(path, "labels");
  std::map<std::string, OverlapSubset> out;
  json rec;
  while (r.next(rec)) {
    auto qid = r.get<std::string>(rec, "qid");
    auto subset = at_line(r, [&] { return parse_overlap_subset(r.get<std::string>(rec, "subset")); });
    if (!out.emplace(qid, subset).second) r.fail("duplicate label for question " + qid);
  }
  return out;
}

void write_labels(const fs::path& path, const std::map<std::string, OverlapSubset>& labels) {
  JsonlWriter w(path, "labels");
  for (const auto& [qid, subset] : labels) w.put({{"qid", qid}, {"subset", std::string(to_string(subset))}});
  w.commit();
}

// annotations

std::vector<AnnotationsRecord> read_annotations(const fs::path& path) {
  JsonlReader r(path, "annotations");
  std::vector<AnnotationsRecord> out;
  json rec;
  while (r.next(rec)) {
    AnnotationsRecord item;
    item.question_id = r.get<std::string>(rec, "qid");
    auto list = r.get<json>(rec, "annotations");
    if (!list.is_array()) r.fail("'annotations' must be an array");
    for (const auto& ja : list) {
      AnswerAnnotation a;
      a.passage_id = r.get<std::string>(ja, "pid");
      a.answer_index = r.count(ja, "answer_index");
      a.start = r.count(ja, "start");
      a.end = r.count(ja, "end");
      a.f1 = r.real(ja, "f1");
      a.soft = r.get<bool>(ja, "soft");
      if (a.end < a.start) r.fail("annotation end precedes start");
      item.annotations.push_back(std::move(a));
    }
    out.push_back(std::move(item));
  }
  return out;
}

void write_annotations(const fs::path& path, std::span<const AnnotationsRecord> records) {
  JsonlWriter w(path, "annotations");
  for (const auto& item : records) {
    json list = json::array();
    for (const auto& a : item.annotations)
      list.push_back({{"pid", a.passage_id}, {"answer_index", a.answer_index}, {"start", a.start},
                      {"end", a.end}, {"f1", a.f1}, {"soft", a.soft}});
    w.put({{"qid", item.question_id}, {"annotations", std::move(list)}});
  }
  w.commit();
}

// models

AggregationModel read_aggregation_model(const fs::path& path) {
  json j = read_json_file(path);
  AggregationModel m;
  m.feature_names = field<std::vector<std::string>>(j, path, "feature_names");
  m.w = field<std::vector<double>>(j, path, "w");
  m.b = field<double>(j, path, "b");
  try {
    m.validate();
  } catch (const Error& e) {
    throw SchemaError(path.string(), 1, e.what());
  }
  return m;
}

void write_aggregation_model(const fs::path& path, const AggregationModel& model) {
  model.validate();
  write_json_file(path, {{"feature_names", model.feature_names}, {"w", model.w}, {"b", model.b}});
}

BinaryDecider read_binary_decider(const fs::path& path) {
  json j = read_json_file(path);
  auto names = field<std::vector<std::string>>(j, path, "feature_names");
  auto w = field<std::vector<double>>(j, path, "w");
  if (names != std::vector<std::string>{"s_agg", "s_g_star"})
    throw SchemaError(path.string(), 1, "binary decider features must be [\"s_agg\", \"s_g_star\"]");
  if (w.size() != 2) throw SchemaError(path.string(), 1, "binary decider needs exactly 2 weights");
  BinaryDecider d;
  d.w = {w[0], w[1]};
  d.b = field<double>(j, path, "b");
  return d;
}

void write_binary_decider(const fs::path& path, const BinaryDecider& decider) {
  write_json_file(path, {{"feature_names", {"s_agg", "s_g_star"}},
                         {"w", {decider.w[0], decider.w[1]}},
                         {"b", decider.b}});
}

RerankerModel read_reranker_model(const fs::path& path) {
  json j = read_json_file(path);
  RerankerModel m;
  m.feature_names = field<std::vector<std::string>>(j, path, "feature_names");
  m.w = field<std::vector<double>>(j, path, "w");
  if (m.w.size() != m.feature_names.size())
    throw SchemaError(path.string(), 1, "reranker weight count disagrees with feature_names");
  return m;
}

void write_reranker_model(const fs::path& path, const RerankerModel& model) {
  write_json_file(path, {{"feature_names", model.feature_names}, {"w", model.w}});
}

ReaderModel read_reader_model(const fs::path& path) {
  json j = read_json_file(path);
  ReaderModel m;
  m.param_names = field<std::vector<std::string>>(j, path, "param_names");
  m.params = field<std::vector<double>>(j, path, "params");
  m.max_span_len = field<std::size_t>(j, path, "max_span_len");
  if (m.params.size() != m.param_names.size())
    throw SchemaError(path.string(), 1, "reader parameter count disagrees with param_names");
  if (m.max_span_len == 0) throw SchemaError(path.string(), 1, "max_span_len must be positive");
  return m;
}

void write_reader_model(const fs::path& path, const ReaderModel& model) {
  write_json_file(path, {{"param_names", model.param_names},
                         {"params", model.params},
                         {"max_span_len", model.max_span_len}});
}

// reports

void write_report(const fs::path& path, std::span<const ReportRow> rows) {
  json out = json::array();
  for (const auto& row : rows) {
    json rec = {{"metric", row.metric}, {"value", row.value}, {"n", row.n}};
    bool numeric = !row.key.empty() && row.key.find_first_not_of("0123456789") == std::string::npos;
    if (numeric)
      rec["k"] = std::stoul(row.key);
    else if (!row.key.empty())
      rec["subset"] = row.key;
    out.push_back(std::move(rec));
  }
  write_json_file(path, out);
}

std::vector<ReportRow> read_report(const fs::path& path) {
  json j = read_json_file(path);
  if (!j.is_array()) throw SchemaError(path.string(), 1, "report must be a JSON array");
  std::vector<ReportRow> rows;
  for (const auto& rec : j) {
    ReportRow row;
    row.metric = field<std::string>(rec, path, "metric");
    row.value = field<double>(rec, path, "value");
    row.n = field<std::size_t>(rec, path, "n");
    if (rec.contains("k")) row.key = std::to_string(rec["k"].get<std::size_t>());
    else if (rec.contains("subset")) row.key = rec["subset"].get<std::string>();
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace qafuse::io
