#include "qafuse/toy.hpp"

#include <algorithm>
#include <set>

#include "qafuse/io.hpp"
#include "qafuse/random.hpp"
#include "qafuse/reader.hpp"

namespace qafuse {
namespace {

constexpr const char* kRelations[] = {"capital", "founder", "river", "emblem", "anthem", "harbor"};

class WordSource {
 public:
  explicit WordSource(Rng& rng) : rng_(rng) {}

  std::string fresh() {
    static constexpr char kCons[] = "bdfgklmnprstvz";
    static constexpr char kVow[] = "aeiou";
    for (;;) {
      std::string w;
      for (int i = 0; i < 3; ++i) {
        w += kCons[rng_.uniform_index(sizeof kCons - 1)];
        w += kVow[rng_.uniform_index(sizeof kVow - 1)];
      }
      if (used_.insert(w).second) return w;
    }
  }

  std::string filler(std::size_t n) {
    std::string out;
    for (std::size_t i = 0; i < n; ++i) out += (i ? " " : "") + fresh();
    return out;
  }

 private:
  Rng& rng_;
  std::set<std::string> used_;
};

struct Builder {
  Rng& rng;
  WordSource& words;
  std::vector<Passage> passages;

  std::string add(const std::string& title, std::string context) {
    std::string id = "toy-" + std::to_string(passages.size());
    passages.push_back({id, title, std::move(context)});
    return id;
  }

  Question question(const std::string& qid, ToyKind kind) {
    const std::string relation = kRelations[rng.uniform_index(std::size(kRelations))];
    const std::string subject = words.fresh();
    const std::string answer = words.fresh();
    const std::string fact = "the " + relation + " of " + subject + " is ";

    Question q;
    q.id = qid;
    q.text = "what is the " + relation + " of " + subject + "?";
    q.gold_answers = {answer};
    switch (kind) {
      case ToyKind::kContext: {
        q.golden_passage_id = add(subject, fact + answer + ". " + words.filler(3) + ".");
        const std::string decoy = words.fresh();
        add(subject, decoy + " " + words.filler(2) + ". " + decoy + " " + words.filler(2) + ". " + decoy +
                         " " + words.filler(3) + ". " + decoy + " " + words.filler(2) + ".");
        break;
      }
      case ToyKind::kFrequency: {
        const std::string wrong = words.fresh();
        add(subject, fact + wrong + ". " + words.filler(3) + ".");
        std::string ctx = words.filler(2) + ". " + fact + answer + ". ";
        for (int i = 0; i < 5; ++i) ctx += words.filler(2) + " " + answer + ". ";
        q.golden_passage_id = add(subject, ctx);
        break;
      }
      case ToyKind::kPlain: {
        q.golden_passage_id = add(subject, fact + answer + ". " + words.filler(3) + ".");
        std::string ctx = words.filler(2) + ". " + fact + answer + ". ";
        for (int i = 0; i < 5; ++i) ctx += answer + " " + words.filler(2) + ". ";
        add(subject, ctx);
        break;
      }
    }
    return q;
  }
};

std::vector<ToyKind> kind_schedule(std::size_t n_context, std::size_t n_frequency, std::size_t n_plain,
                                   Rng& rng) {
  std::vector<ToyKind> kinds;
  kinds.insert(kinds.end(), n_context, ToyKind::kContext);
  kinds.insert(kinds.end(), n_frequency, ToyKind::kFrequency);
  kinds.insert(kinds.end(), n_plain, ToyKind::kPlain);
  const std::size_t n = kinds.size();
  return rng.sample_without_replacement(std::move(kinds), n);
}

}  // namespace

ToyFixture make_toy_fixture(std::uint64_t seed) {
  Rng rng(seed);
  WordSource words(rng);
  Builder b{rng, words, {}};
  ToyFixture fx;

  auto make_split = [&](const std::string& prefix, std::size_t nc, std::size_t nf, std::size_t np) {
    std::vector<Question> out;
    const auto kinds = kind_schedule(nc, nf, np, rng);
    for (std::size_t i = 0; i < kinds.size(); ++i) {
      std::string qid = prefix + "-" + std::to_string(i);
      out.push_back(b.question(qid, kinds[i]));
      fx.kinds[qid] = kinds[i];
    }
    return out;
  };
  fx.validation = make_split("val", 12, 12, 6);
  fx.test = make_split("test", 20, 20, 10);

  // Background passages mention relations without any of the subjects.
  for (int i = 0; i < 40; ++i) {
    const std::string relation = kRelations[rng.uniform_index(std::size(kRelations))];
    b.add(words.fresh(), words.filler(3) + " " + relation + " " + words.filler(4) + ".");
  }
  const std::size_t n_passages = b.passages.size();
  fx.corpus = rng.sample_without_replacement(std::move(b.passages), n_passages);

  constexpr OverlapSubset kSubsets[] = {OverlapSubset::kQuestionOverlap, OverlapSubset::kAnswerOverlapOnly,
                                        OverlapSubset::kNoOverlap};
  for (std::size_t i = 0; i < fx.test.size(); ++i) fx.test_labels[fx.test[i].id] = kSubsets[i % 3];

  fx.reader_params = DeskReader::default_params();
  fx.reader_variant_params = fx.reader_params;
  for (std::size_t i = 0; i < fx.reader_variant_params.size(); ++i)
    fx.reader_variant_params[i] *= (i % 2 == 0) ? 1.1 : 0.9;
  return fx;
}

void write_toy_fixture(const ToyFixture& fixture, const std::filesystem::path& dir) {
  io::write_corpus(dir / "corpus.jsonl", fixture.corpus);
  io::write_questions(dir / "validation.jsonl", fixture.validation);
  io::write_questions(dir / "test.jsonl", fixture.test);
  io::write_labels(dir / "test-labels.jsonl", fixture.test_labels);
  io::write_reader_model(dir / "reader.json", {DeskReader::param_names(), fixture.reader_params, 30});
  io::write_reader_model(dir / "reader-variant.json",
                         {DeskReader::param_names(), fixture.reader_variant_params, 30});
}

}  // namespace qafuse
