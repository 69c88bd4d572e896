#pragma once

// Test-only helpers: random instance generators and straightforward reference
// implementations that the library results are compared against.

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "qafuse/extract.hpp"
#include "qafuse/fuse.hpp"
#include "qafuse/match.hpp"
#include "qafuse/random.hpp"
#include "qafuse/rank.hpp"

namespace qafuse::testing {

std::vector<std::string> random_tokens(Rng& rng, std::size_t n, std::size_t alphabet);

// Every span, shared count recomputed from scratch with a count map.
std::optional<MatchSpan> naive_soft_match(const std::vector<std::string>& passage,
                                          const std::vector<std::string>& answer);

// Random batch; `quantized` draws scores from a coarse grid so ties occur.
std::vector<ReaderScores> random_batch(Rng& rng, std::size_t max_passages, std::size_t max_len,
                                       std::size_t max_span_len, bool quantized);

// Random valid annotations (at least one) for a batch.
std::vector<SpanAnnotation> random_annotations(Rng& rng, const std::vector<ReaderScores>& batch,
                                               std::size_t count);

struct OracleSpan {
  std::size_t passage = 0;
  std::size_t start = 0;
  std::size_t end = 0;
  double log_p = 0.0;
};

// Pooled normalizers computed directly, every valid span enumerated and sorted.
std::vector<OracleSpan> oracle_decode(const std::vector<ReaderScores>& batch, Factorization fact);

// Linear-domain pooled probabilities, for cross-checks that avoid logs.
struct LinearDists {
  std::vector<std::vector<double>> start, end, joint;
  std::vector<double> passage;
};
LinearDists linear_dists(const std::vector<ReaderScores>& batch);

double naive_log_sum_exp(const std::vector<double>& v);

// Random fusion item: `n` candidates with features in [-8, 0], at least one correct.
FusionItem random_fusion_item(Rng& rng, std::size_t n);

std::string random_unicode_string(Rng& rng, std::size_t max_len);

// Features looked up by (question id, passage id); rank is ignored.
class TableFeatures : public RerankFeatures {
 public:
  explicit TableFeatures(std::size_t dim) : dim_(dim) {}
  void set(const std::string& qid, const std::string& pid, std::vector<double> x) { table_[{qid, pid}] = std::move(x); }
  std::vector<std::string> names() const override;
  std::vector<double> compute(const Question& question, const Passage& passage, std::size_t rank) const override;

 private:
  std::size_t dim_;
  std::map<std::pair<std::string, std::string>, std::vector<double>> table_;
};

// Reranking groups where feature 0 of the positive exceeds every negative by a margin.
struct RerankFixture {
  std::vector<Question> questions;
  std::unique_ptr<Corpus> corpus;
  std::shared_ptr<TableFeatures> features;
  std::vector<RerankGroup> groups;
};
std::unique_ptr<RerankFixture> separable_rerank_fixture(std::uint64_t seed, std::size_t questions = 20,
                                                        std::size_t group_size = 24);

// Aggregation items whose correct candidates lead on log_p_e by a margin.
std::vector<FusionItem> separable_aggregation_fixture(std::uint64_t seed, std::size_t items = 40);

// Binary-decision items with target 1 exactly when s_g_star - s_agg > 0, away from the boundary.
std::vector<BdItem> separable_bd_fixture(std::uint64_t seed, std::size_t items = 60);

// Every item abstractive-correct with s_g_star strictly above s_agg.
std::vector<BdItem> abstractive_always_fixture(std::uint64_t seed, std::size_t items = 60);

// Random reranking groups with dense random features, for gradient checks.
std::unique_ptr<RerankFixture> random_rerank_fixture(Rng& rng, std::size_t questions, std::size_t dim);

}  // namespace qafuse::testing
