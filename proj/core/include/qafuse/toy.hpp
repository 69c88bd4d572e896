#pragma once

// The bundled toy world: pseudo-word subjects with templated relation passages,
// and a pair of constructed desk-reader parameter sets.
//
// Questions come in three kinds. In "context" questions the answer sits in a
// strong question context once and the extractive reader finds it, while a
// frequently repeated distractor fools a frequency-driven generative reader.
// In "frequency" questions a short passage asserts a wrong answer in an equally
// strong context, and the right answer is repeated across a longer passage.
// "Plain" questions are easy for both.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "qafuse/eval.hpp"
#include "qafuse/types.hpp"

namespace qafuse {

enum class ToyKind { kContext, kFrequency, kPlain };

struct ToyFixture {
  std::vector<Passage> corpus;
  std::vector<Question> validation;
  std::vector<Question> test;
  std::map<std::string, ToyKind> kinds;
  std::map<std::string, OverlapSubset> test_labels;
  std::vector<double> reader_params;
  std::vector<double> reader_variant_params;  // same family, mildly perturbed
};

ToyFixture make_toy_fixture(std::uint64_t seed = 7);

/// corpus.jsonl, validation.jsonl, test.jsonl, test-labels.jsonl, reader.json
/// and reader-variant.json under `dir`.
void write_toy_fixture(const ToyFixture& fixture, const std::filesystem::path& dir);

}  // namespace qafuse
