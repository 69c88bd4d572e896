#pragma once

// UTF-8 handling and the word-level tokenizer used for all answer matching.

#include <cstddef>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace qafuse {

/// Unicode general category, coarsened.
enum class CharClass {
  kWord,         // L*, N*
  kMark,         // M*
  kPunctuation,  // P*
  kSpace,        // Z*
  kSymbol,       // S*
  kOther,        // C*: control, format, unassigned
};

/// Whitespace in the sense of Python's str.split().
bool is_whitespace(char32_t cp);

CharClass char_class(char32_t cp);

/// Decodes one code point at `pos`; invalid sequences yield U+FFFD and consume one byte.
char32_t decode_utf8(std::string_view text, std::size_t pos, std::size_t* length);

void append_utf8(std::string& out, char32_t cp);

/// Full Unicode lowercase mapping, code point by code point.
std::string to_lower(std::string_view text);

struct TokenSeq {
  std::vector<std::string> tokens;
  /// Byte range [first, second) of each token in the source text.
  std::vector<std::pair<std::size_t, std::size_t>> offsets;

  std::size_t size() const { return tokens.size(); }
  bool empty() const { return tokens.empty(); }
};

/// Maximal runs of letters, numbers and marks, plus every other character
/// outside the separator and control categories as its own token; all tokens
/// lowercased.
TokenSeq tokenize(std::string_view text);

/// Source substring covered by tokens [start, end] (inclusive).
std::string_view surface(std::string_view text, const TokenSeq& seq, std::size_t start,
                         std::size_t end);

}  // namespace qafuse
