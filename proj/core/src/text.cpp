#include "qafuse/text.hpp"

#include <algorithm>
#include <iterator>

#include "qafuse/error.hpp"

namespace qafuse {
namespace {

struct ClassRange {
  char32_t first;
  int cls;
};

struct LowerEntry {
  char32_t cp;
  const char* lower;
};

#include "unicode_tables.inc"

}  // namespace

CharClass char_class(char32_t cp) {
  auto it = std::upper_bound(std::begin(kClassRanges), std::end(kClassRanges), cp,
                             [](char32_t c, const ClassRange& r) { return c < r.first; });
  switch ((it - 1)->cls) {
    case 1: return CharClass::kWord;
    case 2: return CharClass::kPunctuation;
    case 3: return CharClass::kSpace;
    case 4: return CharClass::kSymbol;
    case 6: return CharClass::kMark;
    default: return CharClass::kOther;
  }
}

bool is_whitespace(char32_t cp) {
  if ((cp >= 0x09 && cp <= 0x0D) || (cp >= 0x1C && cp <= 0x1F) || cp == 0x85) return true;
  return char_class(cp) == CharClass::kSpace;
}

char32_t decode_utf8(std::string_view text, std::size_t pos, std::size_t* length) {
  const auto b0 = static_cast<unsigned char>(text[pos]);
  std::size_t n = 0;
  char32_t cp = 0;
  if (b0 < 0x80) {
    *length = 1;
    return b0;
  } else if ((b0 & 0xE0) == 0xC0) {
    n = 2;
    cp = b0 & 0x1F;
  } else if ((b0 & 0xF0) == 0xE0) {
    n = 3;
    cp = b0 & 0x0F;
  } else if ((b0 & 0xF8) == 0xF0) {
    n = 4;
    cp = b0 & 0x07;
  } else {
    *length = 1;
    return 0xFFFD;
  }
  if (pos + n > text.size()) {
    *length = 1;
    return 0xFFFD;
  }
  for (std::size_t i = 1; i < n; ++i) {
    const auto b = static_cast<unsigned char>(text[pos + i]);
    if ((b & 0xC0) != 0x80) {
      *length = 1;
      return 0xFFFD;
    }
    cp = (cp << 6) | (b & 0x3F);
  }
  static constexpr char32_t kMin[] = {0, 0, 0x80, 0x800, 0x10000};
  if (cp < kMin[n] || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) {
    *length = 1;
    return 0xFFFD;
  }
  *length = n;
  return cp;
}

void append_utf8(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

std::string to_lower(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t len = 0;
    const char32_t cp = decode_utf8(text, pos, &len);
    if (cp < 0x80) {
      char c = static_cast<char>(cp);
      out.push_back(c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a') : c);
    } else {
      auto it = std::lower_bound(std::begin(kLowerTable), std::end(kLowerTable), cp,
                                 [](const LowerEntry& e, char32_t c) { return e.cp < c; });
      if (it != std::end(kLowerTable) && it->cp == cp)
        out += it->lower;
      else if (cp == 0xFFFD && len == 1)
        out.push_back(text[pos]);  // keep invalid bytes as they were
      else
        out.append(text.substr(pos, len));
    }
    pos += len;
  }
  return out;
}

TokenSeq tokenize(std::string_view text) {
  TokenSeq seq;
  std::size_t pos = 0;
  std::size_t run_start = std::string_view::npos;
  auto close_run = [&](std::size_t end) {
    if (run_start == std::string_view::npos) return;
    seq.tokens.push_back(to_lower(text.substr(run_start, end - run_start)));
    seq.offsets.emplace_back(run_start, end);
    run_start = std::string_view::npos;
  };
  while (pos < text.size()) {
    std::size_t len = 0;
    const char32_t cp = decode_utf8(text, pos, &len);
    const CharClass cls = char_class(cp);
    if (cls == CharClass::kWord || cls == CharClass::kMark) {
      if (run_start == std::string_view::npos) run_start = pos;
    } else {
      close_run(pos);
      if (cls != CharClass::kSpace && cls != CharClass::kOther) {
        seq.tokens.push_back(to_lower(text.substr(pos, len)));
        seq.offsets.emplace_back(pos, pos + len);
      }
    }
    pos += len;
  }
  close_run(text.size());
  return seq;
}

std::string_view surface(std::string_view text, const TokenSeq& seq, std::size_t start,
                         std::size_t end) {
  if (start > end || end >= seq.size()) throw Error("token span out of range");
  const std::size_t from = seq.offsets[start].first;
  return text.substr(from, seq.offsets[end].second - from);
}

}  // namespace qafuse
