#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "textground/trace.hpp"

namespace textground {

// Character-level tokenizer used with the toy model.
//
//   0 image/pad   1 end-of-sequence   2 space
//   3..28 'a'..'z' (input is lowercased)   29..38 '0'..'9'
//   39 '.'  40 '?'  41 ':'  42 '-'  43 unknown
//
// Ids >= 44 decode to nothing, so any vocabulary of at least 44 entries works.
class ToyTokenizer {
 public:
  static constexpr std::size_t kMinVocab = 44;
  static constexpr TokenId kSpace = 2;
  static constexpr TokenId kUnknown = 43;

  static std::vector<TokenId> encode(std::string_view text);
  static std::string decode(const std::vector<TokenId>& ids);
};

}  // namespace textground
