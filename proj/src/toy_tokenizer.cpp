#include "textground/toy_tokenizer.hpp"

#include <cctype>

namespace textground {

std::vector<TokenId> ToyTokenizer::encode(std::string_view text) {
  std::vector<TokenId> ids;
  ids.reserve(text.size());
  for (char raw : text) {
    const auto c = static_cast<char>(std::tolower(static_cast<unsigned char>(raw)));
    if (c >= 'a' && c <= 'z') {
      ids.push_back(3 + (c - 'a'));
    } else if (c >= '0' && c <= '9') {
      ids.push_back(29 + (c - '0'));
    } else if (std::isspace(static_cast<unsigned char>(c))) {
      ids.push_back(kSpace);
    } else if (c == '.') {
      ids.push_back(39);
    } else if (c == '?') {
      ids.push_back(40);
    } else if (c == ':') {
      ids.push_back(41);
    } else if (c == '-') {
      ids.push_back(42);
    } else {
      ids.push_back(kUnknown);
    }
  }
  return ids;
}

std::string ToyTokenizer::decode(const std::vector<TokenId>& ids) {
  static constexpr std::string_view kPunct = ".?:-";
  std::string out;
  for (TokenId id : ids) {
    if (id == kSpace) {
      out += ' ';
    } else if (id >= 3 && id <= 28) {
      out += static_cast<char>('a' + (id - 3));
    } else if (id >= 29 && id <= 38) {
      out += static_cast<char>('0' + (id - 29));
    } else if (id >= 39 && id <= 42) {
      out += kPunct[static_cast<std::size_t>(id - 39)];
    } else if (id == kUnknown) {
      out += '#';
    }
  }
  return out;
}

}  // namespace textground
