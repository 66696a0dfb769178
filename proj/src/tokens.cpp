#include "sar/tokens.hpp"

#include <cctype>
#include <sstream>

namespace sar {

Tokens tokenize(const std::string& text) {
  Tokens out;
  std::istringstream ss(text);
  std::string tok;
  while (ss >> tok) out.push_back(tok);
  return out;
}

std::string join_tokens(const Tokens& tokens) {
  std::string out;
  for (size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

std::string to_lower(const std::string& s) {
  std::string out = s;
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

Tokens to_lower(const Tokens& tokens) {
  Tokens out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(to_lower(t));
  return out;
}

bool is_token_prefix(const Tokens& prefix, const Tokens& seq) {
  if (prefix.size() > seq.size()) return false;
  for (size_t i = 0; i < prefix.size(); ++i) {
    if (to_lower(prefix[i]) != to_lower(seq[i])) return false;
  }
  return true;
}

Tokens strip_question_mark(Tokens tokens) {
  if (tokens.empty()) return tokens;
  if (tokens.back() == "?") {
    tokens.pop_back();
  } else if (tokens.back().size() > 1 && tokens.back().back() == '?') {
    tokens.back().pop_back();
  }
  return tokens;
}

}  // namespace sar
