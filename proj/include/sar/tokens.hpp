#pragma once

#include <string>
#include <vector>

namespace sar {

using Tokens = std::vector<std::string>;

// Whitespace split. Token case is preserved; matching code lowercases.
Tokens tokenize(const std::string& text);

std::string join_tokens(const Tokens& tokens);

std::string to_lower(const std::string& s);
Tokens to_lower(const Tokens& tokens);

// True if `prefix` matches the first tokens of `seq`, case-insensitively.
bool is_token_prefix(const Tokens& prefix, const Tokens& seq);

// Drop a terminal question mark: a bare "?" token is removed, a trailing '?'
// glued to the last token is stripped.
Tokens strip_question_mark(Tokens tokens);

}  // namespace sar
