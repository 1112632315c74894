#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace ocrpost {

// Decodes UTF-8 into Unicode scalar values. Throws Utf8Error on malformed
// input (overlong forms, surrogates, truncated sequences).
std::u32string utf8_decode(std::string_view s);

std::string utf8_encode(std::u32string_view s);
std::string utf8_encode(char32_t c);

// Unicode whitespace (the code points a tokenizer should split on).
bool is_space(char32_t c);

// Case folding for ASCII and the Cyrillic ranges used by the corpora,
// including the historical letters (yat, big yus). Other scripts pass
// through unchanged.
char32_t fold_char(char32_t c);
std::u32string fold_case(std::u32string_view s);

// Whitespace-run tokenizer; returns the non-empty tokens.
std::vector<std::u32string> split_ws(std::u32string_view s);

std::u32string join_tokens(const std::vector<std::u32string>& tokens, char32_t sep = U' ');

}  // namespace ocrpost
