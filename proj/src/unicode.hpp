#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

// UTF-8 helpers. All offsets used by the toolkit count Unicode scalar values
// of NFC-normalized text.
namespace lqm::unicode {

/// Throws Error(validation) on malformed UTF-8, overlong forms or surrogates.
std::u32string decode(std::string_view utf8);
std::string encode(std::u32string_view text);

/// NFC normalization.
std::string nfc(std::string_view utf8);
bool is_nfc(std::string_view utf8);

std::size_t scalar_length(std::string_view utf8);

/// Substring by scalar offsets [start, end). Requires start <= end <= length.
std::string substr(std::string_view utf8, std::size_t start, std::size_t end);

/// Unicode White_Space property.
bool is_space(char32_t c);

/// Maximal runs of non-whitespace scalars.
std::vector<std::u32string> split_whitespace(std::u32string_view text);

std::u32string lowercase(std::u32string_view text);

}  // namespace lqm::unicode
