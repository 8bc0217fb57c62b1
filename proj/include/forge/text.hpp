#pragma once

// UTF-8 helpers shared by the corpus, quality and fertility modules.
// Offsets exchanged with other tools are code-point offsets.

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

namespace forge::text {

/// Byte offset of the first malformed UTF-8 sequence, or nullopt when valid.
std::optional<std::size_t> find_invalid_utf8(std::string_view bytes);

/// Decodes UTF-8; throws ValidationError naming the byte offset on bad input.
std::u32string decode(std::string_view bytes);
std::string encode(std::u32string_view cps);
void append_utf8(std::string& out, char32_t cp);

std::size_t codepoint_count(std::string_view bytes);

/// Substring by code-point range [start, end).
std::string slice(std::string_view bytes, std::size_t start, std::size_t end);

bool is_space(char32_t cp);
bool is_devanagari(char32_t cp);
bool is_latin_letter(char32_t cp);

} // namespace forge::text
