#pragma once

// Token fertility (tokens per whitespace word) and the token->word grouping
// used by attention pooling.

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "forge/jsonl.hpp"

namespace forge::fertility {

struct Token {
    std::string text;
    std::size_t start = 0; // code points, half-open
    std::size_t end = 0;
};

using TokenOffsets = std::vector<Token>;

struct WordSpan {
    std::string word;
    std::size_t tok_start = 0;
    std::size_t tok_end = 0; // exclusive

    std::size_t size() const { return tok_end - tok_start; }
    friend bool operator==(const WordSpan&, const WordSpan&) = default;
};

/// Groups tokens into whitespace-delimited words. A token belongs to the word
/// holding its first non-whitespace character; tokens with none (special or
/// pure-whitespace tokens) join the next word, or the last word at the end.
/// Offsets outside the text, overlapping or unordered offsets, and words
/// covered by no token all throw ValidationError.
std::vector<WordSpan> align_tokens_to_words(std::string_view text, const TokenOffsets& tokens);

/// Whitespace-delimited words of text.
std::size_t count_words(std::string_view text);

/// Parses [[str, start, end], ...].
TokenOffsets tokens_from_json(const jsonl::json& arr);

struct DocFertility {
    std::string id;
    std::string lang;
    std::size_t tokens = 0;
    std::size_t words = 0;
    double fertility() const { return words == 0 ? 0.0 : static_cast<double>(tokens) / static_cast<double>(words); }
};

struct Totals {
    std::size_t docs = 0;
    std::size_t tokens = 0;
    std::size_t words = 0;
    double fertility() const { return words == 0 ? 0.0 : static_cast<double>(tokens) / static_cast<double>(words); }
};

/// Accumulates per-document and aggregate fertility. Aggregates are ratios of
/// summed counts, so merging shards in any order gives the same totals.
class FertilityStats {
public:
    /// Skips (and records) documents with zero words.
    void add(std::string id, std::string lang, std::string_view text, const TokenOffsets& tokens);
    void merge(const FertilityStats& other);

    const std::vector<DocFertility>& documents() const { return docs_; }
    const Totals& totals() const { return totals_; }
    const std::map<std::string, Totals>& by_lang() const { return by_lang_; }
    const std::vector<std::pair<std::string, std::string>>& skipped() const { return skipped_; }

    jsonl::json to_json(bool by_lang) const;

private:
    std::vector<DocFertility> docs_;
    Totals totals_;
    std::map<std::string, Totals> by_lang_;
    std::vector<std::pair<std::string, std::string>> skipped_;
};

} // namespace forge::fertility
