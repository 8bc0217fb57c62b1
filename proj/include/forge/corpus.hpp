#pragma once

// Ingestion, normalization and sentence segmentation of the Nepali-English
// corpus, plus the parallel-pair JSONL schema.

#include <cstddef>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "forge/jsonl.hpp"

namespace forge::corpus {

enum class Lang { ne, en };

std::string_view to_string(Lang lang);
/// Accepts "ne" or "en"; anything else is a ValidationError.
Lang parse_lang(std::string_view tag);

struct Document {
    std::string id;
    Lang lang = Lang::en;
    std::string text;
    std::string source;
};

/// Half-open code-point range of one sentence.
struct SentenceSpan {
    std::size_t start = 0;
    std::size_t end = 0;
    std::size_t index = 0;

    friend bool operator==(const SentenceSpan&, const SentenceSpan&) = default;
};

struct ParallelPair {
    std::string id;
    std::string ne_text;
    std::string en_text;
    std::string source;
    std::vector<SentenceSpan> ne_sentences;
    std::vector<SentenceSpan> en_sentences;
    std::optional<double> chrfpp;
    std::optional<std::string> backtranslation;
};

/// NFC, control characters other than newline dropped, whitespace runs
/// collapsed (to "\n" when the run holds a newline, else to one space),
/// ends trimmed. Invalid UTF-8 throws ValidationError with the byte offset.
std::string normalize(std::string_view raw);

std::vector<std::string> default_abbreviations();

/// One entry per non-blank line; lines starting with '#' are comments.
std::vector<std::string> load_abbreviations(const std::filesystem::path& path);

class Segmenter {
public:
    Segmenter();
    explicit Segmenter(const std::vector<std::string>& abbreviations);

    /// Sentence spans of already-normalized text. Terminators belong to the
    /// span they close, together with any trailing closing quotes/brackets.
    /// A line break also closes a sentence. Empty text throws.
    std::vector<SentenceSpan> segment(std::string_view text, Lang lang) const;
    std::vector<SentenceSpan> segment(const Document& doc) const { return segment(doc.text, doc.lang); }

private:
    bool is_abbreviation(std::u32string_view word) const;

    std::set<std::u32string, std::less<>> abbreviations_;
};

std::vector<std::string> sentence_texts(std::string_view text, const std::vector<SentenceSpan>& spans);

/// Normalizes both sides in place and fills the sentence spans.
void segment_pair(ParallelPair& pair, const Segmenter& segmenter);

// JSONL schema: {"id","ne_text","en_text","source","chrfpp"?,"backtranslation"?}
ParallelPair pair_from_json(const jsonl::json& obj);
jsonl::json pair_to_json(const ParallelPair& pair);

enum class Strictness { lenient, strict };

/// Streams pairs from JSONL. Lenient mode records malformed lines and skips
/// them; strict mode throws ValidationError on the first one.
class PairReader {
public:
    PairReader(const std::filesystem::path& path, Strictness strictness = Strictness::lenient);

    std::optional<ParallelPair> next();

    std::size_t records_read() const { return valid_ + reader_.errors().size(); }
    std::size_t valid() const { return valid_; }
    const std::vector<jsonl::LineError>& errors() const { return reader_.errors(); }
    /// More than 1% of records malformed.
    bool over_error_budget() const;

private:
    jsonl::Reader reader_;
    Strictness strictness_;
    std::size_t valid_ = 0;
};

std::vector<ParallelPair> load_pairs(const std::filesystem::path& path, Strictness strictness = Strictness::strict);
void store_pairs(const std::vector<ParallelPair>& pairs, const std::filesystem::path& path);

} // namespace forge::corpus
