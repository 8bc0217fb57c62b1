#include "forge/fertility.hpp"

#include "forge/error.hpp"
#include "forge/text.hpp"

#include <algorithm>

namespace forge::fertility {

namespace {

struct Word {
    std::size_t start;
    std::size_t end;
};

std::vector<Word> words_of(const std::u32string& t) {
    std::vector<Word> out;
    std::size_t i = 0;
    while (i < t.size()) {
        while (i < t.size() && text::is_space(t[i])) ++i;
        const std::size_t s = i;
        while (i < t.size() && !text::is_space(t[i])) ++i;
        if (i > s) out.push_back({s, i});
    }
    return out;
}

} // namespace

std::size_t count_words(std::string_view text) { return words_of(text::decode(text)).size(); }

std::vector<WordSpan> align_tokens_to_words(std::string_view text, const TokenOffsets& tokens) {
    const std::u32string t = text::decode(text);
    const auto words = words_of(t);

    // owner[i] = index of the word token i belongs to
    std::vector<std::size_t> owner(tokens.size());
    std::size_t pending_from = 0;
    std::size_t prev_end = 0;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        const auto& tok = tokens[i];
        if (tok.start > tok.end || tok.end > t.size()) {
            throw ValidationError("token " + std::to_string(i) + " offset [" + std::to_string(tok.start) + "," +
                                  std::to_string(tok.end) + ") outside text of length " + std::to_string(t.size()));
        }
        if (tok.start < prev_end) {
            throw ValidationError("token " + std::to_string(i) + " overlaps the previous token");
        }
        prev_end = std::max(prev_end, tok.end);

        std::size_t c = tok.start;
        while (c < tok.end && text::is_space(t[c])) ++c;
        if (c == tok.end) continue; // attached once the next word is known

        auto it = std::upper_bound(words.begin(), words.end(), c,
                                   [](std::size_t pos, const Word& w) { return pos < w.start; });
        const auto w = static_cast<std::size_t>(std::distance(words.begin(), it)) - 1;
        for (std::size_t k = pending_from; k <= i; ++k) owner[k] = w;
        pending_from = i + 1;
    }
    if (!tokens.empty() && words.empty()) throw ValidationError("text has no words to align tokens to");
    for (std::size_t k = pending_from; k < tokens.size(); ++k) owner[k] = words.size() - 1;

    std::vector<WordSpan> spans;
    spans.reserve(words.size());
    std::size_t i = 0;
    for (std::size_t w = 0; w < words.size(); ++w) {
        const std::size_t start = i;
        while (i < tokens.size() && owner[i] == w) ++i;
        if (i == start) {
            throw ValidationError("word " + std::to_string(w) + " is not covered by any token");
        }
        spans.push_back({text::encode(std::u32string_view(t).substr(words[w].start, words[w].end - words[w].start)),
                         start, i});
    }
    return spans;
}

TokenOffsets tokens_from_json(const jsonl::json& arr) {
    if (!arr.is_array()) throw ValidationError("\"tokens\" must be an array of [str, start, end]");
    TokenOffsets out;
    out.reserve(arr.size());
    for (const auto& item : arr) {
        if (!item.is_array() || item.size() != 3 || !item[0].is_string() || !item[1].is_number_unsigned() ||
            !item[2].is_number_unsigned()) {
            throw ValidationError("token entries must be [str, start, end] with non-negative offsets");
        }
        out.push_back({item[0].get<std::string>(), item[1].get<std::size_t>(), item[2].get<std::size_t>()});
    }
    return out;
}

void FertilityStats::add(std::string id, std::string lang, std::string_view text, const TokenOffsets& tokens) {
    if (count_words(text) == 0) {
        skipped_.emplace_back(std::move(id), "zero words");
        return;
    }
    const auto spans = align_tokens_to_words(text, tokens);
    DocFertility d{std::move(id), std::move(lang), tokens.size(), spans.size()};
    totals_.docs += 1;
    totals_.tokens += d.tokens;
    totals_.words += d.words;
    if (!d.lang.empty()) {
        auto& t = by_lang_[d.lang];
        t.docs += 1;
        t.tokens += d.tokens;
        t.words += d.words;
    }
    docs_.push_back(std::move(d));
}

void FertilityStats::merge(const FertilityStats& other) {
    docs_.insert(docs_.end(), other.docs_.begin(), other.docs_.end());
    totals_.docs += other.totals_.docs;
    totals_.tokens += other.totals_.tokens;
    totals_.words += other.totals_.words;
    for (const auto& [lang, t] : other.by_lang_) {
        auto& mine = by_lang_[lang];
        mine.docs += t.docs;
        mine.tokens += t.tokens;
        mine.words += t.words;
    }
    skipped_.insert(skipped_.end(), other.skipped_.begin(), other.skipped_.end());
}

jsonl::json FertilityStats::to_json(bool by_lang) const {
    auto totals_json = [](const Totals& t) {
        return jsonl::json{{"docs", t.docs}, {"tokens", t.tokens}, {"words", t.words}, {"fertility", t.fertility()}};
    };
    jsonl::json docs = jsonl::json::array();
    for (const auto& d : docs_) {
        docs.push_back({{"id", d.id}, {"lang", d.lang}, {"tokens", d.tokens}, {"words", d.words},
                        {"fertility", d.fertility()}});
    }
    jsonl::json skipped = jsonl::json::array();
    for (const auto& [id, reason] : skipped_) skipped.push_back({{"id", id}, {"reason", reason}});
    jsonl::json out = {{"documents", docs}, {"corpus", totals_json(totals_)}, {"skipped", skipped}};
    if (by_lang) {
        jsonl::json table = jsonl::json::object();
        for (const auto& [lang, t] : by_lang_) table[lang] = totals_json(t);
        out["by_lang"] = table;
    }
    return out;
}

} // namespace forge::fertility
