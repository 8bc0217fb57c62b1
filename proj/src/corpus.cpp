#include "forge/corpus.hpp"

#include "forge/error.hpp"
#include "forge/text.hpp"

#include <unicode/normalizer2.h>
#include <unicode/unistr.h>

#include <algorithm>
#include <cmath>
#include <fstream>

namespace forge::corpus {

std::string_view to_string(Lang lang) { return lang == Lang::ne ? "ne" : "en"; }

Lang parse_lang(std::string_view tag) {
    if (tag == "ne") return Lang::ne;
    if (tag == "en") return Lang::en;
    throw ValidationError("unsupported language tag \"" + std::string(tag) + "\" (expected ne or en)");
}

namespace {

std::string to_nfc(std::string_view utf8) {
    UErrorCode status = U_ZERO_ERROR;
    const icu::Normalizer2* nfc = icu::Normalizer2::getNFCInstance(status);
    if (U_FAILURE(status)) throw std::runtime_error("ICU NFC normalizer unavailable");
    const auto src = icu::UnicodeString::fromUTF8(icu::StringPiece(utf8.data(), static_cast<int32_t>(utf8.size())));
    if (nfc->isNormalized(src, status) && U_SUCCESS(status)) return std::string(utf8);
    status = U_ZERO_ERROR;
    icu::UnicodeString dst = nfc->normalize(src, status);
    if (U_FAILURE(status)) throw ValidationError("NFC normalization failed");
    std::string out;
    dst.toUTF8String(out);
    return out;
}

bool is_control(char32_t cp) { return cp < 0x20 || (cp >= 0x7F && cp <= 0x9F); }

bool is_terminator(char32_t cp, Lang lang) {
    switch (cp) {
    case U'.': case U'?': case U'!':
        return true;
    case 0x0964: // danda
    case 0x0965: // double danda
        return lang == Lang::ne;
    default:
        return false;
    }
}

bool is_closer(char32_t cp) {
    switch (cp) {
    case U'"': case U'\'': case U')': case U']': case U'}':
    case 0x2019: case 0x201D: case 0x00BB:
        return true;
    default:
        return false;
    }
}

bool is_opener(char32_t cp) {
    switch (cp) {
    case U'"': case U'\'': case U'(': case U'[': case U'{':
    case 0x2018: case 0x201C: case 0x00AB:
        return true;
    default:
        return false;
    }
}

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

} // namespace

std::string normalize(std::string_view raw) {
    if (auto bad = text::find_invalid_utf8(raw)) {
        throw ValidationError("invalid UTF-8 at byte offset " + std::to_string(*bad));
    }
    const std::u32string cps = text::decode(to_nfc(raw));
    std::u32string out;
    out.reserve(cps.size());
    bool in_space = false;
    bool space_has_newline = false;
    for (char32_t cp : cps) {
        if (text::is_space(cp)) {
            in_space = true;
            space_has_newline = space_has_newline || cp == U'\n' || cp == 0x2028 || cp == 0x2029;
            continue;
        }
        if (is_control(cp)) continue;
        if (in_space && !out.empty()) out.push_back(space_has_newline ? U'\n' : U' ');
        in_space = false;
        space_has_newline = false;
        out.push_back(cp);
    }
    return text::encode(out);
}

std::vector<std::string> default_abbreviations() {
    return {"Dr.", "Mr.", "Mrs.", "Ms.", "St.", "etc.", "e.g.", "i.e."};
}

std::vector<std::string> load_abbreviations(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open abbreviation list " + path.string());
    std::vector<std::string> out;
    std::string line;
    while (std::getline(in, line)) {
        line = trim(line);
        if (line.empty() || line.front() == '#') continue;
        out.push_back(line);
    }
    return out;
}

Segmenter::Segmenter() : Segmenter(default_abbreviations()) {}

Segmenter::Segmenter(const std::vector<std::string>& abbreviations) {
    for (const auto& a : abbreviations) abbreviations_.insert(text::decode(a));
}

bool Segmenter::is_abbreviation(std::u32string_view word) const {
    while (!word.empty() && is_opener(word.front())) word.remove_prefix(1);
    return abbreviations_.find(word) != abbreviations_.end();
}

std::vector<SentenceSpan> Segmenter::segment(std::string_view utf8, Lang lang) const {
    const std::u32string t = text::decode(utf8);
    const std::size_t n = t.size();
    std::vector<SentenceSpan> spans;

    auto skip_space = [&](std::size_t p) {
        while (p < n && text::is_space(t[p])) ++p;
        return p;
    };
    auto emit = [&](std::size_t start, std::size_t end) {
        while (end > start && text::is_space(t[end - 1])) --end;
        if (end > start) spans.push_back({start, end, spans.size()});
    };

    std::size_t pos = skip_space(0);
    std::size_t start = pos;
    while (pos < n) {
        const char32_t c = t[pos];
        if (c == U'\n') {
            emit(start, pos);
            pos = start = skip_space(pos);
            continue;
        }
        if (!is_terminator(c, lang)) {
            ++pos;
            continue;
        }
        std::size_t end = pos + 1;
        while (end < n && is_terminator(t[end], lang)) ++end;
        const bool single_period = c == U'.' && end == pos + 1;
        while (end < n && is_closer(t[end])) ++end;
        if (end < n && !text::is_space(t[end])) {
            pos = end;
            continue;
        }
        if (lang == Lang::en && single_period) {
            std::size_t w = pos;
            while (w > start && !text::is_space(t[w - 1])) --w;
            if (is_abbreviation(std::u32string_view(t).substr(w, pos + 1 - w))) {
                pos = end;
                continue;
            }
        }
        emit(start, end);
        pos = start = skip_space(end);
    }
    emit(start, n);
    if (spans.empty()) throw ValidationError("cannot segment empty text");
    return spans;
}

std::vector<std::string> sentence_texts(std::string_view text, const std::vector<SentenceSpan>& spans) {
    const std::u32string cps = text::decode(text);
    std::vector<std::string> out;
    out.reserve(spans.size());
    for (const auto& s : spans) {
        if (s.start >= s.end || s.end > cps.size()) throw ValidationError("sentence span out of range");
        out.push_back(text::encode(std::u32string_view(cps).substr(s.start, s.end - s.start)));
    }
    return out;
}

void segment_pair(ParallelPair& pair, const Segmenter& segmenter) {
    pair.ne_text = normalize(pair.ne_text);
    pair.en_text = normalize(pair.en_text);
    pair.ne_sentences = pair.ne_text.empty() ? std::vector<SentenceSpan>{} : segmenter.segment(pair.ne_text, Lang::ne);
    pair.en_sentences = pair.en_text.empty() ? std::vector<SentenceSpan>{} : segmenter.segment(pair.en_text, Lang::en);
}

ParallelPair pair_from_json(const jsonl::json& obj) {
    ParallelPair p;
    p.id = jsonl::get_string(obj, "id");
    if (p.id.empty()) throw ValidationError("field \"id\" must be non-empty");
    p.ne_text = jsonl::get_string(obj, "ne_text");
    p.en_text = jsonl::get_string(obj, "en_text");
    p.source = jsonl::get_string(obj, "source");
    if (trim(p.ne_text).empty()) throw ValidationError("field \"ne_text\" must be non-empty");
    if (trim(p.en_text).empty()) throw ValidationError("field \"en_text\" must be non-empty");
    if (auto it = obj.find("chrfpp"); it != obj.end() && !it->is_null()) {
        if (!it->is_number()) throw ValidationError("field \"chrfpp\" must be a number");
        const double v = it->get<double>();
        if (!std::isfinite(v) || v < 0.0 || v > 100.0) {
            throw ValidationError("field \"chrfpp\" out of range [0,100]: " + it->dump());
        }
        p.chrfpp = v;
    }
    p.backtranslation = jsonl::get_optional_string(obj, "backtranslation");
    return p;
}

jsonl::json pair_to_json(const ParallelPair& p) {
    jsonl::json obj = {{"id", p.id}, {"ne_text", p.ne_text}, {"en_text", p.en_text}, {"source", p.source}};
    if (p.chrfpp) obj["chrfpp"] = *p.chrfpp;
    if (p.backtranslation) obj["backtranslation"] = *p.backtranslation;
    return obj;
}

PairReader::PairReader(const std::filesystem::path& path, Strictness strictness)
    : reader_(path), strictness_(strictness) {}

std::optional<ParallelPair> PairReader::next() {
    while (true) {
        const std::size_t before = reader_.errors().size();
        auto obj = reader_.next();
        if (strictness_ == Strictness::strict && reader_.errors().size() > before) {
            const auto& e = reader_.errors().back();
            throw ValidationError("line " + std::to_string(e.line) + ": " + e.message);
        }
        if (!obj) return std::nullopt;
        try {
            ParallelPair p = pair_from_json(*obj);
            ++valid_;
            return p;
        } catch (const ValidationError& e) {
            if (strictness_ == Strictness::strict) {
                throw ValidationError("line " + std::to_string(reader_.line_number()) + ": " + e.what());
            }
            reader_.add_error(e.what());
        }
    }
}

bool PairReader::over_error_budget() const {
    const std::size_t total = records_read();
    return total > 0 && errors().size() * 100 > total;
}

std::vector<ParallelPair> load_pairs(const std::filesystem::path& path, Strictness strictness) {
    PairReader reader(path, strictness);
    std::vector<ParallelPair> out;
    while (auto p = reader.next()) out.push_back(std::move(*p));
    return out;
}

void store_pairs(const std::vector<ParallelPair>& pairs, const std::filesystem::path& path) {
    jsonl::Writer w(path);
    for (const auto& p : pairs) w.write(pair_to_json(p));
    w.close();
}

} // namespace forge::corpus
