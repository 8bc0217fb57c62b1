#include "forge/quality.hpp"

#include "forge/corpus.hpp"
#include "forge/error.hpp"
#include "forge/parallel.hpp"
#include "forge/text.hpp"

#include <algorithm>
#include <cmath>
#include <string_view>
#include <unordered_map>

namespace forge::quality {

namespace {

using Counts = std::unordered_map<std::u32string, std::size_t>;

bool is_ascii_punct(char32_t c) {
    return (c >= U'!' && c <= U'/') || (c >= U':' && c <= U'@') || (c >= U'[' && c <= U'`') ||
           (c >= U'{' && c <= U'~');
}

struct Ngrams {
    std::vector<Counts> orders;
    std::vector<std::size_t> totals;
};

std::vector<std::u32string> word_tokens(const std::u32string& s) {
    std::vector<std::u32string> out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && text::is_space(s[i])) ++i;
        std::size_t j = i;
        while (j < s.size() && !text::is_space(s[j])) ++j;
        if (j > i) {
            std::u32string w = s.substr(i, j - i);
            if (w.size() == 1) {
                out.push_back(std::move(w));
            } else if (is_ascii_punct(w.back())) {
                out.push_back(w.substr(0, w.size() - 1));
                out.push_back(w.substr(w.size() - 1));
            } else if (is_ascii_punct(w.front())) {
                out.push_back(w.substr(0, 1));
                out.push_back(w.substr(1));
            } else {
                out.push_back(std::move(w));
            }
        }
        i = j;
    }
    return out;
}

Ngrams extract(std::string_view utf8, const ChrfParams& p) {
    const std::u32string s = text::decode(utf8);
    Ngrams g;
    g.orders.resize(static_cast<std::size_t>(p.char_n_max + p.word_n_max));
    g.totals.assign(g.orders.size(), 0);

    std::u32string chars;
    chars.reserve(s.size());
    for (char32_t c : s) {
        if (!text::is_space(c)) chars.push_back(c);
    }
    for (int n = 1; n <= p.char_n_max; ++n) {
        auto& counts = g.orders[static_cast<std::size_t>(n - 1)];
        const auto len = static_cast<std::size_t>(n);
        for (std::size_t i = 0; i + len <= chars.size(); ++i) {
            ++counts[chars.substr(i, len)];
            ++g.totals[static_cast<std::size_t>(n - 1)];
        }
    }

    const auto words = word_tokens(s);
    for (int n = 1; n <= p.word_n_max; ++n) {
        const auto slot = static_cast<std::size_t>(p.char_n_max + n - 1);
        const auto len = static_cast<std::size_t>(n);
        for (std::size_t i = 0; i + len <= words.size(); ++i) {
            std::u32string key = words[i];
            for (std::size_t k = 1; k < len; ++k) {
                key.push_back(U' ');
                key += words[i + k];
            }
            ++g.orders[slot][key];
            ++g.totals[slot];
        }
    }
    return g;
}

std::size_t matches(const Counts& hyp, const Counts& ref) {
    const Counts& small = hyp.size() <= ref.size() ? hyp : ref;
    const Counts& large = hyp.size() <= ref.size() ? ref : hyp;
    std::size_t m = 0;
    for (const auto& [key, count] : small) {
        if (auto it = large.find(key); it != large.end()) m += std::min(count, it->second);
    }
    return m;
}

bool has_content(std::string_view s) { return s.find_first_not_of(" \t\r\n") != std::string_view::npos; }

} // namespace

void ChrfParams::validate() const {
    if (char_n_max < 1) throw ValidationError("char_n_max must be >= 1");
    if (word_n_max < 0) throw ValidationError("word_n_max must be >= 0");
    if (!(beta > 0.0) || !std::isfinite(beta)) throw ValidationError("beta must be > 0");
}

double chrfpp(std::string_view hypothesis, std::string_view reference, const ChrfParams& params) {
    params.validate();
    if (!has_content(reference)) throw ValidationError("chrF++ reference is empty");
    if (!has_content(hypothesis)) return 0.0;

    const Ngrams hyp = extract(hypothesis, params);
    const Ngrams ref = extract(reference, params);
    const double b2 = params.beta * params.beta;

    double sum = 0.0;
    std::size_t orders = 0;
    for (std::size_t i = 0; i < ref.orders.size(); ++i) {
        if (ref.totals[i] == 0) continue;
        ++orders;
        const auto m = static_cast<double>(matches(hyp.orders[i], ref.orders[i]));
        const double prec = hyp.totals[i] > 0 ? m / static_cast<double>(hyp.totals[i]) : 0.0;
        const double rec = m / static_cast<double>(ref.totals[i]);
        const double denom = b2 * prec + rec;
        if (denom > 0.0) sum += (1.0 + b2) * prec * rec / denom;
    }
    if (orders == 0) throw ValidationError("chrF++ reference has no n-grams");
    return 100.0 * sum / static_cast<double>(orders);
}

double round_score(double score) { return std::round(score * 1e4) / 1e4; }

std::string_view to_string(DiscardReason reason) {
    switch (reason) {
    case DiscardReason::below_cutoff: return "below_cutoff";
    case DiscardReason::missing_backtranslation: return "missing_backtranslation";
    }
    return "unknown";
}

void FilterReport::merge(const FilterReport& other) {
    total += other.total;
    kept += other.kept;
    discarded += other.discarded;
    missing_backtranslation += other.missing_backtranslation;
    for (std::size_t i = 0; i < score_histogram.size(); ++i) score_histogram[i] += other.score_histogram[i];
}

jsonl::json FilterReport::to_json() const {
    return {{"total", total},
            {"kept", kept},
            {"discarded", discarded},
            {"missing_backtranslation", missing_backtranslation},
            {"cutoff", cutoff},
            {"score_histogram", score_histogram}};
}

RoundTripFilter::RoundTripFilter(double cutoff, ChrfParams params) : params_(params) {
    params_.validate();
    if (!(cutoff >= 0.0 && cutoff <= 100.0)) throw ValidationError("cutoff must lie in [0,100]");
    report_.cutoff = cutoff;
}

FilterDecision RoundTripFilter::decide(std::optional<double> score) const {
    FilterDecision d;
    if (!score) {
        d.reason = DiscardReason::missing_backtranslation;
        return d;
    }
    d.score = round_score(*score);
    d.kept = *d.score >= report_.cutoff;
    if (!d.kept) d.reason = DiscardReason::below_cutoff;
    return d;
}

FilterDecision RoundTripFilter::evaluate(std::string_view original,
                                         const std::optional<std::string>& backtranslation) const {
    if (!backtranslation || !has_content(*backtranslation)) return decide(std::nullopt);
    return decide(chrfpp(corpus::normalize(*backtranslation), corpus::normalize(original), params_));
}

void RoundTripFilter::record(const FilterDecision& d) {
    ++report_.total;
    if (d.kept) {
        ++report_.kept;
    } else {
        ++report_.discarded;
    }
    if (d.reason == DiscardReason::missing_backtranslation) ++report_.missing_backtranslation;
    const double s = d.score.value_or(0.0);
    const auto bin = static_cast<std::size_t>(std::clamp(std::floor(s), 0.0, 100.0));
    ++report_.score_histogram[bin];
}

InstructionTriplet triplet_from_json(const jsonl::json& obj) {
    InstructionTriplet t;
    t.id = jsonl::get_string(obj, "id");
    t.instruction = jsonl::get_optional_string(obj, "instruction").value_or("");
    t.input = jsonl::get_optional_string(obj, "input").value_or("");
    t.output = jsonl::get_optional_string(obj, "output").value_or("");
    auto [original, bt] = roundtrip_fields(obj);
    t.original = std::move(original);
    t.backtranslation = std::move(bt);
    if (auto it = obj.find("chrfpp"); it != obj.end() && it->is_number()) t.chrfpp = it->get<double>();
    return t;
}

jsonl::json triplet_to_json(const InstructionTriplet& t) {
    jsonl::json obj = {{"id", t.id},
                       {"instruction", t.instruction},
                       {"input", t.input},
                       {"output", t.output},
                       {"original", t.original}};
    if (t.backtranslation) obj["backtranslation"] = *t.backtranslation;
    if (t.chrfpp) obj["chrfpp"] = *t.chrfpp;
    return obj;
}

std::pair<std::string, std::optional<std::string>> roundtrip_fields(const jsonl::json& obj) {
    auto original = jsonl::get_optional_string(obj, "original");
    if (!original) original = jsonl::get_optional_string(obj, "en_text");
    if (!original || !has_content(*original)) {
        throw ValidationError("record has no \"original\" (or \"en_text\") text to compare against");
    }
    return {std::move(*original), jsonl::get_optional_string(obj, "backtranslation")};
}

std::pair<std::vector<InstructionTriplet>, FilterReport>
roundtrip_filter(std::vector<InstructionTriplet> triplets, double cutoff, const ChrfParams& params, unsigned jobs) {
    RoundTripFilter filter(cutoff, params);
    std::vector<FilterDecision> decisions(triplets.size());
    parallel_for(triplets.size(), jobs, [&](std::size_t i) {
        decisions[i] = filter.evaluate(triplets[i].original, triplets[i].backtranslation);
    });
    std::vector<InstructionTriplet> kept;
    for (std::size_t i = 0; i < triplets.size(); ++i) {
        filter.record(decisions[i]);
        if (decisions[i].kept) {
            triplets[i].chrfpp = decisions[i].score;
            kept.push_back(std::move(triplets[i]));
        }
    }
    return {std::move(kept), filter.report()};
}

} // namespace forge::quality
