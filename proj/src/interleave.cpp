#include "forge/interleave.hpp"

#include "forge/error.hpp"

namespace forge::interleave {

PromptTemplate::PromptTemplate(std::string tmpl) : tmpl_(std::move(tmpl)) {
    const auto first = tmpl_.find(kSourcePlaceholder);
    if (first == std::string::npos) throw ValidationError("prompt template has no {src} placeholder");
    if (tmpl_.find(kSourcePlaceholder, first + 1) != std::string::npos) {
        throw ValidationError("prompt template has more than one {src} placeholder");
    }
    slot_ = first;
}

std::string PromptTemplate::render(std::string_view source) const {
    std::string out;
    out.reserve(tmpl_.size() + source.size());
    out.append(tmpl_, 0, slot_);
    out.append(source);
    out.append(tmpl_, slot_ + kSourcePlaceholder.size());
    return out;
}

jsonl::json to_json(const TranslationRecord& r) {
    return {{"prompt", r.prompt}, {"target", r.target}, {"pair_id", r.pair_id}};
}

jsonl::json to_json(const BilingualParagraph& p) {
    return {{"text", p.text}, {"lead_lang", corpus::to_string(p.lead_lang)}, {"pair_id", p.pair_id}};
}

std::string_view to_string(SkipReason reason) {
    return reason == SkipReason::empty_side ? "empty_side" : "unaligned";
}

void DropReport::count(std::optional<SkipReason> reason) {
    ++total;
    if (!reason) {
        ++emitted;
    } else if (*reason == SkipReason::empty_side) {
        ++empty_side;
    } else {
        ++unaligned;
    }
}

void DropReport::merge(const DropReport& other) {
    total += other.total;
    emitted += other.emitted;
    empty_side += other.empty_side;
    unaligned += other.unaligned;
}

jsonl::json DropReport::to_json() const {
    return {{"total", total},
            {"emitted", emitted},
            {"dropped", total - emitted},
            {"empty_side", empty_side},
            {"unaligned", unaligned}};
}

namespace {

bool blank(std::string_view s) { return s.find_first_not_of(" \t\r\n") == std::string_view::npos; }

} // namespace

std::optional<TranslationRecord> make_translation_record(const ParallelPair& pair, const PromptTemplate& tmpl,
                                                         SkipReason* why) {
    if (blank(pair.en_text) || blank(pair.ne_text)) {
        if (why) *why = SkipReason::empty_side;
        return std::nullopt;
    }
    return TranslationRecord{tmpl.render(pair.en_text), pair.ne_text, pair.id};
}

std::vector<TranslationRecord> make_translation_records(const std::vector<ParallelPair>& pairs,
                                                        const PromptTemplate& tmpl, DropReport* report) {
    std::vector<TranslationRecord> out;
    out.reserve(pairs.size());
    for (const auto& p : pairs) {
        SkipReason why{};
        auto rec = make_translation_record(p, tmpl, &why);
        if (report) report->count(rec ? std::nullopt : std::optional(why));
        if (rec) out.push_back(std::move(*rec));
    }
    return out;
}

std::optional<BilingualParagraph> interleave_pair(const ParallelPair& pair, Lang lead_lang, SkipReason* why) {
    if (blank(pair.en_text) || blank(pair.ne_text)) {
        if (why) *why = SkipReason::empty_side;
        return std::nullopt;
    }
    const std::size_t n = pair.ne_sentences.size();
    if (n == 0 || n != pair.en_sentences.size()) {
        if (why) *why = SkipReason::unaligned;
        return std::nullopt;
    }
    const auto ne = corpus::sentence_texts(pair.ne_text, pair.ne_sentences);
    const auto en = corpus::sentence_texts(pair.en_text, pair.en_sentences);
    const auto& lead = lead_lang == Lang::ne ? ne : en;
    const auto& other = lead_lang == Lang::ne ? en : ne;

    BilingualParagraph para;
    para.lead_lang = lead_lang;
    para.pair_id = pair.id;
    para.sentence_count = n;
    for (std::size_t i = 0; i < n; ++i) {
        if (i > 0) para.text.push_back(' ');
        para.text += (i % 2 == 0) ? lead[i] : other[i];
    }
    return para;
}

std::string_view to_string(LeadPolicy policy) {
    switch (policy) {
    case LeadPolicy::fixed_ne: return "ne";
    case LeadPolicy::fixed_en: return "en";
    case LeadPolicy::alternate: return "alternate";
    }
    return "alternate";
}

LeadPolicy parse_lead_policy(std::string_view s) {
    if (s == "ne" || s == "fixed-ne") return LeadPolicy::fixed_ne;
    if (s == "en" || s == "fixed-en") return LeadPolicy::fixed_en;
    if (s == "alternate" || s == "alternate-by-index") return LeadPolicy::alternate;
    throw ValidationError("unknown lead policy \"" + std::string(s) + "\" (expected alternate, ne or en)");
}

Lang lead_for(LeadPolicy policy, std::size_t index) {
    switch (policy) {
    case LeadPolicy::fixed_ne: return Lang::ne;
    case LeadPolicy::fixed_en: return Lang::en;
    case LeadPolicy::alternate: return index % 2 == 0 ? Lang::ne : Lang::en;
    }
    return Lang::ne;
}

std::vector<BilingualParagraph> build_bilingual_corpus(const std::vector<ParallelPair>& pairs, LeadPolicy policy,
                                                       DropReport* report, std::size_t index_offset) {
    std::vector<BilingualParagraph> out;
    out.reserve(pairs.size());
    for (std::size_t k = 0; k < pairs.size(); ++k) {
        SkipReason why{};
        auto para = interleave_pair(pairs[k], lead_for(policy, index_offset + k), &why);
        if (report) report->count(para ? std::nullopt : std::optional(why));
        if (para) out.push_back(std::move(*para));
    }
    return out;
}

std::string_view to_string(Stage stage) {
    switch (stage) {
    case Stage::pretrain_translate: return "pretrain_translate";
    case Stage::pretrain_bilingual: return "pretrain_bilingual";
    case Stage::finetune: return "finetune";
    }
    return "finetune";
}

Stage parse_stage(std::string_view s) {
    if (s == "pretrain_translate") return Stage::pretrain_translate;
    if (s == "pretrain_bilingual") return Stage::pretrain_bilingual;
    if (s == "finetune") return Stage::finetune;
    throw ValidationError("unknown stage \"" + std::string(s) +
                          "\" (expected pretrain_translate, pretrain_bilingual or finetune)");
}

TrainingManifest stage_defaults(Stage stage) {
    TrainingManifest m;
    m.stage = stage;
    if (stage == Stage::finetune) {
        m.lora_rank = 16;
        m.approx_trainable_params = 41'000'000;
    } else {
        m.lora_rank = 128;
        m.approx_trainable_params = 335'000'000;
    }
    return m;
}

jsonl::json TrainingManifest::to_json() const {
    jsonl::json obj = {{"stage", to_string(stage)},
                       {"lora_rank", lora_rank},
                       {"approx_trainable_params", approx_trainable_params},
                       {"num_records", num_records},
                       {"corpus_paths", corpus_paths},
                       {"quantization", quantization}};
    if (lead_policy) obj["lead_policy"] = to_string(*lead_policy);
    return obj;
}

TrainingManifest emit_manifest(Stage stage, const std::vector<std::filesystem::path>& corpora,
                               std::optional<LeadPolicy> lead_policy) {
    TrainingManifest m = stage_defaults(stage);
    m.lead_policy = lead_policy;
    for (const auto& path : corpora) {
        if (!std::filesystem::is_regular_file(path)) throw IoError("corpus file not found: " + path.string());
        m.num_records += jsonl::count_records(path);
        m.corpus_paths.push_back(path.string());
    }
    return m;
}

} // namespace forge::interleave
