#pragma once

// Pretraining corpora built from parallel pairs: EN->NE translation records,
// sentence-alternating bilingual paragraphs, and the training manifest.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "forge/corpus.hpp"
#include "forge/jsonl.hpp"

namespace forge::interleave {

using corpus::Lang;
using corpus::ParallelPair;

inline constexpr std::string_view kSourcePlaceholder = "{src}";
inline constexpr std::string_view kDefaultTemplate = "Translate to Nepali:\n{src}\n";

/// Prompt template holding exactly one "{src}" placeholder.
class PromptTemplate {
public:
    explicit PromptTemplate(std::string tmpl = std::string(kDefaultTemplate));
    std::string render(std::string_view source) const;
    const std::string& str() const { return tmpl_; }

private:
    std::string tmpl_;
    std::size_t slot_ = 0;
};

struct TranslationRecord {
    std::string prompt;
    std::string target; // always the organic Nepali side
    std::string pair_id;
};

jsonl::json to_json(const TranslationRecord& r);

struct BilingualParagraph {
    std::string text;
    Lang lead_lang = Lang::ne;
    std::string pair_id;
    std::size_t sentence_count = 0;
};

jsonl::json to_json(const BilingualParagraph& p);

enum class SkipReason { empty_side, unaligned };
std::string_view to_string(SkipReason reason);

/// Counters for records that could not be emitted. Merges associatively.
struct DropReport {
    std::size_t total = 0;
    std::size_t emitted = 0;
    std::size_t empty_side = 0;
    std::size_t unaligned = 0;

    void count(std::optional<SkipReason> reason);
    void merge(const DropReport& other);
    jsonl::json to_json() const;
};

/// The English side goes in the prompt, the Nepali side is the target.
/// Returns the skip reason instead when either side is empty.
std::optional<TranslationRecord> make_translation_record(const ParallelPair& pair, const PromptTemplate& tmpl,
                                                         SkipReason* why = nullptr);

std::vector<TranslationRecord> make_translation_records(const std::vector<ParallelPair>& pairs,
                                                        const PromptTemplate& tmpl, DropReport* report = nullptr);

/// Sentence i (1-based) comes from lead_lang when i is odd, from the other
/// language when even; sentences are joined with one space. Both sides must be
/// segmented with equal, nonzero sentence counts, else SkipReason::unaligned.
std::optional<BilingualParagraph> interleave_pair(const ParallelPair& pair, Lang lead_lang,
                                                  SkipReason* why = nullptr);

enum class LeadPolicy { fixed_ne, fixed_en, alternate };

std::string_view to_string(LeadPolicy policy);
/// "ne", "en" or "alternate" (also "alternate-by-index").
LeadPolicy parse_lead_policy(std::string_view s);
/// alternate: pair k leads with Nepali when k is even.
Lang lead_for(LeadPolicy policy, std::size_t index);

/// Pairs must already be segmented; index_offset is the stream position of
/// pairs[0], used by the alternate policy.
std::vector<BilingualParagraph> build_bilingual_corpus(const std::vector<ParallelPair>& pairs, LeadPolicy policy,
                                                       DropReport* report = nullptr, std::size_t index_offset = 0);

enum class Stage { pretrain_translate, pretrain_bilingual, finetune };

std::string_view to_string(Stage stage);
Stage parse_stage(std::string_view s);

struct TrainingManifest {
    Stage stage = Stage::pretrain_translate;
    int lora_rank = 0;
    std::uint64_t approx_trainable_params = 0;
    std::uint64_t num_records = 0;
    std::vector<std::string> corpus_paths;
    std::string quantization = "4-bit";
    std::optional<LeadPolicy> lead_policy;

    jsonl::json to_json() const;
};

/// Stage defaults: rank 128/128/16 with ~335M/335M/41M trainable parameters.
TrainingManifest stage_defaults(Stage stage);

/// Counts records in each corpus file; a missing file throws IoError.
TrainingManifest emit_manifest(Stage stage, const std::vector<std::filesystem::path>& corpora,
                               std::optional<LeadPolicy> lead_policy = std::nullopt);

} // namespace forge::interleave
