#pragma once

// chrF++ and the backtranslation round-trip filter.

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "forge/jsonl.hpp"

namespace forge::quality {

struct ChrfParams {
    int char_n_max = 6;
    int word_n_max = 2;
    double beta = 2.0;

    /// Throws ValidationError unless char_n_max >= 1, word_n_max >= 0, beta > 0.
    void validate() const;
};

/// chrF++ of a hypothesis against one reference, in [0, 100].
///
/// Character n-grams (orders 1..char_n_max) are counted over each string with
/// all whitespace removed; word n-grams (orders 1..word_n_max) over whitespace
/// tokens after splitting one leading or trailing ASCII punctuation mark off
/// each token. Every order with at least one reference n-gram contributes
/// F_beta = (1 + beta^2) P R / (beta^2 P + R); the score is 100 times the mean
/// of those F values. An empty hypothesis scores 0; an empty reference throws.
double chrfpp(std::string_view hypothesis, std::string_view reference, const ChrfParams& params = {});

/// Rounds to the 4 decimals scores are serialized with.
double round_score(double score);

enum class DiscardReason { below_cutoff, missing_backtranslation };
std::string_view to_string(DiscardReason reason);

struct FilterDecision {
    bool kept = false;
    std::optional<double> score;
    std::optional<DiscardReason> reason;
};

struct FilterReport {
    std::size_t total = 0;
    std::size_t kept = 0;
    std::size_t discarded = 0;
    std::size_t missing_backtranslation = 0;
    double cutoff = 50.0;
    std::array<std::size_t, 101> score_histogram{};

    void merge(const FilterReport& other);
    jsonl::json to_json() const;
};

/// Keeps a record iff its rounded chrF++(backtranslation, original) >= cutoff.
class RoundTripFilter {
public:
    explicit RoundTripFilter(double cutoff = 50.0, ChrfParams params = {});

    /// Pure scoring step; safe to call concurrently.
    FilterDecision evaluate(std::string_view original, const std::optional<std::string>& backtranslation) const;
    /// Decision for an already computed score (nullopt = no backtranslation).
    FilterDecision decide(std::optional<double> score) const;

    /// Folds a decision into the report. Not thread-safe.
    void record(const FilterDecision& decision);

    const FilterReport& report() const { return report_; }
    double cutoff() const { return report_.cutoff; }
    const ChrfParams& params() const { return params_; }

private:
    ChrfParams params_;
    FilterReport report_;
};

struct InstructionTriplet {
    std::string id;
    std::string instruction;
    std::string input;
    std::string output;
    std::string original; // English source the backtranslation is compared to
    std::optional<std::string> backtranslation;
    std::optional<double> chrfpp;
};

/// Reads {"id","instruction","input","output","original","backtranslation"?}.
/// "original" falls back to "en_text" so parallel-pair records can be filtered.
InstructionTriplet triplet_from_json(const jsonl::json& obj);
jsonl::json triplet_to_json(const InstructionTriplet& t);

/// Original text and backtranslation of an arbitrary filter input record.
std::pair<std::string, std::optional<std::string>> roundtrip_fields(const jsonl::json& obj);

/// Scores every triplet (in parallel when jobs > 1) and returns the kept ones
/// in input order, each carrying its rounded score.
std::pair<std::vector<InstructionTriplet>, FilterReport>
roundtrip_filter(std::vector<InstructionTriplet> triplets, double cutoff, const ChrfParams& params = {},
                 unsigned jobs = 1);

} // namespace forge::quality
