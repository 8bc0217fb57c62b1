#pragma once

// Benchmark percent-change tables and generation-score distributions.

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "forge/jsonl.hpp"

namespace forge::evalkit {

/// Rounds half away from zero.
double round_to(double value, int decimals);

/// 100 * (k_shot - zero_shot) / zero_shot rounded to 2 decimals; nullopt when
/// zero_shot is not positive (the change is undefined).
std::optional<double> pct_change(double zero_shot, double k_shot);

/// "+19.29", "-1.25", "+0.00".
std::string format_pct(double pct);

struct BenchScore {
    std::string benchmark;
    std::string model;
    int shots = 0;
    double score = 0.0;
};

BenchScore bench_score_from_json(const jsonl::json& obj);

struct BenchCell {
    std::optional<double> zero_shot;
    std::optional<double> k_shot;
    std::optional<double> change;
};

struct BenchTable {
    std::vector<std::string> benchmarks; // known benchmarks in canonical order, then alphabetical
    std::vector<std::string> models;     // alphabetical
    int k_shots = 0;                     // 0 when no k-shot scores are present
    std::map<std::pair<std::string, std::string>, BenchCell> cells; // (benchmark, model)
    std::map<std::string, std::optional<double>> mean_change;      // per model

    std::string to_markdown() const;
    std::string to_csv() const;
};

/// Duplicate (benchmark, model, shots) cells and more than one distinct
/// nonzero shot count throw ValidationError. Row order of the input does not
/// affect the result.
BenchTable bench_table(const std::vector<BenchScore>& scores);

enum class Attribute { correctness, grammar, usability, hallucination, overall };
inline constexpr std::array<Attribute, 5> kAttributes{Attribute::correctness, Attribute::grammar,
                                                      Attribute::usability, Attribute::hallucination,
                                                      Attribute::overall};
std::string_view to_string(Attribute a);

struct GenScoreRecord {
    std::string id;
    std::string model;
    bool empty_generation = false;
    std::array<int, 5> scores{}; // indexed by Attribute
};

/// Empty generations score 0 on every attribute regardless of what the record
/// lists; otherwise every attribute must be an integer in [0,10].
GenScoreRecord gen_record_from_json(const jsonl::json& obj);

struct Quartiles {
    double q1 = 0.0;
    double median = 0.0;
    double q3 = 0.0;
};

/// Median of the data, Q1/Q3 as medians of the lower/upper halves, the
/// overall median excluded from both halves when n is odd. Even-length medians
/// interpolate linearly between the two middle ranks.
Quartiles quartiles(std::vector<double> values);

struct Outlier {
    std::string id;
    int score = 0;
};

struct BoxStats {
    std::size_t count = 0;
    std::array<std::size_t, 11> histogram{};
    Quartiles q;
    double iqr = 0.0;
    double lower_fence = 0.0;
    double upper_fence = 0.0;
    std::vector<Outlier> outliers;
};

struct GenReport {
    std::map<std::string, std::array<BoxStats, 5>> by_model;
    std::map<std::string, std::size_t> empty_generations;

    jsonl::json to_json() const;
    std::string to_markdown() const;
    std::string to_csv() const;
};

GenReport gen_score_stats(const std::vector<GenScoreRecord>& records);

} // namespace forge::evalkit
