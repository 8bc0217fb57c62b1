#pragma once

// Attention tensors dumped from a causal LM: the ATNT container, token->word
// pooling, relation slices and averaged layer x head concept heatmaps.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "forge/fertility.hpp"
#include "forge/jsonl.hpp"

namespace forge::attnmap {

using fertility::WordSpan;

inline constexpr char kMagic[4] = {'A', 'T', 'N', 'T'};
inline constexpr std::uint8_t kVersion = 1;
inline constexpr std::size_t kHeaderBytes = 4 + 1 + 3 * 4;
inline constexpr double kRowSumTolerance = 1e-3;

struct AttentionMeta {
    std::vector<std::string> tokens;
    std::vector<std::pair<std::size_t, std::size_t>> offsets;
    std::vector<WordSpan> words;
    std::string lang;
    std::string text;
};

/// L x H x S x S attention in (layer, head, query, key) order.
struct AttentionTensor {
    std::uint32_t layers = 0;
    std::uint32_t heads = 0;
    std::uint32_t seq = 0;
    std::vector<float> values;
    AttentionMeta meta;

    std::size_t index(std::size_t l, std::size_t h, std::size_t q, std::size_t k) const {
        return ((l * heads + h) * seq + q) * seq + k;
    }
    float at(std::size_t l, std::size_t h, std::size_t q, std::size_t k) const { return values[index(l, h, q, k)]; }
};

/// "<dir>/<stem>.meta.json" for "<dir>/<stem>.<ext>".
std::filesystem::path sidecar_path(const std::filesystem::path& tensor_path);

/// Parses the binary container (no sidecar). Throws ValidationError on bad
/// magic/version, zero or overflowing dimensions, or a size mismatch.
AttentionTensor decode_tensor(std::string_view bytes);
std::string encode_tensor(const AttentionTensor& t);

/// Values finite and in [0,1], every softmax row summing to 1 within 1e-3,
/// sidecar token count equal to S and word spans partitioning the tokens.
void validate(const AttentionTensor& t);

AttentionMeta meta_from_json(const jsonl::json& obj);
jsonl::json meta_to_json(const AttentionMeta& meta);

/// Loads the tensor and its sidecar, derives word spans from token offsets
/// when the sidecar lists none, and validates the result.
AttentionTensor load_tensor(const std::filesystem::path& path);
void store_tensor(const AttentionTensor& t, const std::filesystem::path& path);

enum class Pooling { max, mean };
std::string_view to_string(Pooling p);
Pooling parse_pooling(std::string_view s);

/// L x H x W x W word-level attention.
struct WordAttention {
    std::size_t layers = 0;
    std::size_t heads = 0;
    std::size_t words = 0;
    Pooling pooling = Pooling::max;
    std::vector<double> values;

    std::size_t index(std::size_t l, std::size_t h, std::size_t i, std::size_t j) const {
        return ((l * heads + h) * words + i) * words + j;
    }
    double at(std::size_t l, std::size_t h, std::size_t i, std::size_t j) const { return values[index(l, h, i, j)]; }
};

/// Entry (i, j) is the max (or mean) of token attention over queries in word i
/// and keys in word j. Both axes use the same mode.
WordAttention pool(const AttentionTensor& t, Pooling mode);

/// Sample variance over every cell of a pooled tensor.
double cell_variance(const WordAttention& w);

jsonl::json to_json(const WordAttention& w, const std::vector<WordSpan>& words);

/// Layers x heads matrix.
struct LayerHeadMatrix {
    std::size_t layers = 0;
    std::size_t heads = 0;
    std::vector<double> values;

    double at(std::size_t l, std::size_t h) const { return values[l * heads + h]; }
    double& at(std::size_t l, std::size_t h) { return values[l * heads + h]; }
    friend bool operator==(const LayerHeadMatrix&, const LayerHeadMatrix&) = default;
};

struct RelationAnnotation {
    std::string sentence_id;
    std::size_t from_word = 0;
    std::size_t to_word = 0;
    std::string relation = "adj-noun";
};

RelationAnnotation annotation_from_json(const jsonl::json& obj);

/// matrix[l][h] = w[l][h][from_word][to_word].
LayerHeadMatrix relation_heatmap(const WordAttention& w, const RelationAnnotation& ann);

struct ConceptHeatmap {
    LayerHeadMatrix values;
    std::size_t n_pairs = 0;
    std::string relation;
    std::string lang;
};

/// Element-wise mean in double precision. Each cell's terms are summed in
/// sorted order, so the result does not depend on the order of the inputs.
ConceptHeatmap aggregate_concept(const std::vector<LayerHeadMatrix>& heatmaps, std::string relation = "adj-noun",
                       std::string lang = "");

jsonl::json to_json(const ConceptHeatmap& c);
ConceptHeatmap concept_from_json(const jsonl::json& obj);

/// One row per layer, heads comma-separated, shortest round-trip decimals.
std::string heatmap_csv(const LayerHeadMatrix& m);
LayerHeadMatrix parse_heatmap_csv(std::string_view csv);

struct Rgb {
    std::uint8_t r, g, b;
    friend bool operator==(const Rgb&, const Rgb&) = default;
};

/// Linear blue scale from the matrix minimum (lightest) to maximum (darkest).
/// A constant matrix renders every cell in the lightest colour.
std::vector<Rgb> heatmap_colors(const LayerHeadMatrix& m);

/// Binary PPM, layer 1 on the top row and heads along x, one cell_px square
/// per entry; min and max are recorded as header comments.
std::string render_ppm(const ConceptHeatmap& c, std::size_t cell_px = 12);

/// Writes "<base>.ppm" and "<base>.csv"; returns both paths.
std::pair<std::filesystem::path, std::filesystem::path> render_heatmap(const ConceptHeatmap& c,
                                                                      const std::filesystem::path& base);

struct HeadScore {
    std::size_t layer = 0; // 0-based
    std::size_t head = 0;
    double value = 0.0;
    friend bool operator==(const HeadScore&, const HeadScore&) = default;
};

struct BandMean {
    std::size_t first_layer = 0; // 0-based, inclusive
    std::size_t last_layer = 0;  // inclusive
    double mean_a = 0.0;
    double mean_b = 0.0;
};

struct SimilarityReport {
    double cosine = 0.0;
    std::vector<BandMean> bands;
    std::vector<HeadScore> top_a;
    std::vector<HeadScore> top_b;

    jsonl::json to_json() const;
};

/// Strongest k cells, ties broken by (layer, head).
std::vector<HeadScore> top_heads(const LayerHeadMatrix& m, std::size_t k);

/// Cosine of the flattened matrices (0 when either is all zero), mean per
/// band of band_size layers, and the top-k heads of each matrix.
SimilarityReport compare_concepts(const ConceptHeatmap& a, const ConceptHeatmap& b, std::size_t top_k = 5,
                                  std::size_t band_size = 8);

} // namespace forge::attnmap
