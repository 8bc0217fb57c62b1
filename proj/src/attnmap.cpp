#include "forge/attnmap.hpp"

#include "forge/error.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <limits>
#include <sstream>

namespace forge::attnmap {

namespace {

std::uint32_t read_u32(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void write_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::string format_double(double v) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, end);
}

void check_unit_interval(double v, const char* what) {
    if (!std::isfinite(v)) throw ValidationError(std::string(what) + " contains a non-finite value");
    if (v < 0.0 || v > 1.0) throw ValidationError(std::string(what) + " value outside [0,1]: " + format_double(v));
}

} // namespace

std::filesystem::path sidecar_path(const std::filesystem::path& tensor_path) {
    auto p = tensor_path;
    p.replace_extension(".meta.json");
    return p;
}

AttentionTensor decode_tensor(std::string_view bytes) {
    if (bytes.size() < kHeaderBytes) throw ValidationError("attention file truncated: header incomplete");
    if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw ValidationError("bad magic (expected ATNT)");
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    if (p[4] != kVersion) throw ValidationError("unsupported ATNT version " + std::to_string(p[4]));

    AttentionTensor t;
    t.layers = read_u32(p + 5);
    t.heads = read_u32(p + 9);
    t.seq = read_u32(p + 13);
    if (t.layers == 0 || t.heads == 0 || t.seq == 0) throw ValidationError("ATNT dimensions must be nonzero");

    // L*H*S*S*4 must fit in the file; reject anything that overflows 64 bits.
    constexpr auto kMax = std::numeric_limits<std::uint64_t>::max();
    std::uint64_t count = t.layers;
    for (std::uint64_t d : {std::uint64_t{t.heads}, std::uint64_t{t.seq}, std::uint64_t{t.seq}}) {
        if (count > kMax / d) throw ValidationError("ATNT dimension overflow");
        count *= d;
    }
    if (count > (kMax - kHeaderBytes) / 4) throw ValidationError("ATNT dimension overflow");
    const std::uint64_t expected = kHeaderBytes + count * 4;
    if (bytes.size() != expected) {
        throw ValidationError("ATNT size mismatch: header implies " + std::to_string(expected) + " bytes, file has " +
                              std::to_string(bytes.size()));
    }

    t.values.resize(static_cast<std::size_t>(count));
    const unsigned char* src = p + kHeaderBytes;
    for (std::size_t i = 0; i < t.values.size(); ++i) {
        t.values[i] = std::bit_cast<float>(read_u32(src + 4 * i));
    }
    return t;
}

std::string encode_tensor(const AttentionTensor& t) {
    const std::size_t count = static_cast<std::size_t>(t.layers) * t.heads * t.seq * t.seq;
    if (t.values.size() != count) throw ValidationError("tensor value count does not match its dimensions");
    std::string out;
    out.reserve(kHeaderBytes + 4 * count);
    out.append(kMagic, 4);
    out.push_back(static_cast<char>(kVersion));
    write_u32(out, t.layers);
    write_u32(out, t.heads);
    write_u32(out, t.seq);
    for (float v : t.values) write_u32(out, std::bit_cast<std::uint32_t>(v));
    return out;
}

void validate(const AttentionTensor& t) {
    for (std::size_t l = 0; l < t.layers; ++l) {
        for (std::size_t h = 0; h < t.heads; ++h) {
            for (std::size_t q = 0; q < t.seq; ++q) {
                double sum = 0.0;
                for (std::size_t k = 0; k < t.seq; ++k) {
                    const float v = t.at(l, h, q, k);
                    if (std::isnan(v)) {
                        throw ValidationError("NaN value at layer " + std::to_string(l) + ", head " +
                                              std::to_string(h) + ", query " + std::to_string(q));
                    }
                    if (!(v >= 0.0f && v <= 1.0f)) {
                        throw ValidationError("attention value outside [0,1] at layer " + std::to_string(l) +
                                              ", head " + std::to_string(h) + ", query " + std::to_string(q));
                    }
                    sum += v;
                }
                if (std::abs(sum - 1.0) > kRowSumTolerance) {
                    throw ValidationError("non-stochastic row at layer " + std::to_string(l) + ", head " +
                                          std::to_string(h) + ", query " + std::to_string(q) +
                                          ": sum = " + format_double(sum));
                }
            }
        }
    }
    if (t.meta.tokens.size() != t.seq) {
        throw ValidationError("sidecar lists " + std::to_string(t.meta.tokens.size()) + " tokens but tensor has S = " +
                              std::to_string(t.seq));
    }
    if (!t.meta.offsets.empty() && t.meta.offsets.size() != t.seq) {
        throw ValidationError("sidecar offsets count does not match S");
    }
    std::size_t next = 0;
    for (const auto& w : t.meta.words) {
        if (w.tok_start != next || w.tok_end <= w.tok_start) {
            throw ValidationError("word spans must partition the tokens contiguously");
        }
        next = w.tok_end;
    }
    if (next != t.seq) throw ValidationError("word spans must cover all " + std::to_string(t.seq) + " tokens");
}

AttentionMeta meta_from_json(const jsonl::json& obj) {
    if (!obj.is_object()) throw ValidationError("sidecar must be a JSON object");
    AttentionMeta m;
    try {
        m.tokens = obj.at("tokens").get<std::vector<std::string>>();
        if (auto it = obj.find("offsets"); it != obj.end()) {
            for (const auto& o : *it) {
                if (!o.is_array() || o.size() != 2) throw ValidationError("offsets entries must be [start, end]");
                m.offsets.emplace_back(o[0].get<std::size_t>(), o[1].get<std::size_t>());
            }
        }
        if (auto it = obj.find("words"); it != obj.end()) {
            for (const auto& w : *it) {
                m.words.push_back(
                    {w.at("word").get<std::string>(), w.at("tok_start").get<std::size_t>(), w.at("tok_end").get<std::size_t>()});
            }
        }
        m.lang = obj.value("lang", "");
        m.text = obj.value("text", "");
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("malformed sidecar: ") + e.what());
    }
    return m;
}

jsonl::json meta_to_json(const AttentionMeta& m) {
    jsonl::json offsets = jsonl::json::array();
    for (const auto& [s, e] : m.offsets) offsets.push_back({s, e});
    jsonl::json words = jsonl::json::array();
    for (const auto& w : m.words) words.push_back({{"word", w.word}, {"tok_start", w.tok_start}, {"tok_end", w.tok_end}});
    return {{"tokens", m.tokens}, {"offsets", offsets}, {"words", words}, {"lang", m.lang}, {"text", m.text}};
}

AttentionTensor load_tensor(const std::filesystem::path& path) {
    AttentionTensor t = decode_tensor(jsonl::read_file(path));
    const auto side = sidecar_path(path);
    if (!std::filesystem::exists(side)) throw IoError("missing sidecar " + side.string());
    auto obj = jsonl::json::parse(jsonl::read_file(side), nullptr, false);
    if (obj.is_discarded()) throw ValidationError("sidecar " + side.string() + " is not valid JSON");
    t.meta = meta_from_json(obj);
    if (t.meta.words.empty()) {
        if (t.meta.offsets.size() != t.meta.tokens.size() || t.meta.text.empty()) {
            throw ValidationError("sidecar has neither word spans nor token offsets with text");
        }
        fertility::TokenOffsets toks;
        for (std::size_t i = 0; i < t.meta.tokens.size(); ++i) {
            toks.push_back({t.meta.tokens[i], t.meta.offsets[i].first, t.meta.offsets[i].second});
        }
        t.meta.words = fertility::align_tokens_to_words(t.meta.text, toks);
    }
    validate(t);
    return t;
}

void store_tensor(const AttentionTensor& t, const std::filesystem::path& path) {
    jsonl::write_file(path, encode_tensor(t));
    jsonl::write_file(sidecar_path(path), meta_to_json(t.meta).dump(2) + "\n");
}

std::string_view to_string(Pooling p) { return p == Pooling::max ? "max" : "mean"; }

Pooling parse_pooling(std::string_view s) {
    if (s == "max") return Pooling::max;
    if (s == "mean") return Pooling::mean;
    throw ValidationError("unknown pooling mode \"" + std::string(s) + "\" (expected max or mean)");
}

WordAttention pool(const AttentionTensor& t, Pooling mode) {
    const auto& spans = t.meta.words;
    WordAttention w;
    w.layers = t.layers;
    w.heads = t.heads;
    w.words = spans.size();
    w.pooling = mode;
    w.values.assign(w.layers * w.heads * w.words * w.words, 0.0);
    for (std::size_t l = 0; l < w.layers; ++l) {
        for (std::size_t h = 0; h < w.heads; ++h) {
            for (std::size_t i = 0; i < w.words; ++i) {
                for (std::size_t j = 0; j < w.words; ++j) {
                    double acc = mode == Pooling::max ? -1.0 : 0.0;
                    for (std::size_t q = spans[i].tok_start; q < spans[i].tok_end; ++q) {
                        for (std::size_t k = spans[j].tok_start; k < spans[j].tok_end; ++k) {
                            const double v = t.at(l, h, q, k);
                            if (mode == Pooling::max) {
                                acc = std::max(acc, v);
                            } else {
                                acc += v;
                            }
                        }
                    }
                    if (mode == Pooling::mean) acc /= static_cast<double>(spans[i].size() * spans[j].size());
                    w.values[w.index(l, h, i, j)] = acc;
                }
            }
        }
    }
    return w;
}

double cell_variance(const WordAttention& w) {
    const std::size_t n = w.values.size();
    if (n < 2) return 0.0;
    double mean = 0.0;
    for (double v : w.values) mean += v;
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (double v : w.values) ss += (v - mean) * (v - mean);
    return ss / static_cast<double>(n - 1);
}

jsonl::json to_json(const WordAttention& w, const std::vector<WordSpan>& words) {
    jsonl::json names = jsonl::json::array();
    for (const auto& s : words) names.push_back(s.word);
    jsonl::json layers = jsonl::json::array();
    for (std::size_t l = 0; l < w.layers; ++l) {
        jsonl::json heads = jsonl::json::array();
        for (std::size_t h = 0; h < w.heads; ++h) {
            jsonl::json rows = jsonl::json::array();
            for (std::size_t i = 0; i < w.words; ++i) {
                jsonl::json row = jsonl::json::array();
                for (std::size_t j = 0; j < w.words; ++j) row.push_back(w.at(l, h, i, j));
                rows.push_back(std::move(row));
            }
            heads.push_back(std::move(rows));
        }
        layers.push_back(std::move(heads));
    }
    return {{"pooling", to_string(w.pooling)},
            {"pooled_axes", "query+key"},
            {"layers", w.layers},
            {"heads", w.heads},
            {"words", names},
            {"values", layers}};
}

RelationAnnotation annotation_from_json(const jsonl::json& obj) {
    RelationAnnotation a;
    a.sentence_id = jsonl::get_string(obj, "sentence_id");
    for (const char* f : {"from_word", "to_word"}) {
        auto it = obj.find(f);
        if (it == obj.end() || !it->is_number_unsigned()) {
            throw ValidationError(std::string("field \"") + f + "\" must be a non-negative integer");
        }
    }
    a.from_word = obj["from_word"].get<std::size_t>();
    a.to_word = obj["to_word"].get<std::size_t>();
    a.relation = jsonl::get_optional_string(obj, "relation").value_or("adj-noun");
    if (a.from_word == a.to_word) throw ValidationError("annotation from_word equals to_word");
    return a;
}

LayerHeadMatrix relation_heatmap(const WordAttention& w, const RelationAnnotation& ann) {
    if (ann.from_word == ann.to_word) throw ValidationError("annotation from_word equals to_word");
    if (ann.from_word >= w.words || ann.to_word >= w.words) {
        throw ValidationError("annotation word index out of range (W = " + std::to_string(w.words) + ")");
    }
    LayerHeadMatrix m{w.layers, w.heads, std::vector<double>(w.layers * w.heads)};
    for (std::size_t l = 0; l < w.layers; ++l) {
        for (std::size_t h = 0; h < w.heads; ++h) m.at(l, h) = w.at(l, h, ann.from_word, ann.to_word);
    }
    return m;
}

ConceptHeatmap aggregate_concept(const std::vector<LayerHeadMatrix>& heatmaps, std::string relation, std::string lang) {
    if (heatmaps.empty()) throw ValidationError("cannot average an empty list of heatmaps");
    const auto& first = heatmaps.front();
    for (const auto& m : heatmaps) {
        if (m.layers != first.layers || m.heads != first.heads || m.values.size() != first.layers * first.heads) {
            throw ValidationError("heatmap dimension mismatch");
        }
        for (double v : m.values) check_unit_interval(v, "heatmap");
    }
    ConceptHeatmap c;
    c.values = {first.layers, first.heads, std::vector<double>(first.values.size())};
    c.n_pairs = heatmaps.size();
    c.relation = std::move(relation);
    c.lang = std::move(lang);
    std::vector<double> terms(heatmaps.size());
    for (std::size_t cell = 0; cell < first.values.size(); ++cell) {
        for (std::size_t i = 0; i < heatmaps.size(); ++i) terms[i] = heatmaps[i].values[cell];
        std::sort(terms.begin(), terms.end());
        double sum = 0.0;
        for (double v : terms) sum += v;
        c.values.values[cell] = std::clamp(sum / static_cast<double>(terms.size()), 0.0, 1.0);
    }
    return c;
}

jsonl::json to_json(const ConceptHeatmap& c) {
    jsonl::json rows = jsonl::json::array();
    for (std::size_t l = 0; l < c.values.layers; ++l) {
        jsonl::json row = jsonl::json::array();
        for (std::size_t h = 0; h < c.values.heads; ++h) row.push_back(c.values.at(l, h));
        rows.push_back(std::move(row));
    }
    return {{"relation", c.relation}, {"lang", c.lang}, {"n_pairs", c.n_pairs},
            {"layers", c.values.layers}, {"heads", c.values.heads}, {"values", rows}};
}

ConceptHeatmap concept_from_json(const jsonl::json& obj) {
    ConceptHeatmap c;
    try {
        c.relation = obj.value("relation", "");
        c.lang = obj.value("lang", "");
        c.n_pairs = obj.at("n_pairs").get<std::size_t>();
        const auto& rows = obj.at("values");
        c.values.layers = rows.size();
        c.values.heads = rows.empty() ? 0 : rows.front().size();
        for (const auto& row : rows) {
            if (row.size() != c.values.heads) throw ValidationError("concept rows have unequal lengths");
            for (const auto& v : row) c.values.values.push_back(v.get<double>());
        }
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("malformed concept heatmap: ") + e.what());
    }
    if (c.n_pairs == 0) throw ValidationError("concept heatmap must average at least one pair");
    if (c.values.values.empty()) throw ValidationError("concept heatmap is empty");
    for (double v : c.values.values) check_unit_interval(v, "concept heatmap");
    return c;
}

std::string heatmap_csv(const LayerHeadMatrix& m) {
    std::string out;
    for (std::size_t l = 0; l < m.layers; ++l) {
        for (std::size_t h = 0; h < m.heads; ++h) {
            if (h > 0) out.push_back(',');
            out += format_double(m.at(l, h));
        }
        out.push_back('\n');
    }
    return out;
}

LayerHeadMatrix parse_heatmap_csv(std::string_view csv) {
    LayerHeadMatrix m;
    std::size_t pos = 0;
    while (pos < csv.size()) {
        auto eol = csv.find('\n', pos);
        if (eol == std::string_view::npos) eol = csv.size();
        std::string_view line = csv.substr(pos, eol - pos);
        pos = eol + 1;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty()) continue;
        std::size_t cols = 0;
        std::size_t f = 0;
        while (f <= line.size()) {
            auto comma = line.find(',', f);
            if (comma == std::string_view::npos) comma = line.size();
            double v = 0.0;
            auto field = line.substr(f, comma - f);
            auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
            if (ec != std::errc() || ptr != field.data() + field.size()) {
                throw ValidationError("bad CSV number \"" + std::string(field) + "\"");
            }
            m.values.push_back(v);
            ++cols;
            f = comma + 1;
        }
        if (m.layers == 0) {
            m.heads = cols;
        } else if (cols != m.heads) {
            throw ValidationError("CSV rows have unequal lengths");
        }
        ++m.layers;
    }
    return m;
}

std::vector<Rgb> heatmap_colors(const LayerHeadMatrix& m) {
    constexpr Rgb light{247, 251, 255};
    constexpr Rgb dark{8, 48, 107};
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (double v : m.values) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    auto lerp = [](std::uint8_t a, std::uint8_t b, double t) {
        return static_cast<std::uint8_t>(std::lround(a + (static_cast<double>(b) - a) * t));
    };
    std::vector<Rgb> out;
    out.reserve(m.values.size());
    for (double v : m.values) {
        const double t = hi > lo ? (v - lo) / (hi - lo) : 0.0;
        out.push_back({lerp(light.r, dark.r, t), lerp(light.g, dark.g, t), lerp(light.b, dark.b, t)});
    }
    return out;
}

std::string render_ppm(const ConceptHeatmap& c, std::size_t cell_px) {
    const auto& m = c.values;
    if (m.layers == 0 || m.heads == 0 || cell_px == 0) throw ValidationError("cannot render an empty heatmap");
    const auto colors = heatmap_colors(m);
    const auto [lo, hi] = std::minmax_element(m.values.begin(), m.values.end());
    std::ostringstream header;
    header << "P6\n# rows: layers (layer 1 at top), columns: heads; darker = stronger\n"
           << "# relation=" << c.relation << " lang=" << c.lang << " n_pairs=" << c.n_pairs << "\n"
           << "# min=" << format_double(*lo) << " max=" << format_double(*hi) << "\n"
           << m.heads * cell_px << ' ' << m.layers * cell_px << "\n255\n";
    std::string out = header.str();
    out.reserve(out.size() + m.layers * m.heads * cell_px * cell_px * 3);
    for (std::size_t l = 0; l < m.layers; ++l) {
        for (std::size_t y = 0; y < cell_px; ++y) {
            for (std::size_t h = 0; h < m.heads; ++h) {
                const Rgb& c = colors[l * m.heads + h];
                for (std::size_t x = 0; x < cell_px; ++x) {
                    out.push_back(static_cast<char>(c.r));
                    out.push_back(static_cast<char>(c.g));
                    out.push_back(static_cast<char>(c.b));
                }
            }
        }
    }
    return out;
}

std::pair<std::filesystem::path, std::filesystem::path> render_heatmap(const ConceptHeatmap& c,
                                                                      const std::filesystem::path& base) {
    std::filesystem::path ppm = base;
    ppm += ".ppm";
    std::filesystem::path csv = base;
    csv += ".csv";
    jsonl::write_file(ppm, render_ppm(c));
    jsonl::write_file(csv, heatmap_csv(c.values));
    return {ppm, csv};
}

std::vector<HeadScore> top_heads(const LayerHeadMatrix& m, std::size_t k) {
    std::vector<HeadScore> all;
    all.reserve(m.values.size());
    for (std::size_t l = 0; l < m.layers; ++l) {
        for (std::size_t h = 0; h < m.heads; ++h) all.push_back({l, h, m.at(l, h)});
    }
    const auto n = std::min(k, all.size());
    std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n), all.end(),
                      [](const HeadScore& a, const HeadScore& b) {
                          if (a.value != b.value) return a.value > b.value;
                          return std::tie(a.layer, a.head) < std::tie(b.layer, b.head);
                      });
    all.resize(n);
    return all;
}

SimilarityReport compare_concepts(const ConceptHeatmap& a, const ConceptHeatmap& b, std::size_t top_k,
                                  std::size_t band_size) {
    const auto& ma = a.values;
    const auto& mb = b.values;
    if (ma.layers != mb.layers || ma.heads != mb.heads) throw ValidationError("concept heatmap dimension mismatch");
    if (band_size == 0) throw ValidationError("band size must be positive");

    SimilarityReport r;
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < ma.values.size(); ++i) {
        dot += ma.values[i] * mb.values[i];
        na += ma.values[i] * ma.values[i];
        nb += mb.values[i] * mb.values[i];
    }
    r.cosine = (na > 0.0 && nb > 0.0) ? dot / (std::sqrt(na) * std::sqrt(nb)) : 0.0;
    r.cosine = std::clamp(r.cosine, -1.0, 1.0);

    for (std::size_t first = 0; first < ma.layers; first += band_size) {
        const std::size_t last = std::min(ma.layers, first + band_size) - 1;
        BandMean band{first, last, 0.0, 0.0};
        for (std::size_t l = first; l <= last; ++l) {
            for (std::size_t h = 0; h < ma.heads; ++h) {
                band.mean_a += ma.at(l, h);
                band.mean_b += mb.at(l, h);
            }
        }
        const auto cells = static_cast<double>((last - first + 1) * ma.heads);
        band.mean_a /= cells;
        band.mean_b /= cells;
        r.bands.push_back(band);
    }
    r.top_a = top_heads(ma, top_k);
    r.top_b = top_heads(mb, top_k);
    return r;
}

jsonl::json SimilarityReport::to_json() const {
    auto heads_json = [](const std::vector<HeadScore>& v) {
        jsonl::json arr = jsonl::json::array();
        for (const auto& s : v) arr.push_back({{"layer", s.layer + 1}, {"head", s.head + 1}, {"value", s.value}});
        return arr;
    };
    jsonl::json bands_json = jsonl::json::array();
    for (const auto& b : bands) {
        bands_json.push_back({{"layers", std::to_string(b.first_layer + 1) + "-" + std::to_string(b.last_layer + 1)},
                              {"mean_a", b.mean_a},
                              {"mean_b", b.mean_b},
                              {"diff", b.mean_b - b.mean_a}});
    }
    return {{"cosine", cosine}, {"bands", bands_json}, {"top_a", heads_json(top_a)}, {"top_b", heads_json(top_b)}};
}

} // namespace forge::attnmap
