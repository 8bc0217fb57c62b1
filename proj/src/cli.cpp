#include "forge/cli.hpp"

#include "forge/attnmap.hpp"
#include "forge/corpus.hpp"
#include "forge/error.hpp"
#include "forge/evalkit.hpp"
#include "forge/fertility.hpp"
#include "forge/interleave.hpp"
#include "forge/jsonl.hpp"
#include "forge/log.hpp"
#include "forge/parallel.hpp"
#include "forge/quality.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>

namespace forge::cli {

namespace fs = std::filesystem;
using jsonl::json;

namespace {

constexpr std::size_t kBatch = 8192;

struct Common {
    unsigned jobs = 1;
    std::uint64_t seed = 0;
    bool strict = false;
    std::string log_level = "info";
};

// Malformed-record bookkeeping shared by every streaming subcommand: skip and
// log by default, fail at the end when more than 1% of records were bad;
// --strict turns the first bad record into an immediate failure.
class LineSource {
public:
    LineSource(const fs::path& path, bool strict) : path_(path), reader_(path), strict_(strict) {}

    template <typename Conv>
    auto next(Conv&& conv) -> std::optional<decltype(conv(std::declval<const json&>()))> {
        while (true) {
            const std::size_t errors_before = reader_.errors().size();
            auto obj = reader_.next();
            if (reader_.errors().size() > errors_before) report_last();
            if (!obj) return std::nullopt;
            try {
                auto value = conv(*obj);
                ++valid_;
                return value;
            } catch (const ValidationError& e) {
                reader_.add_error(e.what());
                report_last();
            }
        }
    }

    std::optional<std::string> next_line() { return reader_.next_line(); }

    std::size_t valid() const { return valid_; }
    std::size_t invalid() const { return reader_.errors().size(); }
    const std::vector<jsonl::LineError>& errors() const { return reader_.errors(); }

    /// kExitValidation when more than 1% of records were rejected.
    int finish() const {
        const std::size_t total = valid_ + invalid();
        if (total > 0 && invalid() * 100 > total) {
            log::error("error_budget_exceeded",
                       {{"file", path_.string()}, {"invalid", invalid()}, {"records", total}});
            return kExitValidation;
        }
        return kExitOk;
    }

private:
    void report_last() {
        const auto& e = reader_.errors().back();
        if (strict_) throw ValidationError(path_.string() + " line " + std::to_string(e.line) + ": " + e.message);
        log::warn("record_rejected", {{"file", path_.string()}, {"line", e.line}, {"error", e.message}});
    }

    fs::path path_;
    jsonl::Reader reader_;
    bool strict_;
    std::size_t valid_ = 0;
};

// u = (rng() >> 11) * 2^-53, uniform on [0,1).
class Sampler {
public:
    Sampler(double fraction, std::uint64_t seed) : fraction_(fraction), rng_(seed) {}
    bool keep() {
        if (fraction_ >= 1.0) return true;
        const double u = static_cast<double>(rng_() >> 11) * 0x1.0p-53;
        return u < fraction_;
    }

private:
    double fraction_;
    std::mt19937_64 rng_;
};

void write_json_output(const json& value, const std::string& path, std::ostream& out) {
    const std::string text = value.dump(2) + "\n";
    if (path.empty()) {
        out << text;
    } else {
        jsonl::write_file(path, text);
    }
}

void write_text_output(const std::string& text, const std::string& path, std::ostream& out) {
    if (path.empty()) {
        out << text;
    } else {
        jsonl::write_file(path, text);
    }
}

std::vector<std::string> read_lines(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(std::move(line));
    }
    return lines;
}

corpus::Segmenter make_segmenter(const std::string& abbreviations) {
    if (abbreviations.empty()) return corpus::Segmenter();
    return corpus::Segmenter(corpus::load_abbreviations(abbreviations));
}

// ---- corpus ---------------------------------------------------------------

struct SegmentOpts {
    std::string lang;
    std::string in;
    std::string out;
    std::string abbreviations;
    std::string format = "jsonl";
};

int cmd_segment(const SegmentOpts& o, const Common& c) {
    const auto lang = corpus::parse_lang(o.lang);
    const auto segmenter = make_segmenter(o.abbreviations);
    LineSource src(o.in, c.strict);
    jsonl::Writer writer(o.out);

    std::size_t line_no = 0;
    auto read_doc = [&]() -> std::optional<corpus::Document> {
        if (o.format == "text") {
            while (auto line = src.next_line()) {
                ++line_no;
                if (line->find_first_not_of(" \t") == std::string::npos) continue;
                return corpus::Document{std::to_string(line_no), lang, *line, o.in};
            }
            return std::nullopt;
        }
        return src.next([&](const json& obj) {
            ++line_no;
            corpus::Document d;
            d.id = jsonl::get_optional_string(obj, "id").value_or(std::to_string(line_no));
            d.lang = lang;
            d.text = jsonl::get_string(obj, "text");
            d.source = jsonl::get_optional_string(obj, "source").value_or("");
            return d;
        });
    };

    std::vector<corpus::Document> batch;
    std::vector<std::optional<json>> results;
    std::vector<std::string> failures;
    std::size_t failed = 0;
    auto flush = [&] {
        results.assign(batch.size(), std::nullopt);
        failures.assign(batch.size(), {});
        parallel_for(batch.size(), c.jobs, [&](std::size_t i) {
            try {
                auto& d = batch[i];
                d.text = corpus::normalize(d.text);
                const auto spans = segmenter.segment(d);
                const auto texts = corpus::sentence_texts(d.text, spans);
                json sentences = json::array();
                for (std::size_t k = 0; k < spans.size(); ++k) {
                    sentences.push_back({{"start", spans[k].start}, {"end", spans[k].end}, {"text", texts[k]}});
                }
                results[i] = json{{"id", d.id}, {"lang", o.lang}, {"text", d.text}, {"sentences", sentences}};
            } catch (const ValidationError& e) {
                failures[i] = e.what();
            }
        });
        for (std::size_t i = 0; i < batch.size(); ++i) {
            if (results[i]) {
                writer.write(*results[i]);
                continue;
            }
            if (c.strict) throw ValidationError("document " + batch[i].id + ": " + failures[i]);
            ++failed;
            log::warn("document_rejected", {{"id", batch[i].id}, {"error", failures[i]}});
        }
        batch.clear();
    };
    while (auto d = read_doc()) {
        batch.push_back(std::move(*d));
        if (batch.size() == kBatch) flush();
    }
    flush();
    writer.close();

    const std::size_t total = writer.count() + failed + src.invalid();
    log::info("segment_done", {{"documents", writer.count()}, {"rejected", failed + src.invalid()}});
    if (total > 0 && (failed + src.invalid()) * 100 > total) return kExitValidation;
    return src.finish();
}

struct ValidateOpts {
    std::string in;
};

int cmd_validate(const ValidateOpts& o, const Common& c, std::ostream& out) {
    corpus::PairReader reader(o.in, c.strict ? corpus::Strictness::strict : corpus::Strictness::lenient);
    while (reader.next()) {
    }
    json errors = json::array();
    for (const auto& e : reader.errors()) {
        errors.push_back({{"line", e.line}, {"error", e.message}});
        log::warn("record_rejected", {{"file", o.in}, {"line", e.line}, {"error", e.message}});
    }
    json summary = {{"records", reader.records_read()},
                    {"valid", reader.valid()},
                    {"invalid", reader.errors().size()},
                    {"errors", errors}};
    out << summary.dump() << '\n';
    return reader.over_error_budget() ? kExitValidation : kExitOk;
}

// ---- quality --------------------------------------------------------------

struct ChrfOpts {
    std::string hyp;
    std::string ref;
    quality::ChrfParams params;
};

int cmd_chrf(const ChrfOpts& o, const Common& c, std::ostream& out) {
    o.params.validate();
    const auto hyps = read_lines(o.hyp);
    const auto refs = read_lines(o.ref);
    if (hyps.size() != refs.size()) {
        throw ValidationError("hypothesis and reference files differ in line count (" + std::to_string(hyps.size()) +
                              " vs " + std::to_string(refs.size()) + ")");
    }
    std::vector<double> scores(hyps.size());
    std::vector<std::string> failures(hyps.size());
    parallel_for(hyps.size(), c.jobs, [&](std::size_t i) {
        try {
            scores[i] = quality::chrfpp(corpus::normalize(hyps[i]), corpus::normalize(refs[i]), o.params);
        } catch (const ValidationError& e) {
            failures[i] = e.what();
        }
    });
    for (std::size_t i = 0; i < failures.size(); ++i) {
        if (!failures[i].empty()) throw ValidationError("line " + std::to_string(i + 1) + ": " + failures[i]);
    }
    char buf[32];
    for (double s : scores) {
        std::snprintf(buf, sizeof buf, "%.4f", quality::round_score(s));
        out << buf << '\n';
    }
    return kExitOk;
}

struct FilterOpts {
    std::string in;
    std::string out;
    std::string report;
    std::string discarded;
    double cutoff = 50.0;
    quality::ChrfParams params;
};

int cmd_filter(const FilterOpts& o, const Common& c) {
    quality::RoundTripFilter filter(o.cutoff, o.params);
    LineSource src(o.in, c.strict);
    jsonl::Writer kept(o.out);
    std::optional<jsonl::Writer> dropped;
    if (!o.discarded.empty()) dropped.emplace(o.discarded);

    struct Item {
        json record;
        std::string original;
        std::optional<std::string> backtranslation;
    };
    std::vector<Item> batch;
    std::vector<quality::FilterDecision> decisions;
    auto flush = [&] {
        decisions.assign(batch.size(), {});
        parallel_for(batch.size(), c.jobs, [&](std::size_t i) {
            decisions[i] = filter.evaluate(batch[i].original, batch[i].backtranslation);
        });
        for (std::size_t i = 0; i < batch.size(); ++i) {
            const auto& d = decisions[i];
            filter.record(d);
            auto& rec = batch[i].record;
            if (d.score) {
                rec["chrfpp"] = *d.score;
            } else {
                rec.erase("chrfpp");
            }
            if (d.kept) {
                kept.write(rec);
            } else if (dropped) {
                rec["discard_reason"] = quality::to_string(*d.reason);
                dropped->write(rec);
            }
        }
        batch.clear();
    };
    while (auto item = src.next([](const json& obj) {
        auto [original, bt] = quality::roundtrip_fields(obj);
        return Item{obj, std::move(original), std::move(bt)};
    })) {
        batch.push_back(std::move(*item));
        if (batch.size() == kBatch) flush();
    }
    flush();
    kept.close();
    if (dropped) dropped->close();

    json report = filter.report().to_json();
    report["malformed_lines"] = src.invalid();
    jsonl::write_file(o.report, report.dump(2) + "\n");
    log::info("filter_done", {{"total", filter.report().total},
                              {"kept", filter.report().kept},
                              {"discarded", filter.report().discarded}});
    return src.finish();
}

// ---- interleave -----------------------------------------------------------

struct SplitOpts {
    std::size_t offset = 0;
    std::size_t limit = 1'500'000;
    double sample_fraction = 1.0;
};

// Streams the [offset, offset + limit) slice of valid pairs, thinned by the
// seeded sampler, in batches.
template <typename Fn>
int for_each_split_batch(const std::string& in, const SplitOpts& split, const Common& c, Fn&& on_batch) {
    if (!(split.sample_fraction > 0.0 && split.sample_fraction <= 1.0)) {
        throw ValidationError("--sample-fraction must lie in (0,1]");
    }
    corpus::PairReader reader(in, c.strict ? corpus::Strictness::strict : corpus::Strictness::lenient);
    Sampler sampler(split.sample_fraction, c.seed);
    std::vector<corpus::ParallelPair> batch;
    std::size_t position = 0;
    std::size_t taken = 0;
    std::size_t logged = 0;
    while (taken < split.limit) {
        auto p = reader.next();
        for (; logged < reader.errors().size(); ++logged) {
            const auto& e = reader.errors()[logged];
            log::warn("record_rejected", {{"file", in}, {"line", e.line}, {"error", e.message}});
        }
        if (!p) break;
        if (position++ < split.offset) continue;
        ++taken;
        if (!sampler.keep()) continue;
        batch.push_back(std::move(*p));
        if (batch.size() == kBatch) {
            on_batch(batch);
            batch.clear();
        }
    }
    if (!batch.empty()) on_batch(batch);
    return reader.over_error_budget() ? kExitValidation : kExitOk;
}

struct TranslateOpts {
    std::string in;
    std::string out;
    std::string template_file;
    std::string drop_report;
    SplitOpts split;
};

int cmd_make_translate(const TranslateOpts& o, const Common& c) {
    interleave::PromptTemplate tmpl =
        o.template_file.empty() ? interleave::PromptTemplate() : interleave::PromptTemplate(jsonl::read_file(o.template_file));
    jsonl::Writer writer(o.out);
    interleave::DropReport drops;
    const int rc = for_each_split_batch(o.in, o.split, c, [&](std::vector<corpus::ParallelPair>& batch) {
        parallel_for(batch.size(), c.jobs, [&](std::size_t i) {
            batch[i].en_text = corpus::normalize(batch[i].en_text);
            batch[i].ne_text = corpus::normalize(batch[i].ne_text);
        });
        for (const auto& rec : interleave::make_translation_records(batch, tmpl, &drops)) {
            writer.write(interleave::to_json(rec));
        }
    });
    writer.close();
    if (!o.drop_report.empty()) jsonl::write_file(o.drop_report, drops.to_json().dump(2) + "\n");
    log::info("make_translate_done", drops.to_json());
    return rc;
}

struct BilingualOpts {
    std::string in;
    std::string out;
    std::string lead = "alternate";
    std::string abbreviations;
    std::string drop_report;
    SplitOpts split{1'500'000, 1'500'000, 1.0};
};

int cmd_make_bilingual(const BilingualOpts& o, const Common& c) {
    const auto policy = interleave::parse_lead_policy(o.lead);
    const auto segmenter = make_segmenter(o.abbreviations);
    jsonl::Writer writer(o.out);
    interleave::DropReport drops;
    std::size_t index = 0;
    const int rc = for_each_split_batch(o.in, o.split, c, [&](std::vector<corpus::ParallelPair>& batch) {
        std::vector<std::optional<interleave::BilingualParagraph>> paras(batch.size());
        std::vector<std::optional<interleave::SkipReason>> reasons(batch.size());
        parallel_for(batch.size(), c.jobs, [&](std::size_t i) {
            interleave::SkipReason why{};
            try {
                corpus::segment_pair(batch[i], segmenter);
            } catch (const ValidationError&) {
                reasons[i] = interleave::SkipReason::empty_side;
                return;
            }
            paras[i] = interleave::interleave_pair(batch[i], interleave::lead_for(policy, index + i), &why);
            if (!paras[i]) reasons[i] = why;
        });
        for (std::size_t i = 0; i < batch.size(); ++i) {
            drops.count(reasons[i]);
            if (paras[i]) {
                writer.write(interleave::to_json(*paras[i]));
            } else {
                log::warn("pair_dropped", {{"id", batch[i].id}, {"reason", interleave::to_string(*reasons[i])}});
            }
        }
        index += batch.size();
    });
    writer.close();
    if (!o.drop_report.empty()) jsonl::write_file(o.drop_report, drops.to_json().dump(2) + "\n");
    log::info("make_bilingual_done", drops.to_json());
    return rc;
}

struct ManifestOpts {
    std::string stage;
    std::vector<std::string> corpora;
    std::string lead;
    std::string out;
};

int cmd_manifest(const ManifestOpts& o, std::ostream& out) {
    std::vector<fs::path> paths(o.corpora.begin(), o.corpora.end());
    std::optional<interleave::LeadPolicy> lead;
    if (!o.lead.empty()) lead = interleave::parse_lead_policy(o.lead);
    const auto m = interleave::emit_manifest(interleave::parse_stage(o.stage), paths, lead);
    write_json_output(m.to_json(), o.out, out);
    return kExitOk;
}

// ---- fertility ------------------------------------------------------------

struct FertilityOpts {
    std::string in;
    std::string out;
    bool by_lang = false;
};

int cmd_fertility(const FertilityOpts& o, const Common& c, std::ostream& out) {
    LineSource src(o.in, c.strict);
    fertility::FertilityStats stats;
    std::size_t n = 0;
    while (src.next([&](const json& obj) {
        ++n;
        const std::string text = jsonl::get_string(obj, "text");
        fertility::TokenOffsets tokens;
        if (obj.contains("offsets")) {
            // attention sidecar layout: parallel "tokens" and "offsets" arrays
            const auto meta = attnmap::meta_from_json(obj);
            if (meta.offsets.size() != meta.tokens.size()) throw ValidationError("tokens/offsets length mismatch");
            for (std::size_t i = 0; i < meta.tokens.size(); ++i) {
                tokens.push_back({meta.tokens[i], meta.offsets[i].first, meta.offsets[i].second});
            }
        } else {
            if (!obj.contains("tokens")) throw ValidationError("missing required field \"tokens\"");
            tokens = fertility::tokens_from_json(obj["tokens"]);
        }
        const auto id = jsonl::get_optional_string(obj, "id").value_or(std::to_string(n));
        stats.add(id, jsonl::get_optional_string(obj, "lang").value_or(""), text, tokens);
        return true;
    })) {
    }
    for (const auto& [id, reason] : stats.skipped()) log::warn("document_skipped", {{"id", id}, {"reason", reason}});
    write_json_output(stats.to_json(o.by_lang), o.out, out);
    return src.finish();
}

// ---- attnmap --------------------------------------------------------------

struct PoolOpts {
    std::string in;
    std::string mode = "max";
    std::string out;
};

int cmd_attn_pool(const PoolOpts& o, std::ostream& out) {
    const auto tensor = attnmap::load_tensor(o.in);
    const auto mode = attnmap::parse_pooling(o.mode);
    const auto pooled = attnmap::pool(tensor, mode);
    json result = attnmap::to_json(pooled, tensor.meta.words);
    result["lang"] = tensor.meta.lang;
    // informational: how much each pooling mode flattens the attention
    const auto other = attnmap::pool(tensor, mode == attnmap::Pooling::max ? attnmap::Pooling::mean : attnmap::Pooling::max);
    result["variance"] = {{std::string(attnmap::to_string(mode)), attnmap::cell_variance(pooled)},
                          {std::string(attnmap::to_string(other.pooling)), attnmap::cell_variance(other)}};
    write_json_output(result, o.out, out);
    return kExitOk;
}

struct ConceptOpts {
    std::string annotations;
    std::string tensors;
    std::string mode = "max";
    std::string relation = "adj-noun";
    std::string out;
};

int cmd_attn_concept(const ConceptOpts& o, const Common& c, std::ostream& out) {
    const auto mode = attnmap::parse_pooling(o.mode);
    LineSource src(o.annotations, c.strict);
    std::map<std::string, std::pair<attnmap::WordAttention, std::string>> pooled;
    std::vector<attnmap::LayerHeadMatrix> heatmaps;
    std::set<std::string> langs;
    while (auto ann = src.next([](const json& obj) { return attnmap::annotation_from_json(obj); })) {
        if (ann->relation != o.relation) continue;
        auto it = pooled.find(ann->sentence_id);
        if (it == pooled.end()) {
            const auto path = fs::path(o.tensors) / (ann->sentence_id + ".atnt");
            if (!fs::exists(path)) throw IoError("no tensor for sentence " + ann->sentence_id + " at " + path.string());
            const auto t = attnmap::load_tensor(path);
            it = pooled.emplace(ann->sentence_id, std::pair{attnmap::pool(t, mode), t.meta.lang}).first;
        }
        heatmaps.push_back(attnmap::relation_heatmap(it->second.first, *ann));
        langs.insert(it->second.second);
    }
    if (heatmaps.empty()) throw ValidationError("no annotations with relation \"" + o.relation + "\"");
    const std::string lang = langs.size() == 1 ? *langs.begin() : "mixed";
    const auto heatmap = attnmap::aggregate_concept(heatmaps, o.relation, lang);
    json result = attnmap::to_json(heatmap);
    result["pooling"] = attnmap::to_string(mode);
    write_json_output(result, o.out, out);
    log::info("concept_done", {{"n_pairs", heatmap.n_pairs}, {"sentences", pooled.size()}});
    return src.finish();
}

attnmap::ConceptHeatmap read_concept(const std::string& path) {
    auto obj = json::parse(jsonl::read_file(path), nullptr, false);
    if (obj.is_discarded()) throw ValidationError(path + " is not valid JSON");
    return attnmap::concept_from_json(obj);
}

struct RenderOpts {
    std::string in;
    std::string out;
};

int cmd_attn_render(const RenderOpts& o, std::ostream& out) {
    const auto [ppm, csv] = attnmap::render_heatmap(read_concept(o.in), o.out);
    out << json{{"image", ppm.string()}, {"csv", csv.string()}}.dump() << '\n';
    return kExitOk;
}

struct CompareOpts {
    std::string a;
    std::string b;
    std::size_t top_k = 5;
    std::size_t band = 8;
    std::string out;
};

int cmd_attn_compare(const CompareOpts& o, std::ostream& out) {
    const auto report = attnmap::compare_concepts(read_concept(o.a), read_concept(o.b), o.top_k, o.band);
    write_json_output(report.to_json(), o.out, out);
    return kExitOk;
}

// ---- evalkit --------------------------------------------------------------

struct ReportOpts {
    std::string in;
    std::string format = "md";
    std::string output;
};

int cmd_report_bench(const ReportOpts& o, const Common& c, std::ostream& out) {
    LineSource src(o.in, c.strict);
    std::vector<evalkit::BenchScore> scores;
    while (auto s = src.next([](const json& obj) { return evalkit::bench_score_from_json(obj); })) {
        scores.push_back(std::move(*s));
    }
    const auto table = evalkit::bench_table(scores);
    write_text_output(o.format == "csv" ? table.to_csv() : table.to_markdown(), o.output, out);
    return src.finish();
}

int cmd_report_gen(const ReportOpts& o, const Common& c, std::ostream& out) {
    LineSource src(o.in, c.strict);
    std::vector<evalkit::GenScoreRecord> records;
    while (auto r = src.next([](const json& obj) { return evalkit::gen_record_from_json(obj); })) {
        records.push_back(std::move(*r));
    }
    const auto report = evalkit::gen_score_stats(records);
    std::string text;
    if (o.format == "csv") {
        text = report.to_csv();
    } else if (o.format == "json") {
        text = report.to_json().dump(2) + "\n";
    } else {
        text = report.to_markdown();
    }
    write_text_output(text, o.output, out);
    return src.finish();
}

void add_chrf_params(CLI::App* cmd, quality::ChrfParams& p) {
    cmd->add_option("--char-n", p.char_n_max, "Maximum character n-gram order")->capture_default_str();
    cmd->add_option("--word-n", p.word_n_max, "Maximum word n-gram order")->capture_default_str();
    cmd->add_option("--beta", p.beta, "Recall weight")->capture_default_str();
}

void add_split(CLI::App* cmd, SplitOpts& s) {
    cmd->add_option("--offset", s.offset, "Valid pairs to skip before the split")->capture_default_str();
    cmd->add_option("--limit", s.limit, "Maximum pairs in the split")->capture_default_str();
    cmd->add_option("--sample-fraction", s.sample_fraction, "Keep each pair with this probability (uses --seed)")
        ->capture_default_str();
}

class LogScope {
public:
    explicit LogScope(std::ostream& err) : stream_(log::set_stream(&err)), level_(log::set_min_level(log::Level::info)) {}
    ~LogScope() {
        log::set_stream(stream_);
        log::set_min_level(level_);
    }
    LogScope(const LogScope&) = delete;
    LogScope& operator=(const LogScope&) = delete;

private:
    std::ostream* stream_;
    log::Level level_;
};

log::Level parse_level(const std::string& s) {
    if (s == "debug") return log::Level::debug;
    if (s == "warn") return log::Level::warn;
    if (s == "error") return log::Level::error;
    return log::Level::info;
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    LogScope log_scope(err);

    CLI::App app{"Corpus construction, chrF++ filtering and attention analysis for low-resource DAPT", "forge"};
    app.require_subcommand(1);
    app.fallthrough();
    app.set_config("--config", "", "key=value config file ([subcommand] sections; flags override it)")
        ->envname("FORGE_CONFIG");

    Common common;
    app.add_option("--jobs", common.jobs, "Worker threads")->capture_default_str()->check(CLI::Range(1u, 1024u));
    app.add_option("--seed", common.seed, "Seed for corpus subsetting")->capture_default_str();
    app.add_flag("--strict", common.strict, "Fail on the first malformed record");
    app.add_option("--log-level", common.log_level, "debug|info|warn|error")
        ->capture_default_str()
        ->check(CLI::IsMember({"debug", "info", "warn", "error"}));

    SegmentOpts seg;
    auto* segment = app.add_subcommand("segment", "Normalize and sentence-segment documents");
    segment->add_option("--lang", seg.lang, "ne|en")->required()->check(CLI::IsMember({"ne", "en"}));
    segment->add_option("--in", seg.in, "Input JSONL ({\"id\",\"text\"}) or text")->required()->check(CLI::ExistingFile);
    segment->add_option("--out", seg.out, "Output JSONL")->required();
    segment->add_option("--abbreviations", seg.abbreviations, "Abbreviation stop-list file")->check(CLI::ExistingFile);
    segment->add_option("--format", seg.format, "jsonl|text")->capture_default_str()->check(CLI::IsMember({"jsonl", "text"}));

    ValidateOpts val;
    auto* validate = app.add_subcommand("validate", "Validate a parallel-pair JSONL file");
    validate->add_option("--in", val.in, "Parallel-pair JSONL")->required()->check(CLI::ExistingFile);

    ChrfOpts chrf;
    auto* chrf_cmd = app.add_subcommand("chrf", "Line-by-line chrF++ of hypotheses against references");
    chrf_cmd->add_option("--hyp", chrf.hyp, "Hypothesis lines")->required()->check(CLI::ExistingFile);
    chrf_cmd->add_option("--ref", chrf.ref, "Reference lines")->required()->check(CLI::ExistingFile);
    add_chrf_params(chrf_cmd, chrf.params);

    FilterOpts filt;
    auto* filter = app.add_subcommand("filter", "Backtranslation round-trip chrF++ filter");
    filter->add_option("--in", filt.in, "Triplet or pair JSONL with backtranslations")->required()->check(CLI::ExistingFile);
    filter->add_option("--out", filt.out, "Kept records")->required();
    filter->add_option("--report", filt.report, "FilterReport JSON")->required();
    filter->add_option("--discarded", filt.discarded, "Discarded records with reason codes");
    filter->add_option("--cutoff", filt.cutoff, "Minimum chrF++ to keep")->capture_default_str()->check(CLI::Range(0.0, 100.0));
    add_chrf_params(filter, filt.params);

    TranslateOpts tr;
    auto* make_translate = app.add_subcommand("make-translate", "EN->NE translation-task corpus");
    make_translate->add_option("--in", tr.in, "Parallel-pair JSONL")->required()->check(CLI::ExistingFile);
    make_translate->add_option("--out", tr.out, "Translation corpus JSONL")->required();
    make_translate->add_option("--template", tr.template_file, "Prompt template file with one {src}")->check(CLI::ExistingFile);
    make_translate->add_option("--drop-report", tr.drop_report, "Drop report JSON");
    add_split(make_translate, tr.split);

    BilingualOpts bi;
    auto* make_bilingual = app.add_subcommand("make-bilingual", "Sentence-alternating bilingual corpus");
    make_bilingual->add_option("--in", bi.in, "Parallel-pair JSONL")->required()->check(CLI::ExistingFile);
    make_bilingual->add_option("--out", bi.out, "Bilingual corpus JSONL")->required();
    make_bilingual->add_option("--lead", bi.lead, "alternate|ne|en")
        ->capture_default_str()
        ->check(CLI::IsMember({"alternate", "alternate-by-index", "ne", "en"}));
    make_bilingual->add_option("--abbreviations", bi.abbreviations, "Abbreviation stop-list file")->check(CLI::ExistingFile);
    make_bilingual->add_option("--drop-report", bi.drop_report, "Drop report JSON");
    add_split(make_bilingual, bi.split);

    ManifestOpts man;
    auto* manifest = app.add_subcommand("manifest", "Training manifest for a stage");
    manifest->add_option("--stage", man.stage, "pretrain_translate|pretrain_bilingual|finetune")
        ->required()
        ->check(CLI::IsMember({"pretrain_translate", "pretrain_bilingual", "finetune"}));
    manifest->add_option("--corpus", man.corpora, "Corpus files (repeatable)")->required();
    manifest->add_option("--lead", man.lead, "Lead policy used for the bilingual corpus");
    manifest->add_option("--out", man.out, "Manifest JSON (default: stdout)");

    FertilityOpts fert;
    auto* fertility_cmd = app.add_subcommand("fertility", "Tokens-per-word statistics");
    fertility_cmd->add_option("--in", fert.in, "JSONL {\"text\",\"tokens\":[[str,start,end]]}")->required()->check(CLI::ExistingFile);
    fertility_cmd->add_option("--out", fert.out, "Report JSON (default: stdout)");
    fertility_cmd->add_flag("--by-lang", fert.by_lang, "Add a per-language table");

    auto* attn = app.add_subcommand("attn", "Attention pooling and concept heatmaps");
    attn->require_subcommand(1);
    attn->fallthrough();

    PoolOpts pool;
    auto* attn_pool = attn->add_subcommand("pool", "Pool token attention to word attention");
    attn_pool->add_option("--in", pool.in, "ATNT tensor (sidecar alongside)")->required()->check(CLI::ExistingFile);
    attn_pool->add_option("--mode", pool.mode, "max|mean")->capture_default_str()->check(CLI::IsMember({"max", "mean"}));
    attn_pool->add_option("--out", pool.out, "Output JSON (default: stdout)");

    ConceptOpts con;
    auto* attn_concept = attn->add_subcommand("concept", "Average relation heatmaps into a concept");
    attn_concept->add_option("--annotations", con.annotations, "Annotation JSONL")->required()->check(CLI::ExistingFile);
    attn_concept->add_option("--tensors", con.tensors, "Directory of <sentence_id>.atnt files")
        ->required()
        ->check(CLI::ExistingDirectory);
    attn_concept->add_option("--mode", con.mode, "max|mean")->capture_default_str()->check(CLI::IsMember({"max", "mean"}));
    attn_concept->add_option("--relation", con.relation, "Relation label to aggregate")->capture_default_str();
    attn_concept->add_option("--out", con.out, "Concept JSON (default: stdout)");

    RenderOpts ren;
    auto* attn_render = attn->add_subcommand("render", "Render a concept heatmap to PPM and CSV");
    attn_render->add_option("--in", ren.in, "Concept JSON")->required()->check(CLI::ExistingFile);
    attn_render->add_option("--out", ren.out, "Output base path (writes .ppm and .csv)")->required();

    CompareOpts cmp;
    auto* attn_compare = attn->add_subcommand("compare", "Compare two concept heatmaps");
    attn_compare->add_option("--a", cmp.a, "First concept JSON")->required()->check(CLI::ExistingFile);
    attn_compare->add_option("--b", cmp.b, "Second concept JSON")->required()->check(CLI::ExistingFile);
    attn_compare->add_option("--top-k", cmp.top_k, "Strongest heads to list")->capture_default_str();
    attn_compare->add_option("--band", cmp.band, "Layers per band")->capture_default_str()->check(CLI::PositiveNumber);
    attn_compare->add_option("--out", cmp.out, "Report JSON (default: stdout)");

    auto* report = app.add_subcommand("report", "Benchmark and generation-score reports");
    report->require_subcommand(1);
    report->fallthrough();

    ReportOpts bench;
    auto* report_bench = report->add_subcommand("bench", "0-shot vs k-shot percent-change table");
    report_bench->add_option("--in", bench.in, "Bench scores JSONL")->required()->check(CLI::ExistingFile);
    report_bench->add_option("--out", bench.format, "md|csv")->capture_default_str()->check(CLI::IsMember({"md", "csv"}));
    report_bench->add_option("--output", bench.output, "Write to file instead of stdout");

    ReportOpts gen;
    auto* report_gen = report->add_subcommand("gen", "Generation-score distributions");
    report_gen->add_option("--in", gen.in, "Gen scores JSONL")->required()->check(CLI::ExistingFile);
    report_gen->add_option("--out", gen.format, "md|csv|json")
        ->capture_default_str()
        ->check(CLI::IsMember({"md", "csv", "json"}));
    report_gen->add_option("--output", gen.output, "Write to file instead of stdout");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n" << app.help();
        return kExitValidation;
    }

    log::set_min_level(parse_level(common.log_level));
    try {
        if (segment->parsed()) return cmd_segment(seg, common);
        if (validate->parsed()) return cmd_validate(val, common, out);
        if (chrf_cmd->parsed()) return cmd_chrf(chrf, common, out);
        if (filter->parsed()) return cmd_filter(filt, common);
        if (make_translate->parsed()) return cmd_make_translate(tr, common);
        if (make_bilingual->parsed()) return cmd_make_bilingual(bi, common);
        if (manifest->parsed()) return cmd_manifest(man, out);
        if (fertility_cmd->parsed()) return cmd_fertility(fert, common, out);
        if (attn_pool->parsed()) return cmd_attn_pool(pool, out);
        if (attn_concept->parsed()) return cmd_attn_concept(con, common, out);
        if (attn_render->parsed()) return cmd_attn_render(ren, out);
        if (attn_compare->parsed()) return cmd_attn_compare(cmp, out);
        if (report_bench->parsed()) return cmd_report_bench(bench, common, out);
        if (report_gen->parsed()) return cmd_report_gen(gen, common, out);
    } catch (const ValidationError& e) {
        log::error("validation_failed", {{"error", e.what()}});
        return kExitValidation;
    } catch (const IoError& e) {
        log::error("io_failed", {{"error", e.what()}});
        return kExitIo;
    } catch (const fs::filesystem_error& e) {
        log::error("io_failed", {{"error", e.what()}});
        return kExitIo;
    } catch (const std::exception& e) {
        log::error("failed", {{"error", e.what()}});
        return kExitValidation;
    }
    err << app.help();
    return kExitValidation;
}

} // namespace forge::cli
