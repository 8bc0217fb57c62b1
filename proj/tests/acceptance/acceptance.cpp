// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include "forge/attnmap.hpp"
#include "forge/cli.hpp"
#include "forge/corpus.hpp"
#include "forge/evalkit.hpp"
#include "forge/interleave.hpp"
#include "forge/log.hpp"
#include "forge/parallel.hpp"
#include "forge/quality.hpp"
#include "forge/text.hpp"
#include "test_support.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <thread>

using namespace forge;
using forge::testing::fixture;
using forge::testing::fixture_records;

namespace {

struct Fail {
    std::string what;
};

void expect(bool cond, const std::string& what) {
    if (!cond) throw Fail{what};
}

int failures = 0;

void criterion(const std::string& name, double budget_s, const std::function<std::string()>& body) {
    const auto t0 = std::chrono::steady_clock::now();
    std::string detail;
    bool ok = true;
    try {
        detail = body();
    } catch (const Fail& f) {
        ok = false;
        detail = f.what;
    } catch (const std::exception& e) {
        ok = false;
        detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (ok && secs > budget_s) {
        ok = false;
        detail += "; over time budget";
    }
    if (!ok) ++failures;
    std::printf("%s %-28s %7.2fs (budget %.0fs)  %s\n", ok ? "PASS" : "FAIL", name.c_str(), secs, budget_s,
                detail.c_str());
    std::fflush(stdout);
}

// ---- generators -----------------------------------------------------------

const std::vector<std::string> kEnWords = {"river", "valley", "mountain", "rice", "farmer", "road", "school",
                                           "temple", "market", "tea",  "festival", "bus", "city", "old",
                                           "green", "quiet", "walks", "grows", "opens", "carries"};
const std::vector<std::string> kNeWords = {"नदी",  "उपत्यका", "हिमाल", "धान",   "किसान", "सडक",   "विद्यालय",
                                           "मन्दिर", "बजार",   "चिया",  "चाड",   "बस",    "सहर",   "पुरानो",
                                           "हरियो", "शान्त",  "हिँड्छ", "फल्छ",  "खुल्छ", "बोक्छ"};

std::string sentence(std::mt19937_64& rng, const std::vector<std::string>& words, const char* terminator) {
    std::uniform_int_distribution<std::size_t> len(2, 9), pick(0, words.size() - 1);
    std::string s;
    const std::size_t n = len(rng);
    for (std::size_t i = 0; i < n; ++i) {
        if (i) s += ' ';
        s += words[pick(rng)];
    }
    if (s[0] >= 'a' && s[0] <= 'z') s[0] = static_cast<char>(s[0] - 'a' + 'A');
    return s + terminator;
}

struct SyntheticPair {
    corpus::ParallelPair pair;
    std::vector<std::string> en;
    std::vector<std::string> ne;
};

SyntheticPair synthetic_pair(std::mt19937_64& rng, std::size_t id) {
    SyntheticPair sp;
    const std::size_t n = std::uniform_int_distribution<std::size_t>(1, 6)(rng);
    static const char* en_term[] = {".", "?", "!"};
    static const char* ne_term[] = {"।", "?", "॥"};
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t t = std::uniform_int_distribution<std::size_t>(0, 2)(rng);
        sp.en.push_back(sentence(rng, kEnWords, en_term[t]));
        sp.ne.push_back(sentence(rng, kNeWords, ne_term[t]));
    }
    auto join = [](const std::vector<std::string>& v) {
        std::string s;
        for (const auto& x : v) s += (s.empty() ? "" : " ") + x;
        return s;
    };
    sp.pair.id = "syn" + std::to_string(id);
    sp.pair.en_text = join(sp.en);
    sp.pair.ne_text = join(sp.ne);
    sp.pair.source = "synthetic";
    return sp;
}

std::optional<corpus::Lang> script_of(std::string_view s) {
    std::size_t deva = 0, latin = 0;
    for (char32_t cp : text::decode(s)) {
        deva += text::is_devanagari(cp);
        latin += text::is_latin_letter(cp);
    }
    if (deva && !latin) return corpus::Lang::ne;
    if (latin && !deva) return corpus::Lang::en;
    return std::nullopt;
}

std::string random_text(std::mt19937_64& rng) {
    std::string s;
    const std::size_t words = std::uniform_int_distribution<std::size_t>(1, 12)(rng);
    for (std::size_t i = 0; i < words; ++i) {
        if (i) s += ' ';
        const auto& pool = rng() % 2 ? kEnWords : kNeWords;
        s += pool[rng() % pool.size()];
        if (rng() % 5 == 0) s += ",.!?"[rng() % 4];
    }
    return s;
}

attnmap::AttentionTensor random_tensor(std::mt19937_64& rng) {
    std::uniform_int_distribution<std::uint32_t> dim(1, 4), seq(1, 16);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    attnmap::AttentionTensor t;
    t.layers = dim(rng);
    t.heads = dim(rng);
    t.seq = seq(rng);
    const std::size_t s = t.seq;
    t.values.resize(std::size_t{t.layers} * t.heads * s * s);
    for (std::size_t row = 0; row < std::size_t{t.layers} * t.heads * s; ++row) {
        double sum = 0.0;
        std::vector<double> r(s);
        for (auto& v : r) sum += (v = std::pow(u(rng), 3.0) + 1e-9);
        for (std::size_t k = 0; k < s; ++k) t.values[row * s + k] = static_cast<float>(r[k] / sum);
    }
    // random partition of tokens into contiguous words
    std::size_t start = 0;
    while (start < s) {
        const std::size_t len = std::uniform_int_distribution<std::size_t>(1, std::min<std::size_t>(4, s - start))(rng);
        t.meta.words.push_back({"w" + std::to_string(t.meta.words.size()), start, start + len});
        start += len;
    }
    for (std::size_t i = 0; i < s; ++i) t.meta.tokens.push_back("t" + std::to_string(i));
    return t;
}

// Brute force over every token pair, bucketed by the words the tokens belong to.
std::pair<std::vector<double>, std::vector<double>> pooling_oracle(const attnmap::AttentionTensor& t) {
    const std::size_t s = t.seq, w = t.meta.words.size();
    std::vector<std::size_t> word_of(s);
    for (std::size_t i = 0; i < w; ++i) {
        for (std::size_t q = t.meta.words[i].tok_start; q < t.meta.words[i].tok_end; ++q) word_of[q] = i;
    }
    std::vector<double> mx(std::size_t{t.layers} * t.heads * w * w, -1.0), sum(mx.size(), 0.0), cnt(mx.size(), 0.0);
    for (std::size_t l = 0; l < t.layers; ++l) {
        for (std::size_t h = 0; h < t.heads; ++h) {
            for (std::size_t q = 0; q < s; ++q) {
                for (std::size_t k = 0; k < s; ++k) {
                    const std::size_t cell = ((l * t.heads + h) * w + word_of[q]) * w + word_of[k];
                    const double v = t.at(l, h, q, k);
                    mx[cell] = std::max(mx[cell], v);
                    sum[cell] += v;
                    cnt[cell] += 1.0;
                }
            }
        }
    }
    for (std::size_t i = 0; i < sum.size(); ++i) sum[i] /= cnt[i];
    return {mx, sum};
}

double sorted_median(const std::vector<double>& sorted, std::size_t lo, std::size_t hi) {
    const std::size_t n = hi - lo;
    if (n == 0) return 0.0;
    if (n % 2) return sorted[lo + n / 2];
    return (sorted[lo + n / 2 - 1] + sorted[lo + n / 2]) / 2.0;
}

// ---- criteria -------------------------------------------------------------

std::string check_bench_changes() {
    std::vector<evalkit::BenchScore> scores;
    for (const auto& rec : fixture_records("bench_scores.jsonl")) scores.push_back(evalkit::bench_score_from_json(rec));
    const auto t = evalkit::bench_table(scores);
    const std::vector<std::pair<std::string, double>> ours = {
        {"MMLU", -1.25}, {"ARC-Easy", 11.94}, {"ARC-Challenge", 19.29}, {"Winogrande", 8.17}};
    const std::vector<std::pair<std::string, double>> base = {
        {"MMLU", 4.69}, {"ARC-Easy", 4.98}, {"ARC-Challenge", 3.23}, {"Winogrande", 3.01}};
    std::string got;
    for (const auto& [model, expected] : {std::pair{"ours", ours}, std::pair{"llama3-8b-4bit", base}}) {
        for (const auto& [bench, pct] : expected) {
            const auto& cell = t.cells.at({bench, model});
            expect(cell.change.has_value(), bench + "/" + model + ": no change computed");
            expect(evalkit::format_pct(*cell.change) == evalkit::format_pct(pct),
                   bench + "/" + model + ": " + evalkit::format_pct(*cell.change) + " != " + evalkit::format_pct(pct));
            got += evalkit::format_pct(*cell.change) + " ";
        }
    }
    expect(!t.cells.at({"TruthfulQA MC1", "ours"}).change.has_value(), "TruthfulQA should have no change");
    return "8/8 exact: " + got;
}

std::string check_chrf() {
    const auto golden = fixture_records("chrf_golden.jsonl");
    expect(golden.size() == 20, "golden file must hold 20 pairs");
    double worst = 0.0;
    for (const auto& rec : golden) {
        const double d = std::abs(quality::chrfpp(rec["hyp"].get<std::string>(), rec["ref"].get<std::string>()) -
                                  rec["score"].get<double>());
        worst = std::max(worst, d);
    }
    expect(worst <= 0.1, "golden deviation " + std::to_string(worst));
    std::mt19937_64 rng(2024);
    for (int i = 0; i < 1000; ++i) {
        const std::string x = random_text(rng);
        expect(quality::chrfpp(x, x) == 100.0, "chrfpp(x,x) != 100 for \"" + x + "\"");
        expect(quality::chrfpp("", x) == 0.0, "chrfpp(\"\",x) != 0 for \"" + x + "\"");
    }
    char buf[96];
    std::snprintf(buf, sizeof buf, "20 golden pairs, max |diff| %.2e; 1000 identity/empty strings", worst);
    return buf;
}

std::string check_monotonicity() {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> cut(0.0, 100.0);
    std::size_t boundary = 0, records = 0;
    for (int corpus_i = 0; corpus_i < 500; ++corpus_i) {
        const std::size_t n = std::uniform_int_distribution<std::size_t>(1, 12)(rng);
        std::vector<std::optional<double>> scores;
        quality::RoundTripFilter scorer;
        for (std::size_t i = 0; i < n; ++i) {
            const std::string original = random_text(rng);
            std::optional<std::string> bt;
            if (rng() % 10) bt = rng() % 3 ? random_text(rng) : original;
            scores.push_back(scorer.evaluate(original, bt).score);
        }
        records += n;
        double c1 = cut(rng), c2 = cut(rng);
        if (c1 > c2) std::swap(c1, c2);
        quality::RoundTripFilter f1(c1), f2(c2);
        for (std::size_t i = 0; i < n; ++i) {
            const bool k1 = f1.decide(scores[i]).kept, k2 = f2.decide(scores[i]).kept;
            expect(!k2 || k1, "kept at cutoff " + std::to_string(c2) + " but not at " + std::to_string(c1));
            if (scores[i]) {
                quality::RoundTripFilter exact(*scores[i]);
                expect(exact.decide(scores[i]).kept, "score equal to cutoff was discarded");
                ++boundary;
            }
        }
    }
    return "500 corpora, " + std::to_string(records) + " records, " + std::to_string(boundary) + " boundary cases";
}

std::string check_interleaver() {
    std::mt19937_64 rng(1000);
    corpus::Segmenter seg;
    std::size_t sentences = 0;
    for (std::size_t i = 0; i < 1000; ++i) {
        auto sp = synthetic_pair(rng, i);
        corpus::segment_pair(sp.pair, seg);
        const auto lead = interleave::lead_for(interleave::LeadPolicy::alternate, i);
        const auto para = interleave::interleave_pair(sp.pair, lead);
        expect(para.has_value(), sp.pair.id + " was dropped");
        // split the mixed paragraph back into sentences and check the scripts alternate
        const auto spans = seg.segment(para->text, corpus::Lang::ne);
        const auto parts = corpus::sentence_texts(para->text, spans);
        expect(parts.size() == sp.en.size(), sp.pair.id + ": sentence count changed");
        std::string rebuilt;
        for (std::size_t k = 0; k < parts.size(); ++k) {
            const bool lead_slot = k % 2 == 0;
            const auto want = lead_slot ? lead : (lead == corpus::Lang::ne ? corpus::Lang::en : corpus::Lang::ne);
            expect(script_of(parts[k]) == want, sp.pair.id + ": alternation broken at sentence " + std::to_string(k));
            const auto& source = want == corpus::Lang::en ? sp.en : sp.ne;
            expect(parts[k] == source[k], sp.pair.id + ": sentence " + std::to_string(k) + " altered");
            rebuilt += (k ? " " : "") + source[k];
        }
        expect(rebuilt == para->text, sp.pair.id + ": content not conserved");
        sentences += parts.size();
    }

    auto k = corpus::load_pairs(fixture("pairs.jsonl")).front();
    corpus::segment_pair(k, seg);
    const auto para = interleave::interleave_pair(k, corpus::Lang::en);
    expect(para.has_value(), "Kathmandu pair dropped");
    const auto parts = corpus::sentence_texts(para->text, seg.segment(para->text, corpus::Lang::ne));
    expect(parts.size() == 3, "Kathmandu paragraph should hold 3 sentences");
    expect(script_of(parts[0]) == corpus::Lang::en && script_of(parts[1]) == corpus::Lang::ne &&
               script_of(parts[2]) == corpus::Lang::en,
           "Kathmandu paragraph is not (en, ne, en)");
    expect(parts[0].rfind("Before the unification of Nepal", 0) == 0, "Kathmandu paragraph opens wrongly");
    return "1000 pairs, " + std::to_string(sentences) + " sentences alternate; Kathmandu = (en, ne, en)";
}

std::string check_pooling() {
    std::mt19937_64 rng(200);
    std::size_t cells = 0;
    for (int n = 0; n < 200; ++n) {
        const auto t = random_tensor(rng);
        const auto [omax, omean] = pooling_oracle(t);
        const auto pmax = attnmap::pool(t, attnmap::Pooling::max);
        const auto pmean = attnmap::pool(t, attnmap::Pooling::mean);
        expect(pmax.values == omax, "max pooling differs from oracle on tensor " + std::to_string(n));
        expect(pmean.values == omean, "mean pooling differs from oracle on tensor " + std::to_string(n));
        for (std::size_t i = 0; i < omax.size(); ++i) {
            expect(pmax.values[i] >= pmean.values[i], "max < mean on tensor " + std::to_string(n));
        }
        cells += omax.size();

        auto identity = t;
        identity.meta.words.clear();
        for (std::size_t i = 0; i < t.seq; ++i) identity.meta.words.push_back({"w", i, i + 1});
        for (const auto mode : {attnmap::Pooling::max, attnmap::Pooling::mean}) {
            const auto id = attnmap::pool(identity, mode);
            for (std::size_t i = 0; i < t.values.size(); ++i) {
                expect(id.values[i] == static_cast<double>(t.values[i]), "identity partition altered values");
            }
        }
    }
    return "200 tensors, " + std::to_string(cells) + " pooled cells match exactly; identity and max>=mean hold";
}

std::string check_concept() {
    std::mt19937_64 rng(100);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const std::size_t layers = 32, heads = 32;
    std::vector<attnmap::LayerHeadMatrix> mats(40, {layers, heads, {}});
    for (auto& m : mats) {
        m.values.resize(layers * heads);
        for (auto& v : m.values) v = u(rng);
    }
    const auto reference = attnmap::aggregate_concept(mats);
    for (int s = 0; s < 100; ++s) {
        std::shuffle(mats.begin(), mats.end(), rng);
        expect(attnmap::aggregate_concept(mats).values == reference.values, "shuffle changed the mean");
    }

    double worst = 0.0;
    for (std::size_t n : {1u, 2u, 3u, 7u, 10u, 64u, 1000u}) {
        const std::vector<attnmap::LayerHeadMatrix> copies(n, mats.front());
        const auto c = attnmap::aggregate_concept(copies);
        for (std::size_t i = 0; i < c.values.values.size(); ++i) {
            worst = std::max(worst, std::abs(c.values.values[i] - mats.front().values[i]));
        }
    }
    expect(worst <= 1e-12, "mean of copies off by " + std::to_string(worst));

    forge::testing::TempDir dir;
    const auto [ppm, csv] = attnmap::render_heatmap(reference, dir / "concept");
    expect(attnmap::parse_heatmap_csv(jsonl::read_file(csv)) == reference.values, "CSV round trip not exact");
    char buf[128];
    std::snprintf(buf, sizeof buf, "100 shuffles identical; copies max |diff| %.1e; CSV round trip exact", worst);
    return buf;
}

std::string check_gen_stats() {
    std::vector<evalkit::GenScoreRecord> records;
    for (const auto& rec : fixture_records("gen_scores.jsonl")) records.push_back(evalkit::gen_record_from_json(rec));
    const auto report = evalkit::gen_score_stats(records);
    std::size_t checked = 0;
    for (const auto& [model, stats] : report.by_model) {
        for (std::size_t a = 0; a < evalkit::kAttributes.size(); ++a) {
            std::vector<double> v;
            for (const auto& r : records) {
                if (r.model == model) v.push_back(r.scores[a]);
            }
            expect(v.size() == 78, model + ": expected 78 records");
            std::sort(v.begin(), v.end());
            const std::size_t n = v.size();
            const double med = sorted_median(v, 0, n);
            const double q1 = sorted_median(v, 0, n / 2);
            const double q3 = sorted_median(v, (n + 1) / 2, n);
            const double iqr = q3 - q1;
            const auto outliers = std::count_if(v.begin(), v.end(),
                                                [&](double x) { return x < q1 - 1.5 * iqr || x > q3 + 1.5 * iqr; });
            const auto& s = stats[a];
            const std::string where = model + "/" + std::string(evalkit::to_string(evalkit::kAttributes[a]));
            expect(s.q.median == med && s.q.q1 == q1 && s.q.q3 == q3, where + ": quartiles differ from oracle");
            expect(s.outliers.size() == static_cast<std::size_t>(outliers), where + ": outlier count differs");
            ++checked;
        }
    }
    std::vector<evalkit::GenScoreRecord> empty;
    for (int i = 0; i < 78; ++i) empty.push_back({"q" + std::to_string(i), "m", true, {}});
    const auto er = evalkit::gen_score_stats(empty);
    expect(er.empty_generations.at("m") == 78, "empty count wrong");
    for (const auto& s : er.by_model.at("m")) expect(s.q.median == 0.0, "all-empty median not zero");
    return std::to_string(checked) + " (model, attribute) cells match the sort oracle; all-empty medians 0";
}

std::string check_throughput() {
    const std::size_t n = 100'000;
    std::mt19937_64 rng(4);
    std::vector<corpus::ParallelPair> pairs;
    pairs.reserve(n);
    for (std::size_t i = 0; i < n; ++i) pairs.push_back(synthetic_pair(rng, i).pair);

    const unsigned jobs = std::max(1u, std::thread::hardware_concurrency());
    const auto t0 = std::chrono::steady_clock::now();
    corpus::Segmenter seg;
    parallel_for(pairs.size(), jobs, [&](std::size_t i) { corpus::segment_pair(pairs[i], seg); });
    interleave::DropReport report;
    const auto paras = interleave::build_bilingual_corpus(pairs, interleave::LeadPolicy::alternate, &report);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    expect(paras.size() == n, "pairs dropped: " + std::to_string(n - paras.size()));
    expect(secs < 60.0, "took " + std::to_string(secs) + " s");
    char buf[96];
    std::snprintf(buf, sizeof buf, "100000 pairs in %.2f s on %u thread(s)", secs, jobs);
    return buf;
}

std::map<std::string, std::string> run_pipeline(const std::filesystem::path& dir) {
    const std::string fx = FORGE_FIXTURES_DIR;
    auto p = [&](const std::string& name) { return (dir / name).string(); };
    const std::vector<std::vector<std::string>> steps = {
        {"validate", "--in", fx + "/pairs.jsonl"},
        {"--jobs", "2", "segment", "--lang", "en", "--in", fx + "/segment_golden_en.jsonl", "--out", p("seg.jsonl")},
        {"chrf", "--hyp", p("hyp.txt"), "--ref", p("ref.txt")},
        {"--jobs", "2", "filter", "--in", fx + "/triplets.jsonl", "--out", p("kept.jsonl"), "--report", p("filter.json"),
         "--discarded", p("discarded.jsonl")},
        {"make-translate", "--in", fx + "/pairs.jsonl", "--out", p("translate.jsonl"), "--drop-report",
         p("translate_drops.json")},
        {"--seed", "3", "make-bilingual", "--in", fx + "/pairs.jsonl", "--offset", "0", "--out", p("bilingual.jsonl"),
         "--sample-fraction", "0.8", "--drop-report", p("bilingual_drops.json")},
        {"manifest", "--stage", "pretrain_bilingual", "--corpus", p("bilingual.jsonl"), "--lead", "alternate", "--out",
         p("manifest.json")},
        {"fertility", "--in", fx + "/tokens.jsonl", "--by-lang", "--out", p("fertility.json")},
        {"attn", "pool", "--in", fx + "/attn/s1.atnt", "--out", p("pool.json")},
        {"attn", "concept", "--annotations", fx + "/annotations.jsonl", "--tensors", fx + "/attn", "--out",
         p("concept.json")},
        {"attn", "render", "--in", p("concept.json"), "--out", p("concept")},
        {"attn", "compare", "--a", p("concept.json"), "--b", p("concept.json"), "--out", p("compare.json")},
        {"report", "bench", "--in", fx + "/bench_scores.jsonl", "--out", "csv", "--output", p("bench.csv")},
        {"report", "gen", "--in", fx + "/gen_scores.jsonl", "--out", "md", "--output", p("gen.md")},
    };
    jsonl::write_file(dir / "hyp.txt", "the cat sat\nनेपाल सुन्दर छ\n");
    jsonl::write_file(dir / "ref.txt", "the cat sat on the mat\nनेपाल सुन्दर देश हो\n");
    std::map<std::string, std::string> outputs;
    for (const auto& args : steps) {
        std::ostringstream out, err;
        const int code = cli::run(args, out, err);
        expect(code == cli::kExitOk, "forge " + args[0] + " " + args[1] + " exited " + std::to_string(code) + ": " +
                                         err.str());
        std::string key = "stdout";
        for (const auto& a : args) key += ":" + a;
        outputs[key] = out.str();
    }
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        outputs[entry.path().filename().string()] = jsonl::read_file(entry.path());
    }
    return outputs;
}

std::string check_determinism() {
    forge::testing::TempDir dir;
    const auto first = run_pipeline(dir.path());
    const auto second = run_pipeline(dir.path());
    expect(first.size() == second.size(), "different set of outputs");
    std::size_t bytes = 0;
    for (const auto& [name, content] : first) {
        expect(second.at(name) == content, name + " differs between runs");
        bytes += content.size();
    }
    return std::to_string(first.size()) + " outputs, " + std::to_string(bytes) + " bytes identical across 2 runs";
}

} // namespace

int main() {
    log::set_min_level(log::Level::error);
    criterion("benchmark_percent_change", 1, check_bench_changes);
    criterion("chrf_oracle", 10, check_chrf);
    criterion("filter_monotonicity", 10, check_monotonicity);
    criterion("interleaver_alternation", 5, check_interleaver);
    criterion("pooling_oracle", 30, check_pooling);
    criterion("concept_aggregation", 10, check_concept);
    criterion("generation_score_stats", 5, check_gen_stats);
    criterion("throughput_100k_pairs", 60, check_throughput);
    criterion("pipeline_determinism", 60, check_determinism);
    std::printf("%s: %d failing criteria\n", failures ? "FAILED" : "OK", failures);
    return failures ? 1 : 0;
}
