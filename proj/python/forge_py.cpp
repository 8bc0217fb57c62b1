#include "forge/attnmap.hpp"
#include "forge/corpus.hpp"
#include "forge/error.hpp"
#include "forge/evalkit.hpp"
#include "forge/fertility.hpp"
#include "forge/interleave.hpp"
#include "forge/quality.hpp"

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using namespace forge;

namespace {

py::object to_py(const jsonl::json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

jsonl::json from_py(const py::handle& obj) {
    return jsonl::json::parse(py::module_::import("json").attr("dumps")(obj).cast<std::string>());
}

corpus::Segmenter segmenter_for(const std::optional<std::vector<std::string>>& abbreviations) {
    return abbreviations ? corpus::Segmenter(*abbreviations) : corpus::Segmenter();
}

std::vector<std::pair<std::size_t, std::size_t>> segment(const std::string& text, const std::string& lang,
                                                         const std::optional<std::vector<std::string>>& abbreviations) {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    for (const auto& s : segmenter_for(abbreviations).segment(text, corpus::parse_lang(lang))) out.emplace_back(s.start, s.end);
    return out;
}

std::vector<std::string> sentences(const std::string& text, const std::string& lang,
                                   const std::optional<std::vector<std::string>>& abbreviations) {
    const auto normalized = corpus::normalize(text);
    return corpus::sentence_texts(normalized,
                                  segmenter_for(abbreviations).segment(normalized, corpus::parse_lang(lang)));
}

py::tuple roundtrip_filter(const std::vector<std::string>& originals,
                           const std::vector<std::optional<std::string>>& backtranslations, double cutoff, int char_n,
                           int word_n, double beta) {
    if (originals.size() != backtranslations.size()) throw ValidationError("originals and backtranslations differ in length");
    quality::RoundTripFilter filter(cutoff, {char_n, word_n, beta});
    std::vector<bool> kept;
    std::vector<std::optional<double>> scores;
    {
        py::gil_scoped_release release;
        for (std::size_t i = 0; i < originals.size(); ++i) {
            const auto d = filter.evaluate(originals[i], backtranslations[i]);
            filter.record(d);
            kept.push_back(d.kept);
            scores.push_back(d.score);
        }
    }
    return py::make_tuple(kept, scores, to_py(filter.report().to_json()));
}

std::optional<std::string> interleave_texts(const std::string& en_text, const std::string& ne_text, const std::string& lead) {
    corpus::ParallelPair p;
    p.id = "py";
    p.en_text = en_text;
    p.ne_text = ne_text;
    corpus::segment_pair(p, corpus::Segmenter());
    auto para = interleave::interleave_pair(p, corpus::parse_lang(lead));
    if (!para) return std::nullopt;
    return para->text;
}

std::vector<std::tuple<std::string, std::size_t, std::size_t>>
align(const std::string& text, const std::vector<std::tuple<std::string, std::size_t, std::size_t>>& tokens) {
    fertility::TokenOffsets toks;
    for (const auto& [t, s, e] : tokens) toks.push_back({t, s, e});
    std::vector<std::tuple<std::string, std::size_t, std::size_t>> out;
    for (const auto& w : fertility::align_tokens_to_words(text, toks)) out.emplace_back(w.word, w.tok_start, w.tok_end);
    return out;
}

py::array_t<double> pool(const py::array_t<float, py::array::c_style | py::array::forcecast>& attention,
                         const std::vector<std::pair<std::size_t, std::size_t>>& words, const std::string& mode) {
    if (attention.ndim() != 4 || attention.shape(2) != attention.shape(3)) {
        throw ValidationError("attention must have shape (layers, heads, seq, seq)");
    }
    attnmap::AttentionTensor t;
    t.layers = static_cast<std::uint32_t>(attention.shape(0));
    t.heads = static_cast<std::uint32_t>(attention.shape(1));
    t.seq = static_cast<std::uint32_t>(attention.shape(2));
    t.values.assign(attention.data(), attention.data() + attention.size());
    for (std::size_t i = 0; i < t.seq; ++i) t.meta.tokens.push_back(std::to_string(i));
    for (const auto& [s, e] : words) t.meta.words.push_back({"", s, e});
    attnmap::validate(t);
    const auto w = attnmap::pool(t, attnmap::parse_pooling(mode));
    py::array_t<double> out({w.layers, w.heads, w.words, w.words});
    std::copy(w.values.begin(), w.values.end(), out.mutable_data());
    return out;
}

py::dict load_tensor(const std::filesystem::path& path) {
    const auto t = attnmap::load_tensor(path);
    py::array_t<float> values({std::size_t{t.layers}, std::size_t{t.heads}, std::size_t{t.seq}, std::size_t{t.seq}});
    std::copy(t.values.begin(), t.values.end(), values.mutable_data());
    py::dict d;
    d["attention"] = values;
    d["meta"] = to_py(attnmap::meta_to_json(t.meta));
    return d;
}

attnmap::LayerHeadMatrix to_matrix(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
    if (a.ndim() != 2) throw ValidationError("heatmaps must be 2-D (layers, heads)");
    return {static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)),
            std::vector<double>(a.data(), a.data() + a.size())};
}

py::array_t<double> concept_mean(const std::vector<py::array_t<double, py::array::c_style | py::array::forcecast>>& mats) {
    std::vector<attnmap::LayerHeadMatrix> ms;
    for (const auto& m : mats) ms.push_back(to_matrix(m));
    const auto c = attnmap::aggregate_concept(ms);
    py::array_t<double> out({c.values.layers, c.values.heads});
    std::copy(c.values.values.begin(), c.values.values.end(), out.mutable_data());
    return out;
}

std::string bench_report(const py::list& records, const std::string& format) {
    std::vector<evalkit::BenchScore> scores;
    for (const auto& r : records) scores.push_back(evalkit::bench_score_from_json(from_py(r)));
    const auto t = evalkit::bench_table(scores);
    return format == "csv" ? t.to_csv() : t.to_markdown();
}

py::object gen_stats(const py::list& records) {
    std::vector<evalkit::GenScoreRecord> rs;
    for (const auto& r : records) rs.push_back(evalkit::gen_record_from_json(from_py(r)));
    return to_py(evalkit::gen_score_stats(rs).to_json());
}

} // namespace

PYBIND11_MODULE(_forge, m) {
    m.doc() = "Nepali-English corpus, chrF++ filtering and attention-analysis toolkit";

    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const IoError& e) {
            PyErr_SetString(PyExc_OSError, e.what());
        } catch (const ValidationError& e) {
            PyErr_SetString(PyExc_ValueError, e.what());
        }
    });

    m.def("normalize", &corpus::normalize, py::arg("text"));
    m.def("segment", &segment, py::arg("text"), py::arg("lang"), py::arg("abbreviations") = py::none(),
          "Code-point (start, end) spans of each sentence in normalized text.");
    m.def("sentences", &sentences, py::arg("text"), py::arg("lang"), py::arg("abbreviations") = py::none());
    m.def(
        "chrfpp",
        [](const std::string& hyp, const std::string& ref, int char_n, int word_n, double beta) {
            quality::ChrfParams p{char_n, word_n, beta};
            p.validate();
            return quality::chrfpp(hyp, ref, p);
        },
        py::arg("hypothesis"), py::arg("reference"), py::arg("char_n") = 6, py::arg("word_n") = 2, py::arg("beta") = 2.0);
    m.def("roundtrip_filter", &roundtrip_filter, py::arg("originals"), py::arg("backtranslations"),
          py::arg("cutoff") = 50.0, py::arg("char_n") = 6, py::arg("word_n") = 2, py::arg("beta") = 2.0,
          "Returns (kept flags, scores, report).");
    m.def("interleave", &interleave_texts, py::arg("en_text"), py::arg("ne_text"), py::arg("lead") = "ne");
    m.def("align_tokens", &align, py::arg("text"), py::arg("tokens"));
    m.def("pool", &pool, py::arg("attention"), py::arg("words"), py::arg("mode") = "max");
    m.def("load_tensor", &load_tensor, py::arg("path"));
    m.def("concept_mean", &concept_mean, py::arg("heatmaps"));
    m.def("pct_change", &evalkit::pct_change, py::arg("zero_shot"), py::arg("k_shot"));
    m.def("bench_report", &bench_report, py::arg("records"), py::arg("format") = "md");
    m.def("gen_stats", &gen_stats, py::arg("records"));
}
