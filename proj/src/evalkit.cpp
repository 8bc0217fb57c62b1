#include "forge/evalkit.hpp"

#include "forge/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

namespace forge::evalkit {

namespace {

// Canonical benchmark row order; anything else sorts after these alphabetically.
const std::vector<std::string>& canonical_benchmarks() {
    static const std::vector<std::string> order = {"MMLU", "ARC-Easy", "ARC-Challenge", "Winogrande",
                                                   "TruthfulQA MC1", "TruthfulQA MC2"};
    return order;
}

std::string fixed(double v, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
    return buf;
}

std::string fmt_g(double v) {
    std::ostringstream os;
    os << v;
    return os.str();
}

} // namespace

double round_to(double value, int decimals) {
    const double scale = std::pow(10.0, decimals);
    const double r = std::round(value * scale) / scale;
    return r == 0.0 ? 0.0 : r; // no negative zero
}

std::optional<double> pct_change(double zero_shot, double k_shot) {
    if (!(zero_shot > 0.0)) return std::nullopt;
    return round_to(100.0 * (k_shot - zero_shot) / zero_shot, 2);
}

std::string format_pct(double pct) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%+.2f", round_to(pct, 2));
    return buf;
}

BenchScore bench_score_from_json(const jsonl::json& obj) {
    BenchScore s;
    s.benchmark = jsonl::get_string(obj, "benchmark");
    s.model = jsonl::get_string(obj, "model");
    auto shots = obj.find("shots");
    if (shots == obj.end() || !shots->is_number_integer() || shots->get<long long>() < 0) {
        throw ValidationError("field \"shots\" must be a non-negative integer");
    }
    s.shots = shots->get<int>();
    auto score = obj.find("score");
    if (score == obj.end() || !score->is_number()) throw ValidationError("field \"score\" must be a number");
    s.score = score->get<double>();
    if (!std::isfinite(s.score) || s.score < 0.0 || s.score > 1.0) {
        throw ValidationError("field \"score\" out of range [0,1]");
    }
    return s;
}

BenchTable bench_table(const std::vector<BenchScore>& scores) {
    BenchTable t;
    std::set<std::string> benchmarks, models;
    std::set<int> k_values;
    std::set<std::tuple<std::string, std::string, int>> seen;
    for (const auto& s : scores) {
        if (s.shots < 0) throw ValidationError("shots must be >= 0");
        if (!seen.emplace(s.benchmark, s.model, s.shots).second) {
            throw ValidationError("duplicate score for " + s.benchmark + " / " + s.model + " / " +
                                  std::to_string(s.shots) + "-shot");
        }
        benchmarks.insert(s.benchmark);
        models.insert(s.model);
        if (s.shots > 0) k_values.insert(s.shots);
    }
    if (k_values.size() > 1) throw ValidationError("more than one k-shot setting in the input");
    t.k_shots = k_values.empty() ? 0 : *k_values.begin();

    for (const auto& name : canonical_benchmarks()) {
        if (benchmarks.erase(name)) t.benchmarks.push_back(name);
    }
    t.benchmarks.insert(t.benchmarks.end(), benchmarks.begin(), benchmarks.end());
    t.models.assign(models.begin(), models.end());

    for (const auto& s : scores) {
        auto& cell = t.cells[{s.benchmark, s.model}];
        (s.shots == 0 ? cell.zero_shot : cell.k_shot) = s.score;
    }
    for (const auto& model : t.models) {
        double sum = 0.0;
        std::size_t n = 0;
        for (const auto& bench : t.benchmarks) {
            auto it = t.cells.find({bench, model});
            if (it == t.cells.end()) continue;
            auto& cell = it->second;
            if (cell.zero_shot && cell.k_shot) {
                cell.change = pct_change(*cell.zero_shot, *cell.k_shot);
                if (cell.change) {
                    sum += 100.0 * (*cell.k_shot - *cell.zero_shot) / *cell.zero_shot;
                    ++n;
                }
            }
        }
        t.mean_change[model] = n ? std::optional(round_to(sum / static_cast<double>(n), 2)) : std::nullopt;
    }
    return t;
}

namespace {

std::string cell_text(const std::optional<double>& v) { return v ? fixed(*v, 4) : "-"; }
std::string change_text(const std::optional<double>& v) { return v ? format_pct(*v) + "%" : "-"; }

} // namespace

std::string BenchTable::to_markdown() const {
    std::ostringstream os;
    const std::string k = std::to_string(k_shots) + "-shot";
    os << "| Benchmark |";
    for (const auto& m : models) os << ' ' << m << " 0-shot | " << m << ' ' << k << " | " << m << " change |";
    os << "\n|---|";
    for (std::size_t i = 0; i < models.size(); ++i) os << "---:|---:|---:|";
    os << '\n';
    for (const auto& b : benchmarks) {
        os << "| " << b << " |";
        for (const auto& m : models) {
            auto it = cells.find({b, m});
            const BenchCell cell = it == cells.end() ? BenchCell{} : it->second;
            os << ' ' << cell_text(cell.zero_shot) << " | " << cell_text(cell.k_shot) << " | "
               << change_text(cell.change) << " |";
        }
        os << '\n';
    }
    if (!benchmarks.empty()) {
        os << "| Mean change |";
        for (const auto& m : models) {
            auto it = mean_change.find(m);
            os << " | | " << change_text(it == mean_change.end() ? std::nullopt : it->second) << " |";
        }
        os << '\n';
    }
    return os.str();
}

std::string BenchTable::to_csv() const {
    std::ostringstream os;
    os << "benchmark,model,zero_shot,k_shot,shots,pct_change\n";
    for (const auto& b : benchmarks) {
        for (const auto& m : models) {
            auto it = cells.find({b, m});
            if (it == cells.end()) continue;
            const auto& c = it->second;
            os << b << ',' << m << ',' << cell_text(c.zero_shot) << ',' << cell_text(c.k_shot) << ',' << k_shots << ','
               << (c.change ? format_pct(*c.change) : "-") << '\n';
        }
    }
    for (const auto& m : models) {
        auto it = mean_change.find(m);
        const bool has = it != mean_change.end() && it->second.has_value();
        os << "MEAN," << m << ",-,-," << k_shots << ',' << (has ? format_pct(*it->second) : "-") << '\n';
    }
    return os.str();
}

std::string_view to_string(Attribute a) {
    switch (a) {
    case Attribute::correctness: return "correctness";
    case Attribute::grammar: return "grammar";
    case Attribute::usability: return "usability";
    case Attribute::hallucination: return "hallucination";
    case Attribute::overall: return "overall";
    }
    return "overall";
}

GenScoreRecord gen_record_from_json(const jsonl::json& obj) {
    GenScoreRecord r;
    r.id = jsonl::get_string(obj, "id");
    auto fail = [&](const std::string& msg) { throw ValidationError("record \"" + r.id + "\": " + msg); };
    r.model = jsonl::get_string(obj, "model");
    if (auto it = obj.find("empty"); it != obj.end()) {
        if (!it->is_boolean()) fail("field \"empty\" must be a boolean");
        r.empty_generation = it->get<bool>();
    }
    if (r.empty_generation) return r;

    auto scores = obj.find("scores");
    if (scores == obj.end() || !scores->is_object()) fail("missing \"scores\" object");
    for (std::size_t i = 0; i < kAttributes.size(); ++i) {
        const auto name = std::string(to_string(kAttributes[i]));
        auto it = scores->find(name);
        if (it == scores->end()) fail("missing score for " + name);
        if (!it->is_number_integer()) fail("score for " + name + " must be an integer");
        const auto v = it->get<long long>();
        if (v < 0 || v > 10) fail("score for " + name + " out of range [0,10]: " + std::to_string(v));
        r.scores[i] = static_cast<int>(v);
    }
    return r;
}

namespace {

double median_sorted(const std::vector<double>& v, std::size_t begin, std::size_t end) {
    const std::size_t n = end - begin;
    const std::size_t mid = begin + n / 2;
    return n % 2 == 1 ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);
}

} // namespace

Quartiles quartiles(std::vector<double> values) {
    if (values.empty()) return {};
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    Quartiles q;
    q.median = median_sorted(values, 0, n);
    if (n == 1) {
        q.q1 = q.q3 = q.median;
        return q;
    }
    const std::size_t half = n / 2;
    q.q1 = median_sorted(values, 0, half);
    q.q3 = median_sorted(values, n - half, n);
    return q;
}

GenReport gen_score_stats(const std::vector<GenScoreRecord>& records) {
    GenReport rep;
    std::map<std::string, std::array<std::vector<double>, 5>> samples;
    for (const auto& r : records) {
        auto& per_attr = samples[r.model];
        auto& stats = rep.by_model[r.model];
        if (r.empty_generation) ++rep.empty_generations[r.model];
        else rep.empty_generations.try_emplace(r.model, 0);
        for (std::size_t a = 0; a < kAttributes.size(); ++a) {
            const int s = r.empty_generation ? 0 : r.scores[a];
            per_attr[a].push_back(s);
            ++stats[a].histogram[static_cast<std::size_t>(s)];
            ++stats[a].count;
        }
    }
    for (auto& [model, stats] : rep.by_model) {
        for (std::size_t a = 0; a < kAttributes.size(); ++a) {
            auto& st = stats[a];
            st.q = quartiles(samples[model][a]);
            st.iqr = st.q.q3 - st.q.q1;
            st.lower_fence = st.q.q1 - 1.5 * st.iqr;
            st.upper_fence = st.q.q3 + 1.5 * st.iqr;
        }
    }
    for (const auto& r : records) {
        auto& stats = rep.by_model[r.model];
        for (std::size_t a = 0; a < kAttributes.size(); ++a) {
            const int s = r.empty_generation ? 0 : r.scores[a];
            if (s < stats[a].lower_fence || s > stats[a].upper_fence) stats[a].outliers.push_back({r.id, s});
        }
    }
    return rep;
}

jsonl::json GenReport::to_json() const {
    jsonl::json out = jsonl::json::object();
    for (const auto& [model, stats] : by_model) {
        jsonl::json attrs = jsonl::json::object();
        for (std::size_t a = 0; a < kAttributes.size(); ++a) {
            const auto& st = stats[a];
            jsonl::json outliers = jsonl::json::array();
            for (const auto& o : st.outliers) outliers.push_back({{"id", o.id}, {"score", o.score}});
            attrs[std::string(to_string(kAttributes[a]))] = {
                {"count", st.count},          {"histogram", st.histogram},   {"median", st.q.median},
                {"q1", st.q.q1},              {"q3", st.q.q3},               {"iqr", st.iqr},
                {"lower_fence", st.lower_fence}, {"upper_fence", st.upper_fence}, {"outliers", outliers}};
        }
        auto e = empty_generations.find(model);
        out[model] = {{"attributes", attrs}, {"empty_generations", e == empty_generations.end() ? 0 : e->second}};
    }
    return out;
}

std::string GenReport::to_markdown() const {
    std::ostringstream os;
    os << "| Model | Attribute | N | Median | Q1 | Q3 | IQR | Outliers | Empty | Histogram 0..10 |\n"
       << "|---|---|---:|---:|---:|---:|---:|---:|---:|---|\n";
    for (const auto& [model, stats] : by_model) {
        const auto e = empty_generations.count(model) ? empty_generations.at(model) : 0;
        for (std::size_t a = 0; a < kAttributes.size(); ++a) {
            const auto& st = stats[a];
            os << "| " << model << " | " << to_string(kAttributes[a]) << " | " << st.count << " | "
               << fmt_g(st.q.median) << " | " << fmt_g(st.q.q1) << " | " << fmt_g(st.q.q3) << " | " << fmt_g(st.iqr)
               << " | " << st.outliers.size() << " | " << e << " | ";
            for (std::size_t b = 0; b < st.histogram.size(); ++b) os << (b ? " " : "") << st.histogram[b];
            os << " |\n";
        }
    }
    return os.str();
}

std::string GenReport::to_csv() const {
    std::ostringstream os;
    os << "model,attribute,count,median,q1,q3,iqr,lower_fence,upper_fence,outliers,empty_generations";
    for (int b = 0; b <= 10; ++b) os << ",bin_" << b;
    os << '\n';
    for (const auto& [model, stats] : by_model) {
        const auto e = empty_generations.count(model) ? empty_generations.at(model) : 0;
        for (std::size_t a = 0; a < kAttributes.size(); ++a) {
            const auto& st = stats[a];
            os << model << ',' << to_string(kAttributes[a]) << ',' << st.count << ',' << fmt_g(st.q.median) << ','
               << fmt_g(st.q.q1) << ',' << fmt_g(st.q.q3) << ',' << fmt_g(st.iqr) << ',' << fmt_g(st.lower_fence)
               << ',' << fmt_g(st.upper_fence) << ',' << st.outliers.size() << ',' << e;
            for (auto h : st.histogram) os << ',' << h;
            os << '\n';
        }
    }
    return os.str();
}

} // namespace forge::evalkit
