#include "askdetect/eval.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

#include "askdetect/error.hpp"
#include "strings.hpp"

namespace askdetect {

namespace fs = std::filesystem;
using nlohmann::json;

std::vector<ValidationRecord> load_validation(std::istream& in) {
    std::vector<ValidationRecord> out;
    std::string line;
    std::size_t no = 0;
    while (std::getline(in, line)) {
        ++no;
        auto t = str::trim(line);
        if (t.empty() || t.front() == '#') continue;
        std::string where = "validation line " + std::to_string(no);
        try {
            json j = json::parse(t);
            ValidationRecord r;
            r.email_id = j.at("email").get<std::string>();
            r.sentence = j.at("sent").get<std::size_t>();
            r.token = j.at("tok").get<std::size_t>();
            r.text = j.value("text", std::string());
            std::string gold = j.at("gold").get<std::string>();
            if (gold != "NONE") {
                r.gold_kind = parse_label(gold);
                if (!r.gold_kind) throw SchemaError(where + ": unknown gold label '" + gold + "'");
            }
            r.gold_top_ask = j.value("top", false);
            if (r.gold_top_ask && !(r.gold_kind && is_ask(*r.gold_kind)))
                throw SchemaError(where + ": top ask must carry an ask label");
            out.push_back(std::move(r));
        } catch (const json::exception& e) {
            throw SchemaError(where + ": " + e.what());
        }
    }
    std::set<std::tuple<std::string, std::size_t, std::size_t>> seen;
    for (const auto& r : out) {
        if (!seen.emplace(r.email_id, r.sentence, r.token).second)
            throw SchemaError("duplicate validation clause " + r.email_id + ":" + std::to_string(r.sentence) + ":" +
                              std::to_string(r.token));
    }
    return out;
}

std::vector<ValidationRecord> load_validation_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw MissingFile("cannot open validation set '" + path.string() + "'");
    return load_validation(in);
}

std::string_view to_string(Aspect a) {
    switch (a) {
        case Aspect::Ask: return "Ask";
        case Aspect::Framing: return "Framing";
        case Aspect::TopAsk: return "TopAsk";
    }
    return "?";
}

Rational Rational::of(std::uint64_t num, std::uint64_t den) {
    if (den == 0) return {0, 1};
    auto g = std::gcd(num, den);
    return {num / g, den / g};
}

bool Rational::near_milli(std::int64_t milli) const {
    __int128 lhs = static_cast<__int128>(2000) * num - static_cast<__int128>(2) * milli * den;
    if (lhs < 0) lhs = -lhs;
    return lhs <= static_cast<__int128>(den);
}

std::string Rational::to_fixed3() const {
    unsigned __int128 scaled = (static_cast<unsigned __int128>(num) * 2000 + den) / (static_cast<unsigned __int128>(den) * 2);
    auto v = static_cast<std::uint64_t>(scaled);
    char buf[32];
    std::snprintf(buf, sizeof buf, "%llu.%03llu", static_cast<unsigned long long>(v / 1000),
                  static_cast<unsigned long long>(v % 1000));
    return buf;
}

Metrics metrics(const ConfusionCounts& c) {
    Metrics m;
    m.precision = Rational::of(c.tp, c.tp + c.fp);
    m.recall = Rational::of(c.tp, c.tp + c.fn);
    m.f1 = Rational::of(2 * c.tp, 2 * c.tp + c.fp + c.fn);
    return m;
}

Cell score_cell(std::optional<AskLabel> gold, std::optional<AskLabel> predicted) {
    if (!gold) return predicted ? Cell::FP : Cell::TN;
    if (!predicted) return Cell::FN;
    return *gold == *predicted ? Cell::TP : Cell::FP;
}

namespace {

struct Key {
    std::size_t sentence, token;
    auto operator<=>(const Key&) const = default;
};

/// Places one prediction; returns the clause index or nullopt.
std::optional<std::size_t> place(const std::map<Key, std::size_t>& clauses, const std::vector<bool>& claimed,
                                 Key at) {
    auto exact = clauses.find(at);
    if (exact != clauses.end()) return claimed[exact->second] ? std::nullopt : std::optional(exact->second);
    std::optional<std::size_t> best;
    std::size_t best_d = 0;
    for (auto it = clauses.lower_bound({at.sentence, 0}); it != clauses.end() && it->first.sentence == at.sentence;
         ++it) {
        if (claimed[it->second]) continue;
        std::size_t d = it->first.token > at.token ? it->first.token - at.token : at.token - it->first.token;
        if (!best || d < best_d) {
            best = it->second;
            best_d = d;
        }
    }
    return best;
}

}  // namespace

Alignment align(const std::vector<EmailAnalysis>& preds, const std::vector<ValidationRecord>& gold) {
    std::map<std::string, std::map<Key, std::size_t>> by_email;
    for (std::size_t i = 0; i < gold.size(); ++i) by_email[gold[i].email_id][{gold[i].sentence, gold[i].token}] = i;

    std::set<std::string> pred_ids;
    for (const auto& p : preds) pred_ids.insert(p.email_id);
    std::vector<std::string> unmatched;
    for (const auto& [id, _] : by_email) {
        if (!pred_ids.contains(id)) unmatched.push_back("gold email '" + id + "' has no analysis");
    }
    for (const auto& id : pred_ids) {
        if (!by_email.contains(id)) unmatched.push_back("analysed email '" + id + "' has no validation clauses");
    }
    if (!unmatched.empty()) throw AlignmentError(str::join(unmatched, "; "));

    Alignment out;
    out.clauses.resize(gold.size());
    for (std::size_t i = 0; i < gold.size(); ++i) out.clauses[i].record = &gold[i];
    std::vector<bool> ask_claimed(gold.size()), framing_claimed(gold.size());

    for (const auto& p : preds) {
        const auto& clauses = by_email.at(p.email_id);
        std::vector<std::optional<std::size_t>> ask_at(p.asks.size());
        for (std::size_t k = 0; k < p.asks.size(); ++k) {
            const auto& f = p.asks[k];
            ask_at[k] = place(clauses, ask_claimed, {f.sentence, f.token});
            if (!ask_at[k]) {
                ++out.extra_ask;
                continue;
            }
            ask_claimed[*ask_at[k]] = true;
            out.clauses[*ask_at[k]].ask = f.kind;
        }
        for (const auto& f : p.framings) {
            auto at = place(clauses, framing_claimed, {f.sentence, f.token});
            if (!at) {
                ++out.extra_framing;
                continue;
            }
            framing_claimed[*at] = true;
            out.clauses[*at].framing = f.kind;
        }
        for (auto t : p.top_asks) {
            if (t < ask_at.size() && ask_at[t])
                out.clauses[*ask_at[t]].top = true;
            else
                ++out.extra_top;
        }
    }
    return out;
}

namespace {

Cell cell_for(const AlignedClause& c, Aspect aspect) {
    const auto& gold = c.record->gold_kind;
    switch (aspect) {
        case Aspect::Ask:
            return score_cell(gold && is_ask(*gold) ? gold : std::nullopt, c.ask);
        case Aspect::Framing:
            return score_cell(gold && is_framing(*gold) ? gold : std::nullopt, c.framing);
        case Aspect::TopAsk:
            if (c.record->gold_top_ask) return c.top ? Cell::TP : Cell::FN;
            return c.top ? Cell::FP : Cell::TN;
    }
    return Cell::TN;
}

}  // namespace

ConfusionCounts score_aspect(const Alignment& a, Aspect aspect) {
    ConfusionCounts c;
    for (const auto& clause : a.clauses) {
        switch (cell_for(clause, aspect)) {
            case Cell::TP: ++c.tp; break;
            case Cell::TN: ++c.tn; break;
            case Cell::FP: ++c.fp; break;
            case Cell::FN: ++c.fn; break;
        }
    }
    c.fp += aspect == Aspect::Ask ? a.extra_ask : aspect == Aspect::Framing ? a.extra_framing : a.extra_top;
    return c;
}

ConfusionCounts score_aspect(const std::vector<EmailAnalysis>& preds, const std::vector<ValidationRecord>& gold,
                             Aspect aspect) {
    return score_aspect(align(preds, gold), aspect);
}

std::vector<bool> correctness(const Alignment& a, Aspect aspect) {
    std::vector<bool> out;
    out.reserve(a.clauses.size());
    for (const auto& clause : a.clauses) {
        auto cell = cell_for(clause, aspect);
        out.push_back(cell == Cell::TP || cell == Cell::TN);
    }
    return out;
}

double binomial_two_sided(std::size_t k, std::size_t n) {
    if (n == 0) return 1.0;
    long double pmf = 1.0L;
    for (std::size_t i = 0; i < n; ++i) pmf /= 2.0L;
    long double tail = 0.0L;
    for (std::size_t i = 0; i <= k && i <= n; ++i) {
        tail += pmf;
        pmf = pmf * static_cast<long double>(n - i) / static_cast<long double>(i + 1);
    }
    return static_cast<double>(std::min(1.0L, 2.0L * tail));
}

McNemarResult mcnemar(const std::vector<bool>& a, const std::vector<bool>& b) {
    if (a.size() != b.size())
        throw LengthMismatch("mcnemar: " + std::to_string(a.size()) + " vs " + std::to_string(b.size()) + " outcomes");
    McNemarResult r;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i] && !b[i]) ++r.b;
        if (!a[i] && b[i]) ++r.c;
    }
    r.p_value = binomial_two_sided(std::min(r.b, r.c), r.b + r.c);
    r.significant = r.p_value < 0.05;
    return r;
}

std::vector<CorpusEmail> load_corpus(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw MissingFile("corpus directory '" + dir.string() + "' does not exist");
    std::vector<fs::path> emails;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (e.is_regular_file() && e.path().extension() == ".eml") emails.push_back(e.path());
    }
    std::sort(emails.begin(), emails.end());
    std::vector<CorpusEmail> out;
    for (const auto& p : emails) {
        std::ifstream in(p, std::ios::binary);
        std::string raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        auto ann = p;
        ann.replace_extension(".ann.jsonl");
        if (!fs::exists(ann)) throw MissingFile("missing annotations '" + ann.string() + "'");
        CorpusEmail e;
        e.id = p.stem().string();
        e.links = normalize_email(raw).links;
        e.doc = load_annotations_file(ann.string());
        out.push_back(std::move(e));
    }
    return out;
}

ExperimentReport run_cases(const std::vector<CorpusEmail>& corpus, const std::vector<ValidationRecord>& gold,
                           const ResourceSet& resources, const std::vector<int>& cases, unsigned jobs,
                           const CategoryRuleSet* categories) {
    std::vector<CaseSpec> specs;
    for (int n : cases) {
        CaseSpec s{n, case_config(n)};
        if (categories) s.config.category_rules = *categories;
        specs.push_back(std::move(s));
    }
    return run_configs(corpus, gold, resources, specs, jobs);
}

ExperimentReport run_configs(const std::vector<CorpusEmail>& corpus, const std::vector<ValidationRecord>& gold,
                             const ResourceSet& resources, const std::vector<CaseSpec>& cases, unsigned jobs) {
    std::vector<Alignment> alignments(cases.size());
    std::vector<std::exception_ptr> errors(cases.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i; (i = next++) < cases.size();) {
            try {
                const auto& cfg = cases[i].config;
                std::vector<EmailAnalysis> preds;
                for (const auto& e : corpus) preds.push_back(detect(e.id, e.doc, e.links, resources, cfg));
                alignments[i] = align(preds, gold);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    unsigned n = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(cases.size())));
    std::vector<std::thread> pool;
    for (unsigned t = 1; t < n; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }

    ExperimentReport report;
    report.clause_count = gold.size();
    for (std::size_t i = 0; i < cases.size(); ++i) {
        CaseResult r;
        r.case_number = cases[i].case_number;
        r.config = cases[i].config;
        for (auto a : kAllAspects) {
            auto& slot = r.aspects[static_cast<int>(a)];
            slot.counts = score_aspect(alignments[i], a);
            slot.metrics = metrics(slot.counts);
        }
        report.cases.push_back(r);
    }
    for (std::size_t i = 1; i < cases.size(); ++i) {
        for (auto a : kAllAspects) {
            PairResult p;
            p.from = cases[i - 1].case_number;
            p.to = cases[i].case_number;
            p.aspect = a;
            p.test = mcnemar(correctness(alignments[i - 1], a), correctness(alignments[i], a));
            p.improved = p.test.c > p.test.b;
            report.pairs.push_back(p);
        }
    }
    return report;
}

namespace {

json rational_json(const Rational& r) { return {{"num", r.num}, {"den", r.den}, {"value", r.to_fixed3()}}; }

const PairResult* pair_into(const ExperimentReport& r, int to, Aspect a) {
    for (const auto& p : r.pairs) {
        if (p.to == to && p.aspect == a) return &p;
    }
    return nullptr;
}

}  // namespace

json to_json(const ExperimentReport& r) {
    json cases = json::array();
    for (const auto& c : r.cases) {
        const auto& cfg = c.config;
        json aspects = json::object();
        for (auto a : kAllAspects) {
            const auto& s = c.at(a);
            aspects[std::string(to_string(a))] = {{"tp", s.counts.tp},
                                                  {"tn", s.counts.tn},
                                                  {"fp", s.counts.fp},
                                                  {"fn", s.counts.fn},
                                                  {"precision", rational_json(s.metrics.precision)},
                                                  {"recall", rational_json(s.metrics.recall)},
                                                  {"f1", rational_json(s.metrics.f1)}};
        }
        cases.push_back({{"case", c.case_number},
                         {"name", case_name(c.case_number)},
                         {"config",
                          {{"lexicon", to_string(cfg.lexicon_source)},
                           {"verbal", cfg.verbal_processing},
                           {"catvar", cfg.catvar},
                           {"links", to_string(cfg.link_mode)}}},
                         {"aspects", aspects}});
    }
    json pairs = json::array();
    for (const auto& p : r.pairs) {
        std::ostringstream pv;
        pv << std::setprecision(6) << p.test.p_value;
        pairs.push_back({{"from", p.from},
                         {"to", p.to},
                         {"aspect", to_string(p.aspect)},
                         {"b", p.test.b},
                         {"c", p.test.c},
                         {"p", pv.str()},
                         {"significant", p.test.significant},
                         {"improved", p.improved}});
    }
    return {{"clauses", r.clause_count}, {"cases", cases}, {"mcnemar", pairs}};
}

std::string format_table(const ExperimentReport& r) {
    std::ostringstream os;
    auto row = [&](std::string_view type, const std::string& tp, const std::string& tn, const std::string& fp,
                   const std::string& fn, const std::string& p, const std::string& rc, const std::string& f) {
        os << std::left << std::setw(10) << type << std::right << std::setw(6) << tp << std::setw(6) << tn
           << std::setw(6) << fp << std::setw(6) << fn << std::setw(8) << p << std::setw(8) << rc << std::setw(8) << f
           << "\n";
    };
    row("Type", "TP", "TN", "FP", "FN", "P", "R", "F");
    for (const auto& c : r.cases) {
        os << "Case " << c.case_number << ": " << case_name(c.case_number) << "\n";
        for (auto a : kAllAspects) {
            const auto& s = c.at(a);
            auto* p = pair_into(r, c.case_number, a);
            std::string type = std::string(to_string(a)) + ":" + (p && p->starred() ? "*" : "");
            row(type, std::to_string(s.counts.tp), std::to_string(s.counts.tn), std::to_string(s.counts.fp),
                std::to_string(s.counts.fn), s.metrics.precision.to_fixed3(), s.metrics.recall.to_fixed3(),
                s.metrics.f1.to_fixed3());
        }
    }
    if (!r.pairs.empty()) {
        os << "\nMcNemar (exact binomial, consecutive cases; * = significant improvement at 5%)\n";
        for (const auto& p : r.pairs) {
            std::ostringstream pv;
            pv << std::fixed << std::setprecision(4) << p.test.p_value;
            os << "  " << p.from << " -> " << p.to << "  " << std::left << std::setw(8) << to_string(p.aspect)
               << std::right << " b=" << p.test.b << " c=" << p.test.c << " p=" << pv.str()
               << (p.starred() ? " *" : "") << "\n";
        }
    }
    os << "clauses: " << r.clause_count << "\n";
    return os.str();
}

}  // namespace askdetect
