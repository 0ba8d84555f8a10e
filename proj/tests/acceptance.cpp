// Acceptance checks: one PASS/FAIL line per criterion, non-zero exit on failure.

#include <bit>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "askdetect/detector.hpp"
#include "askdetect/eval.hpp"
#include "support.hpp"

using namespace askdetect;

namespace {

struct Outcome {
    bool ok = true;
    std::string detail;

    void fail(const std::string& why) {
        if (ok) detail = why;
        ok = false;
    }
};

// Published confusion rows, P/R/F in thousandths.
struct Row {
    int case_number;
    Aspect aspect;
    std::uint64_t tp, tn, fp, fn;
    int p, r, f;
};

const std::vector<Row> kPublished = {
    {0, Aspect::Ask, 3, 392, 8, 69, 273, 42, 72},
    {0, Aspect::Framing, 9, 422, 25, 16, 265, 360, 305},
    {0, Aspect::TopAsk, 3, 411, 8, 50, 273, 57, 94},
    {1, Aspect::Ask, 8, 378, 28, 58, 222, 121, 157},
    {1, Aspect::Framing, 14, 420, 30, 8, 318, 636, 424},
    {1, Aspect::TopAsk, 9, 409, 10, 44, 474, 170, 250},
    {2, Aspect::Ask, 34, 365, 34, 39, 500, 466, 482},
    {2, Aspect::Framing, 15, 437, 10, 10, 600, 600, 600},
    {2, Aspect::TopAsk, 14, 401, 18, 39, 438, 264, 329},
    {3, Aspect::Ask, 29, 384, 15, 44, 659, 397, 496},
    {3, Aspect::Framing, 15, 437, 10, 10, 600, 600, 600},
    {3, Aspect::TopAsk, 13, 407, 12, 40, 520, 245, 333},
    {4, Aspect::Ask, 30, 384, 15, 43, 667, 411, 508},
    {4, Aspect::Framing, 15, 437, 10, 10, 600, 600, 600},
    {4, Aspect::TopAsk, 13, 407, 12, 40, 520, 245, 333},
    {5, Aspect::Ask, 30, 384, 15, 43, 667, 411, 508},
    {5, Aspect::Framing, 15, 437, 10, 10, 600, 600, 600},
    {5, Aspect::TopAsk, 17, 411, 8, 36, 680, 321, 436},
    {6, Aspect::Ask, 30, 384, 15, 43, 667, 411, 508},
    {6, Aspect::Framing, 15, 437, 10, 10, 600, 600, 600},
    {6, Aspect::TopAsk, 18, 411, 8, 35, 692, 340, 456},
};

Outcome metrics_arithmetic() {
    Outcome o;
    std::size_t good = 0;
    for (const auto& row : kPublished) {
        auto m = metrics({row.tp, row.tn, row.fp, row.fn});
        // plain floating point formulas as a second opinion
        double p = double(row.tp) / double(row.tp + row.fp);
        double r = double(row.tp) / double(row.tp + row.fn);
        double f = 2 * p * r / (p + r);
        bool exact = m.precision.near_milli(row.p) && m.recall.near_milli(row.r) && m.f1.near_milli(row.f);
        bool agree = std::abs(m.precision.value() - p) < 1e-12 && std::abs(m.recall.value() - r) < 1e-12 &&
                     std::abs(m.f1.value() - f) < 1e-12;
        if (exact && agree) {
            ++good;
        } else {
            std::ostringstream os;
            os << "case " << row.case_number << " " << to_string(row.aspect) << ": got " << m.precision.to_fixed3()
               << "/" << m.recall.to_fixed3() << "/" << m.f1.to_fixed3();
            o.fail(os.str());
        }
    }
    if (o.ok) o.detail = std::to_string(good) + "/" + std::to_string(kPublished.size()) + " rows within 0.0005";
    return o;
}

struct Expected {
    std::string email, framing, ask;
    double confidence;
};

Outcome representative_output() {
    const std::vector<Expected> rows = {
        {"e01_airport", "LOSE stuck() []", "PERFORM help() [finance_money]", 0.8},
        {"e02_pleasure", "GAIN won() [finance_money]", "PERFORM contact(jw11@example.com) []", 0.9},
        {"e03_dog", "GAIN win() []", "PERFORM vote(http://pets.example.com/vote?id=42) []", 0.9},
        {"e04_finalists", "GAIN pick() []", "GIVE vote() []", 0.6},
    };
    Outcome o;
    std::vector<std::string> args{"analyze", "--case", "6", "--format", "json"};
    for (const auto& r : rows) args.push_back((testing::corpus() / (r.email + ".eml")).string());
    auto run = testing::cli(args);
    if (run.code != 0) {
        o.fail("analyze exited " + std::to_string(run.code) + ": " + run.err);
        return o;
    }
    std::istringstream lines(run.out);
    std::string line;
    for (const auto& r : rows) {
        if (!std::getline(lines, line)) {
            o.fail("missing output for " + r.email);
            break;
        }
        auto a = analysis_from_json(nlohmann::json::parse(line));
        std::string framing;
        for (const auto& f : a.framings) framing += (framing.empty() ? "" : "; ") + describe(f);
        std::string ask;
        std::optional<double> conf;
        for (const auto* f : a.top_ask_frames()) {
            ask += (ask.empty() ? "" : "; ") + describe(*f);
            conf = f->confidence;
        }
        if (a.email_id != r.email || framing != r.framing || ask != r.ask || conf != r.confidence) {
            std::ostringstream os;
            os << r.email << ": " << framing << " | " << ask << " | " << (conf ? *conf : -1.0);
            o.fail(os.str());
        }
    }
    if (o.ok) o.detail = "4 emails: framings, asks, links, categories and confidences as expected";
    return o;
}

// Random clause structures over verb lemmas of the demo lexicon.
AnnotatedDocument synthetic_corpus(std::mt19937& rng, std::size_t clauses, const std::vector<std::string>& lemmas) {
    static const std::vector<std::string> tags = {"VB", "VBD", "VBG", "VBN", "VBP", "VBZ"};
    static const std::vector<std::string> rels = {"ccomp", "xcomp", "advcl", "conj", "csubj"};
    std::uniform_int_distribution<std::size_t> pick_tag(0, tags.size() - 1), pick_rel(0, rels.size() - 1),
        pick_lemma(0, lemmas.size() - 1), verbs_per_sentence(1, 4);
    AnnotatedDocument doc;
    std::size_t made = 0;
    while (made < clauses) {
        std::vector<testing::Tok> toks;
        std::size_t n = verbs_per_sentence(rng);
        for (std::size_t v = 0; v < n; ++v) {
            const auto& lemma = lemmas[pick_lemma(rng)];
            int head = v == 0 ? -1 : 0;
            toks.push_back({lemma, lemma, tags[pick_tag(rng)], head, v == 0 ? "root" : rels[pick_rel(rng)]});
            toks.push_back({"it", "it", "PRP", static_cast<int>(toks.size() - 1), "obj"});
        }
        doc.sentences.push_back(testing::sentence(toks, doc.sentences.size()));
        made += n;
    }
    return doc;
}

Outcome verbal_filter_property() {
    Outcome o;
    const auto& res = testing::demo();
    std::vector<std::string> lemmas;
    for (const auto& [lemma, labels] : res.lcs_plus.entries) {
        if (labels.contains(AskLabel::Perform) || labels.contains(AskLabel::Give)) lemmas.push_back(lemma);
    }
    std::mt19937 rng(20200303);
    auto doc = synthetic_corpus(rng, 1200, lemmas);
    auto clauses = extract_clauses(doc).size();
    if (clauses < 1000) o.fail("only " + std::to_string(clauses) + " synthetic clauses");

    auto on = case_config(6);
    auto off = on;
    off.verbal_processing = false;
    auto with = detect("synthetic", doc, {}, res, on);
    auto without = detect("synthetic", doc, {}, res, off);
    std::size_t bad = 0, past_off = 0;
    for (const auto& a : with.asks) {
        if ((a.action_pos == "VBD" || a.action_pos == "VBG") && a.source != CandidateSource::CatVar) ++bad;
    }
    for (const auto& a : without.asks) {
        if (a.action_pos == "VBD" || a.action_pos == "VBG") ++past_off;
    }
    if (bad) o.fail(std::to_string(bad) + " VBD/VBG asks with verbal processing on");
    if (past_off == 0) o.fail("generator produced no VBD/VBG asks to filter");

    auto corpus = load_corpus(testing::corpus());
    const CorpusEmail* sent = nullptr;
    for (const auto& e : corpus) {
        if (e.id == "e06_sent") sent = &e;
    }
    if (!sent) {
        o.fail("fixture e06_sent missing");
        return o;
    }
    auto spurious = [](const EmailAnalysis& a) {
        for (const auto& f : a.asks) {
            if (f.action_lemma == "send" && f.action_pos == "VBD") return true;
        }
        return false;
    };
    if (!spurious(detect(sent->id, sent->doc, sent->links, res, case_config(2))))
        o.fail("without the filter 'We sent you this email' gave no ask");
    if (spurious(detect(sent->id, sent->doc, sent->links, res, case_config(3))))
        o.fail("with the filter 'We sent you this email' still gave an ask");
    if (o.ok) {
        o.detail = std::to_string(clauses) + " clauses, " + std::to_string(with.asks.size()) + " asks, 0 VBD/VBG (" +
                   std::to_string(past_off) + " without the filter); 'sent' ask only without it";
    }
    return o;
}

// First label of the priority list whose gate opens.
std::optional<AskLabel> priority_oracle(LabelSet set, bool eligible, bool link) {
    const AskLabel order[] = {AskLabel::Perform, AskLabel::Give, AskLabel::Lose, AskLabel::Gain};
    for (auto l : order) {
        if (!set.contains(l)) continue;
        if (is_ask(l) && !eligible) continue;
        if (l == AskLabel::Perform && set.contains(AskLabel::Give) && !link) continue;
        return l;
    }
    return std::nullopt;
}

Outcome priority_and_links() {
    Outcome o;
    int combos = 0;
    for (unsigned bits = 0; bits < 16; ++bits) {
        for (bool link : {false, true}) {
            for (bool eligible : {false, true}) {
                auto set = LabelSet::from_bits(static_cast<std::uint8_t>(bits));
                auto got = classify_labels(set, eligible, link);
                auto want = priority_oracle(set, eligible, link);
                ++combos;
                if (got != want) o.fail("{" + set.to_string() + "} link=" + std::to_string(link));
            }
        }
    }

    const auto& lex = testing::demo().lcs_plus;
    DetectorConfig cfg = case_config(6);
    auto clause = [](const std::string& lemma) {
        ClauseCandidate c;
        c.action_lemma = lemma;
        c.action_text = lemma;
        c.action_pos = "VB";
        return c;
    };
    if (lex.lookup("send") != LabelSet{AskLabel::Give, AskLabel::Perform}) o.fail("send is not GIVE+PERFORM");
    if (lex.lookup("retrieve") != LabelSet{AskLabel::Gain, AskLabel::Lose}) o.fail("retrieve is not GAIN+LOSE");
    if (classify_action(clause("send"), true, lex, cfg) != AskLabel::Perform) o.fail("send with link");
    if (classify_action(clause("send"), false, lex, cfg) != AskLabel::Give) o.fail("send without link");
    for (bool link : {false, true}) {
        if (classify_action(clause("retrieve"), link, lex, cfg) != AskLabel::Lose) o.fail("retrieve");
    }
    // every dual member of the demo lexicon follows the oracle
    std::size_t duals = 0;
    for (const auto& [lemma, set] : lex.entries) {
        if (set.labels().size() < 2) continue;
        ++duals;
        for (bool link : {false, true}) {
            if (classify_action(clause(lemma), link, lex, cfg) != priority_oracle(set, true, link)) o.fail(lemma);
        }
    }
    if (o.ok) {
        o.detail = std::to_string(combos) + " label-set/link/eligibility combinations, " + std::to_string(duals) +
                   " dual lemmas; send PERFORM with link, GIVE without; retrieve LOSE";
    }
    return o;
}

Outcome advanced_link_delta() {
    Outcome o;
    auto dir = testing::fixtures() / "advanced";
    auto corpus = load_corpus(dir);
    auto gold = load_validation_file(dir / "validation.jsonl");
    const auto& res = testing::demo();

    auto top_of = [&](int n) -> const AskFrame* {
        for (const auto& e : corpus) {
            if (e.id != "e05_contact") continue;
            static thread_local EmailAnalysis keep;
            keep = detect(e.id, e.doc, e.links, res, case_config(n));
            auto tops = keep.top_ask_frames();
            return tops.empty() ? nullptr : tops.front();
        }
        return nullptr;
    };
    const AskFrame* basic = top_of(5);
    if (!basic || basic->confidence != 0.8 || !basic->links.empty() || basic->action_lemma != "help")
        o.fail("case 5 top ask is not the link-less 'help' at 0.8");
    const AskFrame* adv = top_of(6);
    if (!adv || adv->confidence != 0.9 || adv->links.size() != 1 || adv->action_lemma != "contact" ||
        adv->links[0].target != "jw11@example.com")
        o.fail("case 6 top ask is not 'contact' with the jw11 link at 0.9");

    auto report = run_cases(corpus, gold, res, {5, 6});
    auto tp5 = report.cases[0].at(Aspect::TopAsk).counts.tp;
    auto tp6 = report.cases[1].at(Aspect::TopAsk).counts.tp;
    if (tp6 != tp5 + 1) o.fail("top-ask TP " + std::to_string(tp5) + " -> " + std::to_string(tp6));
    if (o.ok) o.detail = "top ask 0.8 -> 0.9 with the link attached; top-ask TP " + std::to_string(tp5) + " -> " +
                         std::to_string(tp6);
    return o;
}

Outcome lexicon_deltas() {
    Outcome o;
    const auto& r = testing::demo();
    if (!r.manifest) {
        o.fail("no manifest");
        return o;
    }
    const auto& m = *r.manifest;
    auto net = [&](AskLabel l) {
        return static_cast<long>(r.lcs_plus.count(l)) - static_cast<long>(r.lcs.count(l));
    };
    auto declared_net = [&](AskLabel l) {
        auto a = m.declared(LexiconSource::Lcs, l), b = m.declared(LexiconSource::LcsPlus, l);
        return a && b ? std::optional<long>(static_cast<long>(*b) - static_cast<long>(*a)) : std::nullopt;
    };
    // the full bundle must reproduce the published nets; a demo bundle its own declared ones
    long want_perform = 38, want_lose = -163;
    if (m.provenance != "full") {
        auto dp = declared_net(AskLabel::Perform), dl = declared_net(AskLabel::Lose);
        if (!dp || !dl) {
            o.fail("demo manifest lacks lcs/lcs_plus counts");
            return o;
        }
        want_perform = *dp;
        want_lose = *dl;
    }
    auto rebuilt = apply_deltas(r.lcs, r.deltas);
    if (rebuilt.entries != r.lcs_plus.entries) o.fail("apply_deltas differs from the loaded LCS+");
    if (net(AskLabel::Perform) != want_perform)
        o.fail("PERFORM net " + std::to_string(net(AskLabel::Perform)) + ", want " + std::to_string(want_perform));
    if (net(AskLabel::Lose) != want_lose)
        o.fail("LOSE net " + std::to_string(net(AskLabel::Lose)) + ", want " + std::to_string(want_lose));
    if (net(AskLabel::Give) != 0 || net(AskLabel::Gain) != 0) o.fail("GIVE/GAIN changed");
    auto restored = revert_deltas(r.lcs_plus, r.deltas);
    if (restored.entries != r.lcs.entries) o.fail("inverse deltas do not restore LCS");
    if (o.ok) {
        std::ostringstream os;
        os << "provenance " << m.provenance << ": PERFORM " << std::showpos << net(AskLabel::Perform) << ", LOSE "
           << net(AskLabel::Lose) << std::noshowpos << "; inverse restores LCS exactly";
        o.detail = os.str();
    }
    return o;
}

Outcome mcnemar_oracle() {
    Outcome o;
    constexpr std::size_t kMax = 20;
    double worst = 0;
    std::size_t checked = 0;
    for (std::size_t n = 0; n <= kMax; ++n) {
        // count outcome sequences by how many discordant pairs favour the later system
        std::vector<std::uint64_t> hist(n + 1, 0);
        for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << n); ++mask) ++hist[std::popcount(mask)];
        const double total = std::ldexp(1.0, static_cast<int>(n));
        for (std::size_t b = 0; b <= n; ++b) {
            std::size_t c = n - b;
            std::size_t lo = std::min(b, c);
            std::uint64_t extreme = 0;
            for (std::size_t k = 0; k <= n; ++k) {
                if (k <= lo || k >= n - lo) extreme += hist[k];
            }
            double want = std::min(1.0, double(extreme) / total);

            std::vector<bool> a, later;
            for (std::size_t i = 0; i < b; ++i) a.push_back(true), later.push_back(false);
            for (std::size_t i = 0; i < c; ++i) a.push_back(false), later.push_back(true);
            for (std::size_t i = 0; i < 5; ++i) a.push_back(i % 2 == 0), later.push_back(i % 2 == 0);
            auto got = mcnemar(a, later);
            ++checked;
            worst = std::max(worst, std::abs(got.p_value - want));
            if (got.b != b || got.c != c) o.fail("discordant counts wrong at b=" + std::to_string(b));
            if (std::abs(got.p_value - want) > 1e-12)
                o.fail("b=" + std::to_string(b) + " c=" + std::to_string(c) + " p=" + std::to_string(got.p_value));
            if (b == c && got.p_value != 1.0) o.fail("b=c=" + std::to_string(b) + " p != 1");
        }
    }
    if (o.ok) {
        std::ostringstream os;
        os << checked << " (b, c) pairs with b+c <= " << kMax << ", max error " << worst << "; b=c gives 1";
        o.detail = os.str();
    }
    return o;
}

Outcome determinism() {
    Outcome o;
    auto corpus = testing::corpus().string();
    auto one = testing::cli({"evaluate", corpus, "--case", "all", "--format", "json", "-j", "1"});
    auto two = testing::cli({"evaluate", corpus, "--case", "all", "--format", "json", "-j", "4"});
    if (one.code != 0 || two.code != 0) {
        o.fail("evaluate exited " + std::to_string(one.code) + "/" + std::to_string(two.code) + ": " + one.err);
        return o;
    }
    if (one.out != two.out) o.fail("reports differ");
    if (o.ok) o.detail = std::to_string(one.out.size()) + " bytes identical across -j1 and -j4";
    return o;
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> checks = {
        {"metrics-arithmetic", metrics_arithmetic},
        {"representative-output", representative_output},
        {"verbal-filter", verbal_filter_property},
        {"priority-and-links", priority_and_links},
        {"advanced-link-delta", advanced_link_delta},
        {"lexicon-deltas", lexicon_deltas},
        {"mcnemar-oracle", mcnemar_oracle},
        {"determinism", determinism},
    };
    int failed = 0;
    for (const auto& [name, check] : checks) {
        Outcome o;
        try {
            o = check();
        } catch (const std::exception& e) {
            o.fail(std::string("exception: ") + e.what());
        }
        if (!o.ok) ++failed;
        std::cout << (o.ok ? "PASS " : "FAIL ") << name << ": " << o.detail << "\n";
    }
    std::cout << (checks.size() - failed) << "/" << checks.size() << " criteria passed\n";
    return failed ? 1 : 0;
}
