#include "askdetect/detector.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include "askdetect/error.hpp"
#include "strings.hpp"

namespace askdetect {

using nlohmann::json;

std::string_view to_string(LinkMode m) {
    switch (m) {
        case LinkMode::None: return "none";
        case LinkMode::Basic: return "basic";
        case LinkMode::Advanced: return "advanced";
    }
    return "none";
}

std::optional<LinkMode> parse_link_mode(std::string_view s) {
    std::string l = str::lower(s);
    if (l == "none" || l == "off") return LinkMode::None;
    if (l == "basic") return LinkMode::Basic;
    if (l == "advanced") return LinkMode::Advanced;
    return std::nullopt;
}

void ConfidenceTable::validate() const {
    for (double v : {ask_with_link, perform_with_category, give_with_category, give_plain, perform_plain,
                     past_tense_ask}) {
        if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("confidence values must lie in [0, 1]");
    }
    if (!(ask_with_link >= perform_with_category && perform_with_category >= give_with_category &&
          give_with_category >= give_plain))
        throw std::invalid_argument("confidence table is not monotone");
}

DetectorConfig case_config(int n) {
    if (n < 0 || n >= kCaseCount) throw std::out_of_range("case must be in 0.." + std::to_string(kCaseCount - 1));
    DetectorConfig c;
    c.lexicon_source = n == 0 ? LexiconSource::Thesaurus : n == 1 ? LexiconSource::Lcs : LexiconSource::LcsPlus;
    c.verbal_processing = n >= 3;
    c.catvar = n >= 4;
    c.link_mode = n >= 6 ? LinkMode::Advanced : n == 5 ? LinkMode::Basic : LinkMode::None;
    return c;
}

std::string_view case_name(int n) {
    static constexpr std::string_view names[] = {
        "Thesaurus Only",
        "Original LCS Classes",
        "LCS+ Classes",
        "LCS+ & Verbal",
        "LCS+ & Verbal & CATVAR",
        "LCS+ & Verbal & CATVAR & BasicLink",
        "LCS+ & Verbal & CATVAR & AdvancedLink",
    };
    if (n < 0 || n >= kCaseCount) return "?";
    return names[n];
}

bool AskFrame::has_category() const {
    return std::any_of(arguments.begin(), arguments.end(), [](const CategorizedArgument& a) { return a.category.has_value(); });
}

std::vector<CategoryId> AskFrame::categories() const {
    std::vector<CategoryId> out;
    for (const auto& a : arguments) {
        if (a.category && std::find(out.begin(), out.end(), *a.category) == out.end()) out.push_back(*a.category);
    }
    return out;
}

std::vector<const AskFrame*> EmailAnalysis::top_ask_frames() const {
    std::vector<const AskFrame*> out;
    for (auto i : top_asks) out.push_back(&asks.at(i));
    return out;
}

std::optional<AskLabel> classify_labels(LabelSet labels, bool ask_eligible, bool has_link) {
    if (ask_eligible) {
        bool perform = labels.contains(AskLabel::Perform);
        bool give = labels.contains(AskLabel::Give);
        if (perform && (!give || has_link)) return AskLabel::Perform;
        if (give) return AskLabel::Give;
    }
    if (labels.contains(AskLabel::Lose)) return AskLabel::Lose;
    if (labels.contains(AskLabel::Gain)) return AskLabel::Gain;
    return std::nullopt;
}

bool verbal_filter(const ClauseCandidate& clause, const DetectorConfig& cfg) {
    if (!cfg.verbal_processing || clause.catvar_derived()) return true;
    return clause.action_pos != "VBD" && clause.action_pos != "VBG";
}

std::optional<AskLabel> classify_action(const ClauseCandidate& clause, bool has_link, const VerbLexicon& lex,
                                        const DetectorConfig& cfg) {
    return classify_labels(lex.lookup(clause.action_lemma), verbal_filter(clause, cfg), has_link);
}

std::vector<ClauseCandidate> catvar_candidates(const SentenceAnnotation& s, std::size_t sentence_index,
                                               const CatVarDatabase& db, const DetectorConfig& cfg,
                                               const std::vector<ClauseCandidate>& existing) {
    std::vector<ClauseCandidate> out;
    if (!cfg.catvar || s.dependencies.empty()) return out;
    std::set<std::size_t> taken;
    for (const auto& c : existing) {
        if (c.sentence == sentence_index) taken.insert(c.action_index);
    }
    for (const auto& t : s.tokens) {
        if (taken.contains(t.index)) continue;
        if (!t.pos.starts_with("NN") && !t.pos.starts_with("JJ")) continue;
        bool head = !s.head_of(t.index).has_value() || is_clausal_relation(s.relation_of(t.index));
        if (!head) continue;
        std::string word = str::lower(t.lemma.empty() ? t.text : t.lemma);
        auto verb = catvar_verbalize(db, word, t.pos);
        if (!verb) continue;
        ClauseCandidate c;
        c.sentence = sentence_index;
        c.action_index = t.index;
        c.action_lemma = *verb;
        c.action_text = t.text;
        c.action_pos = t.pos;
        c.clause_span = s.subtree(t.index);
        c.source = CandidateSource::CatVar;
        auto pc = pos_class_of(t.pos);
        c.via = word + "#" + std::string(to_string(*pc)) + " -> " + *verb + "#V";
        out.push_back(std::move(c));
    }
    return out;
}

namespace {

std::string format_score(double v) {
    std::ostringstream os;
    os << std::setprecision(6) << v;
    return os.str();
}

struct LinkSite {
    const LinkEntry* entry = nullptr;
    std::optional<std::size_t> sentence;
    std::size_t token = 0;
    std::optional<Span> anchor;  // tokens covering the anchor text
};

std::string squeeze(std::string_view s) {
    std::string out;
    for (char c : s) {
        if (!str::is_space(c)) out.push_back(c);
    }
    return out;
}

bool is_placeholder_for(const Token& t, const std::string& id) {
    if (auto p = parse_placeholder(t.text)) return *p == id;
    return t.text == id;
}

std::optional<Span> anchor_span(const SentenceAnnotation& s, std::size_t placeholder, const std::string& anchor) {
    std::string want = squeeze(anchor);
    if (want.empty() || placeholder == 0) return std::nullopt;
    std::string got;
    for (std::size_t q = placeholder; q-- > 0;) {
        got.insert(0, squeeze(s.tokens[q].text));
        if (got.size() == want.size()) {
            if (got == want) return Span{q, placeholder - 1};
            return std::nullopt;
        }
        if (got.size() > want.size()) return std::nullopt;
    }
    return std::nullopt;
}

LinkSite locate(const LinkEntry& e, const AnnotatedDocument& doc) {
    LinkSite site;
    site.entry = &e;
    for (std::size_t k = 0; k < doc.sentences.size(); ++k) {
        const auto& s = doc.sentences[k];
        for (const auto& t : s.tokens) {
            if (is_placeholder_for(t, e.placeholder_id)) {
                site.sentence = k;
                site.token = t.index;
                site.anchor = anchor_span(s, t.index, e.anchor_text);
                return site;
            }
        }
    }
    return site;
}

bool in_segment(const AskFrame& a, const AnnotatedDocument& doc, std::size_t segment) {
    return doc.sentences.at(a.sentence).segment_index == segment;
}

/// Sentence position used for the advanced window when the placeholder was
/// not found in any token: the last sentence of the link's segment, or the
/// last sentence before it.
std::optional<std::size_t> fallback_position(const AnnotatedDocument& doc, std::size_t segment) {
    std::optional<std::size_t> pos;
    for (std::size_t k = 0; k < doc.sentences.size(); ++k) {
        if (doc.sentences[k].segment_index <= segment) pos = k;
    }
    return pos;
}

void attach(AskFrame& ask, const LinkEntry& e, std::string_view how) {
    ask.links.push_back(e);
    ask.evidence.push_back("link " + e.placeholder_id + " -> " + e.target + " (" + std::string(how) + ")");
    auto arg1 = std::find_if(ask.arguments.begin(), ask.arguments.end(),
                             [](const CategorizedArgument& a) { return a.argument.role == "ARG1"; });
    ask.evidence.push_back(arg1 == ask.arguments.end() ? std::string("link bound to implicit ARG1")
                                                       : "link bound to ARG1 '" + arg1->argument.text + "'");
    auto kind = classify_labels(ask.labels, ask.ask_eligible, true);
    if (kind && *kind != ask.kind) {
        ask.evidence.push_back("reclassified with link: " + std::string(to_string(ask.kind)) + " -> " +
                               std::string(to_string(*kind)));
        ask.kind = *kind;
    }
}

}  // namespace

void associate_links(std::vector<AskFrame>& asks, const AnnotatedDocument& doc, const LinkTable& links,
                     const DetectorConfig& cfg) {
    if (cfg.link_mode == LinkMode::None) return;
    std::vector<LinkSite> pending;
    for (const auto& e : links.entries) {
        LinkSite site = locate(e, doc);
        std::vector<std::size_t> pool;
        for (std::size_t i = 0; i < asks.size(); ++i) {
            if (!asks[i].perform_eligible()) continue;
            bool same = site.sentence ? asks[i].sentence == *site.sentence : in_segment(asks[i], doc, e.segment_index);
            if (same) pool.push_back(i);
        }
        if (pool.empty()) {
            pending.push_back(site);
            continue;
        }
        std::optional<std::size_t> pick;
        if (site.sentence && site.anchor) {
            for (auto i : pool) {
                if (site.anchor->contains(asks[i].token)) {
                    pick = i;
                    break;
                }
            }
        }
        if (!pick && site.sentence) {
            std::size_t best = 0;
            for (auto i : pool) {
                std::size_t d = asks[i].token > site.token ? asks[i].token - site.token : site.token - asks[i].token;
                bool before = asks[i].token < site.token;
                if (!pick || d < best || (d == best && before)) {
                    pick = i;
                    best = d;
                }
            }
        }
        if (!pick) pick = pool.back();
        attach(asks[*pick], e, "basic");
    }

    if (cfg.link_mode != LinkMode::Advanced) return;
    for (const auto& site : pending) {
        auto pos = site.sentence ? site.sentence : fallback_position(doc, site.entry->segment_index);
        if (!pos) continue;
        std::optional<std::size_t> pick;
        for (std::size_t back = 1; back <= cfg.advanced_window && back <= *pos && !pick; ++back) {
            std::size_t target = *pos - back;
            for (std::size_t i = asks.size(); i-- > 0;) {
                if (asks[i].sentence == target && asks[i].perform_eligible() && asks[i].links.empty()) {
                    pick = i;
                    break;
                }
            }
        }
        if (pick) attach(asks[*pick], *site.entry, "advanced, " + std::to_string(*pos - asks[*pick].sentence) + " sentence(s) later");
    }
}

double score_confidence(const AskFrame& ask, const DetectorConfig& cfg) {
    const auto& t = cfg.confidence;
    if (ask.action_pos == "VBD" && ask.source != CandidateSource::CatVar) return t.past_tense_ask;
    if (!ask.links.empty()) return t.ask_with_link;
    bool cat = ask.has_category();
    if (ask.kind == AskLabel::Perform && cat) return t.perform_with_category;
    if (ask.kind == AskLabel::Give && cat) return t.give_with_category;
    if (ask.kind == AskLabel::Give) return t.give_plain;
    return t.perform_plain;
}

std::vector<std::size_t> select_top_asks(const EmailAnalysis& a) {
    std::vector<std::size_t> out;
    std::optional<double> best;
    for (const auto& f : a.asks) {
        if (f.confidence && (!best || *f.confidence > *best)) best = f.confidence;
    }
    if (!best) return out;
    for (std::size_t i = 0; i < a.asks.size(); ++i) {
        if (a.asks[i].confidence && *a.asks[i].confidence == *best) out.push_back(i);
    }
    return out;
}

EmailAnalysis detect(std::string email_id, const AnnotatedDocument& doc, const LinkTable& links,
                     const VerbLexicon& lex, const CatVarDatabase& db, const DetectorConfig& cfg) {
    cfg.confidence.validate();
    EmailAnalysis out;
    out.email_id = std::move(email_id);

    for (std::size_t k = 0; k < doc.sentences.size(); ++k) {
        const auto& s = doc.sentences[k];
        auto candidates = extract_clauses(s, k);
        auto derived = catvar_candidates(s, k, db, cfg, candidates);
        candidates.insert(candidates.end(), derived.begin(), derived.end());
        std::sort(candidates.begin(), candidates.end(),
                  [](const ClauseCandidate& a, const ClauseCandidate& b) { return a.action_index < b.action_index; });

        for (const auto& c : candidates) {
            LabelSet labels = lex.lookup(c.action_lemma);
            bool eligible = verbal_filter(c, cfg);
            auto kind = classify_labels(labels, eligible, false);
            if (!kind) continue;

            AskFrame f;
            f.kind = *kind;
            f.action_lemma = c.action_lemma;
            f.action_text = c.action_text;
            f.action_pos = c.action_pos;
            f.sentence = k;
            f.token = c.action_index;
            f.source = c.source;
            f.labels = labels;
            f.ask_eligible = eligible;
            f.evidence.push_back("candidate " + c.action_text + "/" + c.action_pos + " (" +
                                 std::string(to_string(c.source)) + ": " + c.via + ")");
            f.evidence.push_back("lexicon " + std::string(to_string(lex.source)) + ": " + c.action_lemma + " -> {" +
                                 labels.to_string() + "}");
            if (!eligible) f.evidence.push_back("verbal filter: " + c.action_pos + " is not an ask");
            f.evidence.push_back("classified " + std::string(to_string(*kind)));

            auto args = extract_arguments(s, c);
            auto cats = assign_category(args, cfg.category_rules);
            for (std::size_t i = 0; i < args.size(); ++i) {
                if (cats[i]) f.evidence.push_back("argument " + args[i].role + " '" + args[i].text + "' -> " + *cats[i]);
                f.arguments.push_back({std::move(args[i]), std::move(cats[i])});
            }
            (is_ask(*kind) ? out.asks : out.framings).push_back(std::move(f));
        }
    }

    associate_links(out.asks, doc, links, cfg);

    for (auto& a : out.asks) {
        a.confidence = score_confidence(a, cfg);
        a.evidence.push_back("confidence " + format_score(*a.confidence));
    }
    out.top_asks = select_top_asks(out);
    return out;
}

EmailAnalysis detect(std::string email_id, const AnnotatedDocument& doc, const LinkTable& links,
                     const ResourceSet& resources, const DetectorConfig& cfg) {
    return detect(std::move(email_id), doc, links, resources.lexicon(cfg.lexicon_source), resources.catvar, cfg);
}

json to_json(const AskFrame& f) {
    json args = json::array();
    for (const auto& a : f.arguments) {
        args.push_back({{"role", a.argument.role},
                        {"text", a.argument.text},
                        {"span", {a.argument.span.start, a.argument.span.end}},
                        {"from", a.argument.source == ArgumentSource::Srl ? "srl" : "dependency"},
                        {"category", a.category ? json(*a.category) : json(nullptr)}});
    }
    json links = json::array();
    for (const auto& l : f.links) links.push_back(l.target);
    return {{"kind", to_string(f.kind)},
            {"action", f.action_lemma},
            {"surface", f.action_text},
            {"pos", f.action_pos},
            {"sentence", f.sentence},
            {"token", f.token},
            {"source", to_string(f.source)},
            {"labels", f.labels.to_string()},
            {"ask_eligible", f.ask_eligible},
            {"args", args},
            {"links", links},
            {"confidence", f.confidence ? json(*f.confidence) : json(nullptr)},
            {"evidence", f.evidence}};
}

json to_json(const EmailAnalysis& a) {
    json asks = json::array();
    for (const auto& f : a.asks) asks.push_back(to_json(f));
    json framings = json::array();
    for (const auto& f : a.framings) framings.push_back(to_json(f));
    return {{"email", a.email_id}, {"asks", asks}, {"framings", framings}, {"top_asks", a.top_asks}};
}

namespace {

CandidateSource parse_candidate_source(const std::string& s) {
    if (s == "dependency") return CandidateSource::Dependency;
    if (s == "constituency") return CandidateSource::Constituency;
    if (s == "catvar") return CandidateSource::CatVar;
    throw SchemaError("unknown candidate source '" + s + "'");
}

AskFrame frame_from_json(const json& j) {
    AskFrame f;
    auto kind = parse_label(j.at("kind").get<std::string>());
    if (!kind) throw SchemaError("unknown kind '" + j.at("kind").get<std::string>() + "'");
    f.kind = *kind;
    f.action_lemma = j.at("action").get<std::string>();
    f.action_text = j.at("surface").get<std::string>();
    f.action_pos = j.at("pos").get<std::string>();
    f.sentence = j.at("sentence").get<std::size_t>();
    f.token = j.at("token").get<std::size_t>();
    f.source = parse_candidate_source(j.at("source").get<std::string>());
    const std::string label_list = j.value("labels", std::string());
    for (const auto& name : str::split(label_list, ',')) {
        auto t = str::trim(name);
        if (t.empty()) continue;
        auto l = parse_label(t);
        if (!l) throw SchemaError("unknown label '" + std::string(t) + "'");
        f.labels.insert(*l);
    }
    f.ask_eligible = j.value("ask_eligible", false);
    for (const auto& a : j.at("args")) {
        CategorizedArgument ca;
        ca.argument.role = a.at("role").get<std::string>();
        ca.argument.text = a.at("text").get<std::string>();
        ca.argument.span = {a.at("span").at(0).get<std::size_t>(), a.at("span").at(1).get<std::size_t>()};
        ca.argument.source = a.value("from", std::string("srl")) == "srl" ? ArgumentSource::Srl : ArgumentSource::Dependency;
        if (!a.at("category").is_null()) ca.category = a.at("category").get<std::string>();
        f.arguments.push_back(std::move(ca));
    }
    for (const auto& l : j.at("links")) f.links.push_back({"", l.get<std::string>(), "", 0});
    if (!j.at("confidence").is_null()) f.confidence = j.at("confidence").get<double>();
    f.evidence = j.value("evidence", std::vector<std::string>{});
    return f;
}

}  // namespace

EmailAnalysis analysis_from_json(const json& j) {
    try {
        EmailAnalysis a;
        a.email_id = j.at("email").get<std::string>();
        for (const auto& f : j.at("asks")) a.asks.push_back(frame_from_json(f));
        for (const auto& f : j.at("framings")) a.framings.push_back(frame_from_json(f));
        a.top_asks = j.at("top_asks").get<std::vector<std::size_t>>();
        for (auto i : a.top_asks) {
            if (i >= a.asks.size()) throw SchemaError("top_asks index out of range");
        }
        return a;
    } catch (const json::exception& e) {
        throw SchemaError(std::string("analysis json: ") + e.what());
    }
}

std::string describe(const AskFrame& f) {
    std::string out(to_string(f.kind));
    out += " " + str::lower(f.action_text) + "(";
    for (std::size_t i = 0; i < f.links.size(); ++i) {
        if (i) out += ", ";
        out += f.links[i].target;
    }
    out += ") [";
    auto cats = f.categories();
    for (std::size_t i = 0; i < cats.size(); ++i) {
        if (i) out += ", ";
        out += cats[i];
    }
    out += "]";
    return out;
}

}  // namespace askdetect
