#include "askdetect/annotation.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "askdetect/error.hpp"
#include "strings.hpp"

namespace askdetect {

namespace {

using nlohmann::json;

std::string base_relation(std::string_view rel) {
    std::size_t colon = rel.find(':');
    return str::lower(rel.substr(0, colon));
}

bool is_verb_tag(std::string_view pos) { return pos.starts_with("VB"); }

std::size_t as_index(const json& j, std::string_view what, std::string_view where) {
    if (!j.is_number_integer()) throw SchemaError(std::string(where) + ": " + std::string(what) + " must be an integer");
    auto v = j.get<long long>();
    if (v < 0) throw SchemaError(std::string(where) + ": " + std::string(what) + " must be non-negative");
    return static_cast<std::size_t>(v);
}

const json& require(const json& obj, const char* key, std::string_view where) {
    auto it = obj.find(key);
    if (it == obj.end()) throw SchemaError(std::string(where) + ": missing field '" + key + "'");
    return *it;
}

std::string require_string(const json& obj, const char* key, std::string_view where) {
    const json& v = require(obj, key, where);
    if (!v.is_string()) throw SchemaError(std::string(where) + ": field '" + key + "' must be a string");
    return v.get<std::string>();
}

ConstituencyNode parse_tree(const json& j, std::string_view where, int depth) {
    if (depth > 200) throw SchemaError(std::string(where) + ": constituency tree too deep");
    ConstituencyNode node;
    if (j.is_number_integer()) {
        node.token = as_index(j, "constituency leaf", where);
        return node;
    }
    if (!j.is_array() || j.empty() || !j.front().is_string())
        throw SchemaError(std::string(where) + ": constituency node must be [\"LABEL\", child...]");
    node.label = j.front().get<std::string>();
    if (node.label.empty()) throw SchemaError(std::string(where) + ": constituency label is empty");
    if (j.size() < 2) throw SchemaError(std::string(where) + ": constituency node '" + node.label + "' has no children");
    for (std::size_t k = 1; k < j.size(); ++k) node.children.push_back(parse_tree(j[k], where, depth + 1));
    return node;
}

void collect_leaves(const ConstituencyNode& n, std::vector<std::size_t>& out) {
    if (n.is_leaf()) {
        out.push_back(n.token);
        return;
    }
    for (const auto& c : n.children) collect_leaves(c, out);
}

SentenceAnnotation parse_sentence(const json& j, std::string_view where) {
    if (!j.is_object()) throw SchemaError(std::string(where) + ": sentence must be a JSON object");
    SentenceAnnotation s;
    s.segment_index = as_index(require(j, "segment", where), "segment", where);

    const json& tokens = require(j, "tokens", where);
    if (!tokens.is_array()) throw SchemaError(std::string(where) + ": 'tokens' must be an array");
    for (const auto& t : tokens) {
        if (!t.is_object()) throw SchemaError(std::string(where) + ": token must be an object");
        Token tok;
        tok.index = as_index(require(t, "i", where), "token index", where);
        tok.text = require_string(t, "text", where);
        tok.lemma = require_string(t, "lemma", where);
        tok.pos = require_string(t, "pos", where);
        s.tokens.push_back(std::move(tok));
    }

    if (auto it = j.find("deps"); it != j.end() && !it->is_null()) {
        if (!it->is_array()) throw SchemaError(std::string(where) + ": 'deps' must be an array");
        for (const auto& d : *it) {
            if (!d.is_object()) throw SchemaError(std::string(where) + ": dependency must be an object");
            Dependency dep;
            const json& head = require(d, "head", where);
            if (!head.is_number_integer()) throw SchemaError(std::string(where) + ": dependency head must be an integer");
            long long h = head.get<long long>();
            if (h < -1) throw SchemaError(std::string(where) + ": dependency head " + std::to_string(h) + " is invalid");
            if (h >= 0) dep.head = static_cast<std::size_t>(h);
            dep.dependent = as_index(require(d, "dep", where), "dependency dep", where);
            dep.relation = require_string(d, "rel", where);
            s.dependencies.push_back(std::move(dep));
        }
    }

    if (auto it = j.find("constituency"); it != j.end() && !it->is_null()) {
        if (!(it->is_array() && it->empty())) s.constituency = parse_tree(*it, where, 0);
    }

    if (auto it = j.find("srl"); it != j.end() && !it->is_null()) {
        if (!it->is_array()) throw SchemaError(std::string(where) + ": 'srl' must be an array");
        for (const auto& f : *it) {
            if (!f.is_object()) throw SchemaError(std::string(where) + ": srl frame must be an object");
            SrlFrame frame;
            frame.predicate_index = as_index(require(f, "pred", where), "srl pred", where);
            const json& args = require(f, "args", where);
            if (!args.is_array()) throw SchemaError(std::string(where) + ": srl 'args' must be an array");
            for (const auto& a : args) {
                if (!a.is_object()) throw SchemaError(std::string(where) + ": srl argument must be an object");
                SrlArgument arg;
                arg.role = require_string(a, "role", where);
                const json& span = require(a, "span", where);
                if (!span.is_array() || span.size() != 2)
                    throw SchemaError(std::string(where) + ": srl span must be [start, end]");
                arg.span.start = as_index(span[0], "span start", where);
                arg.span.end = as_index(span[1], "span end", where);
                frame.args.push_back(std::move(arg));
            }
            s.srl_frames.push_back(std::move(frame));
        }
    }
    validate_sentence(s, where);
    return s;
}

bool closes_left(std::string_view t) {
    static const std::set<std::string, std::less<>> closers = {
        ".", ",", ":", ";", "!", "?", ")", "]", "}", "%", "''", "'s", "'S", "n't", "N'T",
        "'m", "'M", "'re", "'RE", "'ve", "'VE", "'ll", "'LL", "'d", "'D", "...", "-RRB-",
    };
    return closers.contains(t);
}

bool opens_right(std::string_view t) {
    return t == "(" || t == "[" || t == "{" || t == "$" || t == "``" || t == "#" || t == "-LRB-" ||
           t == "\xE2\x82\xAC" /* € */ || t == "\xC2\xA3" /* £ */;
}

}  // namespace

std::string_view to_string(CandidateSource s) {
    switch (s) {
        case CandidateSource::Dependency: return "dependency";
        case CandidateSource::Constituency: return "constituency";
        case CandidateSource::CatVar: return "catvar";
    }
    return "unknown";
}

std::string_view SentenceAnnotation::relation_of(std::size_t i) const {
    for (const auto& d : dependencies) {
        if (d.dependent == i) return d.relation;
    }
    return {};
}

std::optional<std::size_t> SentenceAnnotation::head_of(std::size_t i) const {
    for (const auto& d : dependencies) {
        if (d.dependent == i) return d.head;
    }
    return std::nullopt;
}

Span SentenceAnnotation::subtree(std::size_t i) const {
    Span span{i, i};
    std::vector<std::size_t> stack{i};
    std::vector<bool> seen(tokens.size(), false);
    while (!stack.empty()) {
        std::size_t cur = stack.back();
        stack.pop_back();
        if (cur >= seen.size() || seen[cur]) continue;
        seen[cur] = true;
        span.start = std::min(span.start, cur);
        span.end = std::max(span.end, cur);
        for (const auto& d : dependencies) {
            if (d.head && *d.head == cur) stack.push_back(d.dependent);
        }
    }
    return span;
}

std::string SentenceAnnotation::text(Span span) const {
    std::string out;
    bool glue = true;
    for (std::size_t i = span.start; i <= span.end && i < tokens.size(); ++i) {
        const std::string& t = tokens[i].text;
        if (!glue && !closes_left(t)) out += ' ';
        out += t;
        glue = opens_right(t);
    }
    return out;
}

void validate_sentence(const SentenceAnnotation& s, std::string_view where) {
    const std::string w(where);
    const std::size_t n = s.tokens.size();
    if (n == 0) throw SchemaError(w + ": sentence has no tokens");
    for (std::size_t i = 0; i < n; ++i) {
        if (s.tokens[i].index != i)
            throw SchemaError(w + ": token indices must be contiguous from 0 (found " +
                              std::to_string(s.tokens[i].index) + " at position " + std::to_string(i) + ")");
        if (s.tokens[i].pos.empty()) throw SchemaError(w + ": token " + std::to_string(i) + " has an empty pos tag");
    }

    if (!s.dependencies.empty()) {
        std::vector<int> incoming(n, 0);
        std::vector<std::optional<std::size_t>> head(n);
        std::size_t roots = 0;
        for (const auto& d : s.dependencies) {
            if (d.dependent >= n) throw SchemaError(w + ": dependency dep " + std::to_string(d.dependent) + " out of range");
            if (d.head && *d.head >= n) throw SchemaError(w + ": dependency head " + std::to_string(*d.head) + " out of range");
            if (d.relation.empty()) throw SchemaError(w + ": dependency of token " + std::to_string(d.dependent) + " has no relation");
            if (++incoming[d.dependent] > 1)
                throw GraphError(w + ": token " + std::to_string(d.dependent) + " has more than one head");
            head[d.dependent] = d.head;
            if (!d.head) ++roots;
        }
        for (std::size_t i = 0; i < n; ++i) {
            if (incoming[i] == 0) throw GraphError(w + ": token " + std::to_string(i) + " has no head");
        }
        if (roots != 1) throw GraphError(w + ": expected exactly one ROOT dependency, found " + std::to_string(roots));
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t steps = 0;
            std::optional<std::size_t> cur = i;
            while (cur) {
                if (++steps > n) throw GraphError(w + ": dependency cycle through token " + std::to_string(i));
                cur = head[*cur];
            }
        }
    }

    if (s.constituency) {
        std::vector<std::size_t> leaves;
        collect_leaves(*s.constituency, leaves);
        bool ok = leaves.size() == n;
        for (std::size_t i = 0; ok && i < n; ++i) ok = leaves[i] == i;
        if (!ok) throw SchemaError(w + ": constituency leaves must cover tokens 0.." + std::to_string(n - 1) + " once, in order");
    }

    for (std::size_t f = 0; f < s.srl_frames.size(); ++f) {
        const auto& frame = s.srl_frames[f];
        std::string name = "srl frame " + std::to_string(f) + " (pred " + std::to_string(frame.predicate_index);
        if (frame.predicate_index < n) name += " '" + s.tokens[frame.predicate_index].text + "'";
        name += ")";
        if (frame.predicate_index >= n) throw SchemaError(w + ": " + name + ": predicate out of range");
        for (const auto& a : frame.args) {
            if (a.role.empty()) throw SchemaError(w + ": " + name + ": argument with empty role");
            if (a.span.end < a.span.start)
                throw SchemaError(w + ": " + name + ": " + a.role + " span [" + std::to_string(a.span.start) + ", " +
                                  std::to_string(a.span.end) + "] has end < start");
            if (a.span.end >= n) throw SchemaError(w + ": " + name + ": " + a.role + " span exceeds the sentence");
        }
    }
}

AnnotatedDocument load_annotations(std::istream& in) {
    AnnotatedDocument doc;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string_view t = str::trim(line);
        if (t.empty() || t.front() == '#') continue;
        std::string where = "line " + std::to_string(lineno);
        json j;
        try {
            j = json::parse(t);
        } catch (const json::parse_error& e) {
            throw SchemaError(where + ": invalid JSON (" + e.what() + ")");
        }
        doc.sentences.push_back(parse_sentence(j, where));
    }
    return doc;
}

AnnotatedDocument load_annotations_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw SchemaError("cannot open annotations '" + path + "'");
    try {
        return load_annotations(in);
    } catch (const SchemaError& e) {
        throw SchemaError(path + ": " + e.what());
    } catch (const GraphError& e) {
        throw GraphError(path + ": " + e.what());
    }
}

bool is_clausal_relation(std::string_view relation) {
    static const std::set<std::string, std::less<>> clausal = {"ccomp", "xcomp", "advcl", "csubj", "csubjpass", "conj"};
    return clausal.contains(base_relation(relation));
}

namespace {

ClauseCandidate make_candidate(const SentenceAnnotation& s, std::size_t sentence_index, std::size_t i, Span span,
                               CandidateSource source, std::string via) {
    ClauseCandidate c;
    c.sentence = sentence_index;
    c.action_index = i;
    c.action_lemma = str::lower(s.tokens[i].lemma.empty() ? s.tokens[i].text : s.tokens[i].lemma);
    c.action_text = s.tokens[i].text;
    c.action_pos = s.tokens[i].pos;
    c.clause_span = span;
    c.source = source;
    c.via = std::move(via);
    return c;
}

std::optional<std::size_t> leaf_token(const ConstituencyNode& n) {
    if (n.is_leaf()) return n.token;
    // preterminal: ["VB", 3]
    if (n.children.size() == 1 && n.children.front().is_leaf()) return n.children.front().token;
    return std::nullopt;
}

void span_of(const ConstituencyNode& n, Span& span, bool& any) {
    if (n.is_leaf()) {
        if (!any) span = {n.token, n.token};
        span.start = std::min(span.start, n.token);
        span.end = std::max(span.end, n.token);
        any = true;
        return;
    }
    for (const auto& c : n.children) span_of(c, span, any);
}

void vp_heads(const SentenceAnnotation& s, std::size_t sentence_index, const ConstituencyNode& n,
              std::vector<ClauseCandidate>& out) {
    if (n.is_leaf()) return;
    if (n.label.starts_with("VP")) {
        bool has_vp_child = std::any_of(n.children.begin(), n.children.end(), [](const ConstituencyNode& c) {
            return !c.is_leaf() && c.label.starts_with("VP");
        });
        if (!has_vp_child) {
            for (const auto& c : n.children) {
                auto tok = leaf_token(c);
                if (tok && *tok < s.tokens.size() && is_verb_tag(s.tokens[*tok].pos)) {
                    Span span{*tok, *tok};
                    bool any = false;
                    span_of(n, span, any);
                    out.push_back(make_candidate(s, sentence_index, *tok, span, CandidateSource::Constituency, "VP"));
                    break;
                }
            }
        }
    }
    for (const auto& c : n.children) vp_heads(s, sentence_index, c, out);
}

}  // namespace

std::vector<ClauseCandidate> extract_clauses(const SentenceAnnotation& s, std::size_t sentence_index) {
    std::vector<ClauseCandidate> out;
    for (const auto& d : s.dependencies) {
        std::size_t i = d.dependent;
        if (!is_verb_tag(s.tokens[i].pos)) continue;
        std::string rel = base_relation(d.relation);
        bool take = false;
        if (!d.head || rel == "root") {
            take = true;
            rel = "root";
        } else if (rel == "conj") {
            take = is_verb_tag(s.tokens[*d.head].pos);
        } else {
            take = is_clausal_relation(rel);
        }
        if (take) out.push_back(make_candidate(s, sentence_index, i, s.subtree(i), CandidateSource::Dependency, rel));
    }
    if (out.empty() && s.constituency) vp_heads(s, sentence_index, *s.constituency, out);

    std::sort(out.begin(), out.end(),
              [](const ClauseCandidate& a, const ClauseCandidate& b) { return a.action_index < b.action_index; });
    out.erase(std::unique(out.begin(), out.end(),
                          [](const ClauseCandidate& a, const ClauseCandidate& b) {
                              return a.action_index == b.action_index;
                          }),
              out.end());
    return out;
}

std::vector<ClauseCandidate> extract_clauses(const AnnotatedDocument& doc) {
    std::vector<ClauseCandidate> out;
    for (std::size_t k = 0; k < doc.sentences.size(); ++k) {
        auto part = extract_clauses(doc.sentences[k], k);
        out.insert(out.end(), part.begin(), part.end());
    }
    return out;
}

std::vector<Argument> extract_arguments(const SentenceAnnotation& s, const ClauseCandidate& clause) {
    std::vector<Argument> out;
    for (const auto& frame : s.srl_frames) {
        if (frame.predicate_index != clause.action_index) continue;
        for (const auto& a : frame.args) {
            if (a.role == "V") continue;
            out.push_back(Argument{a.role, s.text(a.span), a.span, ArgumentSource::Srl});
        }
        return out;
    }
    for (const auto& d : s.dependencies) {
        if (!d.head || *d.head != clause.action_index) continue;
        std::string rel = base_relation(d.relation);
        std::string role;
        if (rel == "obj" || rel == "dobj") role = "ARG1";
        else if (rel == "iobj") role = "ARG2";
        else if (rel == "obl" || rel == "nmod" || rel == "prep") role = "ARGM";
        else continue;
        Span span = s.subtree(d.dependent);
        out.push_back(Argument{role, s.text(span), span, ArgumentSource::Dependency});
    }
    std::sort(out.begin(), out.end(), [](const Argument& a, const Argument& b) { return a.span.start < b.span.start; });
    return out;
}

}  // namespace askdetect
