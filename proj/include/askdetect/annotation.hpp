#pragma once

#include <cstddef>
#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace askdetect {

struct Token {
    std::size_t index = 0;
    std::string text;
    std::string lemma;
    std::string pos;  // Penn Treebank tag
};

/// Head index of a dependency edge; nullopt is ROOT.
struct Dependency {
    std::optional<std::size_t> head;
    std::size_t dependent = 0;
    std::string relation;
};

/// Constituency node: a phrase label over children, or a token leaf.
struct ConstituencyNode {
    std::string label;  // empty for leaves
    std::size_t token = 0;
    std::vector<ConstituencyNode> children;

    bool is_leaf() const { return label.empty(); }
};

struct Span {
    std::size_t start = 0;
    std::size_t end = 0;  // inclusive

    bool contains(std::size_t i) const { return i >= start && i <= end; }
    bool operator==(const Span&) const = default;
};

struct SrlArgument {
    std::string role;  // ARG0..ARG5, ARGM-*
    Span span;
};

struct SrlFrame {
    std::size_t predicate_index = 0;
    std::vector<SrlArgument> args;
};

struct SentenceAnnotation {
    std::size_t segment_index = 0;
    std::vector<Token> tokens;
    std::vector<Dependency> dependencies;  // empty when the sentence was not parsed
    std::optional<ConstituencyNode> constituency;
    std::vector<SrlFrame> srl_frames;

    /// The relation attaching token i to its head, or empty.
    std::string_view relation_of(std::size_t i) const;
    std::optional<std::size_t> head_of(std::size_t i) const;
    /// Inclusive token span of the dependency subtree rooted at i.
    Span subtree(std::size_t i) const;
    /// Tokens in span joined with conventional spacing ("$500." not "$ 500 .").
    std::string text(Span span) const;
};

struct AnnotatedDocument {
    std::vector<SentenceAnnotation> sentences;  // document order
};

enum class CandidateSource { Dependency, Constituency, CatVar };

std::string_view to_string(CandidateSource s);

struct ClauseCandidate {
    std::size_t sentence = 0;  // index into AnnotatedDocument::sentences
    std::size_t action_index = 0;
    std::string action_lemma;  // lowercase
    std::string action_text;   // surface form
    std::string action_pos;
    Span clause_span;
    CandidateSource source = CandidateSource::Dependency;
    std::string via;  // relation or node that made this a candidate

    bool catvar_derived() const { return source == CandidateSource::CatVar; }
};

enum class ArgumentSource { Srl, Dependency };

struct Argument {
    std::string role;
    std::string text;
    Span span;
    ArgumentSource source = ArgumentSource::Srl;
};

/// Reads JSON-lines annotations (one sentence object per line). Blank lines
/// and lines starting with '#' are skipped. Throws SchemaError for shape and
/// span problems, GraphError for dependency graphs that are not a tree.
AnnotatedDocument load_annotations(std::istream& in);
AnnotatedDocument load_annotations_file(const std::string& path);

/// Validates one parsed sentence; exposed for producers of annotations.
void validate_sentence(const SentenceAnnotation& s, std::string_view where);

/// ROOT verb plus every verb heading a clausal dependent, per sentence.
/// Falls back to VP heads of the constituency tree when the dependency pass
/// finds no verb in a sentence.
std::vector<ClauseCandidate> extract_clauses(const AnnotatedDocument& doc);
std::vector<ClauseCandidate> extract_clauses(const SentenceAnnotation& sentence, std::size_t sentence_index);

/// SRL arguments of the clause's predicate when a frame exists; otherwise
/// object, indirect object and oblique dependents of the action.
std::vector<Argument> extract_arguments(const SentenceAnnotation& sentence, const ClauseCandidate& clause);

/// Relations that make a verb the head of its own clause.
bool is_clausal_relation(std::string_view relation);

}  // namespace askdetect
