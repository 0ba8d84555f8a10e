#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "askdetect/annotation.hpp"
#include "askdetect/category.hpp"
#include "askdetect/lexicon.hpp"
#include "askdetect/normalize.hpp"

namespace askdetect {

enum class LinkMode { None, Basic, Advanced };

std::string_view to_string(LinkMode m);
std::optional<LinkMode> parse_link_mode(std::string_view s);

/// Confidence assigned to an ask; the first matching rule wins in the order
/// past tense, link, PERFORM+category, GIVE+category, GIVE, PERFORM.
struct ConfidenceTable {
    double ask_with_link = 0.9;
    double perform_with_category = 0.8;
    double give_with_category = 0.75;
    double give_plain = 0.6;
    double perform_plain = 0.7;
    double past_tense_ask = 0.0;

    /// Throws std::invalid_argument unless every score is in [0,1] and
    /// link >= perform+category >= give+category >= give.
    void validate() const;
};

struct DetectorConfig {
    LexiconSource lexicon_source = LexiconSource::LcsPlus;
    bool verbal_processing = true;
    bool catvar = true;
    LinkMode link_mode = LinkMode::Advanced;  // Advanced includes Basic
    std::size_t advanced_window = 2;          // sentences after the ask
    ConfidenceTable confidence;
    CategoryRuleSet category_rules = CategoryRuleSet::defaults();
};

inline constexpr int kCaseCount = 7;

/// The cumulative evaluation ladder: 0 thesaurus, 1 LCS, 2 LCS+,
/// 3 +verbal, 4 +CATVAR, 5 +basic links, 6 +advanced links.
DetectorConfig case_config(int case_number);
std::string_view case_name(int case_number);

struct CategorizedArgument {
    Argument argument;
    std::optional<CategoryId> category;
};

struct AskFrame {
    AskLabel kind = AskLabel::Perform;
    std::string action_lemma;
    std::string action_text;
    std::string action_pos;
    std::size_t sentence = 0;
    std::size_t token = 0;
    CandidateSource source = CandidateSource::Dependency;
    LabelSet labels;            // lexicon labels of action_lemma
    bool ask_eligible = false;  // survived the verbal filter
    std::vector<CategorizedArgument> arguments;
    std::vector<LinkEntry> links;
    std::optional<double> confidence;  // asks only
    std::vector<std::string> evidence;

    bool perform_eligible() const { return ask_eligible && labels.contains(AskLabel::Perform); }
    bool has_category() const;
    /// Categories of the arguments, first-seen order, without repeats.
    std::vector<CategoryId> categories() const;
};

struct EmailAnalysis {
    std::string email_id;
    std::vector<AskFrame> asks;      // PERFORM / GIVE, document order
    std::vector<AskFrame> framings;  // LOSE / GAIN, document order
    std::vector<std::size_t> top_asks;  // indices into asks

    std::vector<const AskFrame*> top_ask_frames() const;
};

/// Priority scheme over a label set. Ask-eligible actions try PERFORM then
/// GIVE, where PERFORM/GIVE dual members resolve to PERFORM only with a
/// link. Otherwise LOSE then GAIN.
std::optional<AskLabel> classify_labels(LabelSet labels, bool ask_eligible, bool has_link);

std::optional<AskLabel> classify_action(const ClauseCandidate& clause, bool has_link, const VerbLexicon& lex,
                                        const DetectorConfig& cfg);

/// False iff verbal processing is on and the action is VBD or VBG.
/// CATVAR-derived candidates always pass.
bool verbal_filter(const ClauseCandidate& clause, const DetectorConfig& cfg);

/// Nominal and adjectival clause heads (ROOT or clausal dependents) whose
/// CATVAR cluster has a verb, excluding tokens already in `existing`.
std::vector<ClauseCandidate> catvar_candidates(const SentenceAnnotation& sentence, std::size_t sentence_index,
                                               const CatVarDatabase& db, const DetectorConfig& cfg,
                                               const std::vector<ClauseCandidate>& existing = {});

/// Attaches links to PERFORM-eligible asks: same sentence (basic), then a
/// detached link to the nearest link-less ask up to `advanced_window`
/// sentences before it (advanced). Attaching reclassifies the ask.
void associate_links(std::vector<AskFrame>& asks, const AnnotatedDocument& doc, const LinkTable& links,
                     const DetectorConfig& cfg);

double score_confidence(const AskFrame& ask, const DetectorConfig& cfg);

/// Indices of every ask tied at the maximum confidence.
std::vector<std::size_t> select_top_asks(const EmailAnalysis& analysis);

EmailAnalysis detect(std::string email_id, const AnnotatedDocument& doc, const LinkTable& links,
                     const VerbLexicon& lex, const CatVarDatabase& db, const DetectorConfig& cfg);

/// detect() with the lexicon chosen by cfg.lexicon_source.
EmailAnalysis detect(std::string email_id, const AnnotatedDocument& doc, const LinkTable& links,
                     const ResourceSet& resources, const DetectorConfig& cfg);

nlohmann::json to_json(const AskFrame& frame);
nlohmann::json to_json(const EmailAnalysis& analysis);
EmailAnalysis analysis_from_json(const nlohmann::json& j);

/// "PERFORM contact(jw11@example.com) []" style rendering used by the table.
std::string describe(const AskFrame& frame);

}  // namespace askdetect
