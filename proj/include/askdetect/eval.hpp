#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "askdetect/annotation.hpp"
#include "askdetect/detector.hpp"
#include "askdetect/lexicon.hpp"
#include "askdetect/normalize.hpp"

namespace askdetect {

struct ValidationRecord {
    std::string email_id;
    std::size_t sentence = 0;
    std::size_t token = 0;
    std::string text;
    std::optional<AskLabel> gold_kind;  // nullopt is NONE
    bool gold_top_ask = false;
};

/// JSON-lines: {"email", "sent", "tok", "text", "gold", "top"}.
std::vector<ValidationRecord> load_validation(std::istream& in);
std::vector<ValidationRecord> load_validation_file(const std::filesystem::path& path);

enum class Aspect { Ask, Framing, TopAsk };

inline constexpr Aspect kAllAspects[] = {Aspect::Ask, Aspect::Framing, Aspect::TopAsk};

std::string_view to_string(Aspect a);

struct ConfusionCounts {
    std::uint64_t tp = 0, tn = 0, fp = 0, fn = 0;

    std::uint64_t total() const { return tp + tn + fp + fn; }
    bool operator==(const ConfusionCounts&) const = default;
};

/// Non-negative fraction kept in lowest terms.
struct Rational {
    std::uint64_t num = 0;
    std::uint64_t den = 1;

    static Rational of(std::uint64_t num, std::uint64_t den);  // 0 when den == 0
    double value() const { return static_cast<double>(num) / static_cast<double>(den); }
    /// |value - milli/1000| <= 0.0005, decided exactly.
    bool near_milli(std::int64_t milli) const;
    /// Three decimals, halves rounded up: "0.482".
    std::string to_fixed3() const;
    bool operator==(const Rational&) const = default;
};

struct Metrics {
    Rational precision, recall, f1;
};

Metrics metrics(const ConfusionCounts& c);

enum class Cell { TP, TN, FP, FN };

/// One clause of one aspect. A prediction of the wrong kind against a gold
/// kind counts as FP.
Cell score_cell(std::optional<AskLabel> gold, std::optional<AskLabel> predicted);

/// Predictions of one case aligned to the validation clauses.
struct AlignedClause {
    const ValidationRecord* record = nullptr;
    std::optional<AskLabel> ask;
    std::optional<AskLabel> framing;
    bool top = false;
};

struct Alignment {
    std::vector<AlignedClause> clauses;  // one per validation record, same order
    /// Predictions that found no free clause; each adds an FP to its aspect.
    std::size_t extra_ask = 0, extra_framing = 0, extra_top = 0;
};

/// Matches frames on (email, sentence, token); a frame with no exact match
/// goes to the nearest unclaimed clause of the same sentence. Throws
/// AlignmentError when a gold email has no analysis or vice versa.
Alignment align(const std::vector<EmailAnalysis>& preds, const std::vector<ValidationRecord>& gold);

ConfusionCounts score_aspect(const Alignment& alignment, Aspect aspect);
ConfusionCounts score_aspect(const std::vector<EmailAnalysis>& preds, const std::vector<ValidationRecord>& gold,
                             Aspect aspect);

/// Per clause: TP or TN under this aspect.
std::vector<bool> correctness(const Alignment& alignment, Aspect aspect);

struct McNemarResult {
    std::size_t b = 0;  // a correct, b incorrect
    std::size_t c = 0;  // a incorrect, b correct
    double p_value = 1.0;
    bool significant = false;  // p < 0.05
};

/// Exact two-sided binomial McNemar test. Throws LengthMismatch.
McNemarResult mcnemar(const std::vector<bool>& correct_a, const std::vector<bool>& correct_b);

/// 2 * P(X <= k) for X ~ Binomial(n, 1/2), capped at 1.
double binomial_two_sided(std::size_t k, std::size_t n);

struct CorpusEmail {
    std::string id;
    AnnotatedDocument doc;
    LinkTable links;
};

/// Every *.eml under dir (sorted by name) with its sidecar <stem>.ann.jsonl.
std::vector<CorpusEmail> load_corpus(const std::filesystem::path& dir);

struct AspectResult {
    ConfusionCounts counts;
    Metrics metrics;
};

struct CaseSpec {
    int case_number = 0;
    DetectorConfig config;
};

struct CaseResult {
    int case_number = 0;
    DetectorConfig config;
    AspectResult aspects[3];

    const AspectResult& at(Aspect a) const { return aspects[static_cast<int>(a)]; }
};

struct PairResult {
    int from = 0, to = 0;
    Aspect aspect = Aspect::Ask;
    McNemarResult test;
    bool improved = false;  // fewer errors in the later case

    bool starred() const { return improved && test.significant; }
};

struct ExperimentReport {
    std::size_t clause_count = 0;
    std::vector<CaseResult> cases;
    std::vector<PairResult> pairs;  // consecutive requested cases only
};

/// Runs detect() over the corpus for each configuration and scores it.
/// Cases are computed on up to `jobs` threads; the report does not depend on it.
ExperimentReport run_configs(const std::vector<CorpusEmail>& corpus, const std::vector<ValidationRecord>& gold,
                             const ResourceSet& resources, const std::vector<CaseSpec>& cases, unsigned jobs = 1);

/// run_configs over the case presets.
ExperimentReport run_cases(const std::vector<CorpusEmail>& corpus, const std::vector<ValidationRecord>& gold,
                           const ResourceSet& resources, const std::vector<int>& cases, unsigned jobs = 1,
                           const CategoryRuleSet* categories = nullptr);

nlohmann::json to_json(const ExperimentReport& report);
std::string format_table(const ExperimentReport& report);

}  // namespace askdetect
