#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace askdetect {

/// Asks (PERFORM, GIVE) and framings (LOSE, GAIN). The declaration order is
/// the detector's priority order.
enum class AskLabel : std::uint8_t { Perform = 0, Give = 1, Lose = 2, Gain = 3 };

inline constexpr std::array<AskLabel, 4> kAllLabels = {AskLabel::Perform, AskLabel::Give, AskLabel::Lose,
                                                       AskLabel::Gain};

constexpr bool is_ask(AskLabel l) { return l == AskLabel::Perform || l == AskLabel::Give; }
constexpr bool is_framing(AskLabel l) { return !is_ask(l); }

std::string_view to_string(AskLabel l);
/// Accepts "PERFORM", "perform", ...
std::optional<AskLabel> parse_label(std::string_view s);

/// Small set of AskLabel values.
class LabelSet {
public:
    constexpr LabelSet() = default;
    constexpr LabelSet(std::initializer_list<AskLabel> labels) {
        for (auto l : labels) insert(l);
    }
    static constexpr LabelSet from_bits(std::uint8_t bits) {
        LabelSet s;
        s.bits_ = bits & 0x0F;
        return s;
    }

    constexpr void insert(AskLabel l) { bits_ |= bit(l); }
    constexpr void erase(AskLabel l) { bits_ &= static_cast<std::uint8_t>(~bit(l)); }
    constexpr bool contains(AskLabel l) const { return (bits_ & bit(l)) != 0; }
    constexpr bool empty() const { return bits_ == 0; }
    constexpr std::uint8_t bits() const { return bits_; }
    std::vector<AskLabel> labels() const;
    /// "GIVE, PERFORM" (alphabetical), or "" when empty.
    std::string to_string() const;

    constexpr bool operator==(const LabelSet&) const = default;

private:
    static constexpr std::uint8_t bit(AskLabel l) { return static_cast<std::uint8_t>(1u << static_cast<unsigned>(l)); }
    std::uint8_t bits_ = 0;
};

enum class LexiconSource { Thesaurus, Lcs, LcsPlus };

std::string_view to_string(LexiconSource s);
/// "thesaurus", "lcs", "lcs+" (also "lcs_plus", "lcsplus").
std::optional<LexiconSource> parse_source(std::string_view s);

struct LcsClass {
    std::string id;
    std::string name;
    std::vector<std::string> members;
    std::optional<AskLabel> label;  // nullopt: unmapped, contributes nothing
};

class VerbLexicon {
public:
    LexiconSource source = LexiconSource::Thesaurus;
    std::map<std::string, LabelSet> entries;
    std::map<std::string, LcsClass> class_index;  // LCS sources only
    std::vector<std::string> warnings;            // e.g. unmapped classes

    LabelSet lookup(std::string_view lemma) const;
    std::set<std::string> members(AskLabel label) const;
    std::size_t count(AskLabel label) const;
    void add(const std::string& lemma, AskLabel label);
};

LabelSet lookup_labels(const VerbLexicon& lex, std::string_view lemma);

struct LexiconDelta {
    AskLabel label = AskLabel::Perform;
    std::set<std::string> removed;
    std::set<std::string> added;
};

/// key = value file carrying declared counts and SHA-256 checksums.
struct LexiconManifest {
    std::string provenance;  // "full" or "demo"
    std::map<std::string, std::size_t> counts;      // "thesaurus.PERFORM" -> 44
    std::map<std::string, std::string> checksums;   // "perform.txt" -> hex digest

    std::optional<std::size_t> declared(LexiconSource source, AskLabel label) const;
    static std::string count_key(LexiconSource source, AskLabel label);
};

std::optional<LexiconManifest> load_manifest(const std::filesystem::path& dir);

/// Verifies every declared checksum for files of this resource and the
/// declared label counts of `lex`. Throws ManifestMismatch.
void verify_manifest(const LexiconManifest& manifest, const std::filesystem::path& dir, const VerbLexicon& lex,
                     const std::vector<std::string>& files);

/// Lowercase SHA-256 hex digest of a file's bytes.
std::string sha256_file(const std::filesystem::path& file);

/// perform.txt, give.txt, lose.txt, gain.txt: one lemma per line, '#' comments.
VerbLexicon load_thesaurus(const std::filesystem::path& dir);

/// classes.tsv (id, name, members) + class_labels.tsv (id, LABEL|NONE).
VerbLexicon load_lcs(const std::filesystem::path& dir);

/// deltas.tsv: LABEL <tab> del|add <tab> lemma.
std::vector<LexiconDelta> load_deltas(const std::filesystem::path& dir);

/// LCS -> LCS+. Throws RemoveMissing when a removed lemma is not under the
/// delta's label and AddExisting when an added lemma already is.
VerbLexicon apply_deltas(const VerbLexicon& lex, const std::vector<LexiconDelta>& deltas);

/// Swaps removed and added; applying the inverse undoes apply_deltas.
std::vector<LexiconDelta> invert(const std::vector<LexiconDelta>& deltas);

/// LCS+ -> LCS by applying the inverse deltas.
VerbLexicon revert_deltas(const VerbLexicon& lex_plus, const std::vector<LexiconDelta>& deltas);

enum class PosClass { N, V, AJ, AV };

std::string_view to_string(PosClass p);
std::optional<PosClass> parse_pos_class(std::string_view s);
/// NN* -> N, VB* -> V, JJ* -> AJ, RB* -> AV.
std::optional<PosClass> pos_class_of(std::string_view penn_tag);

struct CatVarMember {
    std::string word;
    PosClass pos = PosClass::N;
};

class CatVarDatabase {
public:
    std::vector<std::vector<CatVarMember>> clusters;

    void add_cluster(std::vector<CatVarMember> members);
    /// Cluster containing (word, pos), or nullptr.
    const std::vector<CatVarMember>* lookup(std::string_view word, PosClass pos) const;

private:
    std::map<std::pair<std::string, PosClass>, std::size_t> index_;
};

/// One cluster per line: "develop#V developer#N development#N ...".
CatVarDatabase load_catvar(const std::filesystem::path& file);

/// Verb member of the word's cluster (first in file order), if any. Verb
/// tags return the word itself.
std::optional<std::string> catvar_verbalize(const CatVarDatabase& db, std::string_view word, std::string_view penn_tag);

/// Everything the detector and the evaluation ladder need.
struct ResourceSet {
    std::filesystem::path dir;
    std::optional<LexiconManifest> manifest;
    VerbLexicon thesaurus;
    VerbLexicon lcs;
    std::vector<LexiconDelta> deltas;
    VerbLexicon lcs_plus;
    CatVarDatabase catvar;

    const VerbLexicon& lexicon(LexiconSource s) const;
};

/// Loads the thesaurus lists, LCS tables, deltas, catvar.txt and manifest.toml
/// from `dir`.
ResourceSet load_resources(const std::filesystem::path& dir);

}  // namespace askdetect
