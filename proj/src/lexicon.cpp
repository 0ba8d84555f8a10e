#include "askdetect/lexicon.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <memory>
#include <sstream>

#include "askdetect/error.hpp"
#include "strings.hpp"

namespace askdetect {

namespace fs = std::filesystem;

namespace {

constexpr std::array<std::string_view, 4> kThesaurusFiles = {"perform.txt", "give.txt", "lose.txt", "gain.txt"};

std::string read_file(const fs::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw MissingFile("missing resource file '" + file.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Data lines of a resource file: comments stripped, blank lines dropped,
// paired with their 1-based line numbers.
std::vector<std::pair<std::size_t, std::string>> data_lines(const std::string& text) {
    std::vector<std::pair<std::size_t, std::string>> out;
    std::size_t no = 0;
    for (auto line : str::lines(text)) {
        ++no;
        std::string_view t = str::trim(line);
        if (t.empty() || t.front() == '#') continue;
        out.emplace_back(no, std::string(t));
    }
    return out;
}

std::string normalize_lemma(std::string_view raw, const std::string& where) {
    std::string lemma = str::lower(str::trim(raw));
    for (char c : lemma) {
        if (str::is_space(c)) throw LexiconError(where + ": multi-word entry '" + lemma + "' is not supported");
    }
    return lemma;
}

}  // namespace

std::string_view to_string(AskLabel l) {
    switch (l) {
        case AskLabel::Perform: return "PERFORM";
        case AskLabel::Give: return "GIVE";
        case AskLabel::Lose: return "LOSE";
        case AskLabel::Gain: return "GAIN";
    }
    return "?";
}

std::optional<AskLabel> parse_label(std::string_view s) {
    std::string u = str::lower(str::trim(s));
    if (u == "perform") return AskLabel::Perform;
    if (u == "give") return AskLabel::Give;
    if (u == "lose") return AskLabel::Lose;
    if (u == "gain") return AskLabel::Gain;
    return std::nullopt;
}

std::vector<AskLabel> LabelSet::labels() const {
    std::vector<AskLabel> out;
    for (auto l : kAllLabels) {
        if (contains(l)) out.push_back(l);
    }
    return out;
}

std::string LabelSet::to_string() const {
    std::vector<std::string> names;
    for (auto l : labels()) names.emplace_back(askdetect::to_string(l));
    std::sort(names.begin(), names.end());
    return str::join(names, ", ");
}

std::string_view to_string(LexiconSource s) {
    switch (s) {
        case LexiconSource::Thesaurus: return "thesaurus";
        case LexiconSource::Lcs: return "lcs";
        case LexiconSource::LcsPlus: return "lcs+";
    }
    return "?";
}

std::optional<LexiconSource> parse_source(std::string_view s) {
    std::string u = str::lower(str::trim(s));
    if (u == "thesaurus") return LexiconSource::Thesaurus;
    if (u == "lcs") return LexiconSource::Lcs;
    if (u == "lcs+" || u == "lcs_plus" || u == "lcsplus" || u == "lcs-plus") return LexiconSource::LcsPlus;
    return std::nullopt;
}

LabelSet VerbLexicon::lookup(std::string_view lemma) const {
    auto it = entries.find(std::string(lemma));
    return it == entries.end() ? LabelSet{} : it->second;
}

std::set<std::string> VerbLexicon::members(AskLabel label) const {
    std::set<std::string> out;
    for (const auto& [lemma, labels] : entries) {
        if (labels.contains(label)) out.insert(lemma);
    }
    return out;
}

std::size_t VerbLexicon::count(AskLabel label) const {
    std::size_t n = 0;
    for (const auto& kv : entries) n += kv.second.contains(label) ? 1 : 0;
    return n;
}

void VerbLexicon::add(const std::string& lemma, AskLabel label) { entries[lemma].insert(label); }

LabelSet lookup_labels(const VerbLexicon& lex, std::string_view lemma) { return lex.lookup(lemma); }

std::string LexiconManifest::count_key(LexiconSource source, AskLabel label) {
    std::string src(to_string(source));
    if (source == LexiconSource::LcsPlus) src = "lcs_plus";
    return src + "." + std::string(to_string(label));
}

std::optional<std::size_t> LexiconManifest::declared(LexiconSource source, AskLabel label) const {
    auto it = counts.find(count_key(source, label));
    if (it == counts.end()) return std::nullopt;
    return it->second;
}

std::optional<LexiconManifest> load_manifest(const fs::path& dir) {
    fs::path file = dir / "manifest.toml";
    if (!fs::exists(file)) return std::nullopt;
    LexiconManifest m;
    std::string section;
    for (const auto& [no, line] : data_lines(read_file(file))) {
        std::string where = file.string() + ":" + std::to_string(no);
        if (line.front() == '[') {
            if (line.back() != ']') throw ManifestMismatch(where + ": bad section header");
            section = std::string(str::trim(std::string_view(line).substr(1, line.size() - 2)));
            continue;
        }
        std::size_t eq = line.find('=');
        if (eq == std::string::npos) throw ManifestMismatch(where + ": expected key = value");
        auto unquote = [](std::string_view v) {
            v = str::trim(v);
            if (v.size() >= 2 && v.front() == '"' && v.back() == '"') v = v.substr(1, v.size() - 2);
            return std::string(v);
        };
        std::string key = unquote(std::string_view(line).substr(0, eq));
        std::string value = unquote(std::string_view(line).substr(eq + 1));
        if (!section.empty()) key = section + "." + key;
        if (key == "provenance") {
            m.provenance = value;
        } else if (key.starts_with("counts.")) {
            try {
                m.counts[key.substr(7)] = static_cast<std::size_t>(std::stoul(value));
            } catch (const std::exception&) {
                throw ManifestMismatch(where + ": count '" + value + "' is not a number");
            }
        } else if (key.starts_with("sha256.")) {
            m.checksums[key.substr(7)] = str::lower(value);
        }
    }
    return m;
}

std::string sha256_file(const fs::path& file) {
    std::string data = read_file(file);
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
        EVP_DigestUpdate(ctx.get(), data.data(), data.size()) != 1 ||
        EVP_DigestFinal_ex(ctx.get(), digest, &len) != 1)
        throw LexiconError("sha256 failed for '" + file.string() + "'");
    std::ostringstream hex;
    for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
    return hex.str();
}

void verify_manifest(const LexiconManifest& manifest, const fs::path& dir, const VerbLexicon& lex,
                     const std::vector<std::string>& files) {
    for (const auto& f : files) {
        auto it = manifest.checksums.find(f);
        if (it == manifest.checksums.end()) continue;
        std::string actual = sha256_file(dir / f);
        if (actual != it->second)
            throw ManifestMismatch("checksum mismatch for '" + f + "': manifest " + it->second + ", file " + actual);
    }
    for (auto label : kAllLabels) {
        auto declared = manifest.declared(lex.source, label);
        if (!declared) continue;
        std::size_t loaded = lex.count(label);
        if (loaded != *declared)
            throw ManifestMismatch(std::string(to_string(lex.source)) + " " + std::string(to_string(label)) + ": manifest declares " +
                                   std::to_string(*declared) + " lemmas, loaded " + std::to_string(loaded));
    }
}

VerbLexicon load_thesaurus(const fs::path& dir) {
    VerbLexicon lex;
    lex.source = LexiconSource::Thesaurus;
    for (std::size_t k = 0; k < kThesaurusFiles.size(); ++k) {
        fs::path file = dir / kThesaurusFiles[k];
        for (const auto& [no, line] : data_lines(read_file(file))) {
            std::string lemma = normalize_lemma(line, file.string() + ":" + std::to_string(no));
            lex.add(lemma, kAllLabels[k]);
        }
    }
    if (auto m = load_manifest(dir)) {
        verify_manifest(*m, dir, lex, {kThesaurusFiles.begin(), kThesaurusFiles.end()});
    }
    return lex;
}

VerbLexicon load_lcs(const fs::path& dir) {
    VerbLexicon lex;
    lex.source = LexiconSource::Lcs;
    fs::path classes = dir / "classes.tsv";
    fs::path labels = dir / "class_labels.tsv";
    std::vector<std::string> order;
    for (const auto& [no, line] : data_lines(read_file(classes))) {
        std::string where = classes.string() + ":" + std::to_string(no);
        auto cols = str::split(line, '\t');
        if (cols.size() != 3) throw LexiconError(where + ": expected 3 tab-separated columns (id, name, members)");
        LcsClass cls;
        cls.id = std::string(str::trim(cols[0]));
        cls.name = std::string(str::trim(cols[1]));
        std::string members(cols[2]);
        std::replace(members.begin(), members.end(), ',', ' ');
        for (const auto& m : str::split_ws(members)) cls.members.push_back(normalize_lemma(m, where));
        if (cls.id.empty()) throw LexiconError(where + ": empty class id");
        if (lex.class_index.contains(cls.id)) throw LexiconError(where + ": duplicate class id '" + cls.id + "'");
        order.push_back(cls.id);
        lex.class_index.emplace(cls.id, std::move(cls));
    }
    for (const auto& [no, line] : data_lines(read_file(labels))) {
        std::string where = labels.string() + ":" + std::to_string(no);
        auto cols = str::split(line, '\t');
        if (cols.size() != 2) throw LexiconError(where + ": expected 2 tab-separated columns (id, label)");
        std::string id(str::trim(cols[0]));
        std::string_view label = str::trim(cols[1]);
        auto it = lex.class_index.find(id);
        if (it == lex.class_index.end()) {
            lex.warnings.push_back(where + ": label for unknown class '" + id + "' ignored");
            continue;
        }
        if (str::iequals(label, "NONE")) continue;
        auto parsed = parse_label(label);
        if (!parsed) throw LexiconError(where + ": unknown label '" + std::string(label) + "'");
        it->second.label = *parsed;
    }
    for (const auto& id : order) {
        const auto& cls = lex.class_index.at(id);
        if (!cls.label) {
            lex.warnings.push_back("unmapped class " + cls.id + " (" + cls.name + ") skipped");
            continue;
        }
        for (const auto& m : cls.members) lex.add(m, *cls.label);
    }
    if (auto m = load_manifest(dir)) verify_manifest(*m, dir, lex, {"classes.tsv", "class_labels.tsv"});
    return lex;
}

std::vector<LexiconDelta> load_deltas(const fs::path& dir) {
    fs::path file = dir / "deltas.tsv";
    std::map<AskLabel, LexiconDelta> by_label;
    for (const auto& [no, line] : data_lines(read_file(file))) {
        std::string where = file.string() + ":" + std::to_string(no);
        auto cols = str::split(line, '\t');
        if (cols.size() != 3) throw LexiconError(where + ": expected LABEL <tab> del|add <tab> lemma");
        auto label = parse_label(cols[0]);
        if (!label) throw LexiconError(where + ": unknown label '" + std::string(cols[0]) + "'");
        std::string op = str::lower(str::trim(cols[1]));
        std::string lemma = normalize_lemma(cols[2], where);
        LexiconDelta& d = by_label[*label];
        d.label = *label;
        if (op == "del") d.removed.insert(lemma);
        else if (op == "add") d.added.insert(lemma);
        else throw LexiconError(where + ": operation must be 'del' or 'add'");
    }
    std::vector<LexiconDelta> out;
    for (auto& kv : by_label) out.push_back(std::move(kv.second));
    return out;
}

namespace {

void apply_entries(VerbLexicon& lex, const std::vector<LexiconDelta>& deltas) {
    for (const auto& d : deltas) {
        for (const auto& lemma : d.removed) {
            if (d.added.contains(lemma))
                throw DeltaError(std::string(to_string(d.label)) + " delta both removes and adds '" + lemma + "'");
        }
    }
    for (const auto& d : deltas) {
        for (const auto& lemma : d.removed) {
            auto it = lex.entries.find(lemma);
            if (it == lex.entries.end() || !it->second.contains(d.label))
                throw RemoveMissing(std::string(to_string(d.label)) + " delta removes '" + lemma + "', which is not present");
            it->second.erase(d.label);
            if (it->second.empty()) lex.entries.erase(it);
        }
        for (const auto& lemma : d.added) {
            if (lex.lookup(lemma).contains(d.label))
                throw AddExisting(std::string(to_string(d.label)) + " delta adds '" + lemma + "', which is already present");
            lex.add(lemma, d.label);
        }
    }
}

}  // namespace

VerbLexicon apply_deltas(const VerbLexicon& lex, const std::vector<LexiconDelta>& deltas) {
    if (lex.source != LexiconSource::Lcs) throw DeltaError("deltas apply to the original LCS lexicon only");
    VerbLexicon out = lex;
    out.source = LexiconSource::LcsPlus;
    out.warnings.clear();
    apply_entries(out, deltas);
    return out;
}

std::vector<LexiconDelta> invert(const std::vector<LexiconDelta>& deltas) {
    std::vector<LexiconDelta> out;
    for (const auto& d : deltas) out.push_back(LexiconDelta{d.label, d.added, d.removed});
    return out;
}

VerbLexicon revert_deltas(const VerbLexicon& lex_plus, const std::vector<LexiconDelta>& deltas) {
    if (lex_plus.source != LexiconSource::LcsPlus) throw DeltaError("revert_deltas expects an LCS+ lexicon");
    VerbLexicon out = lex_plus;
    out.source = LexiconSource::Lcs;
    apply_entries(out, invert(deltas));
    return out;
}

std::string_view to_string(PosClass p) {
    switch (p) {
        case PosClass::N: return "N";
        case PosClass::V: return "V";
        case PosClass::AJ: return "AJ";
        case PosClass::AV: return "AV";
    }
    return "?";
}

std::optional<PosClass> parse_pos_class(std::string_view s) {
    if (s == "N") return PosClass::N;
    if (s == "V") return PosClass::V;
    if (s == "AJ") return PosClass::AJ;
    if (s == "AV") return PosClass::AV;
    return std::nullopt;
}

std::optional<PosClass> pos_class_of(std::string_view tag) {
    if (tag.starts_with("NN")) return PosClass::N;
    if (tag.starts_with("VB")) return PosClass::V;
    if (tag.starts_with("JJ")) return PosClass::AJ;
    if (tag.starts_with("RB")) return PosClass::AV;
    return std::nullopt;
}

void CatVarDatabase::add_cluster(std::vector<CatVarMember> members) {
    if (members.size() < 2) throw MalformedCluster("CATVAR cluster needs at least two members");
    std::size_t id = clusters.size();
    for (const auto& m : members) index_.try_emplace({m.word, m.pos}, id);
    clusters.push_back(std::move(members));
}

const std::vector<CatVarMember>* CatVarDatabase::lookup(std::string_view word, PosClass pos) const {
    auto it = index_.find({str::lower(word), pos});
    return it == index_.end() ? nullptr : &clusters[it->second];
}

CatVarDatabase load_catvar(const fs::path& file) {
    CatVarDatabase db;
    for (const auto& [no, line] : data_lines(read_file(file))) {
        std::string where = file.string() + ":" + std::to_string(no);
        std::vector<CatVarMember> members;
        for (const auto& item : str::split_ws(line)) {
            std::size_t hash = item.rfind('#');
            if (hash == std::string::npos || hash == 0)
                throw MalformedCluster(where + ": member '" + item + "' is not word#POS");
            auto pos = parse_pos_class(std::string_view(item).substr(hash + 1));
            if (!pos) throw MalformedCluster(where + ": unknown POS class in '" + item + "' (expected N, V, AJ, AV)");
            members.push_back(CatVarMember{str::lower(item.substr(0, hash)), *pos});
        }
        if (members.size() < 2) throw MalformedCluster(where + ": cluster needs at least two members");
        db.add_cluster(std::move(members));
    }
    return db;
}

std::optional<std::string> catvar_verbalize(const CatVarDatabase& db, std::string_view word, std::string_view penn_tag) {
    auto pos = pos_class_of(penn_tag);
    if (!pos) return std::nullopt;
    if (*pos == PosClass::V) return str::lower(word);
    const auto* cluster = db.lookup(word, *pos);
    if (!cluster) return std::nullopt;
    for (const auto& m : *cluster) {
        if (m.pos == PosClass::V) return m.word;
    }
    return std::nullopt;
}

const VerbLexicon& ResourceSet::lexicon(LexiconSource s) const {
    switch (s) {
        case LexiconSource::Thesaurus: return thesaurus;
        case LexiconSource::Lcs: return lcs;
        case LexiconSource::LcsPlus: return lcs_plus;
    }
    return lcs_plus;
}

ResourceSet load_resources(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw MissingFile("resource directory '" + dir.string() + "' does not exist");
    ResourceSet r;
    r.dir = dir;
    r.manifest = load_manifest(dir);
    r.thesaurus = load_thesaurus(dir);
    r.lcs = load_lcs(dir);
    r.deltas = load_deltas(dir);
    r.lcs_plus = apply_deltas(r.lcs, r.deltas);
    r.catvar = load_catvar(dir / "catvar.txt");
    if (r.manifest) {
        verify_manifest(*r.manifest, dir, r.lcs_plus, {"deltas.tsv", "catvar.txt"});
    }
    return r;
}

}  // namespace askdetect
