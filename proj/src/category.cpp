#include "askdetect/category.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>

#include "askdetect/error.hpp"
#include "strings.hpp"

namespace askdetect {

CategoryRuleSet::CategoryRuleSet(std::vector<CategoryNode> nodes) : nodes_(std::move(nodes)) {
    std::set<std::string> ids;
    for (const auto& n : nodes_) {
        if (n.id.empty()) throw LexiconError("category with empty id");
        if (!ids.insert(n.id).second) throw LexiconError("duplicate category '" + n.id + "'");
    }
    for (const auto& n : nodes_) {
        if (!n.parent.empty() && !ids.contains(n.parent))
            throw LexiconError("category '" + n.id + "' has unknown parent '" + n.parent + "'");
    }
    if (nodes_.size() != kTaxonomySize)
        throw LexiconError("category taxonomy must have " + std::to_string(kTaxonomySize) + " nodes, found " +
                           std::to_string(nodes_.size()));
    for (const auto& n : nodes_) {
        std::vector<std::regex> rx;
        for (const auto& p : n.patterns) {
            try {
                rx.emplace_back(p, std::regex::ECMAScript | std::regex::icase);
            } catch (const std::regex_error& e) {
                throw LexiconError("category '" + n.id + "': bad pattern '" + p + "': " + e.what());
            }
        }
        compiled_.push_back(std::move(rx));
    }
}

CategoryRuleSet CategoryRuleSet::defaults() {
    std::vector<CategoryNode> nodes = {
        {"finance_money", "",
         {R"([$€£¥]\s?\d)", R"(\d[\d,.]*\s?(k|m|usd|dollars?|euros?|pounds|bucks)\b)",
          R"(\b(money|cash|funds?|payments?|wire|bank (transfer|details|account)|bitcoin|btc|cheque|invoice)\b)"}},
        {"scam_gift", "",
         {R"(\bgift\s?cards?\b)", R"(\b(itunes|google play|steam|amazon) cards?\b)", R"(\bvouchers?\b)"}},
        {"credentials", "",
         {R"(\blog-?\s?ins?\b)", R"(\b(password|passcode|passwords|username|user name|credentials?|pin)\b)",
          R"(\b(verification|security|access) codes?\b)"}},
        {"personal", "",
         {R"(\b(e-?mail|phone|address|birthday|date of birth|ssn|social security|identity|passport)\b)",
          R"(\bcontact (details|info(rmation)?)\b)"}},
    };
    for (int k = 5; k <= 13; ++k) {
        char id[16];
        std::snprintf(id, sizeof id, "category_%02d", k);
        nodes.push_back({id, "", {}});
    }
    return CategoryRuleSet(std::move(nodes));
}

CategoryRuleSet CategoryRuleSet::load(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw MissingFile("missing category file '" + file.string() + "'");
    std::vector<CategoryNode> nodes;
    std::string line;
    std::size_t no = 0;
    while (std::getline(in, line)) {
        ++no;
        std::string_view t = str::trim(line);
        if (t.empty() || t.front() == '#') continue;
        auto cols = str::split(std::string_view(line), '\t');
        if (cols.size() != 3)
            throw LexiconError(file.string() + ":" + std::to_string(no) + ": expected id <tab> parent <tab> pattern");
        std::string id(str::trim(cols[0]));
        std::string parent(str::trim(cols[1]));
        std::string pattern(str::trim(cols[2]));
        if (parent == "-") parent.clear();
        auto it = std::find_if(nodes.begin(), nodes.end(), [&](const CategoryNode& n) { return n.id == id; });
        if (it == nodes.end()) {
            nodes.push_back({id, parent, {}});
            it = std::prev(nodes.end());
        }
        if (!pattern.empty() && pattern != "-") it->patterns.push_back(pattern);
    }
    return CategoryRuleSet(std::move(nodes));
}

std::optional<CategoryId> CategoryRuleSet::match(std::string_view text) const {
    std::string s(text);
    for (std::size_t k = 0; k < nodes_.size(); ++k) {
        for (const auto& rx : compiled_[k]) {
            if (std::regex_search(s, rx)) return nodes_[k].id;
        }
    }
    return std::nullopt;
}

bool CategoryRuleSet::contains(std::string_view id) const {
    return std::any_of(nodes_.begin(), nodes_.end(), [&](const CategoryNode& n) { return n.id == id; });
}

std::vector<std::optional<CategoryId>> assign_category(const std::vector<Argument>& args, const CategoryRuleSet& rules) {
    std::vector<std::optional<CategoryId>> out;
    out.reserve(args.size());
    for (const auto& a : args) out.push_back(rules.match(a.text));
    return out;
}

}  // namespace askdetect
