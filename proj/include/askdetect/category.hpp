#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <regex>
#include <string>
#include <string_view>
#include <vector>

#include "askdetect/annotation.hpp"

namespace askdetect {

using CategoryId = std::string;

struct CategoryNode {
    CategoryId id;
    CategoryId parent;  // empty for top-level nodes
    std::vector<std::string> patterns;  // ECMAScript, matched case-insensitively
};

/// Ordered keyword rules over argument text. The first node with a matching
/// pattern wins; nodes without patterns never match.
class CategoryRuleSet {
public:
    static constexpr std::size_t kTaxonomySize = 13;

    CategoryRuleSet() = default;
    explicit CategoryRuleSet(std::vector<CategoryNode> nodes);

    /// finance_money, scam_gift, credentials and personal with their rules,
    /// plus nine placeholder nodes (category_05 .. category_13) without rules.
    static CategoryRuleSet defaults();

    /// categories.tsv: id <tab> parent <tab> pattern; one pattern per line,
    /// repeated ids append patterns, "-" means no parent / no pattern.
    static CategoryRuleSet load(const std::filesystem::path& file);

    std::optional<CategoryId> match(std::string_view text) const;
    bool contains(std::string_view id) const;
    const std::vector<CategoryNode>& nodes() const { return nodes_; }

private:
    std::vector<CategoryNode> nodes_;
    std::vector<std::vector<std::regex>> compiled_;
};

std::vector<std::optional<CategoryId>> assign_category(const std::vector<Argument>& args, const CategoryRuleSet& rules);

}  // namespace askdetect
