#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "askdetect/email.hpp"

namespace askdetect {

struct LinkEntry {
    std::string placeholder_id;  // "LNK_3"
    std::string target;          // URI, or a bare address for mailto: links
    std::string anchor_text;
    std::size_t segment_index = 0;

    bool operator==(const LinkEntry&) const = default;
};

struct LinkTable {
    std::vector<LinkEntry> entries;

    const LinkEntry* find(std::string_view placeholder_id) const;
    bool operator==(const LinkTable&) const = default;
};

struct NormalizedDocument {
    std::vector<std::string> segments;
    LinkTable links;
    std::string provenance;  // e.g. "text/html#1"

    bool operator==(const NormalizedDocument&) const = default;
};

/// Monotonic source of placeholder ids, shared across the parts of one email.
class PlaceholderCounter {
public:
    std::string next() { return "LNK_" + std::to_string(value_++); }
    std::size_t peek() const { return value_; }

private:
    std::size_t value_ = 0;
};

/// The token that stands for a link inside segment text: "⟦LNK_0⟧".
std::string placeholder_token(std::string_view placeholder_id);

/// Returns the id ("LNK_0") when `token` is exactly a placeholder token.
std::optional<std::string> parse_placeholder(std::string_view token);

/// Converts an HTML body into line segments. Lines break at div, p, br and
/// ul; anchors become "anchor ⟦LNK_k⟧" with a LinkTable entry; images become
/// their alt text; style, script, blockquote and quoted-reply or signature
/// containers are dropped. text/plain parts are split into lines and bare
/// URLs and email addresses are registered as links.
NormalizedDocument normalize_html(const MimePart& part, PlaceholderCounter& next_id);

/// Removes trailing signatures and quoted replies, and the links inside them.
NormalizedDocument strip_noise(const NormalizedDocument& doc);

/// parse_mime + select_body + normalize_html + strip_noise.
NormalizedDocument normalize_email(std::string_view raw);

nlohmann::json to_json(const NormalizedDocument& doc);
NormalizedDocument normalized_from_json(const nlohmann::json& j);

}  // namespace askdetect
