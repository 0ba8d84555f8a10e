#include "askdetect/normalize.hpp"

#include <array>
#include <map>
#include <regex>
#include <set>

#include "askdetect/error.hpp"
#include "strings.hpp"

namespace askdetect {

namespace {

constexpr std::string_view kOpen = "\xE2\x9F\xA6";   // U+27E6
constexpr std::string_view kClose = "\xE2\x9F\xA7";  // U+27E7

void append_codepoint(std::string& out, unsigned long cp) {
    if (cp == 0 || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) cp = 0xFFFD;
    if (cp < 0x80) {
        out += static_cast<char>(cp);
    } else if (cp < 0x800) {
        out += static_cast<char>(0xC0 | (cp >> 6));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    } else if (cp < 0x10000) {
        out += static_cast<char>(0xE0 | (cp >> 12));
        out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    } else {
        out += static_cast<char>(0xF0 | (cp >> 18));
        out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
        out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    }
}

const std::map<std::string, unsigned long, std::less<>>& named_entities() {
    static const std::map<std::string, unsigned long, std::less<>> table = {
        {"amp", '&'},     {"lt", '<'},       {"gt", '>'},       {"quot", '"'},
        {"apos", '\''},   {"nbsp", 0xA0},    {"copy", 0xA9},    {"reg", 0xAE},
        {"trade", 0x2122}, {"hellip", 0x2026}, {"mdash", 0x2014}, {"ndash", 0x2013},
        {"lsquo", 0x2018}, {"rsquo", 0x2019}, {"ldquo", 0x201C}, {"rdquo", 0x201D},
        {"euro", 0x20AC}, {"pound", 0xA3},   {"yen", 0xA5},     {"cent", 0xA2},
        {"bull", 0x2022}, {"middot", 0xB7},  {"laquo", 0xAB},   {"raquo", 0xBB},
        {"zwnj", 0x200C}, {"zwj", 0x200D},   {"shy", 0xAD},
    };
    return table;
}

// Decodes one entity starting at text[i] == '&'. Returns the number of bytes
// consumed, or 0 when this is not an entity.
std::size_t decode_entity(std::string_view text, std::size_t i, std::string& out) {
    std::size_t semi = text.find(';', i + 1);
    if (semi == std::string_view::npos || semi - i > 12) return 0;
    std::string_view name = text.substr(i + 1, semi - i - 1);
    if (name.empty()) return 0;
    unsigned long cp = 0;
    if (name[0] == '#') {
        try {
            if (name.size() > 1 && (name[1] == 'x' || name[1] == 'X'))
                cp = std::stoul(std::string(name.substr(2)), nullptr, 16);
            else
                cp = std::stoul(std::string(name.substr(1)), nullptr, 10);
        } catch (const std::exception&) {
            return 0;
        }
    } else {
        auto it = named_entities().find(name);
        if (it == named_entities().end()) return 0;
        cp = it->second;
    }
    append_codepoint(out, cp);
    return semi - i + 1;
}

std::string decode_entities(std::string_view text) {
    std::string out;
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (text[i] == '&') {
            if (std::size_t n = decode_entity(text, i, out)) {
                i += n - 1;
                continue;
            }
        }
        out += text[i];
    }
    return out;
}

bool is_nbsp_at(std::string_view s, std::size_t i) {
    return i + 1 < s.size() && static_cast<unsigned char>(s[i]) == 0xC2 &&
           static_cast<unsigned char>(s[i + 1]) == 0xA0;
}

// Accumulates text with HTML whitespace collapsing.
class TextBuffer {
public:
    void append(std::string_view s) {
        for (std::size_t i = 0; i < s.size(); ++i) {
            if (str::is_space(s[i])) {
                space_ = true;
                continue;
            }
            if (is_nbsp_at(s, i)) {
                space_ = true;
                ++i;
                continue;
            }
            if (space_ && !text_.empty()) text_ += ' ';
            space_ = false;
            text_ += s[i];
        }
    }
    void space() { space_ = true; }
    bool empty() const { return text_.empty(); }
    const std::string& str() const { return text_; }
    std::string take() {
        std::string out = std::move(text_);
        text_.clear();
        space_ = false;
        return out;
    }

private:
    std::string text_;
    bool space_ = false;
};

struct Tag {
    std::string name;  // lowercase
    bool closing = false;
    bool self_closing = false;
    std::vector<std::pair<std::string, std::string>> attrs;

    std::string attr(std::string_view key) const {
        for (const auto& [k, v] : attrs) {
            if (k == key) return v;
        }
        return {};
    }
    bool has_attr(std::string_view key) const {
        for (const auto& kv : attrs) {
            if (kv.first == key) return true;
        }
        return false;
    }
};

bool is_name_start(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'); }
bool is_name_char(char c) { return is_name_start(c) || (c >= '0' && c <= '9') || c == '-' || c == ':' || c == '_'; }

// Parses a tag at html[i] == '<'. Returns the position after '>' or npos when
// the '<' does not start a tag.
std::size_t parse_tag(std::string_view html, std::size_t i, Tag& tag) {
    std::size_t p = i + 1;
    tag = Tag{};
    if (p < html.size() && html[p] == '/') {
        tag.closing = true;
        ++p;
    }
    if (p >= html.size() || !is_name_start(html[p])) return std::string_view::npos;
    std::size_t start = p;
    while (p < html.size() && is_name_char(html[p])) ++p;
    tag.name = str::lower(html.substr(start, p - start));
    while (p < html.size()) {
        while (p < html.size() && str::is_space(html[p])) ++p;
        if (p >= html.size()) break;
        if (html[p] == '>') return p + 1;
        if (html[p] == '/') {
            tag.self_closing = true;
            ++p;
            continue;
        }
        std::size_t ks = p;
        while (p < html.size() && !str::is_space(html[p]) && html[p] != '=' && html[p] != '>' &&
               !(html[p] == '/' && p + 1 < html.size() && html[p + 1] == '>'))
            ++p;
        std::string key = str::lower(html.substr(ks, p - ks));
        if (p == ks) {
            ++p;  // stray character
            continue;
        }
        tag.self_closing = false;
        while (p < html.size() && str::is_space(html[p])) ++p;
        std::string value;
        if (p < html.size() && html[p] == '=') {
            ++p;
            while (p < html.size() && str::is_space(html[p])) ++p;
            if (p < html.size() && (html[p] == '"' || html[p] == '\'')) {
                char q = html[p++];
                std::size_t vs = p;
                while (p < html.size() && html[p] != q) ++p;
                value = decode_entities(html.substr(vs, p - vs));
                if (p < html.size()) ++p;
            } else {
                std::size_t vs = p;
                while (p < html.size() && !str::is_space(html[p]) && html[p] != '>') ++p;
                value = decode_entities(html.substr(vs, p - vs));
            }
        }
        tag.attrs.emplace_back(std::move(key), std::move(value));
    }
    return html.size();  // unterminated tag runs to the end
}

bool is_line_break_tag(std::string_view name) {
    return name == "div" || name == "p" || name == "br" || name == "ul";
}

bool is_inline_tag(std::string_view name) {
    static const std::set<std::string, std::less<>> inl = {
        "a",    "b",    "i",      "u",   "em",   "strong", "span", "font", "small", "big",
        "sub",  "sup",  "code",   "abbr", "mark", "s",     "strike", "tt",  "label", "q",
        "cite", "dfn",  "kbd",    "samp", "var",  "bdi",   "bdo",   "wbr", "ins",   "del",
        "o:p",
    };
    return inl.contains(name);
}

bool is_void_tag(std::string_view name) {
    static const std::set<std::string, std::less<>> v = {"area", "base", "br",   "col",   "embed",
                                                        "hr",   "img",  "input", "link", "meta",
                                                        "param", "source", "track", "wbr"};
    return v.contains(name);
}

bool is_raw_text_tag(std::string_view name) {
    return name == "style" || name == "script" || name == "title" || name == "textarea";
}

// Elements whose content never reaches the analysis text.
bool is_removed_element(const Tag& tag) {
    static const std::set<std::string, std::less<>> removed = {"style", "script", "head", "title",
                                                               "noscript", "blockquote", "template"};
    if (removed.contains(tag.name)) return true;
    static const std::set<std::string, std::less<>> markers = {
        "gmail_quote",   "gmail_signature", "moz-cite-prefix", "moz-signature",
        "yahoo_quoted",  "protonmail_quote", "protonmail_signature_block", "divrplyfwdmsg",
        "signature",     "email-signature",  "x_gmail_quote", "x_signature",
    };
    for (const auto& tok : str::split_ws(tag.attr("class"))) {
        if (markers.contains(str::lower(tok))) return true;
    }
    std::string id = str::lower(str::trim(tag.attr("id")));
    return !id.empty() && markers.contains(id);
}

std::string link_target(std::string_view href) {
    std::string target(str::trim(href));
    if (str::istarts_with(target, "mailto:")) {
        target = target.substr(7);
        if (auto q = target.find('?'); q != std::string::npos) target.resize(q);
    }
    return target;
}

// Decoded '<' must not be read back as markup downstream.
std::string defuse_angle_brackets(std::string s) {
    for (std::size_t i = 0; i + 1 < s.size(); ++i) {
        if (s[i] == '<' && (is_name_start(s[i + 1]) || s[i + 1] == '/' || s[i + 1] == '!')) {
            s.insert(i + 1, " ");
        }
    }
    return s;
}

class HtmlNormalizer {
public:
    explicit HtmlNormalizer(PlaceholderCounter& ids) : ids_(ids) {}

    NormalizedDocument run(std::string_view html) {
        std::size_t i = 0;
        while (i < html.size()) {
            char c = html[i];
            if (c == '<') {
                if (html.substr(i, 4) == "<!--") {
                    std::size_t end = html.find("-->", i + 4);
                    i = end == std::string_view::npos ? html.size() : end + 3;
                    continue;
                }
                if (i + 1 < html.size() && (html[i + 1] == '!' || html[i + 1] == '?')) {
                    std::size_t end = html.find('>', i);
                    i = end == std::string_view::npos ? html.size() : end + 1;
                    continue;
                }
                Tag tag;
                std::size_t next = parse_tag(html, i, tag);
                if (next != std::string_view::npos) {
                    i = next;
                    if (skip_depth_ > 0) {
                        track_skipped(tag);
                    } else if (!tag.closing && is_raw_text_tag(tag.name) && !tag.self_closing) {
                        // raw text: jump to the matching close tag
                        i = skip_raw_text(html, i, tag.name);
                        line_break();
                    } else {
                        handle(tag);
                    }
                    continue;
                }
            }
            std::size_t j = html.find('<', i + 1);
            if (j == std::string_view::npos) j = html.size();
            if (skip_depth_ == 0) text(decode_entities(html.substr(i, j - i)));
            i = j;
        }
        close_anchor();
        line_break();
        return std::move(doc_);
    }

private:
    static std::size_t skip_raw_text(std::string_view html, std::size_t from, const std::string& name) {
        std::string needle = "</" + name;
        std::string lowered = str::lower(html.substr(from));
        std::size_t at = lowered.find(needle);
        if (at == std::string::npos) return html.size();
        std::size_t end = html.find('>', from + at);
        return end == std::string_view::npos ? html.size() : end + 1;
    }

    void track_skipped(const Tag& tag) {
        if (tag.name != skip_name_ || is_void_tag(tag.name) || tag.self_closing) return;
        if (tag.closing) {
            if (--skip_depth_ == 0) line_break();
        } else {
            ++skip_depth_;
        }
    }

    void handle(const Tag& tag) {
        if (!tag.closing && is_removed_element(tag)) {
            line_break();
            if (!tag.self_closing && !is_void_tag(tag.name)) {
                skip_name_ = tag.name;
                skip_depth_ = 1;
            }
            return;
        }
        if (tag.name == "a") {
            if (tag.closing) {
                close_anchor();
            } else {
                close_anchor();
                std::string href = tag.attr("href");
                if (!str::trim(href).empty()) {
                    anchor_open_ = true;
                    anchor_href_ = href;
                    anchor_text_ = TextBuffer{};
                }
            }
            return;
        }
        if (tag.name == "img" && !tag.closing) {
            std::string alt = tag.attr("alt");
            if (!str::trim(alt).empty()) {
                line_.space();
                text(alt);
                line_.space();
                if (anchor_open_) anchor_text_.space();
            }
            return;
        }
        if (is_line_break_tag(tag.name)) {
            line_break();
            return;
        }
        if (!is_inline_tag(tag.name)) {
            line_.space();
            if (anchor_open_) anchor_text_.space();
        }
    }

    void text(std::string_view s) {
        line_.append(s);
        if (anchor_open_) anchor_text_.append(s);
    }

    void close_anchor() {
        if (!anchor_open_) return;
        anchor_open_ = false;
        std::string id = ids_.next();
        line_.space();
        line_.append(placeholder_token(id));
        pending_.push_back(LinkEntry{id, link_target(anchor_href_), anchor_text_.take(), 0});
    }

    void line_break() {
        if (line_.empty()) return;
        std::size_t index = doc_.segments.size();
        doc_.segments.push_back(defuse_angle_brackets(line_.take()));
        for (auto& e : pending_) {
            e.segment_index = index;
            doc_.links.entries.push_back(std::move(e));
        }
        pending_.clear();
    }

    PlaceholderCounter& ids_;
    NormalizedDocument doc_;
    TextBuffer line_;
    std::vector<LinkEntry> pending_;
    bool anchor_open_ = false;
    std::string anchor_href_;
    TextBuffer anchor_text_;
    std::string skip_name_;
    int skip_depth_ = 0;
};

std::string strip_trailing_punct(std::string s) {
    while (!s.empty() && std::string_view(".,;:!?)]}'\"").find(s.back()) != std::string_view::npos) s.pop_back();
    return s;
}

NormalizedDocument normalize_plain(std::string_view text, PlaceholderCounter& ids) {
    static const std::regex link_re(
        R"((https?://[^\s<>"']+|www\.[^\s<>"']+|[A-Za-z0-9._%+-]+@[A-Za-z0-9-]+(\.[A-Za-z0-9-]+)+))",
        std::regex::icase);
    NormalizedDocument doc;
    for (auto raw : str::lines(text)) {
        std::string line(str::trim(raw));
        if (line.empty()) continue;
        std::size_t index = doc.segments.size();
        std::string out;
        std::size_t last = 0;
        for (auto it = std::sregex_iterator(line.begin(), line.end(), link_re); it != std::sregex_iterator(); ++it) {
            std::string match = strip_trailing_punct((*it)[0].str());
            if (match.empty()) continue;
            std::size_t at = static_cast<std::size_t>(it->position(0));
            std::size_t end = at + match.size();
            out += line.substr(last, end - last);
            std::string id = ids.next();
            out += ' ';
            out += placeholder_token(id);
            doc.links.entries.push_back(LinkEntry{id, match, match, index});
            last = end;
        }
        out += line.substr(last);
        doc.segments.push_back(defuse_angle_brackets(std::move(out)));
    }
    return doc;
}

std::string fold_for_match(std::string_view line) {
    std::string s = str::lower(str::trim(line));
    while (!s.empty() && std::string_view(",.!:;-").find(s.back()) != std::string_view::npos) s.pop_back();
    return std::string(str::trim(s));
}

bool is_closing_phrase(std::string_view line) {
    static const std::set<std::string, std::less<>> exact = {
        "regards",        "best regards",  "kind regards",    "warm regards", "warmest regards",
        "many regards",   "best",          "best wishes",     "all the best", "sincerely",
        "yours sincerely", "yours truly",  "yours faithfully", "cheers",      "thanks",
        "thank you",      "many thanks",   "thanks again",    "respectfully", "cordially",
        "take care",      "with thanks",   "with regards",
    };
    std::string s = fold_for_match(line);
    if (exact.contains(s)) return true;
    return s.starts_with("sent from my ") || s.starts_with("get outlook for ") ||
           s.starts_with("sent from yahoo mail") || s.starts_with("sent from mail for ");
}

bool is_quote_header(std::string_view line) {
    static const std::regex on_wrote(R"(^\s*On\s.*\bwrote:\s*$)", std::regex::icase);
    static const std::regex original(R"(^\s*-{2,}\s*(Original Message|Forwarded message)\s*-{2,}\s*$)",
                                     std::regex::icase);
    std::string s(line);
    return std::regex_match(s, on_wrote) || std::regex_match(s, original);
}

// One removal pass; returns the indices to keep.
std::vector<bool> noise_mask(const std::vector<std::string>& segments) {
    const std::size_t n = segments.size();
    std::vector<bool> keep(n, true);
    for (std::size_t i = 0; i < n; ++i) {
        std::string_view s = str::trim(segments[i]);
        if (s.starts_with(">")) keep[i] = false;
        if (is_quote_header(segments[i])) {
            // "-----Original Message-----" opens the quoted remainder
            if (str::lower(s).find("original message") != std::string::npos ||
                str::lower(s).find("forwarded message") != std::string::npos) {
                for (std::size_t k = i; k < n; ++k) keep[k] = false;
                break;
            }
            keep[i] = false;
        }
    }
    // the last signature delimiter cuts everything after it
    for (std::size_t i = n; i-- > 0;) {
        if (str::trim_right(segments[i]) == "--") {
            for (std::size_t k = i; k < n; ++k) keep[k] = false;
            break;
        }
    }
    // closing phrase inside the final six lines, followed by at most four lines
    std::vector<std::size_t> live;
    for (std::size_t i = 0; i < n; ++i) {
        if (keep[i]) live.push_back(i);
    }
    const std::size_t m = live.size();
    const std::size_t window = std::min<std::size_t>(m, 6);
    for (std::size_t k = m - window; k < m; ++k) {
        if (m - k <= 5 && is_closing_phrase(segments[live[k]])) {
            for (std::size_t r = k; r < m; ++r) keep[live[r]] = false;
            break;
        }
    }
    return keep;
}

}  // namespace

const LinkEntry* LinkTable::find(std::string_view placeholder_id) const {
    for (const auto& e : entries) {
        if (e.placeholder_id == placeholder_id) return &e;
    }
    return nullptr;
}

std::string placeholder_token(std::string_view placeholder_id) {
    std::string out(kOpen);
    out += placeholder_id;
    out += kClose;
    return out;
}

std::optional<std::string> parse_placeholder(std::string_view token) {
    if (token.size() <= kOpen.size() + kClose.size() || !token.starts_with(kOpen) || !token.ends_with(kClose))
        return std::nullopt;
    std::string_view id = token.substr(kOpen.size(), token.size() - kOpen.size() - kClose.size());
    if (!id.starts_with("LNK_") || id.size() == 4) return std::nullopt;
    for (char c : id.substr(4)) {
        if (c < '0' || c > '9') return std::nullopt;
    }
    return std::string(id);
}

NormalizedDocument normalize_html(const MimePart& part, PlaceholderCounter& next_id) {
    NormalizedDocument doc;
    if (part.mime_type == "text/html") {
        doc = HtmlNormalizer(next_id).run(part.content);
    } else {
        doc = normalize_plain(part.content, next_id);
    }
    doc.provenance = part.mime_type;
    return doc;
}

NormalizedDocument strip_noise(const NormalizedDocument& input) {
    NormalizedDocument doc = input;
    while (true) {
        std::vector<bool> keep = noise_mask(doc.segments);
        std::vector<std::size_t> remap(doc.segments.size(), 0);
        NormalizedDocument next;
        next.provenance = doc.provenance;
        for (std::size_t i = 0; i < doc.segments.size(); ++i) {
            if (!keep[i]) continue;
            remap[i] = next.segments.size();
            next.segments.push_back(doc.segments[i]);
        }
        if (next.segments.size() == doc.segments.size()) return doc;
        for (const auto& e : doc.links.entries) {
            if (e.segment_index < keep.size() && keep[e.segment_index]) {
                LinkEntry moved = e;
                moved.segment_index = remap[e.segment_index];
                next.links.entries.push_back(std::move(moved));
            }
        }
        doc = std::move(next);
    }
}

NormalizedDocument normalize_email(std::string_view raw) {
    EmailDocument email = parse_mime(raw);
    const MimePart& body = select_body(email);
    PlaceholderCounter ids;
    NormalizedDocument doc = strip_noise(normalize_html(body, ids));
    std::size_t index = static_cast<std::size_t>(&body - email.parts.data());
    doc.provenance = body.mime_type + "#" + std::to_string(index);
    return doc;
}

nlohmann::json to_json(const NormalizedDocument& doc) {
    nlohmann::json links = nlohmann::json::array();
    for (const auto& e : doc.links.entries) {
        links.push_back({{"id", e.placeholder_id},
                         {"target", e.target},
                         {"anchor", e.anchor_text},
                         {"segment", e.segment_index}});
    }
    return {{"segments", doc.segments}, {"links", links}, {"provenance", doc.provenance}};
}

NormalizedDocument normalized_from_json(const nlohmann::json& j) {
    try {
        NormalizedDocument doc;
        doc.segments = j.at("segments").get<std::vector<std::string>>();
        for (const auto& l : j.at("links")) {
            doc.links.entries.push_back(LinkEntry{l.at("id").get<std::string>(), l.at("target").get<std::string>(),
                                                  l.at("anchor").get<std::string>(),
                                                  l.at("segment").get<std::size_t>()});
        }
        doc.provenance = j.value("provenance", std::string{});
        return doc;
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("normalized document: ") + e.what());
    }
}

}  // namespace askdetect
