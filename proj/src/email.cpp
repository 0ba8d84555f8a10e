#include "askdetect/email.hpp"

#include <iconv.h>

#include <cerrno>
#include <optional>
#include <regex>

#include "askdetect/error.hpp"
#include "strings.hpp"

namespace askdetect {

namespace {

constexpr std::string_view kReplacement = "\xEF\xBF\xBD";

struct Entity {
    std::vector<Header> headers;
    std::string_view body;
};

std::string unfold(const std::vector<std::string_view>& lines) {
    std::string out;
    for (auto l : lines) out += l;
    return out;
}

bool valid_header_name(std::string_view name) {
    if (name.empty()) return false;
    for (unsigned char c : name) {
        if (c <= 32 || c >= 127 || c == ':') return false;
    }
    return true;
}

// Splits `text` into a header block and a body. With `strict`, a first line
// that is not a header raises MalformedMime; otherwise the entity is treated
// as header-less.
Entity split_entity(std::string_view text, bool strict) {
    Entity e;
    std::size_t pos = 0;
    std::vector<std::string_view> current;
    std::string current_name;
    bool saw_header = false;

    auto flush = [&] {
        if (current_name.empty()) return;
        std::string raw = unfold(current);
        e.headers.push_back({current_name, std::string(str::trim(mime::decode_encoded_words(raw)))});
        current.clear();
        current_name.clear();
    };

    // mbox separator line
    if (text.substr(0, 5) == "From ") {
        std::size_t nl = text.find('\n');
        pos = nl == std::string_view::npos ? text.size() : nl + 1;
    }

    while (pos < text.size()) {
        std::size_t nl = text.find('\n', pos);
        std::size_t next = nl == std::string_view::npos ? text.size() : nl + 1;
        std::string_view line = text.substr(pos, next - pos);
        while (!line.empty() && (line.back() == '\n' || line.back() == '\r')) line.remove_suffix(1);

        if (line.empty()) {
            pos = next;
            break;
        }
        if ((line.front() == ' ' || line.front() == '\t') && !current_name.empty()) {
            current.push_back(line);
            pos = next;
            continue;
        }
        std::size_t colon = line.find(':');
        std::string_view name = colon == std::string_view::npos ? std::string_view{} : line.substr(0, colon);
        if (!valid_header_name(str::trim_right(name))) {
            if (!saw_header) {
                if (strict) throw MalformedMime("line 1 is not a header field: '" + std::string(line.substr(0, 60)) + "'");
                e.body = text;
                return e;
            }
            if (strict) throw MalformedMime("malformed header line: '" + std::string(line.substr(0, 60)) + "'");
            // body begins without the blank separator
            break;
        }
        flush();
        current_name = std::string(str::trim_right(name));
        current.push_back(line.substr(colon + 1));
        saw_header = true;
        pos = next;
    }
    flush();
    if (strict && !saw_header) throw MalformedMime("message has no header fields");
    e.body = pos < text.size() ? text.substr(pos) : std::string_view{};
    return e;
}

std::string header_value(const std::vector<Header>& headers, std::string_view name) {
    for (const auto& h : headers) {
        if (str::iequals(h.name, name)) return h.value;
    }
    return {};
}

MimePart make_leaf(const std::vector<Header>& headers, std::string_view body,
                   const mime::ContentType& ct) {
    std::string cte = str::lower(str::trim(header_value(headers, "Content-Transfer-Encoding")));
    std::string decoded;
    if (cte == "base64") {
        decoded = mime::decode_base64(body);
    } else if (cte == "quoted-printable") {
        decoded = mime::decode_quoted_printable(body);
    } else {
        decoded = std::string(body);
    }
    MimePart part;
    part.mime_type = ct.type;
    part.charset = str::lower(ct.param("charset"));
    if (part.mime_type.starts_with("text/")) {
        part.content = mime::to_utf8(decoded, part.charset);
    } else {
        part.content = std::move(decoded);
    }
    return part;
}

std::vector<std::string_view> split_multipart(std::string_view body, std::string_view boundary) {
    const std::string delim = "--" + std::string(boundary);
    std::vector<std::string_view> parts;
    std::optional<std::size_t> start;
    std::size_t pos = 0;
    while (pos < body.size()) {
        std::size_t nl = body.find('\n', pos);
        std::size_t next = nl == std::string_view::npos ? body.size() : nl + 1;
        std::string_view line = str::trim_right(body.substr(pos, next - pos));
        if (line.starts_with(delim)) {
            std::string_view rest = line.substr(delim.size());
            bool closing = rest.starts_with("--");
            if (rest.empty() || closing) {
                if (start) {
                    // the line break before the delimiter belongs to the delimiter
                    std::size_t end = pos;
                    if (end > *start && body[end - 1] == '\n') --end;
                    if (end > *start && body[end - 1] == '\r') --end;
                    parts.push_back(body.substr(*start, end - *start));
                }
                if (closing) return parts;
                start = next;
            }
        }
        pos = next;
    }
    // unterminated final part is kept
    if (start && *start < body.size()) parts.push_back(body.substr(*start));
    return parts;
}

void flatten(const std::vector<Header>& headers, std::string_view body, int depth,
             std::vector<MimePart>& out) {
    mime::ContentType ct = mime::parse_content_type(header_value(headers, "Content-Type"));
    if (depth < 16 && ct.type.starts_with("multipart/")) {
        std::string boundary = ct.param("boundary");
        std::vector<std::string_view> pieces;
        if (!boundary.empty()) pieces = split_multipart(body, boundary);
        if (pieces.empty()) {
            // degenerate multipart: keep the body as a single text part
            mime::ContentType plain;
            plain.params = {{"charset", ct.param("charset")}};
            out.push_back(make_leaf(headers, body, plain));
            return;
        }
        for (auto piece : pieces) {
            Entity child = split_entity(piece, false);
            flatten(child.headers, child.body, depth + 1, out);
        }
        return;
    }
    if (depth < 16 && ct.type == "message/rfc822") {
        Entity inner = split_entity(body, false);
        if (!inner.headers.empty()) {
            flatten(inner.headers, inner.body, depth + 1, out);
            return;
        }
    }
    out.push_back(make_leaf(headers, body, ct));
}

int hex_value(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
}

// Appends valid UTF-8 from `in`, substituting U+FFFD per invalid byte.
void append_valid_utf8(std::string_view in, std::string& out) {
    std::size_t i = 0;
    while (i < in.size()) {
        unsigned char c = static_cast<unsigned char>(in[i]);
        std::size_t len = 0;
        unsigned int cp = 0;
        if (c < 0x80) {
            out += static_cast<char>(c);
            ++i;
            continue;
        } else if ((c & 0xE0) == 0xC0) {
            len = 2;
            cp = c & 0x1F;
        } else if ((c & 0xF0) == 0xE0) {
            len = 3;
            cp = c & 0x0F;
        } else if ((c & 0xF8) == 0xF0) {
            len = 4;
            cp = c & 0x07;
        }
        bool ok = len != 0 && i + len <= in.size();
        for (std::size_t k = 1; ok && k < len; ++k) {
            unsigned char cc = static_cast<unsigned char>(in[i + k]);
            if ((cc & 0xC0) != 0x80) ok = false;
            cp = (cp << 6) | (cc & 0x3F);
        }
        if (ok) {
            // reject overlongs, surrogates and out-of-range code points
            if ((len == 2 && cp < 0x80) || (len == 3 && cp < 0x800) || (len == 4 && cp < 0x10000) ||
                (cp >= 0xD800 && cp <= 0xDFFF) || cp > 0x10FFFF)
                ok = false;
        }
        if (ok) {
            out.append(in.substr(i, len));
            i += len;
        } else {
            out += kReplacement;
            ++i;
        }
    }
}

}  // namespace

std::string EmailDocument::header(std::string_view name) const {
    return header_value(headers, name);
}

EmailDocument parse_mime(std::string_view raw) {
    Entity top = split_entity(raw, true);
    EmailDocument doc;
    doc.headers = top.headers;
    std::string mid(str::trim(header_value(top.headers, "Message-ID")));
    if (mid.size() >= 2 && mid.front() == '<' && mid.back() == '>') mid = mid.substr(1, mid.size() - 2);
    doc.message_id = mid;
    flatten(top.headers, top.body, 0, doc.parts);
    if (doc.parts.empty()) doc.parts.push_back({"text/plain", "", ""});
    return doc;
}

const MimePart& select_body(const EmailDocument& doc) {
    if (doc.parts.empty()) throw NoBody("email has no MIME parts");
    for (const auto& p : doc.parts) {
        if (p.mime_type == "text/html") return p;
    }
    for (const auto& p : doc.parts) {
        if (p.mime_type == "text/plain") return p;
    }
    return doc.parts.front();
}

namespace mime {

std::string ContentType::param(std::string_view name) const {
    for (const auto& [k, v] : params) {
        if (k == name) return v;
    }
    return {};
}

ContentType parse_content_type(std::string_view value) {
    ContentType ct;
    // split on ';' outside quotes
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (char c : value) {
        if (c == '"') quoted = !quoted;
        if (c == ';' && !quoted) {
            fields.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    fields.push_back(cur);

    std::string type = str::lower(str::trim(fields.front()));
    if (type.find('/') != std::string::npos) ct.type = type;
    for (std::size_t i = 1; i < fields.size(); ++i) {
        std::string_view f = str::trim(fields[i]);
        std::size_t eq = f.find('=');
        if (eq == std::string_view::npos) continue;
        std::string key = str::lower(str::trim(f.substr(0, eq)));
        std::string_view val = str::trim(f.substr(eq + 1));
        if (val.size() >= 2 && val.front() == '"' && val.back() == '"') val = val.substr(1, val.size() - 2);
        ct.params.emplace_back(key, std::string(val));
    }
    return ct;
}

std::string decode_base64(std::string_view in) {
    std::string out;
    out.reserve(in.size() * 3 / 4);
    unsigned int buf = 0;
    int bits = 0;
    for (char c : in) {
        int v;
        if (c >= 'A' && c <= 'Z') v = c - 'A';
        else if (c >= 'a' && c <= 'z') v = c - 'a' + 26;
        else if (c >= '0' && c <= '9') v = c - '0' + 52;
        else if (c == '+' || c == '-') v = 62;
        else if (c == '/' || c == '_') v = 63;
        else if (c == '=') break;
        else continue;
        buf = (buf << 6) | static_cast<unsigned int>(v);
        bits += 6;
        if (bits >= 8) {
            bits -= 8;
            out += static_cast<char>((buf >> bits) & 0xFF);
        }
    }
    return out;
}

std::string decode_quoted_printable(std::string_view in) {
    std::string out;
    out.reserve(in.size());
    for (std::size_t i = 0; i < in.size(); ++i) {
        char c = in[i];
        if (c != '=') {
            out += c;
            continue;
        }
        // soft line break
        std::size_t j = i + 1;
        while (j < in.size() && (in[j] == ' ' || in[j] == '\t')) ++j;
        if (j < in.size() && (in[j] == '\r' || in[j] == '\n')) {
            if (in[j] == '\r' && j + 1 < in.size() && in[j + 1] == '\n') ++j;
            i = j;
            continue;
        }
        if (j >= in.size()) {
            i = j;
            continue;
        }
        if (i + 2 < in.size() && hex_value(in[i + 1]) >= 0 && hex_value(in[i + 2]) >= 0) {
            out += static_cast<char>(hex_value(in[i + 1]) * 16 + hex_value(in[i + 2]));
            i += 2;
        } else {
            out += c;
        }
    }
    return out;
}

std::string to_utf8(std::string_view bytes, std::string_view charset) {
    std::string cs = str::lower(str::trim(charset));
    std::string out;
    if (cs.empty() || cs == "utf-8" || cs == "utf8" || cs == "us-ascii" || cs == "ascii") {
        append_valid_utf8(bytes, out);
        return out;
    }
    iconv_t cd = iconv_open("UTF-8", cs.c_str());
    if (cd == reinterpret_cast<iconv_t>(-1)) {
        append_valid_utf8(bytes, out);
        return out;
    }
    std::string input(bytes);
    char* inptr = input.data();
    std::size_t inleft = input.size();
    std::string chunk(4096, '\0');
    while (inleft > 0) {
        char* outptr = chunk.data();
        std::size_t outleft = chunk.size();
        std::size_t rc = iconv(cd, &inptr, &inleft, &outptr, &outleft);
        out.append(chunk.data(), chunk.size() - outleft);
        if (rc != static_cast<std::size_t>(-1)) break;
        if (errno == E2BIG) continue;
        // EILSEQ or EINVAL: substitute and skip one byte
        out += kReplacement;
        ++inptr;
        --inleft;
        iconv(cd, nullptr, nullptr, nullptr, nullptr);
    }
    iconv_close(cd);
    return out;
}

std::string decode_encoded_words(std::string_view value) {
    static const std::regex word(R"(=\?([^?\s]+)\?([BbQq])\?([^?\s]*)\?=)");
    std::string in(value);
    std::string out;
    auto begin = std::sregex_iterator(in.begin(), in.end(), word);
    std::size_t last = 0;
    bool prev_encoded = false;
    for (auto it = begin; it != std::sregex_iterator(); ++it) {
        const auto& m = *it;
        std::size_t at = static_cast<std::size_t>(m.position(0));
        std::string_view gap(in.data() + last, at - last);
        // whitespace between adjacent encoded words is not displayed
        if (!(prev_encoded && str::trim(gap).empty())) out += gap;
        std::string payload = m[3].str();
        std::string raw;
        if (m[2].str() == "B" || m[2].str() == "b") {
            raw = decode_base64(payload);
        } else {
            for (std::size_t i = 0; i < payload.size(); ++i) {
                if (payload[i] == '_') raw += ' ';
                else if (payload[i] == '=' && i + 2 < payload.size() && hex_value(payload[i + 1]) >= 0 &&
                         hex_value(payload[i + 2]) >= 0) {
                    raw += static_cast<char>(hex_value(payload[i + 1]) * 16 + hex_value(payload[i + 2]));
                    i += 2;
                } else raw += payload[i];
            }
        }
        std::string cs = m[1].str();
        if (auto star = cs.find('*'); star != std::string::npos) cs.resize(star);  // RFC 2231 language
        out += to_utf8(raw, cs);
        last = at + static_cast<std::size_t>(m.length(0));
        prev_encoded = true;
    }
    out += std::string_view(in).substr(last);
    return out;
}

}  // namespace mime

}  // namespace askdetect
