#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace askdetect {

struct MimePart {
    std::string mime_type;  // lowercase, e.g. "text/html"
    std::string charset;    // lowercase as declared; empty when undeclared
    std::string content;    // transfer-decoded and transcoded to UTF-8
};

struct Header {
    std::string name;
    std::string value;  // unfolded, RFC 2047 words decoded
};

struct EmailDocument {
    std::string message_id;
    std::vector<Header> headers;  // original order
    std::vector<MimePart> parts;  // leaves of the MIME tree, document order

    /// First header value with the given (case-insensitive) name, or empty.
    std::string header(std::string_view name) const;
};

/// Parses a complete RFC 5322 message. Multipart trees are flattened into
/// the leaf parts, each transfer-decoded and converted to UTF-8.
/// Throws MalformedMime when the header block cannot be parsed.
EmailDocument parse_mime(std::string_view raw);

/// text/html first, then text/plain, then whatever comes first.
/// Throws NoBody when the document has no parts.
const MimePart& select_body(const EmailDocument& doc);

namespace mime {

/// Lenient base64: whitespace and unknown characters are skipped.
std::string decode_base64(std::string_view in);
std::string decode_quoted_printable(std::string_view in);

/// Converts bytes in `charset` to UTF-8. Undecodable input is replaced
/// with U+FFFD; unknown charsets are treated as UTF-8.
std::string to_utf8(std::string_view bytes, std::string_view charset);

/// Decodes RFC 2047 encoded-words ("=?utf-8?B?...?=") inside a header value.
std::string decode_encoded_words(std::string_view value);

struct ContentType {
    std::string type = "text/plain";
    std::vector<std::pair<std::string, std::string>> params;

    std::string param(std::string_view name) const;
};

ContentType parse_content_type(std::string_view value);

}  // namespace mime

}  // namespace askdetect
