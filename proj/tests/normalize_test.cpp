#include <doctest.h>

#include "askdetect/normalize.hpp"
#include "support.hpp"

using namespace askdetect;

namespace {

NormalizedDocument html(const std::string& body) {
    PlaceholderCounter ids;
    return normalize_html(MimePart{"text/html", "utf-8", body}, ids);
}

NormalizedDocument plain(const std::string& body) {
    PlaceholderCounter ids;
    return normalize_html(MimePart{"text/plain", "utf-8", body}, ids);
}

}  // namespace

TEST_SUITE("normalize") {

TEST_CASE("placeholder tokens round-trip") {
    auto tok = placeholder_token("LNK_12");
    CHECK(parse_placeholder(tok) == "LNK_12");
    CHECK_FALSE(parse_placeholder("LNK_12"));
    CHECK_FALSE(parse_placeholder(placeholder_token("LNK_")));
    CHECK_FALSE(parse_placeholder(placeholder_token("LNK_x")));
}

TEST_CASE("block tags break lines and anchors become placeholders") {
    auto doc = html("<div>Hello <b>there</b></div><p>Please <a href=\"https://x.example/v?a=1&amp;b=2\">vote "
                    "here</a> today.</p>line<br>two");
    REQUIRE(doc.segments.size() == 4);
    CHECK(doc.segments[0] == "Hello there");
    CHECK(doc.segments[1] == "Please vote here " + placeholder_token("LNK_0") + " today.");
    CHECK(doc.segments[2] == "line");
    CHECK(doc.segments[3] == "two");
    REQUIRE(doc.links.entries.size() == 1);
    const auto& e = doc.links.entries[0];
    CHECK(e.target == "https://x.example/v?a=1&b=2");
    CHECK(e.anchor_text == "vote here");
    CHECK(e.segment_index == 1);
    CHECK(doc.links.find("LNK_0") == &e);
    CHECK(doc.links.find("LNK_9") == nullptr);
}

TEST_CASE("mailto targets drop the scheme") {
    auto doc = html("<p>Write to <a href=\"mailto:jw11@example.com\">me</a></p>");
    REQUIRE(doc.links.entries.size() == 1);
    CHECK(doc.links.entries[0].target == "jw11@example.com");
}

TEST_CASE("scripts, styles, quotes and images") {
    auto doc = html("<style>p{color:red}</style><script>var a='<p>x</p>';</script>"
                    "<p>Kept <img alt=\"logo\" src=\"a.png\"></p>"
                    "<blockquote><p>quoted</p></blockquote>"
                    "<div class=\"gmail_signature\"><p>sig</p></div>");
    REQUIRE(doc.segments.size() == 1);
    CHECK(doc.segments[0] == "Kept logo");
}

TEST_CASE("plain text links") {
    auto doc = plain("Visit https://a.example/x. or mail bob@example.org,\n\n  second line  \n");
    REQUIRE(doc.segments.size() == 2);
    REQUIRE(doc.links.entries.size() == 2);
    CHECK(doc.links.entries[0].target == "https://a.example/x");
    CHECK(doc.links.entries[1].target == "bob@example.org");
    CHECK(doc.segments[0] == "Visit https://a.example/x " + placeholder_token("LNK_0") + ". or mail bob@example.org " +
                                 placeholder_token("LNK_1") + ",");
    CHECK(doc.segments[1] == "second line");
}

TEST_CASE("quoted replies and signatures are stripped with their links") {
    NormalizedDocument doc;
    doc.segments = {"Please help us.", "Regards", "John https://sig.example " + placeholder_token("LNK_1"),
                    "On Mon, Bob wrote:", "> old text"};
    doc.links.entries = {{"LNK_1", "https://sig.example", "https://sig.example", 2}};
    auto out = strip_noise(doc);
    REQUIRE(out.segments.size() == 1);
    CHECK(out.segments[0] == "Please help us.");
    CHECK(out.links.entries.empty());
}

TEST_CASE("signature delimiter and forwarded blocks") {
    NormalizedDocument doc;
    doc.segments = {"a", "b " + placeholder_token("LNK_0"), "--", "c"};
    doc.links.entries = {{"LNK_0", "t", "t", 1}};
    auto out = strip_noise(doc);
    CHECK(out.segments == std::vector<std::string>{"a", "b " + placeholder_token("LNK_0")});
    CHECK(out.links.entries.size() == 1);

    doc.segments = {"x", "-----Original Message-----", "y", "z"};
    doc.links.entries.clear();
    CHECK(strip_noise(doc).segments == std::vector<std::string>{"x"});
}

TEST_CASE("a closing phrase far from the end is kept") {
    NormalizedDocument doc;
    doc.segments = {"Thanks", "1", "2", "3", "4", "5", "6"};
    CHECK(strip_noise(doc).segments.size() == 7);
}

TEST_CASE("surviving links are renumbered to their new segment") {
    NormalizedDocument doc;
    doc.segments = {"> quoted", "keep " + placeholder_token("LNK_0")};
    doc.links.entries = {{"LNK_0", "t", "a", 1}};
    auto out = strip_noise(doc);
    REQUIRE(out.links.entries.size() == 1);
    CHECK(out.links.entries[0].segment_index == 0);
}

TEST_CASE("json round trip") {
    auto doc = normalize_email(testing::slurp(testing::corpus() / "e04_finalists.eml"));
    CHECK_FALSE(doc.segments.empty());
    CHECK(doc.provenance.starts_with("text/"));
    auto back = normalized_from_json(nlohmann::json::parse(to_json(doc).dump()));
    CHECK(back == doc);
}

}
