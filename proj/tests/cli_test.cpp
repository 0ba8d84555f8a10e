#include <doctest.h>

#include "askdetect/error.hpp"
#include "support.hpp"

using askdetect::cli::kExitAlignment;
using askdetect::cli::kExitInput;
using askdetect::cli::kExitOk;
using testing::cli;

namespace {

std::string fixture(const std::string& name) { return (testing::corpus() / name).string(); }

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("usage errors") {
    CHECK(cli({}).code == kExitInput);
    CHECK(cli({"frobnicate"}).code == kExitInput);
    CHECK(cli({"analyze", "--case", "9", fixture("e01_airport.eml")}).code == kExitInput);
    CHECK(cli({"analyze", "--case", "all", fixture("e01_airport.eml")}).code == kExitInput);
    CHECK(cli({"evaluate", testing::corpus().string(), "--case", "all", "--verbal", "off"}).code == kExitInput);
    CHECK(cli({"lexicon", "counts", "--source", "wordnet"}).code == kExitInput);
}

TEST_CASE("lexicon lookup, counts and diff") {
    auto r = cli({"lexicon", "lookup", "send"});
    CHECK(r.code == kExitOk);
    CHECK(r.out == "GIVE, PERFORM\n");
    CHECK(cli({"lexicon", "lookup", "contact", "--source", "lcs"}).out == "\n");

    r = cli({"lexicon", "counts"});
    CHECK(r.code == kExitOk);
    CHECK(r.out.find("lcs+: PERFORM 252 GIVE 81 LOSE 452 GAIN 49") != std::string::npos);

    r = cli({"lexicon", "diff", "lcs", "lcs+", "--label", "PERFORM"});
    CHECK(r.code == kExitOk);
    CHECK(r.out.starts_with("PERFORM: 6 removed, 44 added\n"));
    CHECK(r.out.find("- admire\n") != std::string::npos);
    CHECK(r.out.find("+ contact\n") != std::string::npos);

    r = cli({"lexicon", "diff", "lcs", "lcs+", "--format", "json"});
    auto j = nlohmann::json::parse(r.out);
    CHECK(j["LOSE"]["removed"].size() == 174);
    CHECK(j["LOSE"]["added"].size() == 11);
}

TEST_CASE("analyze writes one json line per email in input order") {
    auto r = cli({"analyze", fixture("e04_finalists.eml"), fixture("e01_airport.eml"), "--format", "json", "-j", "4"});
    REQUIRE(r.code == kExitOk);
    std::istringstream lines(r.out);
    std::string a, b, extra;
    std::getline(lines, a);
    std::getline(lines, b);
    CHECK_FALSE(std::getline(lines, extra));
    CHECK(nlohmann::json::parse(a)["email"] == "e04_finalists");
    CHECK(nlohmann::json::parse(b)["email"] == "e01_airport");
}

TEST_CASE("analyze table") {
    auto r = cli({"analyze", fixture("e05_contact.eml")});
    REQUIRE(r.code == kExitOk);
    CHECK(r.out.starts_with("Email"));
    CHECK(r.out.find("PERFORM contact(jw11@example.com) []") != std::string::npos);
    CHECK(r.out.find("0.9") != std::string::npos);

    r = cli({"analyze", fixture("e05_contact.eml"), "--case", "5"});
    CHECK(r.out.find("PERFORM help() [finance_money]") != std::string::npos);
    CHECK(r.out.find("0.8") != std::string::npos);
}

TEST_CASE("analyze reads stdin with explicit annotations") {
    auto raw = testing::slurp(fixture("e06_sent.eml"));
    auto r = cli({"analyze", "-", "--annotations", fixture("e06_sent.ann.jsonl"), "--format", "json"}, raw);
    REQUIRE(r.code == kExitOk);
    auto j = nlohmann::json::parse(r.out);
    REQUIRE(j["asks"].size() == 1);
    CHECK(j["asks"][0]["action"] == "confirm");
    CHECK(cli({"analyze", "-"}, raw).code == kExitInput);
}

TEST_CASE("adapter output is used as annotations") {
    auto cmd = "cat '" + fixture("e05_contact.ann.jsonl") + "' # reads segments";
    auto via = cli({"analyze", fixture("e05_contact.eml"), "--adapter", "cat >/dev/null; " + cmd, "--format", "json"});
    auto direct = cli({"analyze", fixture("e05_contact.eml"), "--format", "json"});
    REQUIRE(via.code == kExitOk);
    CHECK(via.out == direct.out);

    auto echo = askdetect::cli::pipe_through("tr a-z A-Z", "segment one\nsegment two\n");
    CHECK(echo == "SEGMENT ONE\nSEGMENT TWO\n");

    auto bad = cli({"analyze", fixture("e05_contact.eml"), "--adapter", "exit 4"});
    CHECK(bad.code == kExitInput);
    CHECK(bad.err.find("adapter") != std::string::npos);
    CHECK_THROWS_AS(askdetect::cli::pipe_through("exit 1", ""), askdetect::Error);
}

TEST_CASE("missing and corrupt annotations") {
    testing::TempDir d;
    auto eml = d.write("m.eml", testing::slurp(fixture("e06_sent.eml")));
    auto r = cli({"analyze", eml.string()});
    CHECK(r.code == kExitInput);
    CHECK(r.err.find((d.path / "m.ann.jsonl").string()) != std::string::npos);

    d.write("m.ann.jsonl", "{\"segment\": 0, \"tokens\": [\n");
    r = cli({"analyze", eml.string()});
    CHECK(r.code == kExitInput);
    CHECK(r.err.find("m.ann.jsonl") != std::string::npos);
}

TEST_CASE("empty emails give empty analyses") {
    testing::TempDir d;
    auto eml = d.write("blank.eml", "Subject: nothing\n\n");
    d.write("blank.ann.jsonl", "");
    auto r = cli({"analyze", eml.string(), "--format", "json"});
    REQUIRE(r.code == kExitOk);
    auto j = nlohmann::json::parse(r.out);
    CHECK(j["asks"].empty());
    CHECK(j["top_asks"].empty());
}

TEST_CASE("evaluate") {
    auto r = cli({"evaluate", testing::corpus().string(), "--case", "2"});
    REQUIRE(r.code == kExitOk);
    CHECK(r.out.find("Case 2: LCS+ Classes") != std::string::npos);
    CHECK(r.out.find("McNemar") == std::string::npos);

    r = cli({"evaluate", testing::corpus().string(), "--format", "json", "-j", "3"});
    REQUIRE(r.code == kExitOk);
    auto j = nlohmann::json::parse(r.out);
    CHECK(j["cases"].size() == 7);
    CHECK(j["clauses"] == 32);
    CHECK(j["mcnemar"].size() == 18);

    r = cli({"evaluate", testing::corpus().string(), "--case", "4", "--link-mode", "advanced", "--format", "json"});
    REQUIRE(r.code == kExitOk);
    CHECK(nlohmann::json::parse(r.out)["cases"][0]["config"]["links"] == "advanced");
}

TEST_CASE("evaluate alignment failure") {
    testing::TempDir d;
    auto gold = testing::slurp(testing::corpus() / "validation.jsonl");
    auto v = d.write("v.jsonl", gold + R"({"email": "ghost", "sent": 0, "tok": 0, "text": "x", "gold": "NONE", "top": false})" "\n");
    auto r = cli({"evaluate", testing::corpus().string(), "--validation", v.string(), "--case", "6"});
    CHECK(r.code == kExitAlignment);
}

TEST_CASE("resource directory precedence") {
    std::istringstream in;
    std::ostringstream out, err;
    int code = askdetect::cli::run({"lexicon", "counts", "--resources", "/nonexistent/res"}, in, out, err);
    CHECK(code == kExitInput);
    CHECK(err.str().find("/nonexistent/res") != std::string::npos);
}

TEST_CASE("normalize") {
    auto r = cli({"normalize", fixture("e05_contact.eml"), "--format", "json"});
    REQUIRE(r.code == kExitOk);
    auto j = nlohmann::json::parse(r.out);
    CHECK_FALSE(j["segments"].empty());
    CHECK(j["links"][0]["target"] == "jw11@example.com");
}

}
