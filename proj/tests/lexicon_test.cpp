#include <doctest.h>

#include "askdetect/error.hpp"
#include "askdetect/lexicon.hpp"
#include "support.hpp"

using namespace askdetect;

namespace {

void write_small_lcs(const testing::TempDir& d) {
    d.write("classes.tsv",
            "# id\tname\tmembers\n"
            "1.1\thelpers\thelp assist send\n"
            "2.1\tgivers\tsend give\n"
            "3.1\tlosers\tlose drop\n"
            "4.1\tstray\tinform\n");
    d.write("class_labels.tsv", "1.1\tPERFORM\n2.1\tGIVE\n3.1\tLOSE\n4.1\tNONE\n");
}

}  // namespace

TEST_SUITE("lexicon") {

TEST_CASE("labels parse and print") {
    CHECK(parse_label("perform") == AskLabel::Perform);
    CHECK(parse_label("GAIN") == AskLabel::Gain);
    CHECK_FALSE(parse_label("NONE"));
    CHECK(LabelSet{AskLabel::Perform, AskLabel::Give}.to_string() == "GIVE, PERFORM");
    CHECK(LabelSet{}.to_string().empty());
    CHECK(LabelSet::from_bits(0xFF).bits() == 0x0F);
    CHECK(parse_source("lcs+") == LexiconSource::LcsPlus);
    CHECK(parse_source("lcs_plus") == LexiconSource::LcsPlus);
    CHECK_FALSE(parse_source("wordnet"));
}

TEST_CASE("thesaurus lists") {
    testing::TempDir d;
    d.write("perform.txt", "# comment\nhelp\nSign\n\n");
    d.write("give.txt", "send\n");
    d.write("lose.txt", "lose\n");
    d.write("gain.txt", "win\nsend\n");
    auto lex = load_thesaurus(d.path);
    CHECK(lex.source == LexiconSource::Thesaurus);
    CHECK(lex.lookup("sign") == LabelSet{AskLabel::Perform});
    CHECK(lex.lookup("send") == LabelSet{AskLabel::Give, AskLabel::Gain});
    CHECK(lex.lookup("unknown").empty());
    CHECK(lex.count(AskLabel::Perform) == 2);

    d.write("lose.txt", "give up\n");
    CHECK_THROWS_AS(load_thesaurus(d.path), LexiconError);
    std::filesystem::remove(d.path / "lose.txt");
    CHECK_THROWS_AS(load_thesaurus(d.path), MissingFile);
}

TEST_CASE("lcs classes with unmapped entries") {
    testing::TempDir d;
    write_small_lcs(d);
    auto lex = load_lcs(d.path);
    CHECK(lex.source == LexiconSource::Lcs);
    CHECK(lex.lookup("send") == LabelSet{AskLabel::Perform, AskLabel::Give});
    CHECK(lex.lookup("inform").empty());
    CHECK(lex.class_index.size() == 4);
    CHECK_FALSE(lex.class_index.at("4.1").label);
    CHECK(lex.warnings.size() == 1);

    d.write("class_labels.tsv", "1.1\tMAYBE\n");
    CHECK_THROWS_AS(load_lcs(d.path), LexiconError);
}

TEST_CASE("deltas apply and invert") {
    testing::TempDir d;
    write_small_lcs(d);
    d.write("deltas.tsv", "PERFORM\tdel\tassist\nPERFORM\tadd\tcontact\nLOSE\tdel\tdrop\n");
    auto lcs = load_lcs(d.path);
    auto deltas = load_deltas(d.path);
    REQUIRE(deltas.size() == 2);
    auto plus = apply_deltas(lcs, deltas);
    CHECK(plus.source == LexiconSource::LcsPlus);
    CHECK(plus.lookup("contact") == LabelSet{AskLabel::Perform});
    CHECK(plus.lookup("assist").empty());
    CHECK(plus.count(AskLabel::Lose) == 1);
    auto back = revert_deltas(plus, deltas);
    CHECK(back.entries == lcs.entries);
    auto twice = invert(invert(deltas));
    CHECK(twice[0].added == deltas[0].added);
    CHECK(twice[0].removed == deltas[0].removed);

    CHECK_THROWS_AS(apply_deltas(lcs, {{AskLabel::Perform, {"nothere"}, {}}}), RemoveMissing);
    CHECK_THROWS_AS(apply_deltas(lcs, {{AskLabel::Perform, {}, {"help"}}}), AddExisting);
    CHECK_THROWS_AS(apply_deltas(plus, deltas), DeltaError);

    d.write("deltas.tsv", "PERFORM\tswap\tx\n");
    CHECK_THROWS_AS(load_deltas(d.path), LexiconError);
}

TEST_CASE("catvar clusters") {
    testing::TempDir d;
    auto f = d.write("catvar.txt", "# c\nwin#V winner#N winning#AJ\nprize#N prized#AJ\nuse#V user#N usage#N utilize#V\n");
    auto db = load_catvar(f);
    CHECK(db.clusters.size() == 3);
    CHECK(catvar_verbalize(db, "winner", "NNS") == "win");
    CHECK(catvar_verbalize(db, "winning", "JJ") == "win");
    CHECK(catvar_verbalize(db, "usage", "NN") == "use");
    CHECK_FALSE(catvar_verbalize(db, "prize", "NN"));
    CHECK_FALSE(catvar_verbalize(db, "winner", "JJ"));
    CHECK(catvar_verbalize(db, "anything", "VBZ") == "anything");
    CHECK(pos_class_of("RBR") == PosClass::AV);
    CHECK_FALSE(pos_class_of("DT"));

    d.write("bad.txt", "win#V\n");
    CHECK_THROWS_AS(load_catvar(d.path / "bad.txt"), MalformedCluster);
    d.write("bad.txt", "win#V winner#X\n");
    CHECK_THROWS_AS(load_catvar(d.path / "bad.txt"), MalformedCluster);
    d.write("bad.txt", "win#V winner\n");
    CHECK_THROWS_AS(load_catvar(d.path / "bad.txt"), MalformedCluster);
}

TEST_CASE("demo resources load and satisfy their manifest") {
    const auto& r = testing::demo();
    REQUIRE(r.manifest);
    CHECK(r.manifest->provenance == "demo");
    for (auto src : {LexiconSource::Thesaurus, LexiconSource::Lcs, LexiconSource::LcsPlus}) {
        for (auto l : kAllLabels) CHECK(r.lexicon(src).count(l) == r.manifest->declared(src, l));
    }
    CHECK(r.lcs_plus.lookup("send") == LabelSet{AskLabel::Give, AskLabel::Perform});
    CHECK(r.lcs_plus.lookup("retrieve") == LabelSet{AskLabel::Gain, AskLabel::Lose});
    CHECK(r.lcs_plus.lookup("contact").contains(AskLabel::Perform));
    CHECK_FALSE(r.lcs.lookup("contact").contains(AskLabel::Perform));
    CHECK(r.lcs.lookup("admire").contains(AskLabel::Perform));
    CHECK_FALSE(r.lcs_plus.lookup("admire").contains(AskLabel::Perform));
}

TEST_CASE("manifest mismatches are detected") {
    testing::TempDir d;
    for (const auto& e : std::filesystem::directory_iterator(testing::resources()))
        std::filesystem::copy_file(e.path(), d.path / e.path().filename());
    CHECK_NOTHROW(load_resources(d.path));

    d.write("gain.txt", testing::slurp(d.path / "gain.txt") + "zzextra\n");
    CHECK_THROWS_AS(load_resources(d.path), ManifestMismatch);

    auto m = load_manifest(testing::resources());
    REQUIRE(m);
    CHECK(sha256_file(testing::resources() / "perform.txt") == m->checksums.at("perform.txt"));
    CHECK(LexiconManifest::count_key(LexiconSource::LcsPlus, AskLabel::Lose) == "lcs_plus.LOSE");
}

TEST_CASE("missing resource directory") {
    CHECK_THROWS_AS(load_resources("/nonexistent/resources"), MissingFile);
}

}
