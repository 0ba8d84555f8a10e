#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "askdetect/lexicon.hpp"
#include <json.hpp>

#include "cli.hpp"

namespace testing {

inline std::filesystem::path resources() { return ASKDETECT_RESOURCE_DIR; }
inline std::filesystem::path fixtures() { return ASKDETECT_FIXTURE_DIR; }
inline std::filesystem::path corpus() { return fixtures() / "corpus"; }

inline std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline const askdetect::ResourceSet& demo() {
    static const askdetect::ResourceSet r = askdetect::load_resources(resources());
    return r;
}

struct Run {
    int code = 0;
    std::string out, err;
};

inline Run cli(std::vector<std::string> args, const std::string& stdin_text = "") {
    args.push_back("--resources");
    args.push_back(resources().string());
    std::istringstream in(stdin_text);
    std::ostringstream out, err;
    Run r;
    r.code = askdetect::cli::run(args, in, out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

/// Scratch directory removed on destruction.
struct TempDir {
    std::filesystem::path path;
    TempDir() {
        auto base = std::filesystem::temp_directory_path();
        for (int k = 0;; ++k) {
            path = base / ("askdetect-test-" + std::to_string(::getpid()) + "-" + std::to_string(k));
            if (std::filesystem::create_directory(path)) break;
        }
    }
    ~TempDir() { std::filesystem::remove_all(path); }
    std::filesystem::path write(const std::string& name, const std::string& text) const {
        std::ofstream(path / name, std::ios::binary) << text;
        return path / name;
    }
};

}  // namespace testing

#include "askdetect/annotation.hpp"

namespace testing {

struct Tok {
    std::string text, lemma, pos;
    int head;  // -1 is ROOT
    std::string rel;
};

inline askdetect::SentenceAnnotation sentence(const std::vector<Tok>& toks, std::size_t segment = 0) {
    askdetect::SentenceAnnotation s;
    s.segment_index = segment;
    for (std::size_t i = 0; i < toks.size(); ++i) {
        s.tokens.push_back({i, toks[i].text, toks[i].lemma, toks[i].pos});
        std::optional<std::size_t> head;
        if (toks[i].head >= 0) head = static_cast<std::size_t>(toks[i].head);
        s.dependencies.push_back({head, i, toks[i].rel});
    }
    return s;
}

inline nlohmann::json sentence_json(const std::vector<Tok>& toks, std::size_t segment = 0) {
    nlohmann::json tokens = nlohmann::json::array(), deps = nlohmann::json::array();
    for (std::size_t i = 0; i < toks.size(); ++i) {
        tokens.push_back({{"i", i}, {"text", toks[i].text}, {"lemma", toks[i].lemma}, {"pos", toks[i].pos}});
        deps.push_back({{"head", toks[i].head}, {"dep", i}, {"rel", toks[i].rel}});
    }
    return {{"segment", segment}, {"tokens", tokens}, {"deps", deps}};
}

}  // namespace testing
