#include "cli.hpp"

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <array>
#include <atomic>
#include <cerrno>
#include <csignal>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <optional>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "askdetect/annotation.hpp"
#include "askdetect/detector.hpp"
#include "askdetect/email.hpp"
#include "askdetect/error.hpp"
#include "askdetect/eval.hpp"
#include "askdetect/lexicon.hpp"
#include "askdetect/normalize.hpp"

#ifndef ASKDETECT_DEFAULT_RESOURCES
#define ASKDETECT_DEFAULT_RESOURCES "resources/demo"
#endif

namespace askdetect::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class UsageError : public Error {
    using Error::Error;
};

class AdapterFailure : public Error {
    using Error::Error;
};

struct Options {
    std::string resources;
    std::string format = "table";
    std::string case_arg;
    std::string link_mode;
    std::string verbal;
    std::string catvar;
    unsigned jobs = 0;

    // analyze
    std::vector<std::string> emails;
    std::string annotations;
    std::string adapter;

    // evaluate
    std::string corpus;
    std::string validation;

    // lexicon
    std::string lemma;
    std::string source;
    std::string diff_from, diff_to;
    std::string label;
};

bool has_overrides(const Options& o) { return !o.link_mode.empty() || !o.verbal.empty() || !o.catvar.empty(); }

unsigned worker_count(const Options& o) {
    if (o.jobs > 0) return o.jobs;
    return std::max(1u, std::min(8u, std::thread::hardware_concurrency()));
}

fs::path resource_dir(const Options& o) {
    if (!o.resources.empty()) return o.resources;
    if (const char* env = std::getenv("ASKDETECT_RESOURCES"); env && *env) return env;
    return ASKDETECT_DEFAULT_RESOURCES;
}

CategoryRuleSet load_categories(const fs::path& dir) {
    auto file = dir / "categories.tsv";
    return fs::exists(file) ? CategoryRuleSet::load(file) : CategoryRuleSet::defaults();
}

int parse_case(const std::string& s) {
    try {
        std::size_t used = 0;
        int n = std::stoi(s, &used);
        if (used == s.size() && n >= 0 && n < kCaseCount) return n;
    } catch (const std::exception&) {
    }
    throw UsageError("--case must be 0.." + std::to_string(kCaseCount - 1) + " or 'all', got '" + s + "'");
}

void apply_overrides(const Options& o, DetectorConfig& cfg) {
    if (!o.link_mode.empty()) {
        auto m = parse_link_mode(o.link_mode);
        if (!m) throw UsageError("--link-mode must be none, basic or advanced");
        cfg.link_mode = *m;
    }
    if (!o.verbal.empty()) cfg.verbal_processing = o.verbal == "on";
    if (!o.catvar.empty()) cfg.catvar = o.catvar == "on";
}

std::string read_all(std::istream& in) { return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()}; }

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw MissingFile("cannot open '" + p.string() + "'");
    return read_all(in);
}

NormalizedDocument normalize_or_empty(const std::string& raw) {
    if (std::all_of(raw.begin(), raw.end(), [](unsigned char c) { return std::isspace(c); })) return {};
    try {
        return normalize_email(raw);
    } catch (const NoBody&) {
        return {};
    }
}

struct Job {
    std::string id;
    std::string raw;
    fs::path annotations;  // unused with --adapter
};

AnnotatedDocument annotations_for(const Job& job, const NormalizedDocument& norm, const Options& o) {
    if (!o.adapter.empty()) {
        std::string input;
        for (const auto& s : norm.segments) input += s + "\n";
        std::string out = pipe_through(o.adapter, input);
        std::istringstream is(out);
        return load_annotations(is);
    }
    if (!fs::exists(job.annotations)) throw MissingFile("missing annotations '" + job.annotations.string() + "'");
    return load_annotations_file(job.annotations.string());
}

std::vector<Job> collect_jobs(const Options& o, std::istream& in) {
    std::vector<Job> jobs;
    std::vector<fs::path> paths;
    bool use_stdin = o.emails.empty();
    for (const auto& e : o.emails) {
        if (e == "-") {
            use_stdin = true;
            continue;
        }
        fs::path p(e);
        if (fs::is_directory(p)) {
            std::vector<fs::path> found;
            for (const auto& d : fs::directory_iterator(p)) {
                if (d.is_regular_file() && d.path().extension() == ".eml") found.push_back(d.path());
            }
            std::sort(found.begin(), found.end());
            paths.insert(paths.end(), found.begin(), found.end());
        } else {
            if (!fs::exists(p)) throw MissingFile("no such email '" + p.string() + "'");
            paths.push_back(p);
        }
    }
    if (!o.annotations.empty() && paths.size() + (use_stdin ? 1 : 0) != 1)
        throw UsageError("--annotations applies to a single email");
    if (use_stdin) {
        Job j;
        j.id = "stdin";
        j.raw = read_all(in);
        if (!o.annotations.empty()) {
            j.annotations = o.annotations;
        } else if (o.adapter.empty()) {
            throw MissingFile("email from stdin needs --annotations or --adapter");
        }
        jobs.push_back(std::move(j));
    }
    for (const auto& p : paths) {
        Job j;
        j.id = p.stem().string();
        j.raw = read_file(p);
        if (!o.annotations.empty()) {
            j.annotations = o.annotations;
        } else {
            auto ann = p;
            ann.replace_extension(".ann.jsonl");
            j.annotations = ann;
        }
        jobs.push_back(std::move(j));
    }
    return jobs;
}

/// Runs fn(i) for i in [0, n) on a bounded pool; the first error is rethrown
/// after all workers stop.
template <typename Fn>
void parallel_for(std::size_t n, unsigned workers, Fn fn) {
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(n);
    auto body = [&] {
        for (std::size_t i; (i = next++) < n;) {
            try {
                fn(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    unsigned k = static_cast<unsigned>(std::min<std::size_t>(workers, n));
    for (unsigned t = 1; t < k; ++t) pool.emplace_back(body);
    body();
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

std::size_t display_width(const std::string& s) {
    std::size_t n = 0;
    for (unsigned char c : s) {
        if ((c & 0xC0) != 0x80) ++n;
    }
    return n;
}

void print_analysis_table(const std::vector<EmailAnalysis>& results, std::ostream& out) {
    std::vector<std::array<std::string, 4>> rows;
    rows.push_back({"Email", "Framing", "Ask", "Conf"});
    for (const auto& a : results) {
        std::string framing, ask, conf = "-";
        for (const auto& f : a.framings) framing += (framing.empty() ? "" : "; ") + describe(f);
        for (const auto* f : a.top_ask_frames()) ask += (ask.empty() ? "" : "; ") + describe(*f);
        if (!a.top_asks.empty()) {
            std::ostringstream os;
            os << *a.asks[a.top_asks.front()].confidence;
            conf = os.str();
        }
        rows.push_back({a.email_id, framing.empty() ? "-" : framing, ask.empty() ? "-" : ask, conf});
    }
    std::array<std::size_t, 4> w{};
    for (const auto& r : rows) {
        for (std::size_t k = 0; k < 4; ++k) w[k] = std::max(w[k], display_width(r[k]));
    }
    for (const auto& r : rows) {
        std::string line;
        for (std::size_t k = 0; k < 4; ++k) {
            std::string cell = r[k] + std::string(w[k] - display_width(r[k]), ' ');
            line += k ? " | " + cell : cell;
        }
        while (!line.empty() && line.back() == ' ') line.pop_back();
        out << line << "\n";
    }
}

int cmd_analyze(const Options& o, std::istream& in, std::ostream& out) {
    if (o.case_arg == "all") throw UsageError("analyze takes a single --case");
    auto cfg = case_config(o.case_arg.empty() ? kCaseCount - 1 : parse_case(o.case_arg));
    apply_overrides(o, cfg);
    auto dir = resource_dir(o);
    auto resources = load_resources(dir);
    cfg.category_rules = load_categories(dir);

    auto jobs = collect_jobs(o, in);
    std::vector<EmailAnalysis> results(jobs.size());
    parallel_for(jobs.size(), worker_count(o), [&](std::size_t i) {
        auto norm = normalize_or_empty(jobs[i].raw);
        auto doc = annotations_for(jobs[i], norm, o);
        results[i] = detect(jobs[i].id, doc, norm.links, resources, cfg);
    });

    if (o.format == "json") {
        for (const auto& r : results) out << to_json(r).dump() << "\n";
    } else {
        print_analysis_table(results, out);
    }
    return kExitOk;
}

int cmd_evaluate(const Options& o, std::ostream& out) {
    std::vector<CaseSpec> specs;
    auto dir = resource_dir(o);
    auto categories = load_categories(dir);
    if (o.case_arg.empty() || o.case_arg == "all") {
        if (has_overrides(o)) throw UsageError("feature overrides conflict with --case all");
        for (int n = 0; n < kCaseCount; ++n) specs.push_back({n, case_config(n)});
    } else {
        int n = parse_case(o.case_arg);
        specs.push_back({n, case_config(n)});
        apply_overrides(o, specs.back().config);
    }
    for (auto& s : specs) s.config.category_rules = categories;

    auto resources = load_resources(dir);
    auto corpus = load_corpus(o.corpus);
    fs::path vpath = o.validation.empty() ? fs::path(o.corpus) / "validation.jsonl" : fs::path(o.validation);
    auto gold = load_validation_file(vpath);
    auto report = run_configs(corpus, gold, resources, specs, worker_count(o));

    if (o.format == "json")
        out << to_json(report).dump(2) << "\n";
    else
        out << format_table(report);
    return kExitOk;
}

const VerbLexicon& lexicon_named(const ResourceSet& r, const std::string& name) {
    auto s = parse_source(name);
    if (!s) throw UsageError("unknown lexicon source '" + name + "' (thesaurus, lcs, lcs+)");
    return r.lexicon(*s);
}

int cmd_lookup(const Options& o, std::ostream& out) {
    auto r = load_resources(resource_dir(o));
    const auto& lex = lexicon_named(r, o.source.empty() ? "lcs+" : o.source);
    std::string lemma = o.lemma;
    std::transform(lemma.begin(), lemma.end(), lemma.begin(), [](unsigned char c) { return std::tolower(c); });
    auto labels = lex.lookup(lemma);
    if (o.format == "json") {
        json arr = json::array();
        for (auto l : kAllLabels) {
            if (labels.contains(l)) arr.push_back(to_string(l));
        }
        out << json{{"lemma", lemma}, {"source", to_string(lex.source)}, {"labels", arr}}.dump() << "\n";
    } else {
        out << labels.to_string() << "\n";
    }
    return kExitOk;
}

int cmd_counts(const Options& o, std::ostream& out) {
    auto r = load_resources(resource_dir(o));
    std::vector<LexiconSource> sources;
    if (o.source.empty()) {
        sources = {LexiconSource::Thesaurus, LexiconSource::Lcs, LexiconSource::LcsPlus};
    } else {
        auto s = parse_source(o.source);
        if (!s) throw UsageError("unknown lexicon source '" + o.source + "' (thesaurus, lcs, lcs+)");
        sources = {*s};
    }
    json j = json::object();
    for (auto s : sources) {
        const auto& lex = r.lexicon(s);
        json counts = json::object();
        std::string line(to_string(s));
        line += ":";
        for (auto l : kAllLabels) {
            auto n = lex.count(l);
            counts[std::string(to_string(l))] = n;
            line += " " + std::string(to_string(l)) + " " + std::to_string(n);
            if (r.manifest) {
                auto d = r.manifest->declared(s, l);
                if (d && *d != n) line += " (manifest " + std::to_string(*d) + ")";
            }
        }
        j[std::string(to_string(s))] = counts;
        if (o.format != "json") out << line << "\n";
    }
    if (o.format == "json") out << j.dump() << "\n";
    return kExitOk;
}

int cmd_diff(const Options& o, std::ostream& out) {
    auto r = load_resources(resource_dir(o));
    const auto& a = lexicon_named(r, o.diff_from);
    const auto& b = lexicon_named(r, o.diff_to);
    std::vector<AskLabel> labels(kAllLabels.begin(), kAllLabels.end());
    if (!o.label.empty()) {
        auto l = parse_label(o.label);
        if (!l) throw UsageError("unknown label '" + o.label + "'");
        labels = {*l};
    }
    json j = json::object();
    for (auto l : labels) {
        auto ma = a.members(l);
        auto mb = b.members(l);
        std::vector<std::string> removed, added;
        std::set_difference(ma.begin(), ma.end(), mb.begin(), mb.end(), std::back_inserter(removed));
        std::set_difference(mb.begin(), mb.end(), ma.begin(), ma.end(), std::back_inserter(added));
        if (o.format == "json") {
            j[std::string(to_string(l))] = {{"removed", removed}, {"added", added}};
            continue;
        }
        out << to_string(l) << ": " << removed.size() << " removed, " << added.size() << " added\n";
        for (const auto& w : removed) out << "- " << w << "\n";
        for (const auto& w : added) out << "+ " << w << "\n";
    }
    if (o.format == "json") out << j.dump() << "\n";
    return kExitOk;
}

int cmd_normalize(const Options& o, std::istream& in, std::ostream& out) {
    std::vector<std::string> raws;
    if (o.emails.empty() || (o.emails.size() == 1 && o.emails[0] == "-")) {
        raws.push_back(read_all(in));
    } else {
        for (const auto& e : o.emails) raws.push_back(read_file(e));
    }
    for (const auto& raw : raws) {
        auto doc = normalize_or_empty(raw);
        if (o.format == "json") {
            out << to_json(doc).dump() << "\n";
        } else {
            for (const auto& s : doc.segments) out << s << "\n";
        }
    }
    return kExitOk;
}

void add_feature_flags(CLI::App* app, Options& o) {
    app->add_option("--link-mode", o.link_mode, "Link processing: none, basic, advanced")
        ->check(CLI::IsMember({"none", "basic", "advanced"}));
    app->add_option("--verbal", o.verbal, "Verbal filter on|off")->check(CLI::IsMember({"on", "off"}));
    app->add_option("--catvar", o.catvar, "CATVAR candidates on|off")->check(CLI::IsMember({"on", "off"}));
    app->add_option("-j,--jobs", o.jobs, "Worker threads (default: hardware, at most 8)");
}

}  // namespace

std::string pipe_through(const std::string& command, const std::string& input) {
    int to_child[2], from_child[2];
    if (pipe(to_child) != 0) throw AdapterFailure(std::string("pipe: ") + std::strerror(errno));
    if (pipe(from_child) != 0) {
        close(to_child[0]);
        close(to_child[1]);
        throw AdapterFailure(std::string("pipe: ") + std::strerror(errno));
    }
    pid_t pid = fork();
    if (pid < 0) throw AdapterFailure(std::string("fork: ") + std::strerror(errno));
    if (pid == 0) {
        dup2(to_child[0], STDIN_FILENO);
        dup2(from_child[1], STDOUT_FILENO);
        close(to_child[0]);
        close(to_child[1]);
        close(from_child[0]);
        close(from_child[1]);
        execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
        _exit(127);
    }
    close(to_child[0]);
    close(from_child[1]);

    std::thread writer([fd = to_child[1], &input] {
        std::signal(SIGPIPE, SIG_IGN);
        std::size_t off = 0;
        while (off < input.size()) {
            ssize_t n = write(fd, input.data() + off, input.size() - off);
            if (n < 0 && errno == EINTR) continue;
            if (n <= 0) break;
            off += static_cast<std::size_t>(n);
        }
        close(fd);
    });
    std::string output;
    char buf[4096];
    for (;;) {
        ssize_t n = read(from_child[0], buf, sizeof buf);
        if (n < 0 && errno == EINTR) continue;
        if (n <= 0) break;
        output.append(buf, static_cast<std::size_t>(n));
    }
    close(from_child[0]);
    writer.join();
    int status = 0;
    while (waitpid(pid, &status, 0) < 0 && errno == EINTR) {
    }
    if (!WIFEXITED(status) || WEXITSTATUS(status) != 0)
        throw AdapterFailure("adapter '" + command + "' failed with status " +
                             std::to_string(WIFEXITED(status) ? WEXITSTATUS(status) : -1));
    return output;
}

int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err) {
    Options o;
    CLI::App app{"Detects asks and framings in emails", "askdetect"};
    app.require_subcommand(1);
    app.add_option("--resources", o.resources, "Resource directory (default: $ASKDETECT_RESOURCES)");
    app.add_option("--format", o.format, "Output format: json or table")->check(CLI::IsMember({"json", "table"}));

    auto* analyze = app.add_subcommand("analyze", "Analyze emails (.eml with sidecar .ann.jsonl)");
    analyze->add_option("emails", o.emails, "Email files or directories; '-' reads stdin");
    analyze->add_option("--annotations", o.annotations, "Annotation JSON-lines for a single email");
    analyze->add_option("--adapter", o.adapter, "Command producing annotations from segments on stdin");
    analyze->add_option("--case", o.case_arg, "Configuration preset 0..6 (default 6)");
    add_feature_flags(analyze, o);

    auto* evaluate = app.add_subcommand("evaluate", "Score a corpus against a validation set");
    evaluate->add_option("corpus", o.corpus, "Corpus directory")->required();
    evaluate->add_option("--validation", o.validation, "Validation JSON-lines (default: <corpus>/validation.jsonl)");
    evaluate->add_option("--case", o.case_arg, "Case 0..6 or 'all' (default all)");
    add_feature_flags(evaluate, o);

    auto* lexicon = app.add_subcommand("lexicon", "Inspect the verb lexicons");
    lexicon->require_subcommand(1);
    auto* lookup = lexicon->add_subcommand("lookup", "Labels of a lemma");
    lookup->add_option("lemma", o.lemma)->required();
    lookup->add_option("--source", o.source, "thesaurus, lcs or lcs+ (default lcs+)");
    auto* counts = lexicon->add_subcommand("counts", "Label sizes per lexicon");
    counts->add_option("--source", o.source, "thesaurus, lcs or lcs+ (default all)");
    auto* diff = lexicon->add_subcommand("diff", "Members removed and added between two lexicons");
    diff->add_option("from", o.diff_from)->required();
    diff->add_option("to", o.diff_to)->required();
    diff->add_option("--label", o.label, "Restrict to one label");

    auto* normalize = app.add_subcommand("normalize", "Print the normalized segments of emails");
    normalize->add_option("emails", o.emails, "Email files; '-' or none reads stdin");

    for (auto* sub : {analyze, evaluate, lookup, counts, diff, normalize}) {
        sub->add_option("--resources", o.resources, "Resource directory");
        sub->add_option("--format", o.format, "json or table")->check(CLI::IsMember({"json", "table"}));
    }

    std::vector<std::string> argv_store{"askdetect"};
    argv_store.insert(argv_store.end(), args.begin(), args.end());
    std::vector<const char*> argv;
    for (const auto& a : argv_store) argv.push_back(a.c_str());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitInput;
    }

    try {
        if (*analyze) return cmd_analyze(o, in, out);
        if (*evaluate) return cmd_evaluate(o, out);
        if (*lookup) return cmd_lookup(o, out);
        if (*counts) return cmd_counts(o, out);
        if (*diff) return cmd_diff(o, out);
        if (*normalize) return cmd_normalize(o, in, out);
    } catch (const AlignmentError& e) {
        err << "askdetect: alignment error: " << e.what() << "\n";
        return kExitAlignment;
    } catch (const Error& e) {
        err << "askdetect: " << e.what() << "\n";
        return kExitInput;
    } catch (const std::exception& e) {
        err << "askdetect: internal error: " << e.what() << "\n";
        return kExitInternal;
    }
    return kExitInput;
}

}  // namespace askdetect::cli
