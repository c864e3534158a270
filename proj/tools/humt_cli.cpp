// humt command-line tool. Talks to the library only through humt.h.

#include <chrono>
#include <cstdio>
#include <ctime>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "humt/humt.h"

namespace {

using json = nlohmann::ordered_json;

constexpr int kExitOk = 0;
constexpr int kExitFatal = 1;
constexpr int kExitPartial = 2;

struct Failure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void check(int status, const std::string& context) {
  if (status == HUMT_OK) return;
  throw Failure(context + ": " + humt_status_name(status) + ": " + humt_last_error());
}

std::string take(char* s) {
  if (s == nullptr) return {};
  std::string out(s);
  humt_string_free(s);
  return out;
}

template <typename T, void (*Free)(T*)>
struct Deleter {
  void operator()(T* p) const { Free(p); }
};
using Registry = std::unique_ptr<humt_registry, Deleter<humt_registry, humt_registry_free>>;
using BackendPtr = std::unique_ptr<humt_backend, Deleter<humt_backend, humt_backend_free>>;
using Pairs = std::unique_ptr<humt_pairs, Deleter<humt_pairs, humt_pairs_free>>;
using Texts = std::unique_ptr<humt_texts, Deleter<humt_texts, humt_texts_free>>;
using Scores = std::unique_ptr<humt_scores, Deleter<humt_scores, humt_scores_free>>;

std::string iso_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string file_sha256(const std::string& path) {
  char* hex = nullptr;
  check(humt_file_sha256(path.c_str(), &hex), "digest " + path);
  return take(hex);
}

std::string sha256(const std::string& data) {
  char* hex = nullptr;
  check(humt_sha256(data.data(), data.size(), &hex), "digest");
  return take(hex);
}

void write_file(const std::string& path, const std::string& data) {
  check(humt_write_file_atomic(path.c_str(), data.data(), data.size()), "write " + path);
}

// Everything a run records next to its primary output.
class Run {
 public:
  Run(std::string command, const CLI::App& sub) : command_(std::move(command)), started_(iso_now()) {
    for (const CLI::Option* opt : sub.get_options()) {
      const std::string name = opt->get_single_name();
      if (name.empty() || name == "help") continue;
      if (opt->count() == 0 && opt->get_default_str().empty()) continue;
      const auto results = opt->reduced_results();
      if (!results.empty()) {
        config_[name] = results.size() == 1 ? json(results.front()) : json(results);
      } else if (!opt->get_default_str().empty()) {
        config_[name] = opt->get_default_str();
      }
    }
  }

  void input(const std::string& path) { inputs_[path] = file_sha256(path); }
  void output(const std::string& path) { outputs_.push_back(path); }
  void backend(const json& descriptor) { backend_ = descriptor; }
  json& extra() { return extra_; }

  void write_manifest(const std::string& primary) const {
    json m;
    m["command"] = command_;
    m["config"] = config_;
    m["config_sha256"] = sha256(config_.dump());
    m["inputs"] = inputs_;
    m["backend"] = backend_;
    m["started_at"] = started_;
    m["finished_at"] = iso_now();
    json outs = json::array();
    for (const auto& p : outputs_) outs.push_back({{"path", p}, {"sha256", file_sha256(p)}});
    m["outputs"] = std::move(outs);
    for (const auto& [k, v] : extra_.items()) m[k] = v;
    write_file(primary + ".manifest.json", m.dump(2) + "\n");
  }

 private:
  std::string command_;
  std::string started_;
  json config_ = json::object();
  json inputs_ = json::object();
  json backend_ = nullptr;
  std::vector<std::string> outputs_;
  json extra_ = json::object();
};

struct IngestFlags {
  std::string format;
  std::string map;
  std::string source;

  void add(CLI::App* sub) {
    sub->add_option("--format", format, "Input format: jsonl or csv (default from extension)")
        ->check(CLI::IsMember({"jsonl", "csv"}));
    sub->add_option("--map", map, "Field mapping, e.g. prompt=question,chosen=a");
    sub->add_option("--source", source, "Source tag for synthesized ids (default: file stem)");
  }

  std::string options_json() const {
    json o = json::object();
    if (!format.empty()) o["format"] = format;
    if (!map.empty()) o["mapping"] = map;
    if (!source.empty()) o["source"] = source;
    return o.dump();
  }
};

// Keeps each rejected line ({"line", "reason"}) in the manifest.
std::size_t record_rejections(const std::string& path, const std::string& report, Run& run) {
  std::size_t n = 0;
  std::istringstream lines(report);
  for (std::string line; std::getline(lines, line);) {
    if (line.empty()) continue;
    auto entry = json::parse(line);
    entry["input"] = path;
    run.extra()["rejected_lines"].push_back(std::move(entry));
    ++n;
  }
  if (n > 0) std::cerr << path << ": " << n << " rows rejected\n";
  return n;
}

Pairs load_pairs(const std::string& path, const IngestFlags& flags, Run& run, std::size_t* rejected = nullptr) {
  humt_pairs* p = nullptr;
  check(humt_pairs_ingest(path.c_str(), flags.options_json().c_str(), &p), "ingest " + path);
  Pairs pairs(p);
  run.input(path);
  char* rej = nullptr;
  check(humt_pairs_rejections(pairs.get(), &rej), "rejections");
  const std::string report = take(rej);
  const auto n = record_rejections(path, report, run);
  if (rejected != nullptr) *rejected = n;
  return pairs;
}

Texts load_texts(const std::string& path, const IngestFlags& flags, Run& run, std::size_t* rejected = nullptr) {
  humt_texts* t = nullptr;
  check(humt_texts_ingest(path.c_str(), flags.options_json().c_str(), &t), "ingest " + path);
  Texts texts(t);
  run.input(path);
  char* rej = nullptr;
  check(humt_texts_rejections(texts.get(), &rej), "rejections");
  const std::string report = take(rej);
  const auto n = record_rejections(path, report, run);
  if (rejected != nullptr) *rejected = n;
  return texts;
}

Scores load_scores(const std::string& path, Run& run) {
  humt_scores* s = nullptr;
  check(humt_scores_load(path.c_str(), &s), "load scores " + path);
  run.input(path);
  return Scores(s);
}

// "remote" or a table-backend JSON file.
BackendPtr open_backend(const std::string& spec, const std::string& cache, Run& run) {
  humt_backend* b = nullptr;
  if (spec == "remote") {
    check(humt_backend_remote_from_env(&b), "remote backend");
  } else {
    const std::string path = spec.rfind("table:", 0) == 0 ? spec.substr(6) : spec;
    check(humt_backend_table_from_file(path.c_str(), &b), "table backend " + path);
    run.input(path);
  }
  BackendPtr backend(b);
  if (!cache.empty()) {
    humt_backend* cached = nullptr;
    check(humt_backend_with_cache(backend.get(), cache.c_str(), &cached), "cache " + cache);
    backend.reset(cached);
  }
  return backend;
}

json describe(const humt_backend* b) {
  char* d = nullptr;
  check(humt_backend_describe(b, &d), "describe backend");
  return json::parse(take(d));
}

void emit_json(const std::string& out, const json& report, Run& run) {
  if (out.empty()) {
    std::cout << report.dump(2) << "\n";
    return;
  }
  write_file(out, report.dump(2) + "\n");
  run.output(out);
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string fmt_json_number(const json& v) { return v.is_number() ? fmt(v.get<double>()) : "NA"; }

// ---------------------------------------------------------------------------

struct ScoreCmd {
  std::string input, kind = "texts", dimensions = "humt", dimensions_file, backend, cache, out, mode;
  IngestFlags ingest;
  unsigned repetitions = 1;
  std::size_t truncate = 300;
  bool fail_fast = false;

  void add(CLI::App& app) {
    auto* s = app.add_subcommand("score", "Score texts or pair responses on tone dimensions");
    s->add_option("--input", input, "Input corpus")->required();
    s->add_option("--kind", kind, "texts, or pairs to score both responses of each pair")
        ->check(CLI::IsMember({"texts", "pairs"}));
    ingest.add(s);
    s->add_option("--dimensions", dimensions, "Comma-separated dimension names or 'all'");
    s->add_option("--dimensions-file", dimensions_file, "JSON file of extra dimension specs");
    s->add_option("--backend", backend, "'remote' or a table backend JSON file")->required();
    s->add_option("--cache", cache, "Persistent log-probability cache file");
    s->add_option("--out", out, "Scores file (.tsv wide, .jsonl long)")->required();
    s->add_option("--repetitions", repetitions, "Queries averaged per phrase")->check(CLI::PositiveNumber);
    s->add_option("--mode", mode, "Aggregation override")->check(CLI::IsMember({"sum_literal", "mean_normalized"}));
    s->add_option("--truncate", truncate, "Characters of text kept after the phrase");
    s->add_flag("--fail-fast", fail_fast, "Stop at the first failed row");
  }

  int run(const CLI::App& sub, unsigned jobs) {
    Run run("score", sub);
    humt_registry* r = nullptr;
    check(dimensions_file.empty() ? humt_registry_builtin(&r) : humt_registry_from_file(dimensions_file.c_str(), &r),
          "dimension registry");
    Registry registry(r);
    if (!dimensions_file.empty()) run.input(dimensions_file);
    BackendPtr b = open_backend(backend, cache, run);
    json options;
    options["truncation_limit"] = truncate;
    options["repetitions"] = repetitions;
    if (!mode.empty()) options["aggregation"] = mode;
    options["jobs"] = jobs;
    options["fail_fast"] = fail_fast;
    std::size_t rejected = 0;
    humt_scores* s = nullptr;
    char* report_raw = nullptr;
    if (kind == "pairs") {
      Pairs pairs = load_pairs(input, ingest, run, &rejected);
      check(humt_score_pairs(b.get(), registry.get(), pairs.get(), dimensions.c_str(), options.dump().c_str(), &s,
                             &report_raw),
            "score");
    } else {
      Texts texts = load_texts(input, ingest, run, &rejected);
      check(humt_score_texts(b.get(), registry.get(), texts.get(), dimensions.c_str(), options.dump().c_str(), &s,
                             &report_raw),
            "score");
    }
    Scores scores(s);
    const json report = json::parse(take(report_raw));
    check(humt_scores_write(scores.get(), out.c_str()), "write " + out);
    run.output(out);
    const auto& failures = report.at("failures");
    if (!failures.empty()) {
      std::string lines;
      for (const auto& f : failures) lines += f.dump() + "\n";
      write_file(out + ".failures.jsonl", lines);
      run.output(out + ".failures.jsonl");
      std::cerr << failures.size() << " rows failed; see " << out << ".failures.jsonl\n";
    }
    for (const auto& w : report.at("warnings")) std::cerr << "warning: " << w.get<std::string>() << "\n";
    run.backend(describe(b.get()));
    run.extra()["rows"] = report.at("rows");
    run.extra()["failures"] = failures.size();
    run.extra()["ingest_rejections"] = rejected;
    run.write_manifest(out);
    return failures.empty() && rejected == 0 ? kExitOk : kExitPartial;
  }
};

struct AnalyzePrefsCmd {
  std::string pairs_path, scores_path, dimension = "humt", out, csv;
  IngestFlags ingest;
  bool by_topic = false;

  void add(CLI::App& app) {
    auto* s = app.add_subcommand("analyze-prefs", "Compare tone of chosen vs rejected responses");
    s->add_option("--pairs", pairs_path, "Preference pair corpus")->required();
    ingest.add(s);
    s->add_option("--scores", scores_path, "Scores of the pair responses")->required();
    s->add_option("--dimension", dimension, "Dimension to compare");
    s->add_flag("--by-topic", by_topic, "Add one report per topic");
    s->add_option("--out", out, "JSON report (stdout when absent)");
    s->add_option("--csv", csv, "Plot-ready CSV of group means");
  }

  int run(const CLI::App& sub) {
    Run run("analyze-prefs", sub);
    Pairs pairs = load_pairs(pairs_path, ingest, run);
    Scores scores = load_scores(scores_path, run);
    char* raw = nullptr;
    check(humt_analyze_prefs(pairs.get(), scores.get(), dimension.c_str(), by_topic ? 1 : 0, &raw), "analyze");
    const json report = json::parse(take(raw));

    std::vector<std::pair<std::string, json>> groups{{"overall", report.at("overall")}};
    if (report.contains("topics")) {
      for (const auto& [topic, r] : report.at("topics").items()) groups.emplace_back("topic:" + topic, r);
    }
    std::ostringstream tsv;
    tsv << "group\tn\tmean_chosen\tmean_rejected\tdiff\tpercent_likelihood_diff\tt\tp\n";
    std::string csv_body = "group,n,mean_chosen,mean_rejected,diff,percent_likelihood_diff,ci95_halfwidth\n";
    for (const auto& [name, r] : groups) {
      const json test = r.value("test", json(nullptr));
      tsv << name << "\t" << r.value("n", 0) << "\t" << fmt_json_number(r.value("mean_a", json())) << "\t"
          << fmt_json_number(r.value("mean_b", json())) << "\t" << fmt_json_number(r.value("diff", json())) << "\t"
          << fmt_json_number(r.value("percent_likelihood_diff", json())) << "\t"
          << (test.is_object() ? fmt(test.at("statistic").get<double>()) : "NA") << "\t"
          << (test.is_object() ? fmt(test.at("p_value").get<double>()) : "NA") << "\n";
      csv_body += name + "," + std::to_string(r.value("n", 0)) + "," + fmt_json_number(r.value("mean_a", json())) +
                  "," + fmt_json_number(r.value("mean_b", json())) + "," + fmt_json_number(r.value("diff", json())) +
                  "," + fmt_json_number(r.value("percent_likelihood_diff", json())) + "," +
                  fmt_json_number(r.value("ci95_halfwidth", json())) + "\n";
    }
    if (!out.empty()) std::cout << tsv.str();
    emit_json(out, report, run);
    if (!csv.empty()) {
      write_file(csv, csv_body);
      run.output(csv);
    }
    const auto& missing = report.at("missing");
    if (!missing.empty()) {
      std::cerr << missing.size() << " pairs lack scores:";
      for (std::size_t i = 0; i < std::min<std::size_t>(missing.size(), 10); ++i) {
        std::cerr << " " << missing[i].get<std::string>();
      }
      std::cerr << (missing.size() > 10 ? " ...\n" : "\n");
    }
    if (!out.empty()) run.write_manifest(out);
    return missing.empty() ? kExitOk : kExitPartial;
  }
};

struct CorrelateCmd {
  std::string scores_path, dimensions, out, csv;
  double alpha = 0.001;

  void add(CLI::App& app) {
    auto* s = app.add_subcommand("correlate", "Pairwise Pearson correlations between dimensions");
    s->add_option("--scores", scores_path, "Scores table")->required();
    s->add_option("--alpha", alpha, "Benjamini-Hochberg level")->check(CLI::Range(0.0, 1.0));
    s->add_option("--dimensions", dimensions, "Subset of dimensions (default: all in the table)");
    s->add_option("--out", out, "JSON report (stdout when absent)");
    s->add_option("--csv", csv, "Plot-ready correlation matrix CSV");
  }

  int run(const CLI::App& sub) {
    Run run("correlate", sub);
    Scores scores = load_scores(scores_path, run);
    char* raw = nullptr;
    char* csv_raw = nullptr;
    check(humt_correlate(scores.get(), alpha, dimensions.empty() ? nullptr : dimensions.c_str(), &raw, &csv_raw),
          "correlate");
    const json report = json::parse(take(raw));
    const std::string matrix = take(csv_raw);
    if (!out.empty()) {
      std::cout << "a\tb\tr\tp_raw\tp_adjusted\treject\n";
      for (const auto& p : report.at("pairs")) {
        std::cout << p.at("a").get<std::string>() << "\t" << p.at("b").get<std::string>() << "\t"
                  << fmt_json_number(p.at("r")) << "\t" << fmt_json_number(p.value("p_raw", json())) << "\t"
                  << fmt_json_number(p.value("p_adjusted", json())) << "\t"
                  << (p.value("reject", false) ? "yes" : "no") << "\n";
      }
    }
    emit_json(out, report, run);
    if (!csv.empty()) {
      write_file(csv, matrix);
      run.output(csv);
    }
    if (!out.empty()) run.write_manifest(out);
    return kExitOk;
  }
};

struct BuildDpoCmd {
  std::string pairs_path, scores_path, dimension = "humt", variant = "tone", out;
  IngestFlags ingest;
  double threshold = 0.0;
  std::size_t count = 500;
  std::optional<std::uint64_t> seed;

  void add(CLI::App& app) {
    auto* s = app.add_subcommand("build-dpo", "Sample a DPO dataset from scored preference pairs");
    s->add_option("--pairs", pairs_path, "Preference pair corpus")->required();
    ingest.add(s);
    s->add_option("--scores", scores_path, "Scores of the pair responses")->required();
    s->add_option("--dimension", dimension, "Dimension whose margin filters pairs");
    s->add_option("--threshold", threshold, "Strict margin threshold t");
    s->add_option("--count", count, "Pairs to emit")->check(CLI::PositiveNumber);
    s->add_option("--seed", seed, "Sampling seed")->required();
    s->add_option("--variant", variant, "tone, random or maxtone")
        ->check(CLI::IsMember({"tone", "random", "maxtone"}));
    s->add_option("--out", out, "DPO JSONL")->required();
  }

  int run(const CLI::App& sub) {
    Run run("build-dpo", sub);
    Pairs pairs = load_pairs(pairs_path, ingest, run);
    Scores scores = load_scores(scores_path, run);
    char* raw = nullptr;
    check(humt_build_dpo(pairs.get(), scores.get(), dimension.c_str(), variant.c_str(), threshold, count, *seed,
                         out.c_str(), &raw),
          "build-dpo");
    const json built = json::parse(take(raw));
    run.output(out);
    for (const auto& key : {"variant", "ablation", "input_size", "eligible_pool", "emitted", "output_sha256"}) {
      if (built.contains(key)) run.extra()[key] = built.at(key);
    }
    run.extra()["rng"] = built.at("config").at("rng");
    run.write_manifest(out);
    std::cerr << "emitted " << built.at("emitted").get<std::size_t>() << " of "
              << built.at("eligible_pool").get<std::size_t>() << " eligible pairs\n";
    return kExitOk;
  }
};

struct ValidateCmd {
  std::string annotations, scores_path, out;

  void add(CLI::App& app) {
    auto* s = app.add_subcommand("validate", "Agreement of human annotations with scores");
    s->add_option("--annotations", annotations, "Annotation JSONL")->required();
    s->add_option("--scores", scores_path, "Scores table")->required();
    s->add_option("--out", out, "JSON report (stdout when absent)");
  }

  int run(const CLI::App& sub) {
    Run run("validate", sub);
    run.input(annotations);
    Scores scores = load_scores(scores_path, run);
    char* raw = nullptr;
    check(humt_validate(annotations.c_str(), scores.get(), &raw), "validate");
    const json report = json::parse(take(raw));
    if (!out.empty()) {
      std::cout << "dimension\titems\tkappa\tchi2\tchi2_p\tt\tt_p\n";
      for (const auto& d : report.at("dimensions")) {
        const auto& c = d.at("sign_agreement");
        const auto& t = d.at("label_mean_diff");
        std::cout << d.at("dimension").get<std::string>() << "\t" << d.at("items") << "\t"
                  << fmt_json_number(d.at("fleiss_kappa")) << "\t" << fmt_json_number(c.value("statistic", json()))
                  << "\t" << fmt_json_number(c.value("p_value", json())) << "\t"
                  << fmt_json_number(t.value("statistic", json())) << "\t"
                  << fmt_json_number(t.value("p_value", json())) << "\n";
      }
    }
    emit_json(out, report, run);
    if (!out.empty()) run.write_manifest(out);
    bool missing = false;
    for (const auto& d : report.at("dimensions")) missing = missing || !d.at("missing_scores").empty();
    return missing ? kExitPartial : kExitOk;
  }
};

struct LexiconCmd {
  std::string input, scores_path, lexicon, dimension = "humt", out;
  IngestFlags ingest;
  double max_p = 1.0;

  void add(CLI::App& app) {
    auto* s = app.add_subcommand("lexicon", "Lexicon category rates in top vs bottom score quartiles");
    s->add_option("--input", input, "Text corpus")->required();
    ingest.add(s);
    s->add_option("--scores", scores_path, "Scores table")->required();
    s->add_option("--lexicon", lexicon, "Lexicon file: category<TAB>word,word,pre*")->required();
    s->add_option("--dimension", dimension, "Dimension that orders the texts");
    s->add_option("--max-p", max_p, "Drop categories with larger p")->check(CLI::Range(0.0, 1.0));
    s->add_option("--out", out, "JSON report (stdout when absent)");
  }

  int run(const CLI::App& sub) {
    Run run("lexicon", sub);
    Texts texts = load_texts(input, ingest, run);
    Scores scores = load_scores(scores_path, run);
    run.input(lexicon);
    char* raw = nullptr;
    check(humt_lexicon_association(texts.get(), scores.get(), dimension.c_str(), lexicon.c_str(), max_p, &raw),
          "lexicon");
    const json report = json::parse(take(raw));
    if (!out.empty()) {
      std::cout << "category\tstatus\tmean_top\tmean_bottom\tt\tp\n";
      for (const auto& c : report.at("categories")) {
        std::cout << c.at("category").get<std::string>() << "\t" << c.at("status").get<std::string>() << "\t"
                  << fmt_json_number(c.at("mean_top")) << "\t" << fmt_json_number(c.at("mean_bottom")) << "\t"
                  << fmt_json_number(c.at("test").at("statistic")) << "\t"
                  << fmt_json_number(c.at("test").at("p_value")) << "\n";
      }
    }
    emit_json(out, report, run);
    if (!out.empty()) run.write_manifest(out);
    return report.at("missing").empty() ? kExitOk : kExitPartial;
  }
};

struct TermCmd {
  std::string input, match = "token", out;
  IngestFlags ingest;
  std::vector<std::string> terms;

  void add(CLI::App& app) {
    auto* s = app.add_subcommand("term", "Fraction of texts containing each term");
    s->add_option("--input", input, "Text corpus")->required();
    ingest.add(s);
    s->add_option("--term", terms, "Term to look for (repeatable)")->required();
    s->add_option("--match", match, "token (case-insensitive words) or substring")
        ->check(CLI::IsMember({"token", "substring"}));
    s->add_option("--out", out, "JSON report (stdout when absent)");
  }

  int run(const CLI::App& sub) {
    Run run("term", sub);
    Texts texts = load_texts(input, ingest, run);
    json report;
    report["texts"] = humt_texts_size(texts.get());
    report["match"] = match;
    json rows = json::array();
    for (const auto& t : terms) {
      double p = 0.0;
      check(humt_term_proportion(texts.get(), t.c_str(), match == "substring" ? 1 : 0, &p), "term '" + t + "'");
      rows.push_back({{"term", t}, {"proportion", p}});
      if (!out.empty()) std::cout << t << "\t" << fmt(p) << "\n";
    }
    report["terms"] = std::move(rows);
    emit_json(out, report, run);
    if (!out.empty()) run.write_manifest(out);
    return kExitOk;
  }
};

struct DiscoverCmd {
  std::string input, backend, cache, out;
  IngestFlags ingest;
  std::size_t fill_k = 15, vocab_top = 200, clusters = 0;
  std::optional<std::uint64_t> seed;

  void add(CLI::App& app) {
    auto* s = app.add_subcommand("discover", "Implicit speakers from mask fills of '<slot> said <text>'");
    s->add_option("--input", input, "Text corpus")->required();
    ingest.add(s);
    s->add_option("--backend", backend, "'remote' or a table backend JSON file")->required();
    s->add_option("--cache", cache, "Persistent log-probability cache file");
    s->add_option("--fill-k", fill_k, "Fills kept per text")->check(CLI::PositiveNumber);
    s->add_option("--vocab-top", vocab_top, "Words reported")->check(CLI::PositiveNumber);
    s->add_option("--clusters", clusters, "Cluster the words into this many groups (0: none)");
    s->add_option("--seed", seed, "Clustering seed (required with --clusters)");
    s->add_option("--out", out, "JSON report (stdout when absent)");
  }

  int run(const CLI::App& sub) {
    if (clusters > 0 && !seed) throw Failure("--seed is required with --clusters");
    Run run("discover", sub);
    Texts texts = load_texts(input, ingest, run);
    BackendPtr b = open_backend(backend, cache, run);
    char* raw = nullptr;
    check(humt_discover_speakers(texts.get(), b.get(), fill_k, vocab_top, clusters, seed.value_or(0), &raw),
          "discover");
    const json report = json::parse(take(raw));
    run.backend(describe(b.get()));
    if (!out.empty()) {
      for (const auto& w : report.at("words")) {
        std::cout << w.at("word").get<std::string>() << "\t" << w.at("frequency") << "\n";
      }
    }
    emit_json(out, report, run);
    if (!out.empty()) run.write_manifest(out);
    return report.at("skipped").empty() ? kExitOk : kExitPartial;
  }
};

struct TopicsCmd {
  std::string input, kind = "pairs", backend, cache, out, exemplars;
  IngestFlags ingest;
  std::size_t k = 10;
  std::optional<std::uint64_t> seed;

  void add(CLI::App& app) {
    auto* s = app.add_subcommand("topics", "k-means topics over prompt embeddings");
    s->add_option("--input", input, "Pair corpus (prompts are clustered) or text corpus")->required();
    s->add_option("--kind", kind, "pairs or texts")->check(CLI::IsMember({"texts", "pairs"}));
    ingest.add(s);
    s->add_option("--backend", backend, "'remote' or a table backend JSON file")->required();
    s->add_option("--cache", cache, "Persistent log-probability cache file");
    s->add_option("-k,--k", k, "Number of topics")->check(CLI::PositiveNumber);
    s->add_option("--seed", seed, "Initialization seed")->required();
    s->add_option("--out", out, "JSON report (stdout when absent)");
    s->add_option("--exemplars", exemplars, "TSV of the prompts nearest each centroid");
  }

  int run(const CLI::App& sub) {
    Run run("topics", sub);
    Texts texts;
    if (kind == "pairs") {
      Pairs pairs = load_pairs(input, ingest, run);
      humt_texts* t = nullptr;
      check(humt_pairs_prompts(pairs.get(), &t), "prompts");
      texts.reset(t);
    } else {
      texts = load_texts(input, ingest, run);
    }
    BackendPtr b = open_backend(backend, cache, run);
    char* raw = nullptr;
    char* tsv = nullptr;
    check(humt_topics(texts.get(), b.get(), k, *seed, &raw, &tsv), "topics");
    const json report = json::parse(take(raw));
    const std::string exemplar_tsv = take(tsv);
    run.backend(describe(b.get()));
    emit_json(out, report, run);
    if (!exemplars.empty()) {
      write_file(exemplars, exemplar_tsv);
      run.output(exemplars);
    } else if (!out.empty()) {
      std::cout << exemplar_tsv;
    }
    if (!out.empty()) run.write_manifest(out);
    return kExitOk;
  }
};

struct EpsilonCmd {
  std::string reduced, baseline, dimension = "humt", direction = "baseline_minus_reduced", out;
  double epsilon = 0.02;

  void add(CLI::App& app) {
    auto* s = app.add_subcommand("epsilon-filter", "Prompts where two models' tone differs by more than epsilon");
    s->add_option("--reduced", reduced, "Scores of the tone-reduced model's outputs, keyed by prompt")->required();
    s->add_option("--baseline", baseline, "Scores of the baseline model's outputs, keyed by prompt")->required();
    s->add_option("--dimension", dimension, "Dimension compared");
    s->add_option("--epsilon", epsilon, "Strict margin");
    s->add_option("--direction", direction, "baseline_minus_reduced or reduced_minus_baseline")
        ->check(CLI::IsMember({"baseline_minus_reduced", "reduced_minus_baseline"}));
    s->add_option("--out", out, "JSON report (stdout when absent)");
  }

  int run(const CLI::App& sub) {
    Run run("epsilon-filter", sub);
    Scores a = load_scores(reduced, run);
    Scores b = load_scores(baseline, run);
    char* raw = nullptr;
    check(humt_epsilon_filter(a.get(), b.get(), dimension.c_str(), epsilon, direction.c_str(), &raw),
          "epsilon-filter");
    const json report = json::parse(take(raw));
    if (!out.empty()) {
      std::cerr << "kept " << report.at("kept") << " of " << report.at("shared_prompts") << " prompts\n";
    }
    emit_json(out, report, run);
    if (!out.empty()) run.write_manifest(out);
    return kExitOk;
  }
};

struct PrepareCmd {
  std::string input, moderation = "pass", flagged_ids, on_failure = "keep", out, train_out, test_out;
  IngestFlags ingest;
  bool dedup = false;
  int attempts = 3;
  std::optional<double> split_ratio;
  std::optional<std::uint64_t> seed;

  void add(CLI::App& app) {
    auto* s = app.add_subcommand("prepare", "Dedup, moderate and split a preference pair corpus");
    s->add_option("--input", input, "Pair corpus")->required();
    ingest.add(s);
    s->add_flag("--dedup", dedup, "Keep the first pair per normalized prompt");
    s->add_option("--moderation", moderation, "pass, ids or remote")->check(CLI::IsMember({"pass", "ids", "remote"}));
    s->add_option("--flagged-ids", flagged_ids, "One pair id per line (with --moderation ids)");
    s->add_option("--attempts", attempts, "Moderation attempts per pair")->check(CLI::PositiveNumber);
    s->add_option("--on-failure", on_failure, "keep or drop pairs whose moderation call failed")
        ->check(CLI::IsMember({"keep", "drop"}));
    s->add_option("--split-ratio", split_ratio, "Train fraction of prompts")->check(CLI::Range(0.0, 1.0));
    s->add_option("--seed", seed, "Split seed (required with --split-ratio)");
    s->add_option("--train-out", train_out, "Train pairs JSONL (default <out>.train.jsonl)");
    s->add_option("--test-out", test_out, "Test pairs JSONL (default <out>.test.jsonl)");
    s->add_option("--out", out, "Cleaned pair JSONL")->required();
  }

  int run(const CLI::App& sub) {
    if (split_ratio && !seed) throw Failure("--seed is required with --split-ratio");
    if (moderation == "ids" && flagged_ids.empty()) throw Failure("--moderation ids needs --flagged-ids");
    Run run("prepare", sub);
    std::size_t rejected = 0;
    Pairs pairs = load_pairs(input, ingest, run, &rejected);
    run.extra()["ingested"] = humt_pairs_size(pairs.get());
    run.extra()["ingest_rejections"] = rejected;
    if (dedup) {
      humt_pairs* d = nullptr;
      std::size_t removed = 0;
      check(humt_pairs_dedup(pairs.get(), &d, &removed), "dedup");
      pairs.reset(d);
      run.extra()["dedup_removed"] = removed;
    }
    json mod_options{{"client", moderation}, {"attempts", attempts}, {"on_failure", on_failure}};
    if (!flagged_ids.empty()) {
      mod_options["ids_file"] = flagged_ids;
      run.input(flagged_ids);
    }
    humt_pairs* m = nullptr;
    char* mod_raw = nullptr;
    check(humt_pairs_moderate(pairs.get(), mod_options.dump().c_str(), &m, &mod_raw), "moderation");
    pairs.reset(m);
    const json mod = json::parse(take(mod_raw));
    for (const auto& w : mod.at("warnings")) std::cerr << "warning: " << w.get<std::string>() << "\n";
    run.extra()["moderation"] = mod;
    check(humt_pairs_write(pairs.get(), out.c_str()), "write " + out);
    run.output(out);
    if (split_ratio) {
      const std::string train = train_out.empty() ? out + ".train.jsonl" : train_out;
      const std::string test = test_out.empty() ? out + ".test.jsonl" : test_out;
      char* split_raw = nullptr;
      check(humt_pairs_split_write(pairs.get(), *split_ratio, *seed, train.c_str(), test.c_str(), &split_raw),
            "split");
      json split = json::parse(take(split_raw));
      split.erase("assignment");
      run.extra()["split"] = split;
      run.output(train);
      run.output(test);
    }
    run.extra()["kept"] = humt_pairs_size(pairs.get());
    run.write_manifest(out);
    return rejected == 0 && mod.at("failed").empty() ? kExitOk : kExitPartial;
  }
};

struct CacheCmd {
  std::string path;
  CLI::App* stats = nullptr;
  CLI::App* purge = nullptr;

  void add(CLI::App& app) {
    auto* s = app.add_subcommand("cache", "Inspect or clear a log-probability cache");
    s->require_subcommand(1);
    stats = s->add_subcommand("stats", "Entry count and size");
    purge = s->add_subcommand("purge", "Delete the cache file");
    for (auto* c : {stats, purge}) c->add_option("--cache", path, "Cache file")->required();
  }

  int run() {
    if (stats->parsed()) {
      char* raw = nullptr;
      check(humt_cache_stats(path.c_str(), &raw), "cache stats");
      std::cout << json::parse(take(raw)).dump(2) << "\n";
    } else {
      check(humt_cache_purge(path.c_str()), "cache purge");
    }
    return kExitOk;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tone scoring and preference-dataset toolkit"};
  app.set_config("--config", "", "TOML/INI file overriding flag defaults");
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();
  unsigned jobs = 1;
  app.add_option("--jobs", jobs, "Worker threads for scoring")->check(CLI::PositiveNumber);
  app.set_version_flag("--version", std::string(humt_version()));

  ScoreCmd score;
  AnalyzePrefsCmd analyze;
  CorrelateCmd correlate;
  BuildDpoCmd build;
  ValidateCmd validate;
  LexiconCmd lexicon;
  TermCmd term;
  DiscoverCmd discover;
  TopicsCmd topics;
  EpsilonCmd epsilon;
  PrepareCmd prepare;
  CacheCmd cache;
  score.add(app);
  analyze.add(app);
  correlate.add(app);
  build.add(app);
  validate.add(app);
  lexicon.add(app);
  term.add(app);
  discover.add(app);
  topics.add(app);
  epsilon.add(app);
  prepare.add(app);
  cache.add(app);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitFatal;
  }

  try {
    const CLI::App* sub = app.get_subcommands().front();
    const std::string name = sub->get_name();
    if (name == "score") return score.run(*sub, jobs);
    if (name == "analyze-prefs") return analyze.run(*sub);
    if (name == "correlate") return correlate.run(*sub);
    if (name == "build-dpo") return build.run(*sub);
    if (name == "validate") return validate.run(*sub);
    if (name == "lexicon") return lexicon.run(*sub);
    if (name == "term") return term.run(*sub);
    if (name == "discover") return discover.run(*sub);
    if (name == "topics") return topics.run(*sub);
    if (name == "epsilon-filter") return epsilon.run(*sub);
    if (name == "prepare") return prepare.run(*sub);
    if (name == "cache") return cache.run();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFatal;
  }
  return kExitFatal;
}
