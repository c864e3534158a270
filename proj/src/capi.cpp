#include "humt/humt.h"

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <memory>
#include <string>

#include <nlohmann/json.hpp>

#include "humt/analysis.hpp"
#include "humt/cache.hpp"
#include "humt/corpus.hpp"
#include "humt/discovery.hpp"
#include "humt/dumt.hpp"
#include "humt/error.hpp"
#include "humt/io.hpp"
#include "humt/remote.hpp"
#include "humt/stats.hpp"
#include "humt/text.hpp"
#include "humt/tone.hpp"

struct humt_registry {
  humt::DimensionRegistry registry;
};

struct humt_backend {
  std::shared_ptr<humt::Backend> backend;
};

struct humt_pairs {
  humt::PairCorpus corpus;
};

struct humt_texts {
  humt::TextCorpus corpus;
};

struct humt_scores {
  humt::analysis::ScoreTable table;
};

namespace {

thread_local std::string last_error;

void set_error(const std::string& message) { last_error = message; }

// Runs `body`, translating exceptions into status codes and the thread's last
// error message.
template <typename F>
int guarded(F&& body) {
  last_error.clear();
  try {
    body();
    return HUMT_OK;
  } catch (const humt::Error& e) {
    set_error(e.what());
    return static_cast<int>(e.code());
  } catch (const nlohmann::json::exception& e) {
    set_error(std::string("invalid JSON: ") + e.what());
    return HUMT_E_INVALID_ARGUMENT;
  } catch (const std::bad_alloc&) {
    set_error("out of memory");
    return HUMT_E_INTERNAL;
  } catch (const std::exception& e) {
    set_error(e.what());
    return HUMT_E_INTERNAL;
  }
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.data(), s.size());
  out[s.size()] = '\0';
  return out;
}

void put(char** out, const std::string& s) {
  if (out != nullptr) *out = dup_string(s);
}

template <typename T>
void require(const T* p, const char* what) {
  if (p == nullptr) throw humt::invalid_argument(std::string(what) + " must not be null");
}

nlohmann::json parse_options(const char* json) {
  if (json == nullptr || *json == '\0') return nlohmann::json::object();
  auto j = nlohmann::json::parse(json);
  if (!j.is_object()) throw humt::invalid_argument("options must be a JSON object");
  return j;
}

humt::ScoringConfig scoring_config(const nlohmann::json& o) {
  humt::ScoringConfig c;
  c.truncation_limit = o.value("truncation_limit", c.truncation_limit);
  c.repetitions = o.value("repetitions", c.repetitions);
  if (o.contains("aggregation") && !o.at("aggregation").is_null()) {
    c.aggregation = humt::parse_aggregation(o.at("aggregation").get<std::string>());
  }
  c.validate();
  return c;
}

humt::IngestOptions ingest_options(const char* path, const nlohmann::json& o) {
  humt::IngestOptions opts;
  opts.format = o.contains("format") ? humt::parse_input_format(o.at("format").get<std::string>())
                                     : humt::guess_input_format(path);
  if (o.contains("mapping")) opts.mapping = humt::parse_field_mapping(o.at("mapping").get<std::string>());
  opts.source = o.value("source", std::string{});
  return opts;
}

nlohmann::ordered_json spec_json(const humt::DimensionSpec& s) {
  nlohmann::ordered_json j;
  j["name"] = s.name;
  j["positive"] = s.positive_phrases;
  j["negative"] = s.negative_phrases;
  j["aggregation"] = std::string(humt::to_string(s.aggregation));
  return j;
}

void copy_test(const humt::stats::TestResult& t, humt_test* out) {
  out->statistic = t.statistic;
  out->degrees_of_freedom = t.degrees_of_freedom;
  out->p_value = t.p_value;
}

int score_identified(humt_backend* b, const humt_registry* r, const std::vector<humt::IdentifiedText>& texts,
                     const char* dimensions, const char* options_json, humt_scores** out, char** report_json) {
  return guarded([&] {
    require(b, "backend");
    require(r, "registry");
    require(out, "out");
    const auto options = parse_options(options_json);
    const auto config = scoring_config(options);
    const auto specs = r->registry.select(dimensions == nullptr ? "humt" : dimensions);
    humt::BatchOptions batch;
    batch.jobs = std::max(1u, options.value("jobs", 1u));
    batch.fail_fast = options.value("fail_fast", false);
    const auto result = humt::score_batch(texts, specs, config, *b->backend, batch);
    std::vector<std::string> dims;
    for (const auto& s : specs) dims.push_back(s.name);
    auto table = std::make_unique<humt_scores>();
    table->table = humt::analysis::ScoreTable(result.rows, dims);
    // A text whose every dimension failed still gets a row of empty cells.
    for (const auto& t : texts) table->table.ensure_row(t.id);
    nlohmann::ordered_json report;
    report["texts"] = texts.size();
    report["rows"] = result.rows.size();
    nlohmann::ordered_json failures = nlohmann::ordered_json::array();
    for (const auto& f : result.failures) {
      failures.push_back({{"text_id", f.text_id}, {"dimension", f.dimension}, {"message", f.message}});
    }
    report["failures"] = std::move(failures);
    report["warnings"] = result.warnings;
    put(report_json, report.dump());
    *out = table.release();
  });
}

}  // namespace

extern "C" {

const char* humt_version(void) { return "1.0.0"; }

const char* humt_last_error(void) { return last_error.c_str(); }

const char* humt_status_name(int status) {
  if (status == HUMT_OK) return "ok";
  if (status == HUMT_E_INTERNAL) return "internal";
  if (status >= HUMT_E_INVALID_ARGUMENT && status <= HUMT_E_NOT_FOUND) {
    return humt::error_code_name(static_cast<humt::ErrorCode>(status));
  }
  return "unknown";
}

void humt_string_free(char* s) { std::free(s); }

int humt_registry_builtin(humt_registry** out) {
  return guarded([&] {
    require(out, "out");
    *out = new humt_registry{humt::DimensionRegistry::builtin()};
  });
}

int humt_registry_from_file(const char* path, humt_registry** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new humt_registry{humt::DimensionRegistry::from_file(path)};
  });
}

void humt_registry_free(humt_registry* r) { delete r; }

int humt_registry_describe(const humt_registry* r, char** json_out) {
  return guarded([&] {
    require(r, "registry");
    nlohmann::ordered_json j = nlohmann::ordered_json::array();
    for (const auto& s : r->registry.specs()) j.push_back(spec_json(s));
    put(json_out, j.dump());
  });
}

int humt_backend_table_from_file(const char* path, humt_backend** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new humt_backend{humt::TableBackend::from_file(path)};
  });
}

int humt_backend_table_from_json(const char* json, humt_backend** out) {
  return guarded([&] {
    require(json, "json");
    require(out, "out");
    *out = new humt_backend{humt::TableBackend::from_json(nlohmann::json::parse(json))};
  });
}

int humt_backend_remote_from_env(humt_backend** out) {
  return guarded([&] {
    require(out, "out");
    *out = new humt_backend{std::make_shared<humt::RemoteBackend>(humt::RemoteConfig::from_env())};
  });
}

int humt_backend_with_cache(humt_backend* inner, const char* cache_path, humt_backend** out) {
  return guarded([&] {
    require(inner, "backend");
    require(cache_path, "cache_path");
    require(out, "out");
    *out = new humt_backend{humt::with_cache(inner->backend, cache_path)};
  });
}

void humt_backend_free(humt_backend* b) { delete b; }

int humt_backend_describe(const humt_backend* b, char** json_out) {
  return guarded([&] {
    require(b, "backend");
    auto j = b->backend->descriptor().to_json();
    if (const auto* cached = dynamic_cast<const humt::CachedBackend*>(b->backend.get())) {
      j["cache"] = {{"path", cached->cache().path().string()},
                    {"hits", cached->hits()},
                    {"misses", cached->misses()},
                    {"entries", cached->cache().size()}};
    }
    put(json_out, j.dump());
  });
}

int humt_backend_sequence_logprob(humt_backend* b, const char* text, double* out) {
  return guarded([&] {
    require(b, "backend");
    require(text, "text");
    require(out, "out");
    *out = b->backend->sequence_logprob(text);
  });
}

int humt_score_text(humt_backend* b, const humt_registry* r, const char* dimension, const char* text,
                    const char* options_json, double* out) {
  return guarded([&] {
    require(b, "backend");
    require(r, "registry");
    require(dimension, "dimension");
    require(text, "text");
    require(out, "out");
    const auto config = scoring_config(parse_options(options_json));
    *out = humt::score("text", text, r->registry.at(dimension), config, *b->backend).value;
  });
}

int humt_pairs_ingest(const char* path, const char* options_json, humt_pairs** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new humt_pairs{humt::ingest_pairs(path, ingest_options(path, parse_options(options_json)))};
  });
}

int humt_texts_ingest(const char* path, const char* options_json, humt_texts** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new humt_texts{humt::ingest_texts(path, ingest_options(path, parse_options(options_json)))};
  });
}

void humt_pairs_free(humt_pairs* p) { delete p; }
void humt_texts_free(humt_texts* t) { delete t; }
size_t humt_pairs_size(const humt_pairs* p) { return p == nullptr ? 0 : p->corpus.size(); }
size_t humt_texts_size(const humt_texts* t) { return t == nullptr ? 0 : t->corpus.size(); }

int humt_pairs_rejections(const humt_pairs* p, char** jsonl_out) {
  return guarded([&] {
    require(p, "pairs");
    put(jsonl_out, humt::rejections_jsonl(p->corpus.rejections));
  });
}

int humt_texts_rejections(const humt_texts* t, char** jsonl_out) {
  return guarded([&] {
    require(t, "texts");
    put(jsonl_out, humt::rejections_jsonl(t->corpus.rejections));
  });
}

int humt_pairs_write(const humt_pairs* p, const char* path) {
  return guarded([&] {
    require(p, "pairs");
    require(path, "path");
    humt::io::write_atomic(path, humt::to_jsonl(p->corpus));
  });
}

int humt_texts_write(const humt_texts* t, const char* path) {
  return guarded([&] {
    require(t, "texts");
    require(path, "path");
    humt::io::write_atomic(path, humt::to_jsonl(t->corpus));
  });
}

int humt_pairs_dedup(const humt_pairs* p, humt_pairs** out, size_t* removed) {
  return guarded([&] {
    require(p, "pairs");
    require(out, "out");
    auto result = humt::dedup(p->corpus);
    if (removed != nullptr) *removed = result.removed;
    *out = new humt_pairs{std::move(result.corpus)};
  });
}

int humt_texts_dedup(const humt_texts* t, humt_texts** out, size_t* removed) {
  return guarded([&] {
    require(t, "texts");
    require(out, "out");
    auto result = humt::dedup(t->corpus);
    if (removed != nullptr) *removed = result.removed;
    *out = new humt_texts{std::move(result.corpus)};
  });
}

int humt_pairs_prompts(const humt_pairs* p, humt_texts** out) {
  return guarded([&] {
    require(p, "pairs");
    require(out, "out");
    auto texts = std::make_unique<humt_texts>();
    for (const auto& r : p->corpus.records) {
      humt::TextRecord t;
      t.text_id = r.pair_id;
      t.text = r.prompt;
      t.source = r.source;
      if (r.topic) t.extra["topic"] = *r.topic;
      texts->corpus.records.push_back(std::move(t));
    }
    *out = texts.release();
  });
}

int humt_pairs_moderate(const humt_pairs* p, const char* options_json, humt_pairs** out, char** report_json) {
  return guarded([&] {
    require(p, "pairs");
    require(out, "out");
    const auto o = parse_options(options_json);
    const std::string client_name = o.value("client", std::string("pass"));
    std::unique_ptr<humt::ModerationClient> client;
    if (client_name == "pass") {
      client = std::make_unique<humt::PassThroughModeration>();
    } else if (client_name == "ids") {
      client = std::make_unique<humt::FlaggedIdModeration>(
          humt::FlaggedIdModeration::from_file(o.at("ids_file").get<std::string>()));
    } else if (client_name == "remote") {
      client = std::make_unique<humt::RemoteModeration>(humt::RemoteConfig::from_env());
    } else {
      throw humt::invalid_argument("unknown moderation client '" + client_name + "' (expected pass, ids or remote)");
    }
    humt::ModerationOptions options;
    options.attempts = o.value("attempts", options.attempts);
    const std::string policy = o.value("on_failure", std::string("keep"));
    if (policy == "keep") {
      options.on_failure = humt::FailurePolicy::keep;
    } else if (policy == "drop") {
      options.on_failure = humt::FailurePolicy::drop;
    } else {
      throw humt::invalid_argument("on_failure must be keep or drop");
    }
    auto result = humt::moderation_filter(p->corpus, *client, options);
    nlohmann::ordered_json report;
    report["client"] = client_name;
    report["kept"] = result.corpus.size();
    report["flagged"] = result.flagged;
    report["failed"] = result.failed;
    report["warnings"] = result.warnings;
    put(report_json, report.dump());
    *out = new humt_pairs{std::move(result.corpus)};
  });
}

int humt_pairs_split(const humt_pairs* p, double ratio, uint64_t seed, char** json_out) {
  return guarded([&] {
    require(p, "pairs");
    put(json_out, humt::split(p->corpus, ratio, seed).to_json().dump());
  });
}

int humt_score_texts(humt_backend* b, const humt_registry* r, const humt_texts* t, const char* dimensions,
                     const char* options_json, humt_scores** out, char** report_json) {
  if (t == nullptr) {
    set_error("texts must not be null");
    return HUMT_E_INVALID_ARGUMENT;
  }
  return score_identified(b, r, humt::analysis::texts_of(t->corpus), dimensions, options_json, out, report_json);
}

int humt_score_pairs(humt_backend* b, const humt_registry* r, const humt_pairs* p, const char* dimensions,
                     const char* options_json, humt_scores** out, char** report_json) {
  if (p == nullptr) {
    set_error("pairs must not be null");
    return HUMT_E_INVALID_ARGUMENT;
  }
  return score_identified(b, r, humt::analysis::response_texts(p->corpus), dimensions, options_json, out,
                          report_json);
}

int humt_scores_load(const char* path, humt_scores** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new humt_scores{humt::analysis::ScoreTable::load(path)};
  });
}

int humt_scores_write(const humt_scores* s, const char* path) {
  return guarded([&] {
    require(s, "scores");
    require(path, "path");
    const std::filesystem::path p(path);
    humt::io::write_atomic(p, p.extension() == ".jsonl" ? s->table.to_jsonl() : s->table.to_tsv());
  });
}

void humt_scores_free(humt_scores* s) { delete s; }
size_t humt_scores_size(const humt_scores* s) { return s == nullptr ? 0 : s->table.size(); }

int humt_scores_get(const humt_scores* s, const char* text_id, const char* dimension, double* out, int* found) {
  return guarded([&] {
    require(s, "scores");
    require(text_id, "text_id");
    require(dimension, "dimension");
    require(found, "found");
    const auto v = s->table.get(text_id, dimension);
    *found = v ? 1 : 0;
    if (v && out != nullptr) *out = *v;
  });
}

int humt_analyze_prefs(const humt_pairs* p, const humt_scores* s, const char* dimension, int by_topic,
                       char** json_out) {
  return guarded([&] {
    require(p, "pairs");
    require(s, "scores");
    require(dimension, "dimension");
    put(json_out, humt::analysis::analyze_prefs(p->corpus, s->table, dimension, by_topic != 0).dump());
  });
}

int humt_correlate(const humt_scores* s, double alpha, const char* dimensions, char** json_out, char** csv_out) {
  return guarded([&] {
    require(s, "scores");
    std::vector<std::string> dims;
    if (dimensions != nullptr && *dimensions != '\0' && std::string(dimensions) != "all") {
      for (auto& d : humt::text::split(dimensions, ',')) {
        d = humt::text::trim(d);
        if (!d.empty()) dims.push_back(d);
      }
    }
    const auto report = humt::analysis::correlate(s->table, alpha, dims);
    put(json_out, report.dump());
    put(csv_out, humt::analysis::correlation_csv(report));
  });
}

int humt_lexicon_association(const humt_texts* t, const humt_scores* s, const char* dimension,
                             const char* lexicon_path, double max_p, char** json_out) {
  return guarded([&] {
    require(t, "texts");
    require(s, "scores");
    require(dimension, "dimension");
    require(lexicon_path, "lexicon_path");
    const auto lexicon = humt::stats::load_lexicon(lexicon_path);
    put(json_out, humt::analysis::lexicon_association(t->corpus, s->table, dimension, lexicon, max_p).dump());
  });
}

int humt_term_proportion(const humt_texts* t, const char* term, int match, double* out) {
  return guarded([&] {
    require(t, "texts");
    require(term, "term");
    require(out, "out");
    std::vector<std::string> texts;
    texts.reserve(t->corpus.size());
    for (const auto& r : t->corpus.records) texts.push_back(r.text);
    *out = humt::stats::term_proportion(texts, term,
                                        match == 1 ? humt::stats::TermMatch::substring : humt::stats::TermMatch::token);
  });
}

int humt_validate(const char* annotations_path, const humt_scores* s, char** json_out) {
  return guarded([&] {
    require(annotations_path, "annotations_path");
    require(s, "scores");
    put(json_out, humt::analysis::validate(humt::analysis::load_annotations(annotations_path), s->table).dump());
  });
}

int humt_build_dpo(const humt_pairs* p, const humt_scores* s, const char* dimension, const char* variant,
                   double threshold, size_t count, uint64_t seed, const char* out_path, char** manifest_json) {
  return guarded([&] {
    require(p, "pairs");
    require(s, "scores");
    require(dimension, "dimension");
    require(variant, "variant");
    require(out_path, "out_path");
    const auto v = humt::dumt::parse_variant(variant);
    const auto scored = humt::analysis::scored_pairs(p->corpus, s->table, dimension);
    if (!scored.missing.empty()) {
      throw humt::Error(humt::ErrorCode::not_found, std::to_string(scored.missing.size()) +
                                                        " pairs lack scores on both sides, first: " +
                                                        scored.missing.front());
    }
    humt::dumt::BuildConfig config;
    config.threshold = threshold;
    config.pair_count = count;
    config.seed = seed;
    const auto result = humt::dumt::build(v, scored.pairs, config);
    humt::dumt::emit_dpo_jsonl(result, out_path);
    auto manifest = humt::dumt::build_manifest(result, config, {});
    manifest["dimension"] = dimension;
    put(manifest_json, manifest.dump());
  });
}

int humt_epsilon_filter(const humt_scores* reduced, const humt_scores* baseline, const char* dimension,
                        double epsilon, const char* direction, char** json_out) {
  return guarded([&] {
    require(reduced, "reduced");
    require(baseline, "baseline");
    require(dimension, "dimension");
    const auto dir = direction == nullptr ? humt::dumt::EpsilonDirection::baseline_minus_reduced
                                          : humt::dumt::parse_epsilon_direction(direction);
    put(json_out, humt::analysis::epsilon_report(reduced->table, baseline->table, dimension, epsilon, dir).dump());
  });
}

int humt_discover_speakers(const humt_texts* t, humt_backend* b, size_t fill_k, size_t vocab_top, size_t k,
                           uint64_t seed, char** json_out) {
  return guarded([&] {
    require(t, "texts");
    require(b, "backend");
    const auto texts = humt::analysis::texts_of(t->corpus);
    const auto table = humt::discovery::implicit_speakers(texts, *b->backend, fill_k, vocab_top);
    auto j = table.to_json();
    if (k > 0) j["clusters"] = humt::discovery::cluster_speakers(table, *b->backend, k, seed).to_json();
    put(json_out, j.dump());
  });
}

int humt_topics(const humt_texts* prompts, humt_backend* b, size_t k, uint64_t seed, char** json_out,
                char** exemplars_tsv_out) {
  return guarded([&] {
    require(prompts, "prompts");
    require(b, "backend");
    const auto texts = humt::analysis::texts_of(prompts->corpus);
    const auto topics = humt::discovery::topic_clusters(texts, *b->backend, k, seed);
    put(json_out, topics.to_json().dump());
    put(exemplars_tsv_out, topics.exemplars_tsv(texts));
  });
}

int humt_kmeans(const double* points, size_t rows, size_t cols, size_t k, uint64_t seed, size_t max_iter,
                size_t* assignments, char** json_out) {
  return guarded([&] {
    require(points, "points");
    humt::discovery::Matrix m;
    m.rows = rows;
    m.cols = cols;
    m.data.assign(points, points + rows * cols);
    const auto c = humt::discovery::kmeans(m, k, seed, max_iter);
    if (assignments != nullptr) std::copy(c.assignments.begin(), c.assignments.end(), assignments);
    put(json_out, c.to_json().dump());
  });
}

int humt_welch_t(const double* a, size_t na, const double* b, size_t nb, humt_test* out) {
  return guarded([&] {
    require(a, "a");
    require(b, "b");
    require(out, "out");
    copy_test(humt::stats::welch_t({a, na}, {b, nb}), out);
  });
}

int humt_pearson_r(const double* x, const double* y, size_t n, double* r, humt_test* out) {
  return guarded([&] {
    require(x, "x");
    require(y, "y");
    const auto c = humt::stats::pearson_r({x, n}, {y, n});
    if (r != nullptr) *r = c.r;
    if (out != nullptr) copy_test(c.test, out);
  });
}

int humt_bh_adjust(const double* p, size_t n, double alpha, double* adjusted, int* reject) {
  return guarded([&] {
    require(p, "p");
    const auto bh = humt::stats::bh_adjust({p, n}, alpha);
    for (std::size_t i = 0; i < n; ++i) {
      if (adjusted != nullptr) adjusted[i] = bh.adjusted[i];
      if (reject != nullptr) reject[i] = bh.reject[i] ? 1 : 0;
    }
  });
}

int humt_chi_square(const double* table, size_t rows, size_t cols, int yates, humt_test* out) {
  return guarded([&] {
    require(table, "table");
    require(out, "out");
    std::vector<std::vector<double>> t(rows, std::vector<double>(cols));
    for (std::size_t i = 0; i < rows; ++i) {
      for (std::size_t k = 0; k < cols; ++k) t[i][k] = table[i * cols + k];
    }
    copy_test(humt::stats::chi_square_independence(t, yates != 0), out);
  });
}

int humt_fleiss_kappa(const double* counts, size_t items, size_t categories, double* out) {
  return guarded([&] {
    require(counts, "counts");
    require(out, "out");
    std::vector<std::vector<double>> c(items, std::vector<double>(categories));
    for (std::size_t i = 0; i < items; ++i) {
      for (std::size_t k = 0; k < categories; ++k) c[i][k] = counts[i * categories + k];
    }
    *out = humt::stats::fleiss_kappa(c);
  });
}

int humt_matched_mean_diff(const double* a, const double* b, size_t n, char** json_out) {
  return guarded([&] {
    require(a, "a");
    require(b, "b");
    put(json_out, humt::stats::matched_mean_diff({a, n}, {b, n}).to_json().dump());
  });
}

double humt_percent_likelihood_diff(double mean_a, double mean_b) { return std::expm1(mean_a - mean_b); }

int humt_pairs_split_write(const humt_pairs* p, double ratio, uint64_t seed, const char* train_path,
                           const char* test_path, char** json_out) {
  return guarded([&] {
    require(p, "pairs");
    require(train_path, "train_path");
    require(test_path, "test_path");
    const auto assignment = humt::split(p->corpus, ratio, seed);
    humt::PairCorpus train;
    humt::PairCorpus test;
    for (const auto& r : p->corpus.records) {
      (assignment.sides.at(r.pair_id) == humt::Side::train ? train : test).records.push_back(r);
    }
    humt::io::write_atomic(train_path, humt::to_jsonl(train));
    humt::io::write_atomic(test_path, humt::to_jsonl(test));
    put(json_out, assignment.to_json().dump());
  });
}

int humt_write_file_atomic(const char* path, const char* data, size_t len) {
  return guarded([&] {
    require(path, "path");
    if (len > 0) require(data, "data");
    humt::io::write_atomic(path, std::string_view(data == nullptr ? "" : data, len));
  });
}

int humt_file_sha256(const char* path, char** hex_out) {
  return guarded([&] {
    require(path, "path");
    put(hex_out, humt::io::file_digest(path));
  });
}

int humt_sha256(const char* data, size_t len, char** hex_out) {
  return guarded([&] {
    if (len > 0) require(data, "data");
    put(hex_out, humt::io::sha256_hex(std::string_view(data == nullptr ? "" : data, len)));
  });
}

int humt_cache_stats(const char* path, char** json_out) {
  return guarded([&] {
    require(path, "path");
    const auto s = humt::cache_stats(path);
    nlohmann::ordered_json j;
    j["path"] = path;
    j["entries"] = s.entries;
    j["file_bytes"] = s.file_bytes;
    j["torn_bytes"] = s.torn_bytes;
    j["protocol_version"] = humt::kCacheProtocolVersion;
    put(json_out, j.dump());
  });
}

int humt_cache_purge(const char* path) {
  return guarded([&] {
    require(path, "path");
    humt::cache_purge(path);
  });
}

}  // extern "C"
