#ifndef HUMT_H
#define HUMT_H

/* C interface to libhumt. Every fallible call returns a humt_status; on
 * failure humt_last_error() holds the message for the calling thread until its
 * next call into the library. Strings returned through char** out-parameters
 * are owned by the caller and released with humt_string_free. */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define HUMT_API __declspec(dllexport)
#else
#define HUMT_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum humt_status {
  HUMT_OK = 0,
  HUMT_E_INVALID_ARGUMENT = 1,
  HUMT_E_UNSUPPORTED_CAPABILITY = 2,
  HUMT_E_PROTOCOL = 3,
  HUMT_E_TRANSPORT = 4,
  HUMT_E_IO = 5,
  HUMT_E_INGEST = 6,
  HUMT_E_SCORING = 7,
  HUMT_E_DEGENERATE = 8,
  HUMT_E_POOL_TOO_SMALL = 9,
  HUMT_E_NOT_FOUND = 10,
  HUMT_E_INTERNAL = 99
} humt_status;

typedef struct humt_registry humt_registry;
typedef struct humt_backend humt_backend;
typedef struct humt_pairs humt_pairs;
typedef struct humt_texts humt_texts;
typedef struct humt_scores humt_scores;

typedef struct humt_test {
  double statistic;
  double degrees_of_freedom;
  double p_value;
} humt_test;

HUMT_API const char* humt_version(void);
HUMT_API const char* humt_last_error(void);
HUMT_API const char* humt_status_name(int status);
HUMT_API void humt_string_free(char* s);

/* Dimension registry: the built-in dimensions, optionally extended by a JSON
 * file {"dimensions": [{"name", "positive", "negative", "aggregation"}]}. */
HUMT_API int humt_registry_builtin(humt_registry** out);
HUMT_API int humt_registry_from_file(const char* path, humt_registry** out);
HUMT_API void humt_registry_free(humt_registry* r);
/* JSON array of dimension specs. */
HUMT_API int humt_registry_describe(const humt_registry* r, char** json_out);

/* Backends. A cached backend keeps its inner backend alive; both handles may be
 * freed independently. */
HUMT_API int humt_backend_table_from_file(const char* path, humt_backend** out);
HUMT_API int humt_backend_table_from_json(const char* json, humt_backend** out);
/* Reads HUMT_ENDPOINT, HUMT_API_KEY, HUMT_MODEL, HUMT_DOCUMENT_START,
 * HUMT_MASK_TOKEN and HUMT_MAX_IN_FLIGHT. */
HUMT_API int humt_backend_remote_from_env(humt_backend** out);
HUMT_API int humt_backend_with_cache(humt_backend* inner, const char* cache_path, humt_backend** out);
HUMT_API void humt_backend_free(humt_backend* b);
/* Descriptor JSON; cached backends add {"cache": {"path", "hits", "misses", "entries"}}. */
HUMT_API int humt_backend_describe(const humt_backend* b, char** json_out);
HUMT_API int humt_backend_sequence_logprob(humt_backend* b, const char* text, double* out);

/* Scoring options JSON (every key optional):
 *   {"truncation_limit": 300, "repetitions": 1, "aggregation": "sum_literal" |
 *    "mean_normalized", "jobs": 1, "fail_fast": false} */
HUMT_API int humt_score_text(humt_backend* b, const humt_registry* r, const char* dimension, const char* text,
                             const char* options_json, double* out);

/* Corpora. Ingest options JSON: {"format": "jsonl" | "csv", "mapping":
 * "logical=column,...", "source": "tag"}; format defaults from the extension. */
HUMT_API int humt_pairs_ingest(const char* path, const char* options_json, humt_pairs** out);
HUMT_API int humt_texts_ingest(const char* path, const char* options_json, humt_texts** out);
HUMT_API void humt_pairs_free(humt_pairs* p);
HUMT_API void humt_texts_free(humt_texts* t);
HUMT_API size_t humt_pairs_size(const humt_pairs* p);
HUMT_API size_t humt_texts_size(const humt_texts* t);
/* Rejection report as JSONL {"line", "reason"}. */
HUMT_API int humt_pairs_rejections(const humt_pairs* p, char** jsonl_out);
HUMT_API int humt_texts_rejections(const humt_texts* t, char** jsonl_out);
HUMT_API int humt_pairs_write(const humt_pairs* p, const char* path);
HUMT_API int humt_texts_write(const humt_texts* t, const char* path);
HUMT_API int humt_pairs_dedup(const humt_pairs* p, humt_pairs** out, size_t* removed);
HUMT_API int humt_texts_dedup(const humt_texts* t, humt_texts** out, size_t* removed);
/* The prompt of every pair as a text corpus keyed by pair id. */
HUMT_API int humt_pairs_prompts(const humt_pairs* p, humt_texts** out);
/* Moderation options JSON: {"client": "pass" | "ids" | "remote", "ids_file":
 * path, "attempts": 3, "on_failure": "keep" | "drop"}. The report lists
 * flagged and failed pair ids plus warnings. */
HUMT_API int humt_pairs_moderate(const humt_pairs* p, const char* options_json, humt_pairs** out,
                                 char** report_json);
/* Prompt-level split assignment as JSON. */
HUMT_API int humt_pairs_split(const humt_pairs* p, double ratio, uint64_t seed, char** json_out);

/* Batch scoring. dimensions is "all" or a comma-separated list. The report
 * JSON holds {"rows", "failures": [...], "warnings": [...]}; any failure with
 * fail_fast unset still yields a table with the failed cells empty. */
HUMT_API int humt_score_texts(humt_backend* b, const humt_registry* r, const humt_texts* t,
                              const char* dimensions, const char* options_json, humt_scores** out,
                              char** report_json);
/* Scores both responses of every pair as "<pair_id>/chosen" and "<pair_id>/rejected". */
HUMT_API int humt_score_pairs(humt_backend* b, const humt_registry* r, const humt_pairs* p,
                              const char* dimensions, const char* options_json, humt_scores** out,
                              char** report_json);

/* Score tables: TSV (wide) or JSONL (long), chosen by extension on write and
 * by content on load. */
HUMT_API int humt_scores_load(const char* path, humt_scores** out);
HUMT_API int humt_scores_write(const humt_scores* s, const char* path);
HUMT_API void humt_scores_free(humt_scores* s);
HUMT_API size_t humt_scores_size(const humt_scores* s);
/* found is set to 0 when the cell is absent; out is then untouched. */
HUMT_API int humt_scores_get(const humt_scores* s, const char* text_id, const char* dimension, double* out,
                             int* found);

/* Analyses; every report is JSON. */
HUMT_API int humt_analyze_prefs(const humt_pairs* p, const humt_scores* s, const char* dimension, int by_topic,
                                char** json_out);
/* dimensions may be NULL for every dimension in the table. csv_out may be NULL. */
HUMT_API int humt_correlate(const humt_scores* s, double alpha, const char* dimensions, char** json_out,
                            char** csv_out);
HUMT_API int humt_lexicon_association(const humt_texts* t, const humt_scores* s, const char* dimension,
                                      const char* lexicon_path, double max_p, char** json_out);
/* match: 0 token, 1 substring. */
HUMT_API int humt_term_proportion(const humt_texts* t, const char* term, int match, double* out);
HUMT_API int humt_validate(const char* annotations_path, const humt_scores* s, char** json_out);

/* variant: "tone", "random" or "maxtone". Writes the DPO JSONL atomically and
 * returns the build manifest. */
HUMT_API int humt_build_dpo(const humt_pairs* p, const humt_scores* s, const char* dimension, const char* variant,
                            double threshold, size_t count, uint64_t seed, const char* out_path,
                            char** manifest_json);
/* direction: "baseline_minus_reduced" or "reduced_minus_baseline". */
HUMT_API int humt_epsilon_filter(const humt_scores* reduced, const humt_scores* baseline, const char* dimension,
                                 double epsilon, const char* direction, char** json_out);

/* Discovery. k = 0 skips clustering of the discovered words. */
HUMT_API int humt_discover_speakers(const humt_texts* t, humt_backend* b, size_t fill_k, size_t vocab_top,
                                    size_t k, uint64_t seed, char** json_out);
HUMT_API int humt_topics(const humt_texts* prompts, humt_backend* b, size_t k, uint64_t seed, char** json_out,
                         char** exemplars_tsv_out);
/* Row-major rows x cols points; assignments has room for rows entries. */
HUMT_API int humt_kmeans(const double* points, size_t rows, size_t cols, size_t k, uint64_t seed, size_t max_iter,
                         size_t* assignments, char** json_out);

/* Statistics over plain arrays. */
HUMT_API int humt_welch_t(const double* a, size_t na, const double* b, size_t nb, humt_test* out);
HUMT_API int humt_pearson_r(const double* x, const double* y, size_t n, double* r, humt_test* out);
/* reject receives 0/1 flags. */
HUMT_API int humt_bh_adjust(const double* p, size_t n, double alpha, double* adjusted, int* reject);
HUMT_API int humt_chi_square(const double* table, size_t rows, size_t cols, int yates, humt_test* out);
HUMT_API int humt_fleiss_kappa(const double* counts, size_t items, size_t categories, double* out);
HUMT_API int humt_matched_mean_diff(const double* a, const double* b, size_t n, char** json_out);
HUMT_API double humt_percent_likelihood_diff(double mean_a, double mean_b);

/* Writes both sides of the split as pair JSONL files and returns the assignment. */
HUMT_API int humt_pairs_split_write(const humt_pairs* p, double ratio, uint64_t seed, const char* train_path,
                                    const char* test_path, char** json_out);

/* File helpers: atomic write via temp file and rename, SHA-256 hex digests. */
HUMT_API int humt_write_file_atomic(const char* path, const char* data, size_t len);
HUMT_API int humt_file_sha256(const char* path, char** hex_out);
HUMT_API int humt_sha256(const char* data, size_t len, char** hex_out);

/* Cache maintenance. */
HUMT_API int humt_cache_stats(const char* path, char** json_out);
HUMT_API int humt_cache_purge(const char* path);

#ifdef __cplusplus
}
#endif

#endif
