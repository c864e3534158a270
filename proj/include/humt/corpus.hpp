#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace humt {

struct TextRecord {
  std::string text_id;
  std::string text;
  std::string source;
  std::map<std::string, std::string> extra;

  bool operator==(const TextRecord&) const = default;
};

struct PreferencePairRecord {
  std::string pair_id;
  std::string prompt;
  std::string chosen;
  std::string rejected;
  std::string source;
  std::optional<std::string> topic;
  std::map<std::string, std::string> demographics;
  std::optional<std::string> model_chosen;
  std::optional<std::string> model_rejected;

  bool operator==(const PreferencePairRecord&) const = default;
};

enum class InputFormat { jsonl, csv };
InputFormat parse_input_format(std::string_view s);
/// jsonl for .jsonl/.json, csv for .csv; otherwise jsonl.
InputFormat guess_input_format(const std::filesystem::path& path);

/// Logical field name -> column/key in the input. Unmapped logical fields use
/// their own name. "demographics" may map to a JSON object key or to a
/// comma-separated list of columns.
using FieldMapping = std::map<std::string, std::string>;
FieldMapping parse_field_mapping(std::string_view spec);  // "prompt=question,chosen=a"

struct Rejection {
  std::size_t line = 0;  // 1-based physical line of the row start
  std::string reason;
};

template <typename Record>
struct Corpus {
  std::vector<Record> records;
  std::vector<Rejection> rejections;
  std::size_t size() const { return records.size(); }
};

using TextCorpus = Corpus<TextRecord>;
using PairCorpus = Corpus<PreferencePairRecord>;

struct IngestOptions {
  InputFormat format = InputFormat::jsonl;
  FieldMapping mapping;
  /// Source tag; defaults to the file stem.
  std::string source;
};

/// Every row becomes one record or one rejection. Missing ids are synthesized
/// as "source:line". An unparseable row (bad JSON, unbalanced CSV quoting,
/// wrong column count) aborts with an ingest error citing its byte offset.
PairCorpus ingest_pairs(const std::filesystem::path& path, const IngestOptions& options);
TextCorpus ingest_texts(const std::filesystem::path& path, const IngestOptions& options);

/// Splits CSV text into rows of fields (RFC 4180 quoting); reports the byte
/// offset and line of every row start.
struct CsvRow {
  std::vector<std::string> fields;
  std::size_t offset = 0;
  std::size_t line = 0;
};
std::vector<CsvRow> parse_csv(std::string_view data);

nlohmann::ordered_json to_json(const PreferencePairRecord& r);
nlohmann::ordered_json to_json(const TextRecord& r);
std::string to_jsonl(const PairCorpus& c);
std::string to_jsonl(const TextCorpus& c);
std::string rejections_jsonl(const std::vector<Rejection>& rejections);

/// Whitespace-normalized prompt, the unit of dedup and split.
std::string prompt_key(const PreferencePairRecord& r);
std::string prompt_key(const TextRecord& r);

template <typename Record>
struct DedupResult {
  Corpus<Record> corpus;
  std::size_t removed = 0;
};

/// Keeps the first record per normalized prompt (text for TextRecord).
DedupResult<PreferencePairRecord> dedup(const PairCorpus& c);
DedupResult<TextRecord> dedup(const TextCorpus& c);

struct ModerationVerdict {
  bool flagged = false;
};

/// Pluggable safety classifier. check() may throw to signal a failed call.
class ModerationClient {
 public:
  virtual ~ModerationClient() = default;
  virtual ModerationVerdict check(const PreferencePairRecord& record) = 0;
};

class PassThroughModeration : public ModerationClient {
 public:
  ModerationVerdict check(const PreferencePairRecord&) override { return {}; }
};

/// Flags a fixed set of pair ids; reads one id per line from a file.
class FlaggedIdModeration : public ModerationClient {
 public:
  explicit FlaggedIdModeration(std::set<std::string> ids) : ids_(std::move(ids)) {}
  static FlaggedIdModeration from_file(const std::filesystem::path& path);
  ModerationVerdict check(const PreferencePairRecord& r) override { return {ids_.count(r.pair_id) != 0}; }

 private:
  std::set<std::string> ids_;
};

enum class FailurePolicy { keep, drop };

struct ModerationOptions {
  int attempts = 3;
  FailurePolicy on_failure = FailurePolicy::keep;
};

struct ModerationResult {
  PairCorpus corpus;
  std::vector<std::string> flagged;
  std::vector<std::string> failed;
  std::vector<std::string> warnings;
};

ModerationResult moderation_filter(const PairCorpus& c, ModerationClient& client,
                                   ModerationOptions options = {});

enum class Side { train, test };

struct SplitAssignment {
  std::map<std::string, Side> sides;  // pair_id -> side
  double ratio = 0.9;
  std::uint64_t seed = 0;
  std::size_t train_prompts = 0;
  std::size_t test_prompts = 0;

  nlohmann::ordered_json to_json() const;
};

/// Prompt-level split: distinct normalized prompts are sorted, shuffled with
/// the counter-based generator, and the first round(ratio * prompts) (clamped
/// to [1, prompts - 1]) go to train. Every pair follows its prompt.
SplitAssignment split(const PairCorpus& c, double ratio, std::uint64_t seed);

}  // namespace humt
