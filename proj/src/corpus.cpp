#include "humt/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "humt/error.hpp"
#include "humt/io.hpp"
#include "humt/rng.hpp"
#include "humt/text.hpp"

namespace humt {

InputFormat parse_input_format(std::string_view s) {
  if (s == "jsonl" || s == "json") return InputFormat::jsonl;
  if (s == "csv") return InputFormat::csv;
  throw invalid_argument("unknown input format '" + std::string(s) + "' (expected jsonl or csv)");
}

InputFormat guess_input_format(const std::filesystem::path& path) {
  return path.extension() == ".csv" ? InputFormat::csv : InputFormat::jsonl;
}

FieldMapping parse_field_mapping(std::string_view spec) {
  FieldMapping m;
  if (text::trim(spec).empty()) return m;
  // Entries are separated by ';' or ',' unless the value itself is a column list,
  // so use ';' when mapping demographics to several columns.
  const char sep = spec.find(';') != std::string_view::npos ? ';' : ',';
  for (const auto& entry : text::split(spec, sep)) {
    if (text::trim(entry).empty()) continue;
    const auto eq = entry.find('=');
    if (eq == std::string::npos) throw invalid_argument("mapping entry '" + entry + "' lacks '='");
    m[text::trim(entry.substr(0, eq))] = text::trim(entry.substr(eq + 1));
  }
  return m;
}

std::vector<CsvRow> parse_csv(std::string_view data) {
  std::vector<CsvRow> rows;
  std::size_t i = 0;
  std::size_t line = 1;
  while (i < data.size()) {
    CsvRow row;
    row.offset = i;
    row.line = line;
    std::string field;
    bool in_quotes = false;
    bool row_done = false;
    while (i < data.size() && !row_done) {
      const char c = data[i];
      if (in_quotes) {
        if (c == '"') {
          if (i + 1 < data.size() && data[i + 1] == '"') {
            field.push_back('"');
            i += 2;
            continue;
          }
          in_quotes = false;
        } else {
          if (c == '\n') ++line;
          field.push_back(c);
        }
        ++i;
        continue;
      }
      switch (c) {
        case '"':
          if (!field.empty()) {
            throw Error(ErrorCode::ingest, "stray quote at byte offset " + std::to_string(i));
          }
          in_quotes = true;
          break;
        case ',':
          row.fields.push_back(std::move(field));
          field.clear();
          break;
        case '\r':
          break;
        case '\n':
          ++line;
          row_done = true;
          break;
        default:
          field.push_back(c);
      }
      ++i;
    }
    if (in_quotes) {
      throw Error(ErrorCode::ingest, "unterminated quoted field in row at byte offset " +
                                         std::to_string(row.offset));
    }
    row.fields.push_back(std::move(field));
    const bool blank = row.fields.size() == 1 && row.fields[0].empty();
    if (!blank) rows.push_back(std::move(row));
  }
  return rows;
}

namespace {

// One input row as key -> value, independent of the file format.
struct RawRow {
  std::size_t line = 0;
  std::map<std::string, nlohmann::json> fields;
};

std::string scalar_string(const nlohmann::json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_null()) return {};
  return v.dump();
}

std::vector<RawRow> read_rows(const std::filesystem::path& path, InputFormat format) {
  const std::string data = io::read_file(path);
  std::vector<RawRow> rows;
  if (format == InputFormat::jsonl) {
    std::size_t offset = 0;
    std::size_t line = 0;
    while (offset < data.size()) {
      ++line;
      auto end = data.find('\n', offset);
      if (end == std::string::npos) end = data.size();
      const std::string_view body(data.data() + offset, end - offset);
      if (!text::trim(body).empty()) {
        nlohmann::json j;
        try {
          j = nlohmann::json::parse(body);
        } catch (const nlohmann::json::parse_error& e) {
          throw Error(ErrorCode::ingest, path.string() + ": malformed JSON at byte offset " +
                                             std::to_string(offset) + " (line " + std::to_string(line) +
                                             "): " + e.what());
        }
        if (!j.is_object()) {
          throw Error(ErrorCode::ingest, path.string() + ": line " + std::to_string(line) +
                                             " at byte offset " + std::to_string(offset) +
                                             " is not a JSON object");
        }
        RawRow row{line, {}};
        for (auto& [k, v] : j.items()) row.fields.emplace(k, v);
        rows.push_back(std::move(row));
      }
      offset = end + 1;
    }
    return rows;
  }
  std::vector<CsvRow> csv;
  try {
    csv = parse_csv(data);
  } catch (const Error& e) {
    throw Error(ErrorCode::ingest, path.string() + ": " + e.what());
  }
  if (csv.empty()) return rows;
  const auto& header = csv.front().fields;
  for (std::size_t r = 1; r < csv.size(); ++r) {
    if (csv[r].fields.size() != header.size()) {
      throw Error(ErrorCode::ingest, path.string() + ": row at byte offset " + std::to_string(csv[r].offset) +
                                         " has " + std::to_string(csv[r].fields.size()) + " fields, header has " +
                                         std::to_string(header.size()));
    }
    RawRow row{csv[r].line, {}};
    for (std::size_t c = 0; c < header.size(); ++c) row.fields.emplace(header[c], csv[r].fields[c]);
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string column_for(const FieldMapping& m, const std::string& field) {
  const auto it = m.find(field);
  return it == m.end() ? field : it->second;
}

const nlohmann::json* get(const RawRow& row, const FieldMapping& m, const std::string& field) {
  const auto it = row.fields.find(column_for(m, field));
  if (it == row.fields.end() || it->second.is_null()) return nullptr;
  return &it->second;
}

std::string source_for(const std::filesystem::path& path, const IngestOptions& options) {
  return options.source.empty() ? path.stem().string() : options.source;
}

}  // namespace

PairCorpus ingest_pairs(const std::filesystem::path& path, const IngestOptions& options) {
  PairCorpus corpus;
  const std::string default_source = source_for(path, options);
  std::unordered_set<std::string> ids;
  for (const auto& row : read_rows(path, options.format)) {
    PreferencePairRecord r;
    std::string missing;
    for (const char* field : {"prompt", "chosen", "rejected"}) {
      if (get(row, options.mapping, field) == nullptr) {
        missing = field;
        break;
      }
    }
    if (!missing.empty()) {
      corpus.rejections.push_back({row.line, "missing field '" + column_for(options.mapping, missing) + "'"});
      continue;
    }
    r.prompt = scalar_string(*get(row, options.mapping, "prompt"));
    r.chosen = scalar_string(*get(row, options.mapping, "chosen"));
    r.rejected = scalar_string(*get(row, options.mapping, "rejected"));
    const auto* source = get(row, options.mapping, "source");
    r.source = source != nullptr && !scalar_string(*source).empty() ? scalar_string(*source) : default_source;
    const auto* id = get(row, options.mapping, "pair_id");
    r.pair_id = id != nullptr && !scalar_string(*id).empty() ? scalar_string(*id)
                                                            : r.source + ":" + std::to_string(row.line);
    if (const auto* v = get(row, options.mapping, "topic")) r.topic = scalar_string(*v);
    if (const auto* v = get(row, options.mapping, "model_chosen")) r.model_chosen = scalar_string(*v);
    if (const auto* v = get(row, options.mapping, "model_rejected")) r.model_rejected = scalar_string(*v);
    const std::string demo_col = column_for(options.mapping, "demographics");
    if (const auto it = row.fields.find(demo_col); it != row.fields.end() && it->second.is_object()) {
      for (const auto& [k, v] : it->second.items()) r.demographics[k] = scalar_string(v);
    } else if (options.mapping.count("demographics") != 0) {
      for (const auto& raw : text::split(demo_col, ',')) {
        const std::string col = text::trim(raw);
        if (const auto c = row.fields.find(col); c != row.fields.end() && !c->second.is_null()) {
          r.demographics[col] = scalar_string(c->second);
        }
      }
    }

    if (text::trim(r.prompt).empty()) {
      corpus.rejections.push_back({row.line, "empty prompt"});
    } else if (text::normalize_whitespace(r.chosen) == text::normalize_whitespace(r.rejected)) {
      corpus.rejections.push_back({row.line, "chosen and rejected are identical"});
    } else if (!ids.insert(r.pair_id).second) {
      corpus.rejections.push_back({row.line, "duplicate pair_id '" + r.pair_id + "'"});
    } else {
      corpus.records.push_back(std::move(r));
    }
  }
  return corpus;
}

TextCorpus ingest_texts(const std::filesystem::path& path, const IngestOptions& options) {
  TextCorpus corpus;
  const std::string default_source = source_for(path, options);
  std::unordered_set<std::string> ids;
  const std::set<std::string> mapped = {column_for(options.mapping, "text_id"),
                                        column_for(options.mapping, "text"),
                                        column_for(options.mapping, "source")};
  for (const auto& row : read_rows(path, options.format)) {
    const auto* body = get(row, options.mapping, "text");
    if (body == nullptr) {
      corpus.rejections.push_back({row.line, "missing field '" + column_for(options.mapping, "text") + "'"});
      continue;
    }
    TextRecord r;
    r.text = scalar_string(*body);
    const auto* source = get(row, options.mapping, "source");
    r.source = source != nullptr && !scalar_string(*source).empty() ? scalar_string(*source) : default_source;
    const auto* id = get(row, options.mapping, "text_id");
    r.text_id = id != nullptr && !scalar_string(*id).empty() ? scalar_string(*id)
                                                            : r.source + ":" + std::to_string(row.line);
    for (const auto& [k, v] : row.fields) {
      if (mapped.count(k) == 0 && !v.is_object() && !v.is_array()) r.extra[k] = scalar_string(v);
    }
    if (!ids.insert(r.text_id).second) {
      corpus.rejections.push_back({row.line, "duplicate text_id '" + r.text_id + "'"});
      continue;
    }
    corpus.records.push_back(std::move(r));
  }
  return corpus;
}

nlohmann::ordered_json to_json(const PreferencePairRecord& r) {
  nlohmann::ordered_json j;
  j["pair_id"] = r.pair_id;
  j["prompt"] = r.prompt;
  j["chosen"] = r.chosen;
  j["rejected"] = r.rejected;
  j["source"] = r.source;
  if (r.topic) j["topic"] = *r.topic;
  if (!r.demographics.empty()) j["demographics"] = r.demographics;
  if (r.model_chosen) j["model_chosen"] = *r.model_chosen;
  if (r.model_rejected) j["model_rejected"] = *r.model_rejected;
  return j;
}

nlohmann::ordered_json to_json(const TextRecord& r) {
  nlohmann::ordered_json j;
  j["text_id"] = r.text_id;
  j["text"] = r.text;
  j["source"] = r.source;
  for (const auto& [k, v] : r.extra) j[k] = v;
  return j;
}

std::string to_jsonl(const PairCorpus& c) {
  std::string out;
  for (const auto& r : c.records) out += to_json(r).dump() + "\n";
  return out;
}

std::string to_jsonl(const TextCorpus& c) {
  std::string out;
  for (const auto& r : c.records) out += to_json(r).dump() + "\n";
  return out;
}

std::string rejections_jsonl(const std::vector<Rejection>& rejections) {
  std::string out;
  for (const auto& r : rejections) {
    nlohmann::ordered_json j;
    j["line"] = r.line;
    j["reason"] = r.reason;
    out += j.dump() + "\n";
  }
  return out;
}

std::string prompt_key(const PreferencePairRecord& r) { return text::normalize_whitespace(r.prompt); }
std::string prompt_key(const TextRecord& r) { return text::normalize_whitespace(r.text); }

namespace {

template <typename Record>
DedupResult<Record> dedup_impl(const Corpus<Record>& c) {
  DedupResult<Record> result;
  result.corpus.rejections = c.rejections;
  std::unordered_set<std::string> seen;
  for (const auto& r : c.records) {
    if (seen.insert(prompt_key(r)).second) {
      result.corpus.records.push_back(r);
    } else {
      ++result.removed;
    }
  }
  return result;
}

}  // namespace

DedupResult<PreferencePairRecord> dedup(const PairCorpus& c) { return dedup_impl(c); }
DedupResult<TextRecord> dedup(const TextCorpus& c) { return dedup_impl(c); }

FlaggedIdModeration FlaggedIdModeration::from_file(const std::filesystem::path& path) {
  std::set<std::string> ids;
  std::istringstream in(io::read_file(path));
  for (std::string line; std::getline(in, line);) {
    const std::string id = text::trim(line);
    if (!id.empty()) ids.insert(id);
  }
  return FlaggedIdModeration(std::move(ids));
}

ModerationResult moderation_filter(const PairCorpus& c, ModerationClient& client, ModerationOptions options) {
  if (options.attempts < 1) throw invalid_argument("moderation attempts must be at least 1");
  ModerationResult result;
  result.corpus.rejections = c.rejections;
  for (const auto& r : c.records) {
    std::optional<ModerationVerdict> verdict;
    std::string last_error;
    for (int attempt = 0; attempt < options.attempts && !verdict; ++attempt) {
      try {
        verdict = client.check(r);
      } catch (const std::exception& e) {
        last_error = e.what();
      }
    }
    if (!verdict) {
      result.failed.push_back(r.pair_id);
      if (options.on_failure == FailurePolicy::keep) {
        result.warnings.push_back("moderation failed for '" + r.pair_id + "', kept: " + last_error);
        result.corpus.records.push_back(r);
      } else {
        result.warnings.push_back("moderation failed for '" + r.pair_id + "', dropped: " + last_error);
      }
      continue;
    }
    if (verdict->flagged) {
      result.flagged.push_back(r.pair_id);
    } else {
      result.corpus.records.push_back(r);
    }
  }
  return result;
}

nlohmann::ordered_json SplitAssignment::to_json() const {
  nlohmann::ordered_json j;
  j["ratio"] = ratio;
  j["seed"] = seed;
  j["train_prompts"] = train_prompts;
  j["test_prompts"] = test_prompts;
  nlohmann::ordered_json sides_json = nlohmann::ordered_json::object();
  for (const auto& [id, side] : sides) sides_json[id] = side == Side::train ? "train" : "test";
  j["assignment"] = std::move(sides_json);
  return j;
}

SplitAssignment split(const PairCorpus& c, double ratio, std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio < 1.0)) throw invalid_argument("split ratio must be in (0,1)");
  std::vector<std::string> prompts;
  for (const auto& r : c.records) prompts.push_back(prompt_key(r));
  std::sort(prompts.begin(), prompts.end());
  prompts.erase(std::unique(prompts.begin(), prompts.end()), prompts.end());
  if (prompts.size() < 2) {
    throw invalid_argument("split needs at least 2 distinct prompts, corpus has " +
                           std::to_string(prompts.size()));
  }
  CounterRng rng(seed);
  shuffle(std::span<std::string>(prompts), rng);
  const auto n = static_cast<double>(prompts.size());
  auto train = static_cast<std::size_t>(std::llround(ratio * n));
  train = std::clamp<std::size_t>(train, 1, prompts.size() - 1);

  std::map<std::string, Side> prompt_side;
  for (std::size_t i = 0; i < prompts.size(); ++i) prompt_side[prompts[i]] = i < train ? Side::train : Side::test;

  SplitAssignment a;
  a.ratio = ratio;
  a.seed = seed;
  a.train_prompts = train;
  a.test_prompts = prompts.size() - train;
  for (const auto& r : c.records) a.sides[r.pair_id] = prompt_side.at(prompt_key(r));
  return a;
}

}  // namespace humt
