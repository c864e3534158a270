#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "humt/backend.hpp"

namespace humt {

/// How the per-phrase probabilities of one side are combined.
///   sum_literal      log(sum_w P(w + s))
///   mean_normalized  log(mean_w P(w + s))
enum class Aggregation { sum_literal, mean_normalized };

std::string_view to_string(Aggregation a);
Aggregation parse_aggregation(std::string_view s);

/// A named perception axis: positive prefix phrases (D+) against negative
/// ones (D-).
struct DimensionSpec {
  std::string name;
  std::vector<std::string> positive_phrases;
  std::vector<std::string> negative_phrases;
  Aggregation aggregation = Aggregation::sum_literal;

  /// Throws invalid_argument on an empty name, an empty side, or a blank phrase.
  void validate() const;
  /// Same spec with D+ and D- exchanged.
  DimensionSpec swapped() const;
};

/// Immutable-after-construction set of uniquely named dimension specs.
class DimensionRegistry {
 public:
  DimensionRegistry() = default;

  /// humt, social, warmth, gender, status.
  static DimensionRegistry builtin();

  /// [{"name", "positive": [...], "negative": [...], "aggregation"?}, ...] or
  /// {"dimensions": [...]}. Built-ins are included first unless disabled.
  static DimensionRegistry from_json(const nlohmann::json& j, bool include_builtin = true);
  static DimensionRegistry from_file(const std::filesystem::path& path, bool include_builtin = true);

  void add(DimensionSpec spec);

  const DimensionSpec* find(std::string_view name) const;
  /// Throws not_found naming the registered dimensions.
  const DimensionSpec& at(std::string_view name) const;
  /// Comma-separated names, or "all" for the full registry in registration order.
  std::vector<DimensionSpec> select(std::string_view names) const;

  std::vector<std::string> names() const;
  std::size_t size() const { return specs_.size(); }
  const std::vector<DimensionSpec>& specs() const { return specs_; }

 private:
  std::vector<DimensionSpec> specs_;
};

struct ScoringConfig {
  std::size_t truncation_limit = 300;
  std::uint32_t repetitions = 1;
  /// Replaces each spec's own aggregation when set.
  std::optional<Aggregation> aggregation;

  void validate() const;
};

struct ToneScore {
  std::string text_id;
  std::string dimension;
  double value = 0.0;  // natural-log units
  std::uint32_t repetitions = 1;
  std::string backend_id;
  bool truncated = false;
  Aggregation aggregation = Aggregation::sum_literal;
  bool first_token_dropped = false;

  nlohmann::json to_json() const;
};

/// Smallest log value a single phrase contributes when its probability
/// underflows to zero.
inline constexpr double kLogProbFloor = -745.0;

/// Stable log-sum-exp (sum_literal) or log-mean-exp (mean_normalized).
/// Entries may be -inf; an empty list is invalid.
double log_aggregate(std::span<const double> log_probs, Aggregation mode);

/// The string actually scored for one phrase: phrase, one space, text.
std::string join_phrase(std::string_view phrase, std::string_view text);

/// Log of the mean probability of `scored` over the configured repetitions.
/// Deterministic backends are queried once; averaging identical draws is the
/// identity.
double averaged_logprob(std::string_view scored, std::uint32_t repetitions, Backend& backend);

/// Relative log-probability of `text` under the dimension's positive vs negative
/// prefixes. Backend failures surface as scoring errors naming the phrase and
/// text id; a side whose every phrase has zero probability is an error.
/// Single zero-probability phrases are clamped to kLogProbFloor and noted in
/// `warnings` when given.
ToneScore score(std::string_view text_id, std::string_view text, const DimensionSpec& spec,
                const ScoringConfig& config, Backend& backend,
                std::vector<std::string>* warnings = nullptr);

struct IdentifiedText {
  std::string id;
  std::string text;
};

struct RowFailure {
  std::string text_id;
  std::string dimension;
  std::string message;
};

struct BatchOptions {
  bool fail_fast = false;
  unsigned jobs = 1;
};

struct BatchResult {
  std::vector<ToneScore> rows;  // sorted by (text_id, dimension)
  std::vector<RowFailure> failures;
  std::vector<std::string> warnings;
};

/// Scores every (text, spec) pair. Rows are ordered by (text_id, dimension)
/// regardless of how many workers ran. With fail_fast the first failure is
/// rethrown; otherwise failures are collected per row.
BatchResult score_batch(std::span<const IdentifiedText> texts, std::span<const DimensionSpec> specs,
                        const ScoringConfig& config, Backend& backend, BatchOptions options = {});

}  // namespace humt
