#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "humt/corpus.hpp"

namespace humt::dumt {

/// A preference pair with the tone score of each response.
struct ScoredPair {
  PreferencePairRecord pair;
  double humt_chosen = 0.0;    // score of the human-preferred response
  double humt_rejected = 0.0;  // score of the dispreferred response
};

/// One emitted training triple.
struct DpoPair {
  std::string prompt;
  std::string chosen;
  std::string rejected;
  double humt_chosen = 0.0;
  double humt_rejected = 0.0;
  std::string source_pair_id;

  bool operator==(const DpoPair&) const = default;
};

enum class Variant { tone, random, maxtone };

std::string_view to_string(Variant v);
Variant parse_variant(std::string_view s);

struct BuildConfig {
  double threshold = 0.0;
  std::size_t pair_count = 500;
  std::uint64_t seed = 0;
  double epsilon = 0.02;

  void validate() const;
};

struct BuildResult {
  Variant variant = Variant::tone;
  std::vector<DpoPair> pairs;
  std::size_t input_size = 0;
  std::size_t eligible = 0;
};

/// tone: pairs whose rejected response is more human-like than the chosen one
/// by strictly more than the threshold. Sampled uniformly without replacement
/// with the counter-based generator; orientation follows human preference.
BuildResult build_tone_pairs(const std::vector<ScoredPair>& scored, const BuildConfig& config);

/// random: uniform sample of the whole pool, scores ignored.
BuildResult build_random_pairs(const std::vector<ScoredPair>& scored, const BuildConfig& config);

/// maxtone ablation: the margin reversed, humt_chosen - humt_rejected > t.
/// The emitted chosen side is always the more human-like response; the
/// dataset teaches toward human-like tone rather than toward preference.
BuildResult build_max_tone_pairs(const std::vector<ScoredPair>& scored, const BuildConfig& config);

BuildResult build(Variant variant, const std::vector<ScoredPair>& scored, const BuildConfig& config);

enum class EpsilonDirection {
  /// Keep prompts where the baseline (b) exceeds the tone-reduced model (a) by
  /// more than epsilon: score_b - score_a > epsilon.
  baseline_minus_reduced,
  /// Literal reading of the written condition: score_a - score_b > epsilon.
  reduced_minus_baseline,
};

std::string_view to_string(EpsilonDirection d);
EpsilonDirection parse_epsilon_direction(std::string_view s);

/// Prompts present in both maps whose score gap in the chosen direction is
/// strictly greater than epsilon, in lexicographic order. An empty
/// intersection is an error.
std::vector<std::string> epsilon_filter(const std::map<std::string, double>& reduced,
                                        const std::map<std::string, double>& baseline, double epsilon,
                                        EpsilonDirection direction = EpsilonDirection::baseline_minus_reduced);

nlohmann::ordered_json to_json(const DpoPair& p, Variant variant);
/// One object per line: prompt, chosen, rejected, humt_chosen, humt_rejected,
/// source_pair_id, variant. Identical inputs give identical bytes.
std::string to_jsonl(const BuildResult& result);
void emit_dpo_jsonl(const BuildResult& result, const std::filesystem::path& path);
std::vector<DpoPair> read_dpo_jsonl(const std::filesystem::path& path);

/// Manifest recording the variant, config, pool sizes and input digests.
nlohmann::ordered_json build_manifest(const BuildResult& result, const BuildConfig& config,
                                      const std::map<std::string, std::string>& input_digests);

}  // namespace humt::dumt
