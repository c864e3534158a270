#include "humt/dumt.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "humt/error.hpp"
#include "humt/io.hpp"
#include "humt/rng.hpp"
#include "humt/text.hpp"

namespace humt::dumt {

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::tone: return "tone";
    case Variant::random: return "random";
    case Variant::maxtone: return "maxtone";
  }
  return "tone";
}

Variant parse_variant(std::string_view s) {
  if (s == "tone") return Variant::tone;
  if (s == "random") return Variant::random;
  if (s == "maxtone") return Variant::maxtone;
  throw invalid_argument("unknown variant '" + std::string(s) + "' (expected tone, random or maxtone)");
}

void BuildConfig::validate() const {
  if (pair_count < 1) throw invalid_argument("pair count must be at least 1");
  if (!std::isfinite(threshold)) throw invalid_argument("threshold must be finite");
}

namespace {

// Every variant keeps the source orientation: for maxtone the eligibility rule
// already guarantees the chosen side is the more human-like one.
DpoPair emit(const ScoredPair& s) {
  return {s.pair.prompt, s.pair.chosen, s.pair.rejected, s.humt_chosen, s.humt_rejected, s.pair.pair_id};
}

template <typename Eligible>
BuildResult sample(Variant variant, const std::vector<ScoredPair>& scored, const BuildConfig& config,
                   Eligible eligible) {
  config.validate();
  std::vector<const ScoredPair*> pool;
  for (const auto& s : scored) {
    if (eligible(s)) pool.push_back(&s);
  }
  if (pool.size() < config.pair_count) {
    throw Error(ErrorCode::pool_too_small, "eligible " + std::to_string(pool.size()) + " < requested " +
                                               std::to_string(config.pair_count));
  }
  CounterRng rng(config.seed);
  BuildResult result;
  result.variant = variant;
  result.input_size = scored.size();
  result.eligible = pool.size();
  for (std::size_t idx : sample_without_replacement(pool.size(), config.pair_count, rng)) {
    result.pairs.push_back(emit(*pool[idx]));
  }
  return result;
}

}  // namespace

BuildResult build_tone_pairs(const std::vector<ScoredPair>& scored, const BuildConfig& config) {
  return sample(Variant::tone, scored, config, [&](const ScoredPair& s) {
    return s.humt_rejected - s.humt_chosen > config.threshold;
  });
}

BuildResult build_random_pairs(const std::vector<ScoredPair>& scored, const BuildConfig& config) {
  return sample(Variant::random, scored, config, [](const ScoredPair&) { return true; });
}

BuildResult build_max_tone_pairs(const std::vector<ScoredPair>& scored, const BuildConfig& config) {
  return sample(Variant::maxtone, scored, config, [&](const ScoredPair& s) {
    return s.humt_chosen - s.humt_rejected > config.threshold;
  });
}

BuildResult build(Variant variant, const std::vector<ScoredPair>& scored, const BuildConfig& config) {
  switch (variant) {
    case Variant::tone: return build_tone_pairs(scored, config);
    case Variant::random: return build_random_pairs(scored, config);
    case Variant::maxtone: return build_max_tone_pairs(scored, config);
  }
  return build_tone_pairs(scored, config);
}

std::string_view to_string(EpsilonDirection d) {
  return d == EpsilonDirection::baseline_minus_reduced ? "baseline_minus_reduced" : "reduced_minus_baseline";
}

EpsilonDirection parse_epsilon_direction(std::string_view s) {
  if (s == "baseline_minus_reduced") return EpsilonDirection::baseline_minus_reduced;
  if (s == "reduced_minus_baseline") return EpsilonDirection::reduced_minus_baseline;
  throw invalid_argument("unknown epsilon direction '" + std::string(s) + "'");
}

std::vector<std::string> epsilon_filter(const std::map<std::string, double>& reduced,
                                        const std::map<std::string, double>& baseline, double epsilon,
                                        EpsilonDirection direction) {
  if (!std::isfinite(epsilon)) throw invalid_argument("epsilon must be finite");
  std::vector<std::string> kept;
  std::size_t shared = 0;
  for (const auto& [prompt, a] : reduced) {
    const auto it = baseline.find(prompt);
    if (it == baseline.end()) continue;
    ++shared;
    const double gap = direction == EpsilonDirection::baseline_minus_reduced ? it->second - a : a - it->second;
    if (gap > epsilon) kept.push_back(prompt);
  }
  if (shared == 0) throw invalid_argument("epsilon_filter: the two score maps share no prompts");
  return kept;
}

nlohmann::ordered_json to_json(const DpoPair& p, Variant variant) {
  nlohmann::ordered_json j;
  j["prompt"] = p.prompt;
  j["chosen"] = p.chosen;
  j["rejected"] = p.rejected;
  j["humt_chosen"] = p.humt_chosen;
  j["humt_rejected"] = p.humt_rejected;
  j["source_pair_id"] = p.source_pair_id;
  j["variant"] = std::string(to_string(variant));
  return j;
}

std::string to_jsonl(const BuildResult& result) {
  std::string out;
  for (const auto& p : result.pairs) out += to_json(p, result.variant).dump() + "\n";
  return out;
}

void emit_dpo_jsonl(const BuildResult& result, const std::filesystem::path& path) {
  try {
    io::write_atomic(path, to_jsonl(result));
  } catch (const Error& e) {
    throw Error(ErrorCode::io, "cannot write DPO dataset to " + path.string() + ": " + e.what());
  }
}

std::vector<DpoPair> read_dpo_jsonl(const std::filesystem::path& path) {
  std::vector<DpoPair> pairs;
  std::istringstream in(io::read_file(path));
  std::size_t line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      DpoPair p;
      p.prompt = j.at("prompt").get<std::string>();
      p.chosen = j.at("chosen").get<std::string>();
      p.rejected = j.at("rejected").get<std::string>();
      p.humt_chosen = j.value("humt_chosen", 0.0);
      p.humt_rejected = j.value("humt_rejected", 0.0);
      p.source_pair_id = j.value("source_pair_id", std::string{});
      pairs.push_back(std::move(p));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::ingest, path.string() + ": line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return pairs;
}

nlohmann::ordered_json build_manifest(const BuildResult& result, const BuildConfig& config,
                                      const std::map<std::string, std::string>& input_digests) {
  nlohmann::ordered_json j;
  j["variant"] = std::string(to_string(result.variant));
  if (result.variant == Variant::maxtone) j["ablation"] = true;
  nlohmann::ordered_json cfg;
  cfg["threshold"] = config.threshold;
  cfg["pair_count"] = config.pair_count;
  cfg["seed"] = config.seed;
  cfg["rng"] = "splitmix64-counter";
  j["config"] = std::move(cfg);
  j["input_size"] = result.input_size;
  j["eligible_pool"] = result.eligible;
  j["emitted"] = result.pairs.size();
  j["inputs"] = input_digests;
  j["output_sha256"] = io::sha256_hex(to_jsonl(result));
  return j;
}

}  // namespace humt::dumt
