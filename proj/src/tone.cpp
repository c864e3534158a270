#include "humt/tone.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <mutex>
#include <set>
#include <thread>
#include <unordered_map>

#include "humt/error.hpp"
#include "humt/io.hpp"
#include "humt/text.hpp"

namespace humt {

std::string_view to_string(Aggregation a) {
  return a == Aggregation::sum_literal ? "sum_literal" : "mean_normalized";
}

Aggregation parse_aggregation(std::string_view s) {
  if (s == "sum_literal" || s == "sum") return Aggregation::sum_literal;
  if (s == "mean_normalized" || s == "mean") return Aggregation::mean_normalized;
  throw invalid_argument("unknown aggregation '" + std::string(s) +
                         "' (expected sum_literal or mean_normalized)");
}

void DimensionSpec::validate() const {
  if (text::trim(name).empty()) throw invalid_argument("dimension name must not be empty");
  if (positive_phrases.empty() || negative_phrases.empty()) {
    throw invalid_argument("dimension '" + name + "' needs at least one positive and one negative phrase");
  }
  for (const auto* side : {&positive_phrases, &negative_phrases}) {
    for (const auto& p : *side) {
      if (text::trim(p).empty()) throw invalid_argument("dimension '" + name + "' has a blank phrase");
    }
  }
}

DimensionSpec DimensionSpec::swapped() const {
  DimensionSpec s = *this;
  std::swap(s.positive_phrases, s.negative_phrases);
  return s;
}

DimensionRegistry DimensionRegistry::builtin() {
  DimensionRegistry r;
  r.add({"humt", {"He said", "She said"}, {"It said"}});
  r.add({"social",
         {"My friend said", "My partner said", "My girlfriend said", "My boyfriend said",
          "My husband said", "My wife said"},
         {"The stranger said"}});
  r.add({"warmth",
         {"The friend said", "The lover said", "The mentor said", "The idol said"},
         {"The stranger said", "The enemy said", "The examiner said", "The dictator said"}});
  r.add({"gender", {"She said"}, {"He said"}});
  r.add({"status",
         {"He commanded", "He proclaimed", "He demanded"},
         {"He pleaded", "He mentioned", "He asked"}});
  return r;
}

DimensionRegistry DimensionRegistry::from_json(const nlohmann::json& j, bool include_builtin) {
  DimensionRegistry r = include_builtin ? builtin() : DimensionRegistry{};
  const auto& list = j.is_object() && j.contains("dimensions") ? j.at("dimensions") : j;
  if (!list.is_array()) throw invalid_argument("dimension file must hold an array of specs");
  try {
    for (const auto& item : list) {
      DimensionSpec spec;
      spec.name = item.at("name").get<std::string>();
      spec.positive_phrases = item.at("positive").get<std::vector<std::string>>();
      spec.negative_phrases = item.at("negative").get<std::vector<std::string>>();
      if (item.contains("aggregation")) {
        spec.aggregation = parse_aggregation(item.at("aggregation").get<std::string>());
      }
      r.add(std::move(spec));
    }
  } catch (const nlohmann::json::exception& e) {
    throw invalid_argument(std::string("malformed dimension spec: ") + e.what());
  }
  return r;
}

DimensionRegistry DimensionRegistry::from_file(const std::filesystem::path& path, bool include_builtin) {
  try {
    return from_json(nlohmann::json::parse(io::read_file(path)), include_builtin);
  } catch (const nlohmann::json::parse_error& e) {
    throw invalid_argument(path.string() + ": " + e.what());
  }
}

void DimensionRegistry::add(DimensionSpec spec) {
  spec.validate();
  if (find(spec.name) != nullptr) throw invalid_argument("duplicate dimension name '" + spec.name + "'");
  specs_.push_back(std::move(spec));
}

const DimensionSpec* DimensionRegistry::find(std::string_view name) const {
  for (const auto& s : specs_) {
    if (s.name == name) return &s;
  }
  return nullptr;
}

const DimensionSpec& DimensionRegistry::at(std::string_view name) const {
  if (const auto* s = find(name)) return *s;
  std::string known;
  for (const auto& s : specs_) known += (known.empty() ? "" : ", ") + s.name;
  throw Error(ErrorCode::not_found, "unknown dimension '" + std::string(name) + "' (registered: " + known + ")");
}

std::vector<DimensionSpec> DimensionRegistry::select(std::string_view names) const {
  if (text::trim(names) == "all") return specs_;
  std::vector<DimensionSpec> out;
  std::set<std::string> seen;
  for (const auto& raw : text::split(names, ',')) {
    const std::string name = text::trim(raw);
    if (name.empty() || !seen.insert(name).second) continue;
    out.push_back(at(name));
  }
  if (out.empty()) throw invalid_argument("no dimensions selected");
  return out;
}

std::vector<std::string> DimensionRegistry::names() const {
  std::vector<std::string> out;
  for (const auto& s : specs_) out.push_back(s.name);
  return out;
}

void ScoringConfig::validate() const {
  if (truncation_limit < 1) throw invalid_argument("truncation limit must be at least 1");
  if (repetitions < 1) throw invalid_argument("repetitions must be at least 1");
}

nlohmann::json ToneScore::to_json() const {
  nlohmann::ordered_json j;
  j["text_id"] = text_id;
  j["dimension"] = dimension;
  j["value"] = value;
  j["repetitions"] = repetitions;
  j["backend_id"] = backend_id;
  j["truncated"] = truncated;
  j["aggregation"] = std::string(to_string(aggregation));
  j["first_token_dropped"] = first_token_dropped;
  return j;
}

double log_aggregate(std::span<const double> log_probs, Aggregation mode) {
  if (log_probs.empty()) throw invalid_argument("log_aggregate needs at least one value");
  double peak = -std::numeric_limits<double>::infinity();
  for (double v : log_probs) {
    if (std::isnan(v) || v == std::numeric_limits<double>::infinity()) {
      throw invalid_argument("log_aggregate entries must be finite or -inf");
    }
    peak = std::max(peak, v);
  }
  if (peak == -std::numeric_limits<double>::infinity()) return peak;
  double sum = 0.0;
  for (double v : log_probs) sum += std::exp(v - peak);
  double result = peak + std::log(sum);
  if (mode == Aggregation::mean_normalized) result -= std::log(static_cast<double>(log_probs.size()));
  return result;
}

std::string join_phrase(std::string_view phrase, std::string_view text) {
  std::string s;
  s.reserve(phrase.size() + 1 + text.size());
  s.append(phrase);
  s.push_back(' ');
  s.append(text);
  return s;
}

double averaged_logprob(std::string_view scored, std::uint32_t repetitions, Backend& backend) {
  if (backend.descriptor().deterministic || repetitions <= 1) {
    return backend.sequence_logprob(scored, 0);
  }
  std::vector<double> draws;
  draws.reserve(repetitions);
  for (std::uint32_t i = 0; i < repetitions; ++i) draws.push_back(backend.sequence_logprob(scored, i));
  return log_aggregate(draws, Aggregation::mean_normalized);
}

namespace {

using PhraseMemo = std::unordered_map<std::string, double>;

double side_value(std::string_view text_id, const std::vector<std::string>& phrases,
                  std::string_view body, const ScoringConfig& config, Backend& backend,
                  Aggregation mode, std::vector<std::string>* warnings, PhraseMemo* memo) {
  std::vector<double> values;
  values.reserve(phrases.size());
  bool any_nonzero = false;
  for (const auto& phrase : phrases) {
    double lp = 0.0;
    auto hit = memo != nullptr ? memo->find(phrase) : PhraseMemo::iterator{};
    if (memo != nullptr && hit != memo->end()) {
      lp = hit->second;
    } else {
      try {
        lp = averaged_logprob(join_phrase(phrase, body), config.repetitions, backend);
      } catch (const Error& e) {
        throw Error(ErrorCode::scoring, "text '" + std::string(text_id) + "', phrase '" + phrase +
                                            "': " + e.what());
      }
      if (memo != nullptr) memo->emplace(phrase, lp);
    }
    if (lp == -std::numeric_limits<double>::infinity()) {
      if (warnings != nullptr) {
        warnings->push_back("text '" + std::string(text_id) + "', phrase '" + phrase +
                            "': probability underflowed to 0, using log floor");
      }
      lp = kLogProbFloor;
    } else {
      any_nonzero = true;
    }
    values.push_back(lp);
  }
  if (!any_nonzero) {
    throw Error(ErrorCode::scoring, "text '" + std::string(text_id) +
                                        "': every phrase on one side has zero probability");
  }
  return log_aggregate(values, mode);
}

ToneScore score_impl(std::string_view text_id, std::string_view text, const DimensionSpec& spec,
                     const ScoringConfig& config, Backend& backend, std::vector<std::string>* warnings,
                     PhraseMemo* memo) {
  config.validate();
  spec.validate();
  const std::string body = text::truncate(text, config.truncation_limit);
  const Aggregation mode = config.aggregation.value_or(spec.aggregation);
  const double pos =
      side_value(text_id, spec.positive_phrases, body, config, backend, mode, warnings, memo);
  const double neg =
      side_value(text_id, spec.negative_phrases, body, config, backend, mode, warnings, memo);
  ToneScore s;
  s.text_id = std::string(text_id);
  s.dimension = spec.name;
  s.value = pos - neg;
  s.repetitions = config.repetitions;
  s.backend_id = backend.descriptor().backend_id;
  s.truncated = body.size() != text.size();
  s.aggregation = mode;
  s.first_token_dropped = backend.descriptor().first_token_dropped;
  return s;
}

}  // namespace

ToneScore score(std::string_view text_id, std::string_view text, const DimensionSpec& spec,
                const ScoringConfig& config, Backend& backend, std::vector<std::string>* warnings) {
  return score_impl(text_id, text, spec, config, backend, warnings, nullptr);
}

BatchResult score_batch(std::span<const IdentifiedText> texts, std::span<const DimensionSpec> specs,
                        const ScoringConfig& config, Backend& backend, BatchOptions options) {
  config.validate();
  for (const auto& s : specs) s.validate();

  struct Slot {
    std::vector<ToneScore> rows;
    std::vector<RowFailure> failures;
    std::vector<std::string> warnings;
  };
  std::vector<Slot> slots(texts.size());
  std::atomic<std::size_t> next{0};
  std::atomic<bool> stop{false};
  std::exception_ptr first_error;
  std::mutex error_mutex;

  auto worker = [&] {
    while (!stop.load()) {
      const std::size_t i = next.fetch_add(1);
      if (i >= texts.size()) return;
      PhraseMemo memo;  // phrases shared between dimensions are scored once per text
      for (const auto& spec : specs) {
        try {
          slots[i].rows.push_back(
              score_impl(texts[i].id, texts[i].text, spec, config, backend, &slots[i].warnings, &memo));
        } catch (const Error& e) {
          if (options.fail_fast) {
            std::lock_guard lock(error_mutex);
            if (!first_error) first_error = std::current_exception();
            stop = true;
            return;
          }
          slots[i].failures.push_back({texts[i].id, spec.name, e.what()});
        }
      }
    }
  };

  const unsigned jobs = std::max(1u, std::min<unsigned>(options.jobs, static_cast<unsigned>(texts.size())));
  if (jobs <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned j = 0; j < jobs; ++j) pool.emplace_back(worker);
  }
  if (first_error) std::rethrow_exception(first_error);

  BatchResult result;
  for (auto& slot : slots) {
    std::move(slot.rows.begin(), slot.rows.end(), std::back_inserter(result.rows));
    std::move(slot.failures.begin(), slot.failures.end(), std::back_inserter(result.failures));
    std::move(slot.warnings.begin(), slot.warnings.end(), std::back_inserter(result.warnings));
  }
  std::stable_sort(result.rows.begin(), result.rows.end(), [](const ToneScore& a, const ToneScore& b) {
    return std::tie(a.text_id, a.dimension) < std::tie(b.text_id, b.dimension);
  });
  std::stable_sort(result.failures.begin(), result.failures.end(), [](const RowFailure& a, const RowFailure& b) {
    return std::tie(a.text_id, a.dimension) < std::tie(b.text_id, b.dimension);
  });
  return result;
}

}  // namespace humt
