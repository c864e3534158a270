#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "humt/corpus.hpp"
#include "humt/dumt.hpp"
#include "humt/stats.hpp"
#include "humt/tone.hpp"

namespace humt::analysis {

/// Text ids under which the two responses of a pair are scored.
std::string chosen_id(std::string_view pair_id);
std::string rejected_id(std::string_view pair_id);

/// Both responses of every pair as scorable texts, in corpus order.
std::vector<IdentifiedText> response_texts(const PairCorpus& pairs);
std::vector<IdentifiedText> texts_of(const TextCorpus& texts);
/// The prompts of a pair corpus, one per distinct pair.
std::vector<IdentifiedText> prompt_texts(const PairCorpus& pairs);

/// text_id x dimension table of tone values.
///
/// TSV form (wide): header "text_id<TAB>dim1<TAB>dim2...", one row per text,
/// values printed with 17 significant digits, empty cell for a failed row.
/// JSONL form (long): one ToneScore object per line.
class ScoreTable {
 public:
  ScoreTable() = default;
  ScoreTable(const std::vector<ToneScore>& rows, std::vector<std::string> dimensions);

  static ScoreTable load(const std::filesystem::path& path);
  static ScoreTable parse_tsv(std::string_view contents);
  static ScoreTable parse_jsonl(std::string_view contents);

  std::optional<double> get(const std::string& text_id, const std::string& dimension) const;
  void set(const std::string& text_id, const std::string& dimension, double value);
  /// Adds a row with no values if the text is absent.
  void ensure_row(const std::string& text_id) { values_[text_id]; }

  const std::vector<std::string>& dimensions() const { return dimensions_; }
  std::vector<std::string> text_ids() const;
  std::size_t size() const { return values_.size(); }

  std::string to_tsv() const;
  /// Long form; rows carry full provenance when the table was built from scores.
  std::string to_jsonl() const;

 private:
  std::vector<std::string> dimensions_;
  std::map<std::string, std::map<std::string, double>> values_;
  std::vector<ToneScore> rows_;
};

/// Chosen-vs-rejected comparison for one dimension, overall and optionally per
/// topic. Pairs lacking a score on either side are listed under "missing".
nlohmann::ordered_json analyze_prefs(const PairCorpus& pairs, const ScoreTable& scores,
                                     const std::string& dimension, bool by_topic);

/// All pairwise Pearson correlations over texts scored on every selected
/// dimension, BH-adjusted at alpha. Fewer than three shared texts is invalid.
nlohmann::ordered_json correlate(const ScoreTable& scores, double alpha,
                                 const std::vector<std::string>& dimensions = {});
/// Plot-ready CSV of the correlation matrix.
std::string correlation_csv(const nlohmann::ordered_json& report);

nlohmann::ordered_json lexicon_association(const TextCorpus& texts, const ScoreTable& scores,
                                           const std::string& dimension, const stats::Lexicon& lexicon,
                                           double max_p);

/// Annotation JSONL: {"item_id", "dimension", "labels": [0|1, ...]}.
struct Annotation {
  std::string item_id;
  std::string dimension;
  std::vector<int> labels;
};
std::vector<Annotation> load_annotations(const std::filesystem::path& path);

/// Per dimension: Fleiss' kappa over the binary labels, chi-square agreement of
/// the majority label with the score sign, and a Welch t-test of scores between
/// majority-positive and majority-negative items. Inconsistent rater counts
/// within a dimension are invalid.
nlohmann::ordered_json validate(const std::vector<Annotation>& annotations, const ScoreTable& scores);

struct ScoredPairs {
  std::vector<dumt::ScoredPair> pairs;
  std::vector<std::string> missing;
};
ScoredPairs scored_pairs(const PairCorpus& pairs, const ScoreTable& scores, const std::string& dimension);

/// Epsilon-filter report over two score tables keyed by prompt id.
nlohmann::ordered_json epsilon_report(const ScoreTable& reduced, const ScoreTable& baseline,
                                      const std::string& dimension, double epsilon,
                                      dumt::EpsilonDirection direction);

}  // namespace humt::analysis
