#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace humt::stats {

// ---------------------------------------------------------------------------
// Distribution functions
// ---------------------------------------------------------------------------

/// Regularized incomplete beta I_x(a, b). Continued fraction (modified Lentz),
/// evaluated directly for x < (a + 1) / (a + b + 2) and through the symmetry
/// I_x(a, b) = 1 - I_{1-x}(b, a) above it.
double incomplete_beta(double a, double b, double x);

/// Regularized lower incomplete gamma P(a, x): power series for x < a + 1,
/// continued fraction for the upper tail Q otherwise.
double gamma_p(double a, double x);
double gamma_q(double a, double x);

/// Two-sided p-value of a Student-t statistic.
double student_t_two_sided_p(double t, double df);
/// Student-t CDF.
double student_t_cdf(double t, double df);
/// Inverse Student-t CDF by bracketing bisection on student_t_cdf.
double student_t_quantile(double p, double df);
/// Upper tail of the chi-square distribution.
double chi_square_sf(double x, double df);

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------

struct TestResult {
  double statistic = 0.0;
  double degrees_of_freedom = 0.0;
  double p_value = 1.0;
  std::string method;

  nlohmann::ordered_json to_json() const;
};

double mean(std::span<const double> x);
/// Unbiased sample variance (n - 1 denominator).
double variance(std::span<const double> x);

/// Welch two-sample t-test with Welch-Satterthwaite degrees of freedom and a
/// two-sided p. Needs two samples per group; zero variance in both groups is a
/// degenerate error.
TestResult welch_t(std::span<const double> a, std::span<const double> b);

struct MeanDiffReport {
  double mean_a = 0.0;
  double mean_b = 0.0;
  double diff = 0.0;
  /// (e^mean_a - e^mean_b) / e^mean_b: how much more likely column a reads as
  /// the positive pole than column b.
  double percent_likelihood_diff = 0.0;
  std::optional<TestResult> test;
  std::string test_error;  // why `test` is absent
  double ci95_halfwidth = 0.0;
  std::size_t n = 0;

  nlohmann::ordered_json to_json() const;
};

/// Means and Welch test of two aligned score columns (e.g. chosen vs rejected
/// responses). Unequal lengths or fewer than two rows are invalid. A
/// degenerate variance leaves `test` empty but the means and diff are filled.
MeanDiffReport matched_mean_diff(std::span<const double> a, std::span<const double> b);

struct CorrelationResult {
  double r = 0.0;
  TestResult test;  // t-transform with n - 2 df
};

CorrelationResult pearson_r(std::span<const double> x, std::span<const double> y);

struct BhResult {
  std::vector<double> adjusted;
  std::vector<bool> reject;
};

/// Benjamini-Hochberg step-up adjustment; output in input order.
BhResult bh_adjust(std::span<const double> p_values, double alpha);

/// Pearson chi-square test of independence on an r x c table of counts.
/// `yates` applies the continuity correction (2 x 2 tables only).
TestResult chi_square_independence(const std::vector<std::vector<double>>& table, bool yates = false);

/// Fleiss' kappa over an items x categories matrix of rater counts. Every row
/// must sum to the same rater count n >= 2. When chance agreement is 1 (every
/// rating in one category) kappa is defined as 1.
double fleiss_kappa(const std::vector<std::vector<double>>& counts);

// ---------------------------------------------------------------------------
// Lexicon and term statistics
// ---------------------------------------------------------------------------

/// category -> patterns; a trailing '*' makes a prefix pattern.
using Lexicon = std::map<std::string, std::vector<std::string>>;

/// "category<TAB>word,word,pre*" per line; '#' starts a comment line.
Lexicon load_lexicon(const std::string& path);
Lexicon parse_lexicon(std::string_view contents);

bool lexicon_match(const std::vector<std::string>& patterns, std::string_view token);

struct ScoredText {
  std::string text_id;
  std::string text;
  double score = 0.0;
};

enum class AssociationStatus { ok, no_matches, degenerate_variance };

struct CategoryAssociation {
  std::string category;
  AssociationStatus status = AssociationStatus::ok;
  double mean_top = 0.0;
  double mean_bottom = 0.0;
  TestResult test;

  nlohmann::ordered_json to_json() const;
};

/// Compares per-text category rates (matched tokens / tokens) between the top
/// and bottom score quartiles with Welch's t. Texts are ordered by
/// (score, text_id); each quartile holds floor(n / 4) texts. Results are
/// ranked by |t| descending, undefined categories last, and those with
/// p > max_p dropped.
std::vector<CategoryAssociation> quartile_lexicon_association(std::span<const ScoredText> texts,
                                                              const Lexicon& lexicon, double max_p = 1.0);

enum class TermMatch { token, substring };

/// Fraction of texts containing `term`. Token matching is case-insensitive on
/// word boundaries (multi-word terms match as a consecutive token run);
/// substring matching is a plain case-sensitive search.
double term_proportion(std::span<const std::string> texts, std::string_view term, TermMatch match);

}  // namespace humt::stats
