#include "humt/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "humt/error.hpp"
#include "humt/io.hpp"
#include "humt/text.hpp"

namespace humt::stats {
namespace {

constexpr double kEps = 1e-16;
constexpr double kTiny = 1e-300;
constexpr int kMaxIter = 100000;

Error degenerate(const std::string& what) { return Error(ErrorCode::degenerate, what); }

// Continued fraction for I_x(a, b) (modified Lentz).
double beta_cf(double a, double b, double x) {
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) return h;
  }
  return h;
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0 && b > 0.0)) throw invalid_argument("incomplete_beta needs a, b > 0");
  if (std::isnan(x) || x < 0.0 || x > 1.0) throw invalid_argument("incomplete_beta needs x in [0,1]");
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) +
                           b * std::log1p(-x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_cf(a, b, x) / a;
  return 1.0 - front * beta_cf(b, a, 1.0 - x) / b;
}

double gamma_p(double a, double x) {
  if (!(a > 0.0)) throw invalid_argument("gamma_p needs a > 0");
  if (std::isnan(x) || x < 0.0) throw invalid_argument("gamma_p needs x >= 0");
  if (x == 0.0) return 0.0;
  if (x >= a + 1.0) return 1.0 - gamma_q(a, x);
  double ap = a;
  double del = 1.0 / a;
  double sum = del;
  for (int n = 0; n < kMaxIter; ++n) {
    ap += 1.0;
    del *= x / ap;
    sum += del;
    if (std::fabs(del) < std::fabs(sum) * kEps) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

double gamma_q(double a, double x) {
  if (!(a > 0.0)) throw invalid_argument("gamma_q needs a > 0");
  if (std::isnan(x) || x < 0.0) throw invalid_argument("gamma_q needs x >= 0");
  if (x == 0.0) return 1.0;
  if (x < a + 1.0) return 1.0 - gamma_p(a, x);
  double b = x + 1.0 - a;
  double c = 1.0 / kTiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i <= kMaxIter; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = b + an / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) break;
  }
  return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

double student_t_two_sided_p(double t, double df) {
  if (!(df > 0.0)) throw invalid_argument("degrees of freedom must be positive");
  if (std::isinf(t)) return 0.0;
  return std::clamp(incomplete_beta(df / 2.0, 0.5, df / (df + t * t)), 0.0, 1.0);
}

double student_t_cdf(double t, double df) {
  const double tail = 0.5 * student_t_two_sided_p(t, df);
  return t > 0.0 ? 1.0 - tail : tail;
}

double student_t_quantile(double p, double df) {
  if (!(p > 0.0 && p < 1.0)) throw invalid_argument("quantile probability must be in (0,1)");
  double lo = -1.0;
  double hi = 1.0;
  while (student_t_cdf(lo, df) > p) lo *= 2.0;
  while (student_t_cdf(hi, df) < p) hi *= 2.0;
  for (int i = 0; i < 200 && hi - lo > 1e-14 * std::max(1.0, std::fabs(hi)); ++i) {
    const double mid = 0.5 * (lo + hi);
    (student_t_cdf(mid, df) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

double chi_square_sf(double x, double df) {
  if (!(df > 0.0)) throw invalid_argument("degrees of freedom must be positive");
  if (x <= 0.0) return 1.0;
  return std::clamp(gamma_q(df / 2.0, x / 2.0), 0.0, 1.0);
}

nlohmann::ordered_json TestResult::to_json() const {
  nlohmann::ordered_json j;
  j["statistic"] = statistic;
  j["df"] = degrees_of_freedom;
  j["p_value"] = p_value;
  j["method"] = method;
  return j;
}

double mean(std::span<const double> x) {
  if (x.empty()) throw invalid_argument("mean of an empty sample");
  // Second pass corrects the rounding of the first.
  double m = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
  double corr = 0.0;
  for (double v : x) corr += v - m;
  return m + corr / static_cast<double>(x.size());
}

double variance(std::span<const double> x) {
  if (x.size() < 2) throw invalid_argument("variance needs at least two values");
  const double m = mean(x);
  double ss = 0.0;
  for (double v : x) ss += (v - m) * (v - m);
  return ss / static_cast<double>(x.size() - 1);
}

TestResult welch_t(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) throw invalid_argument("welch_t needs at least two values per group");
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  const double va = variance(a) / na;
  const double vb = variance(b) / nb;
  if (va + vb == 0.0) throw degenerate("welch_t: both groups have zero variance");
  TestResult r;
  r.method = "welch_t";
  r.statistic = (mean(a) - mean(b)) / std::sqrt(va + vb);
  r.degrees_of_freedom = (va + vb) * (va + vb) / (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
  r.p_value = student_t_two_sided_p(r.statistic, r.degrees_of_freedom);
  return r;
}

nlohmann::ordered_json MeanDiffReport::to_json() const {
  nlohmann::ordered_json j;
  j["n"] = n;
  j["mean_a"] = mean_a;
  j["mean_b"] = mean_b;
  j["diff"] = diff;
  j["percent_likelihood_diff"] = percent_likelihood_diff;
  j["ci95_halfwidth"] = ci95_halfwidth;
  if (test) {
    j["test"] = test->to_json();
  } else {
    j["test"] = nullptr;
    j["test_error"] = test_error;
  }
  return j;
}

MeanDiffReport matched_mean_diff(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw invalid_argument("matched_mean_diff: column lengths differ (" + std::to_string(a.size()) + " vs " +
                           std::to_string(b.size()) + ")");
  }
  if (a.size() < 2) throw invalid_argument("matched_mean_diff needs at least two pairs");
  MeanDiffReport r;
  r.n = a.size();
  r.mean_a = mean(a);
  r.mean_b = mean(b);
  r.diff = r.mean_a - r.mean_b;
  r.percent_likelihood_diff = std::expm1(r.diff);
  try {
    r.test = welch_t(a, b);
    const double se = std::sqrt(variance(a) / static_cast<double>(a.size()) +
                                variance(b) / static_cast<double>(b.size()));
    r.ci95_halfwidth = student_t_quantile(0.975, r.test->degrees_of_freedom) * se;
  } catch (const Error& e) {
    if (e.code() != ErrorCode::degenerate) throw;
    r.test_error = e.what();
  }
  return r;
}

CorrelationResult pearson_r(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw invalid_argument("pearson_r: lengths differ");
  if (x.size() < 3) throw invalid_argument("pearson_r needs at least three pairs");
  const double mx = mean(x);
  const double my = mean(y);
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw degenerate("pearson_r: correlation undefined for constant input");
  CorrelationResult c;
  c.r = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
  const double df = static_cast<double>(x.size()) - 2.0;
  c.test.method = "pearson";
  c.test.statistic = c.r;
  c.test.degrees_of_freedom = df;
  if (std::fabs(c.r) == 1.0) {
    c.test.p_value = 0.0;
  } else {
    const double t = c.r * std::sqrt(df / (1.0 - c.r * c.r));
    c.test.p_value = student_t_two_sided_p(t, df);
  }
  return c;
}

BhResult bh_adjust(std::span<const double> p_values, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw invalid_argument("alpha must be in (0,1)");
  for (double p : p_values) {
    if (std::isnan(p) || p < 0.0 || p > 1.0) throw invalid_argument("p-values must lie in [0,1]");
  }
  const std::size_t m = p_values.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return p_values[i] < p_values[j]; });
  BhResult r;
  r.adjusted.assign(m, 1.0);
  r.reject.assign(m, false);
  double running = 1.0;
  for (std::size_t k = m; k-- > 0;) {
    const double scaled = static_cast<double>(m) / static_cast<double>(k + 1) * p_values[order[k]];
    running = std::min(running, scaled);
    r.adjusted[order[k]] = std::min(1.0, running);
  }
  for (std::size_t i = 0; i < m; ++i) r.reject[i] = r.adjusted[i] <= alpha;
  return r;
}

TestResult chi_square_independence(const std::vector<std::vector<double>>& table, bool yates) {
  const std::size_t rows = table.size();
  if (rows < 2) throw invalid_argument("chi-square table needs at least two rows");
  const std::size_t cols = table[0].size();
  if (cols < 2) throw invalid_argument("chi-square table needs at least two columns");
  if (yates && (rows != 2 || cols != 2)) throw invalid_argument("Yates correction applies only to 2x2 tables");
  std::vector<double> row_sum(rows, 0.0);
  std::vector<double> col_sum(cols, 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < rows; ++i) {
    if (table[i].size() != cols) throw invalid_argument("chi-square table rows differ in length");
    for (std::size_t j = 0; j < cols; ++j) {
      const double v = table[i][j];
      if (std::isnan(v) || v < 0.0) throw invalid_argument("chi-square counts must be non-negative");
      row_sum[i] += v;
      col_sum[j] += v;
      total += v;
    }
  }
  for (double s : row_sum) {
    if (s == 0.0) throw degenerate("chi-square: a row total is zero");
  }
  for (double s : col_sum) {
    if (s == 0.0) throw degenerate("chi-square: a column total is zero");
  }
  const bool correct = yates;
  double chi2 = 0.0;
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      const double expected = row_sum[i] * col_sum[j] / total;
      double dev = std::fabs(table[i][j] - expected);
      if (correct) dev = std::max(0.0, dev - 0.5);
      chi2 += dev * dev / expected;
    }
  }
  TestResult r;
  r.method = correct ? "chi_square_yates" : "chi_square";
  r.statistic = chi2;
  r.degrees_of_freedom = static_cast<double>((rows - 1) * (cols - 1));
  r.p_value = chi_square_sf(chi2, r.degrees_of_freedom);
  return r;
}

double fleiss_kappa(const std::vector<std::vector<double>>& counts) {
  if (counts.empty()) throw invalid_argument("fleiss_kappa needs at least one item");
  const std::size_t k = counts[0].size();
  if (k < 1) throw invalid_argument("fleiss_kappa needs at least one category");
  double raters = -1.0;
  std::vector<double> category_totals(k, 0.0);
  double agreement_sum = 0.0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if (counts[i].size() != k) throw invalid_argument("fleiss_kappa rows differ in category count");
    double n = 0.0;
    double squares = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      const double c = counts[i][j];
      if (std::isnan(c) || c < 0.0) throw invalid_argument("fleiss_kappa counts must be non-negative");
      n += c;
      squares += c * c;
      category_totals[j] += c;
    }
    if (raters < 0.0) raters = n;
    if (n != raters) {
      throw invalid_argument("fleiss_kappa: item " + std::to_string(i) + " has " + std::to_string(n) +
                             " ratings, expected " + std::to_string(raters));
    }
    agreement_sum += (squares - n) / (n * (n - 1.0));
  }
  if (raters < 2.0) throw invalid_argument("fleiss_kappa needs at least two raters per item");
  const double items = static_cast<double>(counts.size());
  const double observed = agreement_sum / items;
  double chance = 0.0;
  for (double t : category_totals) {
    const double p = t / (items * raters);
    chance += p * p;
  }
  if (1.0 - chance <= 1e-15) return 1.0;
  return (observed - chance) / (1.0 - chance);
}

Lexicon parse_lexicon(std::string_view contents) {
  Lexicon lex;
  std::size_t line_no = 0;
  for (const auto& line : text::split(contents, '\n')) {
    ++line_no;
    const std::string trimmed = text::trim(line);
    if (trimmed.empty() || trimmed[0] == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw invalid_argument("lexicon line " + std::to_string(line_no) + " lacks a tab separator");
    }
    const std::string category = text::trim(line.substr(0, tab));
    if (category.empty()) throw invalid_argument("lexicon line " + std::to_string(line_no) + " has no category");
    auto& words = lex[category];
    for (const auto& w : text::split(line.substr(tab + 1), ',')) {
      const std::string word = text::to_lower(text::trim(w));
      if (!word.empty() && word != "*") words.push_back(word);
    }
    if (words.empty()) throw invalid_argument("lexicon category '" + category + "' has no words");
  }
  return lex;
}

Lexicon load_lexicon(const std::string& path) { return parse_lexicon(io::read_file(path)); }

bool lexicon_match(const std::vector<std::string>& patterns, std::string_view token) {
  for (const auto& p : patterns) {
    if (!p.empty() && p.back() == '*') {
      if (token.substr(0, p.size() - 1) == std::string_view(p).substr(0, p.size() - 1)) return true;
    } else if (token == p) {
      return true;
    }
  }
  return false;
}

nlohmann::ordered_json CategoryAssociation::to_json() const {
  nlohmann::ordered_json j;
  j["category"] = category;
  j["status"] = status == AssociationStatus::ok            ? "ok"
                : status == AssociationStatus::no_matches ? "no_matches"
                                                          : "degenerate_variance";
  j["mean_top"] = mean_top;
  j["mean_bottom"] = mean_bottom;
  j["test"] = test.to_json();
  return j;
}

std::vector<CategoryAssociation> quartile_lexicon_association(std::span<const ScoredText> texts,
                                                              const Lexicon& lexicon, double max_p) {
  if (texts.size() < 8) throw invalid_argument("quartile association needs at least 8 texts");
  std::vector<std::size_t> order(texts.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
    if (texts[i].score != texts[j].score) return texts[i].score < texts[j].score;
    return texts[i].text_id < texts[j].text_id;
  });
  const std::size_t q = texts.size() / 4;

  std::vector<std::vector<std::string>> tokens(texts.size());
  for (std::size_t i = 0; i < texts.size(); ++i) tokens[i] = text::tokenize(texts[i].text);

  std::vector<CategoryAssociation> defined;
  std::vector<CategoryAssociation> undefined;
  for (const auto& [category, patterns] : lexicon) {
    if (patterns.empty()) throw invalid_argument("lexicon category '" + category + "' is empty");
    std::vector<double> rate(texts.size(), 0.0);
    bool any = false;
    for (std::size_t i = 0; i < texts.size(); ++i) {
      std::size_t hits = 0;
      for (const auto& tok : tokens[i]) hits += lexicon_match(patterns, tok) ? 1 : 0;
      any = any || hits > 0;
      if (!tokens[i].empty()) rate[i] = static_cast<double>(hits) / static_cast<double>(tokens[i].size());
    }
    CategoryAssociation assoc;
    assoc.category = category;
    assoc.test.method = "welch_t";
    if (!any) {
      assoc.status = AssociationStatus::no_matches;
      assoc.test.p_value = 1.0;
      undefined.push_back(std::move(assoc));
      continue;
    }
    std::vector<double> bottom;
    std::vector<double> top;
    for (std::size_t k = 0; k < q; ++k) {
      bottom.push_back(rate[order[k]]);
      top.push_back(rate[order[texts.size() - q + k]]);
    }
    assoc.mean_top = mean(top);
    assoc.mean_bottom = mean(bottom);
    try {
      assoc.test = welch_t(top, bottom);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::degenerate) throw;
      assoc.status = AssociationStatus::degenerate_variance;
      const double gap = assoc.mean_top - assoc.mean_bottom;
      assoc.test.statistic = gap == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), gap);
      assoc.test.p_value = gap == 0.0 ? 1.0 : 0.0;
      undefined.push_back(std::move(assoc));
      continue;
    }
    if (assoc.test.p_value <= max_p) defined.push_back(std::move(assoc));
  }
  std::stable_sort(defined.begin(), defined.end(), [](const CategoryAssociation& a, const CategoryAssociation& b) {
    return std::fabs(a.test.statistic) > std::fabs(b.test.statistic);
  });
  std::move(undefined.begin(), undefined.end(), std::back_inserter(defined));
  return defined;
}

double term_proportion(std::span<const std::string> texts, std::string_view term, TermMatch match) {
  if (texts.empty()) throw invalid_argument("term_proportion needs at least one text");
  if (text::trim(term).empty()) throw invalid_argument("term must not be empty");
  std::size_t hits = 0;
  if (match == TermMatch::substring) {
    for (const auto& t : texts) hits += t.find(term) != std::string::npos ? 1 : 0;
  } else {
    const auto needle = text::tokenize(term);
    if (needle.empty()) throw invalid_argument("term has no word characters");
    for (const auto& t : texts) {
      const auto hay = text::tokenize(t);
      hits += std::search(hay.begin(), hay.end(), needle.begin(), needle.end()) != hay.end() ? 1 : 0;
    }
  }
  return static_cast<double>(hits) / static_cast<double>(texts.size());
}

}  // namespace humt::stats
