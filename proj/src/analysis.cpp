#include "humt/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <set>
#include <sstream>

#include "humt/error.hpp"
#include "humt/io.hpp"
#include "humt/text.hpp"

namespace humt::analysis {

std::string chosen_id(std::string_view pair_id) { return std::string(pair_id) + "/chosen"; }
std::string rejected_id(std::string_view pair_id) { return std::string(pair_id) + "/rejected"; }

std::vector<IdentifiedText> response_texts(const PairCorpus& pairs) {
  std::vector<IdentifiedText> out;
  out.reserve(pairs.size() * 2);
  for (const auto& p : pairs.records) {
    out.push_back({chosen_id(p.pair_id), p.chosen});
    out.push_back({rejected_id(p.pair_id), p.rejected});
  }
  return out;
}

std::vector<IdentifiedText> texts_of(const TextCorpus& texts) {
  std::vector<IdentifiedText> out;
  out.reserve(texts.size());
  for (const auto& t : texts.records) out.push_back({t.text_id, t.text});
  return out;
}

std::vector<IdentifiedText> prompt_texts(const PairCorpus& pairs) {
  std::vector<IdentifiedText> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs.records) out.push_back({p.pair_id, p.prompt});
  return out;
}

namespace {

std::string format_value(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_value(const std::string& s, std::size_t line) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0' || !std::isfinite(v)) {
    throw Error(ErrorCode::ingest, "score table line " + std::to_string(line) + ": bad value '" + s + "'");
  }
  return v;
}

nlohmann::ordered_json test_or_error(const std::function<stats::TestResult()>& run) {
  try {
    return run().to_json();
  } catch (const Error& e) {
    if (e.code() != ErrorCode::degenerate && e.code() != ErrorCode::invalid_argument) throw;
    nlohmann::ordered_json j;
    j["error"] = e.what();
    return j;
  }
}

}  // namespace

ScoreTable::ScoreTable(const std::vector<ToneScore>& rows, std::vector<std::string> dimensions)
    : dimensions_(std::move(dimensions)), rows_(rows) {
  for (const auto& r : rows) {
    values_[r.text_id][r.dimension] = r.value;
    if (std::find(dimensions_.begin(), dimensions_.end(), r.dimension) == dimensions_.end()) {
      dimensions_.push_back(r.dimension);
    }
  }
  std::stable_sort(rows_.begin(), rows_.end(), [](const ToneScore& a, const ToneScore& b) {
    return std::tie(a.text_id, a.dimension) < std::tie(b.text_id, b.dimension);
  });
}

ScoreTable ScoreTable::load(const std::filesystem::path& path) {
  const std::string contents = io::read_file(path);
  const std::string head = text::trim(contents.substr(0, 1));
  if (head == "{" || path.extension() == ".jsonl") return parse_jsonl(contents);
  return parse_tsv(contents);
}

ScoreTable ScoreTable::parse_tsv(std::string_view contents) {
  ScoreTable t;
  const auto lines = text::split(contents, '\n');
  if (lines.empty() || text::trim(lines[0]).empty()) throw Error(ErrorCode::ingest, "score table has no header");
  auto header = text::split(lines[0], '\t');
  for (auto& h : header) h = text::trim(h);
  if (header.empty() || header[0] != "text_id") {
    throw Error(ErrorCode::ingest, "score table header must start with text_id");
  }
  t.dimensions_.assign(header.begin() + 1, header.end());
  for (std::size_t i = 1; i < lines.size(); ++i) {
    std::string line = lines[i];
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (text::trim(line).empty()) continue;
    const auto cells = text::split(line, '\t');
    if (cells.size() != header.size()) {
      throw Error(ErrorCode::ingest, "score table line " + std::to_string(i + 1) + " has " +
                                         std::to_string(cells.size()) + " cells, expected " +
                                         std::to_string(header.size()));
    }
    auto& row = t.values_[cells[0]];
    for (std::size_t c = 1; c < cells.size(); ++c) {
      if (!cells[c].empty()) row[header[c]] = parse_value(cells[c], i + 1);
    }
  }
  return t;
}

ScoreTable ScoreTable::parse_jsonl(std::string_view contents) {
  std::vector<ToneScore> rows;
  std::size_t line_no = 0;
  for (const auto& line : text::split(contents, '\n')) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      ToneScore s;
      s.text_id = j.at("text_id").get<std::string>();
      s.dimension = j.at("dimension").get<std::string>();
      s.value = j.at("value").get<double>();
      s.repetitions = j.value("repetitions", 1u);
      s.backend_id = j.value("backend_id", std::string{});
      s.truncated = j.value("truncated", false);
      s.aggregation = parse_aggregation(j.value("aggregation", std::string("sum_literal")));
      s.first_token_dropped = j.value("first_token_dropped", false);
      rows.push_back(std::move(s));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::ingest, "score JSONL line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return ScoreTable(rows, {});
}

std::optional<double> ScoreTable::get(const std::string& text_id, const std::string& dimension) const {
  const auto it = values_.find(text_id);
  if (it == values_.end()) return std::nullopt;
  const auto v = it->second.find(dimension);
  if (v == it->second.end()) return std::nullopt;
  return v->second;
}

void ScoreTable::set(const std::string& text_id, const std::string& dimension, double value) {
  values_[text_id][dimension] = value;
  if (std::find(dimensions_.begin(), dimensions_.end(), dimension) == dimensions_.end()) {
    dimensions_.push_back(dimension);
  }
}

std::vector<std::string> ScoreTable::text_ids() const {
  std::vector<std::string> ids;
  for (const auto& [id, _] : values_) ids.push_back(id);
  return ids;
}

std::string ScoreTable::to_tsv() const {
  std::string out = "text_id";
  for (const auto& d : dimensions_) out += "\t" + d;
  out += "\n";
  for (const auto& [id, row] : values_) {
    out += id;
    for (const auto& d : dimensions_) {
      out += "\t";
      if (const auto it = row.find(d); it != row.end()) out += format_value(it->second);
    }
    out += "\n";
  }
  return out;
}

std::string ScoreTable::to_jsonl() const {
  std::string out;
  if (!rows_.empty()) {
    for (const auto& r : rows_) out += r.to_json().dump() + "\n";
    return out;
  }
  for (const auto& [id, row] : values_) {
    for (const auto& d : dimensions_) {
      if (const auto it = row.find(d); it != row.end()) {
        nlohmann::ordered_json j;
        j["text_id"] = id;
        j["dimension"] = d;
        j["value"] = it->second;
        out += j.dump() + "\n";
      }
    }
  }
  return out;
}

nlohmann::ordered_json analyze_prefs(const PairCorpus& pairs, const ScoreTable& scores,
                                     const std::string& dimension, bool by_topic) {
  std::vector<double> chosen;
  std::vector<double> rejected;
  std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> topics;
  std::vector<std::string> missing;
  for (const auto& p : pairs.records) {
    const auto c = scores.get(chosen_id(p.pair_id), dimension);
    const auto r = scores.get(rejected_id(p.pair_id), dimension);
    if (!c || !r) {
      missing.push_back(p.pair_id);
      continue;
    }
    chosen.push_back(*c);
    rejected.push_back(*r);
    if (by_topic) {
      auto& t = topics[p.topic.value_or("")];
      t.first.push_back(*c);
      t.second.push_back(*r);
    }
  }
  const auto report = [](const std::vector<double>& a, const std::vector<double>& b) -> nlohmann::ordered_json {
    try {
      return stats::matched_mean_diff(a, b).to_json();
    } catch (const Error& e) {
      nlohmann::ordered_json j;
      j["n"] = a.size();
      j["error"] = e.what();
      return j;
    }
  };
  nlohmann::ordered_json j;
  j["dimension"] = dimension;
  j["columns"] = {{"a", "chosen"}, {"b", "rejected"}};
  j["overall"] = report(chosen, rejected);
  if (by_topic) {
    nlohmann::ordered_json per = nlohmann::ordered_json::object();
    for (const auto& [topic, cols] : topics) per[topic] = report(cols.first, cols.second);
    j["topics"] = std::move(per);
  }
  j["missing"] = missing;
  return j;
}

nlohmann::ordered_json correlate(const ScoreTable& scores, double alpha, const std::vector<std::string>& dimensions) {
  const std::vector<std::string> dims = dimensions.empty() ? scores.dimensions() : dimensions;
  if (dims.size() < 2) throw invalid_argument("correlate needs scores for at least two dimensions");
  std::map<std::string, std::vector<double>> columns;
  std::size_t shared = 0;
  for (const auto& id : scores.text_ids()) {
    std::vector<double> row;
    for (const auto& d : dims) {
      if (auto v = scores.get(id, d)) row.push_back(*v);
    }
    if (row.size() != dims.size()) continue;
    ++shared;
    for (std::size_t k = 0; k < dims.size(); ++k) columns[dims[k]].push_back(row[k]);
  }
  if (shared < 3) {
    throw invalid_argument("correlate needs at least 3 texts scored on every dimension, found " +
                           std::to_string(shared));
  }
  struct PairStat {
    std::string a, b;
    std::optional<stats::CorrelationResult> result;
    std::string error;
  };
  std::vector<PairStat> stats_list;
  std::vector<double> p_raw;
  for (std::size_t i = 0; i < dims.size(); ++i) {
    for (std::size_t k = i + 1; k < dims.size(); ++k) {
      PairStat ps{dims[i], dims[k], std::nullopt, {}};
      try {
        ps.result = stats::pearson_r(columns[dims[i]], columns[dims[k]]);
        p_raw.push_back(ps.result->test.p_value);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::degenerate) throw;
        ps.error = e.what();
      }
      stats_list.push_back(std::move(ps));
    }
  }
  const auto bh = stats::bh_adjust(p_raw, alpha);
  nlohmann::ordered_json pairs_json = nlohmann::ordered_json::array();
  std::map<std::pair<std::string, std::string>, double> r_of;
  std::size_t next = 0;
  for (const auto& ps : stats_list) {
    nlohmann::ordered_json e;
    e["a"] = ps.a;
    e["b"] = ps.b;
    if (ps.result) {
      e["r"] = ps.result->r;
      e["p_raw"] = ps.result->test.p_value;
      e["p_adjusted"] = bh.adjusted[next];
      e["reject"] = static_cast<bool>(bh.reject[next]);
      r_of[{ps.a, ps.b}] = ps.result->r;
      ++next;
    } else {
      e["r"] = nullptr;
      e["error"] = ps.error;
    }
    pairs_json.push_back(std::move(e));
  }
  nlohmann::ordered_json matrix = nlohmann::ordered_json::array();
  for (const auto& a : dims) {
    nlohmann::ordered_json row = nlohmann::ordered_json::array();
    for (const auto& b : dims) {
      if (a == b) {
        row.push_back(1.0);
      } else if (r_of.count({a, b}) != 0) {
        row.push_back(r_of[{a, b}]);
      } else if (r_of.count({b, a}) != 0) {
        row.push_back(r_of[{b, a}]);
      } else {
        row.push_back(nullptr);
      }
    }
    matrix.push_back(std::move(row));
  }
  nlohmann::ordered_json j;
  j["alpha"] = alpha;
  j["n"] = shared;
  j["dimensions"] = dims;
  j["pairs"] = std::move(pairs_json);
  j["matrix"] = std::move(matrix);
  return j;
}

std::string correlation_csv(const nlohmann::ordered_json& report) {
  const auto dims = report.at("dimensions").get<std::vector<std::string>>();
  std::string out = "dimension";
  for (const auto& d : dims) out += "," + d;
  out += "\n";
  const auto& matrix = report.at("matrix");
  for (std::size_t i = 0; i < dims.size(); ++i) {
    out += dims[i];
    for (std::size_t k = 0; k < dims.size(); ++k) {
      out += ",";
      if (!matrix[i][k].is_null()) out += format_value(matrix[i][k].get<double>());
    }
    out += "\n";
  }
  return out;
}

nlohmann::ordered_json lexicon_association(const TextCorpus& texts, const ScoreTable& scores,
                                           const std::string& dimension, const stats::Lexicon& lexicon,
                                           double max_p) {
  std::vector<stats::ScoredText> scored;
  std::vector<std::string> missing;
  for (const auto& t : texts.records) {
    if (const auto v = scores.get(t.text_id, dimension)) {
      scored.push_back({t.text_id, t.text, *v});
    } else {
      missing.push_back(t.text_id);
    }
  }
  const auto results = stats::quartile_lexicon_association(scored, lexicon, max_p);
  nlohmann::ordered_json j;
  j["dimension"] = dimension;
  j["texts"] = scored.size();
  j["quartile_size"] = scored.size() / 4;
  nlohmann::ordered_json cats = nlohmann::ordered_json::array();
  for (const auto& r : results) cats.push_back(r.to_json());
  j["categories"] = std::move(cats);
  j["missing"] = missing;
  return j;
}

std::vector<Annotation> load_annotations(const std::filesystem::path& path) {
  std::vector<Annotation> out;
  std::size_t line_no = 0;
  for (const auto& line : text::split(io::read_file(path), '\n')) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      Annotation a;
      a.item_id = j.at("item_id").is_string() ? j.at("item_id").get<std::string>() : j.at("item_id").dump();
      a.dimension = j.value("dimension", std::string("humt"));
      a.labels = j.at("labels").get<std::vector<int>>();
      for (int l : a.labels) {
        if (l != 0 && l != 1) throw invalid_argument("annotation labels must be 0 or 1");
      }
      out.push_back(std::move(a));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::ingest, path.string() + ": line " + std::to_string(line_no) + ": " + e.what());
    } catch (const Error& e) {
      throw Error(e.code(), path.string() + ": line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

nlohmann::ordered_json validate(const std::vector<Annotation>& annotations, const ScoreTable& scores) {
  std::map<std::string, std::vector<const Annotation*>> by_dim;
  for (const auto& a : annotations) by_dim[a.dimension].push_back(&a);
  nlohmann::ordered_json sections = nlohmann::ordered_json::array();
  for (const auto& [dim, items] : by_dim) {
    const std::size_t raters = items.front()->labels.size();
    std::vector<std::vector<double>> counts;
    std::vector<double> pos_scores;
    std::vector<double> neg_scores;
    std::vector<std::vector<double>> table(2, std::vector<double>(2, 0.0));
    std::size_t ties = 0;
    std::vector<std::string> missing;
    for (const auto* a : items) {
      if (a->labels.size() != raters) {
        throw invalid_argument("dimension '" + dim + "': item '" + a->item_id + "' has " +
                               std::to_string(a->labels.size()) + " labels, expected " + std::to_string(raters));
      }
      const auto ones = static_cast<double>(std::count(a->labels.begin(), a->labels.end(), 1));
      counts.push_back({static_cast<double>(raters) - ones, ones});
      const auto score = scores.get(a->item_id, dim);
      if (!score) {
        missing.push_back(a->item_id);
        continue;
      }
      if (2.0 * ones == static_cast<double>(raters)) {
        ++ties;
        continue;
      }
      const bool positive = 2.0 * ones > static_cast<double>(raters);
      (positive ? pos_scores : neg_scores).push_back(*score);
      table[positive ? 0 : 1][*score > 0.0 ? 0 : 1] += 1.0;
    }
    nlohmann::ordered_json s;
    s["dimension"] = dim;
    s["items"] = items.size();
    s["raters"] = raters;
    try {
      s["fleiss_kappa"] = stats::fleiss_kappa(counts);
    } catch (const Error& e) {
      throw invalid_argument("dimension '" + dim + "': " + e.what());
    }
    s["sign_table"] = table;
    s["sign_agreement"] = test_or_error([&] { return stats::chi_square_independence(table); });
    s["label_mean_diff"] = test_or_error([&] { return stats::welch_t(pos_scores, neg_scores); });
    s["majority_ties"] = ties;
    s["missing_scores"] = missing;
    sections.push_back(std::move(s));
  }
  nlohmann::ordered_json j;
  j["dimensions"] = std::move(sections);
  return j;
}

ScoredPairs scored_pairs(const PairCorpus& pairs, const ScoreTable& scores, const std::string& dimension) {
  ScoredPairs out;
  for (const auto& p : pairs.records) {
    const auto c = scores.get(chosen_id(p.pair_id), dimension);
    const auto r = scores.get(rejected_id(p.pair_id), dimension);
    if (!c || !r) {
      out.missing.push_back(p.pair_id);
      continue;
    }
    out.pairs.push_back({p, *c, *r});
  }
  return out;
}

nlohmann::ordered_json epsilon_report(const ScoreTable& reduced, const ScoreTable& baseline,
                                      const std::string& dimension, double epsilon,
                                      dumt::EpsilonDirection direction) {
  std::map<std::string, double> a;
  std::map<std::string, double> b;
  for (const auto& id : reduced.text_ids()) {
    if (auto v = reduced.get(id, dimension)) a[id] = *v;
  }
  for (const auto& id : baseline.text_ids()) {
    if (auto v = baseline.get(id, dimension)) b[id] = *v;
  }
  const auto kept = dumt::epsilon_filter(a, b, epsilon, direction);
  std::size_t shared = 0;
  for (const auto& [id, _] : a) shared += b.count(id);
  nlohmann::ordered_json j;
  j["dimension"] = dimension;
  j["epsilon"] = epsilon;
  j["direction"] = std::string(dumt::to_string(direction));
  j["direction_note"] =
      "the written condition subtracts the baseline from the reduced model while the stated intent is "
      "prompts where the reduced model is less human-like; baseline_minus_reduced follows the intent";
  j["shared_prompts"] = shared;
  j["kept"] = kept.size();
  j["kept_fraction"] = shared == 0 ? 0.0 : static_cast<double>(kept.size()) / static_cast<double>(shared);
  j["prompts"] = kept;
  return j;
}

}  // namespace humt::analysis
