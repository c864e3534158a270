#include "humt/discovery.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "humt/error.hpp"
#include "humt/rng.hpp"
#include "humt/text.hpp"

namespace humt::discovery {

std::optional<std::string> normalize_fill(std::string_view fill) {
  std::string_view s = fill;
  static constexpr std::string_view kMarkers[] = {"\xC4\xA0" /* U+0120 */, "\xE2\x96\x81" /* U+2581 */, " "};
  for (bool stripped = true; stripped;) {
    stripped = false;
    for (auto m : kMarkers) {
      if (s.substr(0, m.size()) == m) {
        s.remove_prefix(m.size());
        stripped = true;
      }
    }
  }
  if (s.substr(0, 2) == "##") return std::nullopt;
  std::string word = text::to_lower(text::trim(s));
  if (word.empty()) return std::nullopt;
  const auto tokens = text::tokenize(word);
  if (tokens.size() != 1 || tokens[0] != word) return std::nullopt;
  return word;
}

std::string speaker_template(std::string_view body) {
  std::string t(kSlot);
  t += " said ";
  t.append(body);
  return t;
}

nlohmann::ordered_json SpeakerTable::to_json() const {
  nlohmann::ordered_json j;
  j["fill_k"] = fill_k;
  j["vocab_top"] = vocab_top;
  j["texts_seen"] = texts_seen;
  nlohmann::ordered_json words = nlohmann::ordered_json::array();
  for (const auto& e : entries) words.push_back({{"word", e.word}, {"frequency", e.frequency}});
  j["words"] = std::move(words);
  nlohmann::ordered_json skipped_json = nlohmann::ordered_json::array();
  for (const auto& s : skipped) skipped_json.push_back({{"text_id", s.text_id}, {"error", s.message}});
  j["skipped"] = std::move(skipped_json);
  return j;
}

SpeakerTable implicit_speakers(std::span<const IdentifiedText> texts, Backend& backend, std::size_t fill_k,
                               std::size_t vocab_top, std::size_t truncation_limit) {
  if (fill_k == 0 || vocab_top == 0) throw invalid_argument("fill_k and vocab_top must be positive");
  if (!backend.descriptor().has(Capability::fill_mask)) {
    throw Error(ErrorCode::unsupported_capability, "implicit speaker discovery needs a fill_mask backend");
  }
  SpeakerTable table;
  table.fill_k = fill_k;
  table.vocab_top = vocab_top;
  std::map<std::string, std::size_t> tally;
  for (const auto& t : texts) {
    std::vector<Fill> fills;
    try {
      fills = backend.fill_mask(speaker_template(text::truncate(t.text, truncation_limit)), fill_k);
    } catch (const Error& e) {
      table.skipped.push_back({t.id, "", e.what()});
      continue;
    }
    ++table.texts_seen;
    std::set<std::string> words;
    for (const auto& f : fills) {
      if (auto w = normalize_fill(f.word)) words.insert(*w);
    }
    for (const auto& w : words) ++tally[w];
  }
  for (const auto& [word, n] : tally) table.entries.push_back({word, n});
  std::stable_sort(table.entries.begin(), table.entries.end(),
                   [](const SpeakerCount& a, const SpeakerCount& b) { return a.frequency > b.frequency; });
  if (table.entries.size() > vocab_top) table.entries.resize(vocab_top);
  return table;
}

Matrix Matrix::from_rows(const std::vector<std::vector<double>>& rows) {
  Matrix m;
  m.rows = rows.size();
  m.cols = rows.empty() ? 0 : rows[0].size();
  m.data.reserve(m.rows * m.cols);
  for (const auto& r : rows) {
    if (r.size() != m.cols) throw invalid_argument("all vectors must have the same dimension");
    m.data.insert(m.data.end(), r.begin(), r.end());
  }
  return m;
}

namespace {

double sq_dist(std::span<const double> a, std::span<const double> b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d += (a[i] - b[i]) * (a[i] - b[i]);
  return d;
}

Matrix kmeanspp_init(const Matrix& points, std::size_t k, CounterRng& rng) {
  const std::size_t n = points.rows;
  Matrix centroids{k, points.cols, std::vector<double>(k * points.cols)};
  std::vector<bool> chosen(n, false);
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  std::size_t pick = static_cast<std::size_t>(rng.below(n));
  for (std::size_t c = 0; c < k; ++c) {
    if (c > 0) {
      double total = 0.0;
      for (std::size_t i = 0; i < n; ++i) total += chosen[i] ? 0.0 : d2[i];
      if (total > 0.0) {
        const double target = rng.uniform() * total;
        double acc = 0.0;
        pick = n;
        std::size_t last_positive = n;
        for (std::size_t i = 0; i < n; ++i) {
          if (chosen[i] || d2[i] == 0.0) continue;
          last_positive = i;
          acc += d2[i];
          if (acc > target) {
            pick = i;
            break;
          }
        }
        if (pick == n) pick = last_positive;
      } else {
        // Every remaining point coincides with a centre: take an unchosen one uniformly.
        std::vector<std::size_t> rest;
        for (std::size_t i = 0; i < n; ++i) {
          if (!chosen[i]) rest.push_back(i);
        }
        pick = rest[static_cast<std::size_t>(rng.below(rest.size()))];
      }
    }
    chosen[pick] = true;
    std::copy(points.row(pick).begin(), points.row(pick).end(), centroids.row(c).begin());
    for (std::size_t i = 0; i < n; ++i) d2[i] = std::min(d2[i], sq_dist(points.row(i), centroids.row(c)));
  }
  return centroids;
}

double assign(const Matrix& points, const Matrix& centroids, std::vector<std::size_t>& out) {
  double inertia = 0.0;
  out.resize(points.rows);
  for (std::size_t i = 0; i < points.rows; ++i) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t best_c = 0;
    for (std::size_t c = 0; c < centroids.rows; ++c) {
      const double d = sq_dist(points.row(i), centroids.row(c));
      if (d < best) {
        best = d;
        best_c = c;
      }
    }
    out[i] = best_c;
    inertia += best;
  }
  return inertia;
}

// Recomputes centroids as member means; returns how many empty clusters were
// refilled with far points.
std::size_t update(const Matrix& points, const std::vector<std::size_t>& assignment, Matrix& centroids) {
  const Matrix previous = centroids;
  std::vector<std::size_t> counts(centroids.rows, 0);
  std::fill(centroids.data.begin(), centroids.data.end(), 0.0);
  for (std::size_t i = 0; i < points.rows; ++i) {
    auto c = centroids.row(assignment[i]);
    const auto p = points.row(i);
    for (std::size_t d = 0; d < points.cols; ++d) c[d] += p[d];
    ++counts[assignment[i]];
  }
  std::vector<std::size_t> empty;
  for (std::size_t c = 0; c < centroids.rows; ++c) {
    if (counts[c] == 0) {
      empty.push_back(c);
      continue;
    }
    for (double& v : centroids.row(c)) v /= static_cast<double>(counts[c]);
  }
  if (empty.empty()) return 0;
  // Farthest points from their (previous) centroid, largest first.
  std::vector<std::size_t> order(points.rows);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<double> dist(points.rows);
  for (std::size_t i = 0; i < points.rows; ++i) dist[i] = sq_dist(points.row(i), previous.row(assignment[i]));
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return dist[a] > dist[b]; });
  for (std::size_t e = 0; e < empty.size(); ++e) {
    const auto p = points.row(order[e % order.size()]);
    std::copy(p.begin(), p.end(), centroids.row(empty[e]).begin());
  }
  return empty.size();
}

}  // namespace

Clustering kmeans(const Matrix& points, std::size_t k, std::uint64_t seed, std::size_t max_iter) {
  if (points.rows == 0 || points.cols == 0) throw invalid_argument("kmeans needs at least one non-empty vector");
  if (points.data.size() != points.rows * points.cols) throw invalid_argument("kmeans matrix size mismatch");
  if (k < 1 || k > points.rows) {
    throw invalid_argument("kmeans needs 1 <= k <= " + std::to_string(points.rows) + ", got " + std::to_string(k));
  }
  if (max_iter < 1) throw invalid_argument("kmeans max_iter must be positive");
  for (double v : points.data) {
    if (!std::isfinite(v)) throw invalid_argument("kmeans input must be finite");
  }
  CounterRng rng(seed);
  Clustering result;
  result.seed = seed;
  result.centroids = kmeanspp_init(points, k, rng);
  std::vector<std::size_t> current;
  std::vector<std::size_t> previous;
  bool converged = false;
  for (std::size_t it = 0; it < max_iter; ++it) {
    result.inertia = assign(points, result.centroids, current);
    result.inertia_trace.push_back(result.inertia);
    ++result.iterations;
    if (current == previous) {
      converged = true;
      break;
    }
    previous = current;
    result.reseeded += update(points, current, result.centroids);
  }
  if (!converged) {
    // Centroids were just updated; report inertia against them.
    double inertia = 0.0;
    for (std::size_t i = 0; i < points.rows; ++i) inertia += sq_dist(points.row(i), result.centroids.row(current[i]));
    result.inertia = inertia;
  }
  result.assignments = std::move(current);
  return result;
}

nlohmann::ordered_json Clustering::to_json() const {
  nlohmann::ordered_json j;
  j["k"] = centroids.rows;
  j["seed"] = seed;
  j["iterations"] = iterations;
  j["inertia"] = inertia;
  j["inertia_trace"] = inertia_trace;
  j["reseeded"] = reseeded;
  j["assignments"] = assignments;
  nlohmann::ordered_json cs = nlohmann::ordered_json::array();
  for (std::size_t c = 0; c < centroids.rows; ++c) {
    const auto r = centroids.row(c);
    cs.push_back(std::vector<double>(r.begin(), r.end()));
  }
  j["centroids"] = std::move(cs);
  return j;
}

nlohmann::ordered_json TopicClustering::to_json() const {
  nlohmann::ordered_json j = clustering.to_json();
  j["ids"] = ids;
  nlohmann::ordered_json ts = nlohmann::ordered_json::array();
  for (const auto& t : topics) {
    ts.push_back({{"cluster", t.cluster}, {"size", t.size}, {"exemplars", t.exemplars}});
  }
  j["topics"] = std::move(ts);
  return j;
}

std::string TopicClustering::exemplars_tsv(std::span<const IdentifiedText> prompts) const {
  std::map<std::string, std::string> by_id;
  for (const auto& p : prompts) by_id[p.id] = p.text;
  std::ostringstream out;
  out << "cluster\trank\tid\ttext\n";
  for (const auto& t : topics) {
    for (std::size_t r = 0; r < t.exemplars.size(); ++r) {
      std::string body = by_id.count(t.exemplars[r]) != 0 ? by_id[t.exemplars[r]] : t.exemplars[r];
      std::replace(body.begin(), body.end(), '\t', ' ');
      std::replace(body.begin(), body.end(), '\n', ' ');
      out << t.cluster << '\t' << (r + 1) << '\t' << t.exemplars[r] << '\t' << body << '\n';
    }
  }
  return out.str();
}

namespace {

TopicClustering cluster_embedded(std::vector<std::string> ids, const std::vector<std::vector<double>>& vectors,
                                 std::size_t k, std::uint64_t seed, std::size_t exemplars) {
  const Matrix points = Matrix::from_rows(vectors);
  TopicClustering out;
  out.clustering = kmeans(points, k, seed);
  out.ids = std::move(ids);
  for (std::size_t c = 0; c < k; ++c) {
    std::vector<std::pair<double, std::size_t>> members;
    for (std::size_t i = 0; i < points.rows; ++i) {
      if (out.clustering.assignments[i] == c) {
        members.emplace_back(sq_dist(points.row(i), out.clustering.centroids.row(c)), i);
      }
    }
    std::sort(members.begin(), members.end(), [&](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first < b.first;
      return out.ids[a.second] < out.ids[b.second];
    });
    Topic t;
    t.cluster = c;
    t.size = members.size();
    for (std::size_t m = 0; m < members.size() && m < exemplars; ++m) t.exemplars.push_back(out.ids[members[m].second]);
    out.topics.push_back(std::move(t));
  }
  return out;
}

}  // namespace

TopicClustering topic_clusters(std::span<const IdentifiedText> prompts, Backend& backend, std::size_t k,
                               std::uint64_t seed, std::size_t exemplars) {
  if (!backend.descriptor().has(Capability::embed)) {
    throw Error(ErrorCode::unsupported_capability, "topic clustering needs an embed backend");
  }
  std::vector<std::string> ids;
  std::vector<std::vector<double>> vectors;
  for (const auto& p : prompts) {
    ids.push_back(p.id);
    vectors.push_back(backend.embed(p.text));
  }
  return cluster_embedded(std::move(ids), vectors, k, seed, exemplars);
}

TopicClustering cluster_speakers(const SpeakerTable& table, Backend& backend, std::size_t k, std::uint64_t seed) {
  if (!backend.descriptor().has(Capability::embed)) {
    throw Error(ErrorCode::unsupported_capability, "speaker clustering needs an embed backend");
  }
  std::vector<std::string> ids;
  std::vector<std::vector<double>> vectors;
  for (const auto& e : table.entries) {
    ids.push_back(e.word);
    vectors.push_back(backend.embed(e.word));
  }
  return cluster_embedded(std::move(ids), vectors, k, seed, 5);
}

}  // namespace humt::discovery
