#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "humt/backend.hpp"
#include "humt/tone.hpp"

namespace humt::discovery {

struct SpeakerCount {
  std::string word;
  std::size_t frequency = 0;
};

struct SpeakerTable {
  std::vector<SpeakerCount> entries;  // frequency descending, ties by word
  std::size_t fill_k = 15;
  std::size_t vocab_top = 200;
  std::size_t texts_seen = 0;
  std::vector<RowFailure> skipped;

  nlohmann::ordered_json to_json() const;
};

/// Lowercases a fill and strips leading space or word-boundary markers
/// (U+0120, U+2581). Sub-word pieces ("##ing") and fills without a letter or
/// digit normalize to nullopt and are dropped.
std::optional<std::string> normalize_fill(std::string_view fill);

/// The fill template for one text: "<slot> said <text>".
std::string speaker_template(std::string_view text);

/// For each text, tallies the distinct words among its top fill_k fills of
/// "<slot> said <text>" and returns the vocab_top most frequent. A backend
/// failure skips that text and records it.
SpeakerTable implicit_speakers(std::span<const IdentifiedText> texts, Backend& backend, std::size_t fill_k = 15,
                               std::size_t vocab_top = 200, std::size_t truncation_limit = 300);

/// Row-major n x dim matrix of points.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  std::span<const double> row(std::size_t i) const { return {data.data() + i * cols, cols}; }
  std::span<double> row(std::size_t i) { return {data.data() + i * cols, cols}; }

  static Matrix from_rows(const std::vector<std::vector<double>>& rows);
};

struct Clustering {
  std::vector<std::size_t> assignments;
  Matrix centroids;
  double inertia = 0.0;
  std::size_t iterations = 0;
  std::uint64_t seed = 0;
  std::vector<double> inertia_trace;  // after each assignment step
  std::size_t reseeded = 0;           // empty clusters refilled

  nlohmann::ordered_json to_json() const;
};

/// Lloyd's algorithm from a seeded k-means++ start. Stops at an assignment
/// fixpoint or after max_iter rounds. A cluster left empty after an update
/// takes the point farthest from its current centroid. Assignment ties go to
/// the lower cluster index.
Clustering kmeans(const Matrix& points, std::size_t k, std::uint64_t seed, std::size_t max_iter = 100);

struct Topic {
  std::size_t cluster = 0;
  std::size_t size = 0;
  std::vector<std::string> exemplars;  // ids of the prompts nearest the centroid
};

struct TopicClustering {
  Clustering clustering;
  std::vector<std::string> ids;  // row order of the clustering
  std::vector<Topic> topics;

  nlohmann::ordered_json to_json() const;
  /// cluster \t rank \t id \t text
  std::string exemplars_tsv(std::span<const IdentifiedText> prompts) const;
};

/// k-means over backend embeddings of the prompts; five exemplars per cluster.
TopicClustering topic_clusters(std::span<const IdentifiedText> prompts, Backend& backend, std::size_t k = 10,
                               std::uint64_t seed = 0, std::size_t exemplars = 5);

/// k-means over embeddings of the bare discovered words.
TopicClustering cluster_speakers(const SpeakerTable& table, Backend& backend, std::size_t k, std::uint64_t seed);

}  // namespace humt::discovery
