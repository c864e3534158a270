#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <unordered_map>

#include "humt/backend.hpp"

namespace humt {

/// Bumped whenever the meaning of a cached value changes.
inline constexpr std::uint32_t kCacheProtocolVersion = 1;

struct CacheEntry {
  std::string key;  // raw 32-byte digest
  double log_prob = 0.0;
  std::int64_t created_at = 0;  // unix seconds
};

/// Append-only persistent map from query digest to log-probability.
///
/// File layout, repeated per record:
///   u64 LE  payload length L
///   u8      record version (1)
///   u8      digest length D (32)
///   D bytes SHA-256 key digest
///   f64 LE  log-probability (IEEE-754 binary64)
///   i64 LE  created_at, unix seconds
/// A record whose length prefix or payload is cut short by end of file is a
/// torn append; it is dropped and the file truncated back on open. A complete
/// record that does not parse is corruption and fails the open.
class ScoreCache {
 public:
  explicit ScoreCache(std::filesystem::path path);

  std::optional<double> lookup(const std::string& key) const;
  /// Appends a record unless the key is already present; returns whether it wrote.
  bool insert(const std::string& key, double log_prob);

  std::size_t size() const;
  std::uint64_t torn_bytes_dropped() const { return torn_bytes_; }
  const std::filesystem::path& path() const { return path_; }

  static std::string make_key(std::string_view model_id, std::string_view text, std::uint32_t sample);

 private:
  std::filesystem::path path_;
  std::unordered_map<std::string, CacheEntry> entries_;
  mutable std::shared_mutex mutex_;
  std::ofstream out_;
  std::uint64_t torn_bytes_ = 0;
};

/// Read-through/write-through persistence around another backend's
/// sequence_logprob. Fill-mask and embed calls pass straight through.
class CachedBackend : public Backend {
 public:
  CachedBackend(std::shared_ptr<Backend> inner, const std::filesystem::path& cache_path);

  const BackendDescriptor& descriptor() const override { return inner_->descriptor(); }

  std::uint64_t hits() const { return hits_.load(); }
  std::uint64_t misses() const { return misses_.load(); }
  const ScoreCache& cache() const { return cache_; }
  Backend& inner() { return *inner_; }

 protected:
  double do_sequence_logprob(std::string_view text, std::uint32_t sample) override;
  std::vector<Fill> do_fill_mask(std::string_view tmpl, std::size_t top_k) override;
  std::vector<double> do_embed(std::string_view text) override;

 private:
  std::shared_ptr<Backend> inner_;
  ScoreCache cache_;
  std::atomic<std::uint64_t> hits_{0};
  std::atomic<std::uint64_t> misses_{0};
};

std::shared_ptr<Backend> with_cache(std::shared_ptr<Backend> backend,
                                    const std::filesystem::path& cache_path);

struct CacheStats {
  std::size_t entries = 0;
  std::uint64_t file_bytes = 0;
  std::uint64_t torn_bytes = 0;
};

/// Scans a cache file without modifying it.
CacheStats cache_stats(const std::filesystem::path& path);
void cache_purge(const std::filesystem::path& path);

}  // namespace humt
