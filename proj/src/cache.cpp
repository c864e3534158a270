#include "humt/cache.hpp"

#include <bit>
#include <chrono>
#include <vector>

#include "humt/error.hpp"
#include "humt/io.hpp"

namespace humt {
namespace {

constexpr std::uint8_t kRecordVersion = 1;
constexpr std::size_t kDigestBytes = 32;

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint64_t get_u64(std::string_view in, std::size_t at) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) {
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[at + i])) << (8 * i);
  }
  return v;
}

std::string encode_record(const CacheEntry& e) {
  std::string payload;
  payload.push_back(static_cast<char>(kRecordVersion));
  payload.push_back(static_cast<char>(e.key.size()));
  payload += e.key;
  put_u64(payload, std::bit_cast<std::uint64_t>(e.log_prob));
  put_u64(payload, static_cast<std::uint64_t>(e.created_at));
  std::string record;
  put_u64(record, payload.size());
  record += payload;
  return record;
}

struct ScanResult {
  std::vector<CacheEntry> entries;
  std::uint64_t good_end = 0;
  std::uint64_t file_bytes = 0;
};

ScanResult scan(const std::filesystem::path& path, std::string_view bytes) {
  ScanResult result;
  result.file_bytes = bytes.size();
  std::size_t at = 0;
  while (at < bytes.size()) {
    if (bytes.size() - at < 8) break;  // torn length prefix
    const std::uint64_t len = get_u64(bytes, at);
    if (len > bytes.size() - at - 8) break;  // torn payload
    const auto corrupt = [&](const std::string& why) {
      return Error(ErrorCode::io, "cache file " + path.string() + ": malformed record at byte offset " +
                                      std::to_string(at) + " (" + why + ")");
    };
    const std::string_view payload = bytes.substr(at + 8, len);
    if (payload.size() < 2) throw corrupt("payload too short");
    if (static_cast<std::uint8_t>(payload[0]) != kRecordVersion) throw corrupt("unknown record version");
    const std::size_t digest_len = static_cast<unsigned char>(payload[1]);
    if (digest_len != kDigestBytes || payload.size() != 2 + digest_len + 16) {
      throw corrupt("unexpected record length");
    }
    CacheEntry e;
    e.key = std::string(payload.substr(2, digest_len));
    e.log_prob = std::bit_cast<double>(get_u64(payload, 2 + digest_len));
    e.created_at = static_cast<std::int64_t>(get_u64(payload, 2 + digest_len + 8));
    result.entries.push_back(std::move(e));
    at += 8 + len;
    result.good_end = at;
  }
  return result;
}

}  // namespace

ScoreCache::ScoreCache(std::filesystem::path path) : path_(std::move(path)) {
  if (std::filesystem::exists(path_)) {
    const std::string bytes = io::read_file(path_);
    const ScanResult scanned = scan(path_, bytes);
    for (auto& e : scanned.entries) entries_.emplace(e.key, e);
    torn_bytes_ = scanned.file_bytes - scanned.good_end;
    if (torn_bytes_ != 0) std::filesystem::resize_file(path_, scanned.good_end);
  }
  out_.open(path_, std::ios::binary | std::ios::app);
  if (!out_) throw Error(ErrorCode::io, "cannot open cache file " + path_.string() + " for append");
}

std::optional<double> ScoreCache::lookup(const std::string& key) const {
  std::shared_lock lock(mutex_);
  const auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second.log_prob;
}

bool ScoreCache::insert(const std::string& key, double log_prob) {
  std::unique_lock lock(mutex_);
  if (entries_.count(key) != 0) return false;
  CacheEntry e{key, log_prob,
               std::chrono::duration_cast<std::chrono::seconds>(
                   std::chrono::system_clock::now().time_since_epoch())
                   .count()};
  const std::string record = encode_record(e);
  out_.write(record.data(), static_cast<std::streamsize>(record.size()));
  out_.flush();
  if (!out_) throw Error(ErrorCode::io, "cache append failed: " + path_.string());
  entries_.emplace(key, std::move(e));
  return true;
}

std::size_t ScoreCache::size() const {
  std::shared_lock lock(mutex_);
  return entries_.size();
}

std::string ScoreCache::make_key(std::string_view model_id, std::string_view text, std::uint32_t sample) {
  std::string material;
  material.append(model_id);
  material.push_back('\0');
  material += std::to_string(kCacheProtocolVersion);
  material.push_back('\0');
  material.append(text);
  if (sample != 0) {
    material.push_back('\0');
    material += "sample=" + std::to_string(sample);
  }
  return io::sha256_raw(material);
}

CachedBackend::CachedBackend(std::shared_ptr<Backend> inner, const std::filesystem::path& cache_path)
    : inner_(std::move(inner)), cache_(cache_path) {
  if (!inner_) throw invalid_argument("with_cache requires a backend");
}

double CachedBackend::do_sequence_logprob(std::string_view text, std::uint32_t sample) {
  const auto& d = inner_->descriptor();
  const std::uint32_t effective_sample = d.deterministic ? 0 : sample;
  const std::string key = ScoreCache::make_key(d.model_id, text, effective_sample);
  if (auto hit = cache_.lookup(key)) {
    ++hits_;
    return *hit;
  }
  ++misses_;
  const double lp = inner_->sequence_logprob(text, sample);
  cache_.insert(key, lp);
  return lp;
}

std::vector<Fill> CachedBackend::do_fill_mask(std::string_view tmpl, std::size_t top_k) {
  return inner_->fill_mask(tmpl, top_k);
}

std::vector<double> CachedBackend::do_embed(std::string_view text) { return inner_->embed(text); }

std::shared_ptr<Backend> with_cache(std::shared_ptr<Backend> backend,
                                    const std::filesystem::path& cache_path) {
  return std::make_shared<CachedBackend>(std::move(backend), cache_path);
}

CacheStats cache_stats(const std::filesystem::path& path) {
  CacheStats stats;
  if (!std::filesystem::exists(path)) return stats;
  const std::string bytes = io::read_file(path);
  const ScanResult scanned = scan(path, bytes);
  stats.entries = scanned.entries.size();
  stats.file_bytes = scanned.file_bytes;
  stats.torn_bytes = scanned.file_bytes - scanned.good_end;
  return stats;
}

void cache_purge(const std::filesystem::path& path) {
  std::error_code ec;
  std::filesystem::remove(path, ec);
  if (ec) throw Error(ErrorCode::io, "cannot remove cache file " + path.string());
}

}  // namespace humt
