#pragma once

#include <chrono>
#include <functional>
#include <memory>
#include <semaphore>
#include <string>

#include "humt/backend.hpp"
#include "humt/corpus.hpp"

namespace humt {

struct HttpResponse {
  int status = 0;  // 0 means the request never completed (transport failure)
  std::string body;
};

/// POSTs a JSON body to a path relative to the endpoint.
using Transport = std::function<HttpResponse(const std::string& path, const std::string& body)>;

struct RemoteConfig {
  std::string endpoint;  // scheme://host[:port][/prefix]
  std::string api_key;
  std::string model_id = "gpt2";
  // Prepended to every scored string so the first real token is conditioned
  // on a document start; its own (unscored) term is always discarded. When
  // empty the server's unscored first token is dropped instead and every
  // score is flagged.
  std::string document_start = "<|endoftext|>";
  std::string mask_token = "[MASK]";
  unsigned capabilities = static_cast<unsigned>(Capability::sequence_logprob) |
                          static_cast<unsigned>(Capability::fill_mask) |
                          static_cast<unsigned>(Capability::embed);
  bool deterministic = true;
  int max_attempts = 5;
  std::chrono::milliseconds initial_backoff{250};
  double backoff_multiplier = 2.0;
  std::ptrdiff_t max_in_flight = 4;
  std::chrono::seconds timeout{120};

  /// Reads HUMT_ENDPOINT (required), HUMT_API_KEY, HUMT_MODEL,
  /// HUMT_DOCUMENT_START, HUMT_MASK_TOKEN, HUMT_MAX_IN_FLIGHT.
  static RemoteConfig from_env();
};

/// Completions-style JSON-over-HTTP client.
///
///   POST /v1/completions {"model", "prompt", "echo": true, "logprobs": 1, "max_tokens": 0}
///     -> {"choices": [{"logprobs": {"token_logprobs": [null | x, ...]}}]}
///   POST /v1/fill_mask   {"model", "inputs", "top_k"}
///     -> [{"token_str", "score"}, ...]  or {"fills": [...]}
///   POST /v1/embeddings  {"model", "input"} -> {"data": [{"embedding": [...]}]}
///
/// Transport failures, 429 and 5xx are retried with exponential backoff up to
/// max_attempts; any other non-200 status or an unparseable body is a
/// protocol error and is not retried.
class RemoteBackend : public Backend {
 public:
  explicit RemoteBackend(RemoteConfig config, Transport transport = {},
                         std::function<void(std::chrono::milliseconds)> sleeper = {});
  ~RemoteBackend() override;

  const BackendDescriptor& descriptor() const override { return descriptor_; }

  std::uint64_t requests_sent() const { return requests_.load(); }
  std::ptrdiff_t peak_in_flight() const { return peak_in_flight_.load(); }

 protected:
  double do_sequence_logprob(std::string_view text, std::uint32_t sample) override;
  std::vector<Fill> do_fill_mask(std::string_view tmpl, std::size_t top_k) override;
  std::vector<double> do_embed(std::string_view text) override;

 private:
  std::string post(const std::string& path, const std::string& body);

  RemoteConfig config_;
  Transport transport_;
  std::function<void(std::chrono::milliseconds)> sleeper_;
  BackendDescriptor descriptor_;
  std::unique_ptr<std::counting_semaphore<>> slots_;
  std::atomic<std::uint64_t> requests_{0};
  std::atomic<std::ptrdiff_t> in_flight_{0};
  std::atomic<std::ptrdiff_t> peak_in_flight_{0};
};

/// Moderation over POST /v1/moderations {"model", "input": [prompt, chosen, rejected]}
/// -> {"results": [{"flagged": bool}, ...]}. A pair is flagged when any of its
/// three texts is. Non-200 responses throw; moderation_filter owns retries.
class RemoteModeration : public ModerationClient {
 public:
  explicit RemoteModeration(RemoteConfig config, Transport transport = {});
  ModerationVerdict check(const PreferencePairRecord& record) override;

 private:
  RemoteConfig config_;
  Transport transport_;
};

/// cpp-httplib transport for the configured endpoint.
Transport http_transport(const RemoteConfig& config);

}  // namespace humt
