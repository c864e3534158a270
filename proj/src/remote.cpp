#include "humt/remote.hpp"

#include <httplib.h>

#include <cmath>
#include <cstdlib>
#include <thread>

#include <nlohmann/json.hpp>

#include "humt/error.hpp"

namespace humt {
namespace {

std::string env_or(const char* name, const std::string& fallback) {
  const char* v = std::getenv(name);
  return (v != nullptr && *v != '\0') ? std::string(v) : fallback;
}

nlohmann::json parse_body(const std::string& body) {
  try {
    return nlohmann::json::parse(body);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::protocol, std::string("malformed backend response: ") + e.what());
  }
}

}  // namespace

RemoteConfig RemoteConfig::from_env() {
  RemoteConfig c;
  c.endpoint = env_or("HUMT_ENDPOINT", "");
  if (c.endpoint.empty()) throw invalid_argument("HUMT_ENDPOINT is not set");
  c.api_key = env_or("HUMT_API_KEY", "");
  c.model_id = env_or("HUMT_MODEL", c.model_id);
  if (const char* v = std::getenv("HUMT_DOCUMENT_START")) c.document_start = v;
  c.mask_token = env_or("HUMT_MASK_TOKEN", c.mask_token);
  const std::string in_flight = env_or("HUMT_MAX_IN_FLIGHT", "");
  if (!in_flight.empty()) c.max_in_flight = std::max(1L, std::strtol(in_flight.c_str(), nullptr, 10));
  return c;
}

RemoteBackend::RemoteBackend(RemoteConfig config, Transport transport,
                             std::function<void(std::chrono::milliseconds)> sleeper)
    : config_(std::move(config)),
      transport_(transport ? std::move(transport) : http_transport(config_)),
      sleeper_(sleeper ? std::move(sleeper)
                       : [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); }) {
  if (config_.max_attempts < 1) throw invalid_argument("max_attempts must be at least 1");
  if (config_.max_in_flight < 1) throw invalid_argument("max_in_flight must be at least 1");
  if (config_.capabilities == 0) throw invalid_argument("remote backend needs at least one capability");
  slots_ = std::make_unique<std::counting_semaphore<>>(config_.max_in_flight);
  descriptor_.backend_id = claim_backend_id("remote:" + config_.model_id);
  descriptor_.model_id = config_.model_id;
  descriptor_.capabilities = config_.capabilities;
  descriptor_.deterministic = config_.deterministic;
  descriptor_.first_token_dropped = config_.document_start.empty();
}

RemoteBackend::~RemoteBackend() { release_backend_id(descriptor_.backend_id); }

std::string RemoteBackend::post(const std::string& path, const std::string& body) {
  auto backoff = config_.initial_backoff;
  std::string last_failure;
  for (int attempt = 1; attempt <= config_.max_attempts; ++attempt) {
    HttpResponse response;
    {
      slots_->acquire();
      const auto now = ++in_flight_;
      auto peak = peak_in_flight_.load();
      while (now > peak && !peak_in_flight_.compare_exchange_weak(peak, now)) {
      }
      ++requests_;
      try {
        response = transport_(path, body);
      } catch (...) {
        --in_flight_;
        slots_->release();
        throw;
      }
      --in_flight_;
      slots_->release();
    }
    if (response.status == 200) return response.body;
    const bool retryable = response.status == 0 || response.status == 429 || response.status >= 500;
    if (!retryable) {
      throw Error(ErrorCode::protocol, "backend returned HTTP " + std::to_string(response.status) +
                                           " for " + path + ": " + response.body.substr(0, 200));
    }
    last_failure = response.status == 0 ? std::string("transport failure")
                                        : "HTTP " + std::to_string(response.status);
    if (attempt < config_.max_attempts) {
      sleeper_(backoff);
      backoff = std::chrono::milliseconds(
          static_cast<long long>(static_cast<double>(backoff.count()) * config_.backoff_multiplier));
    }
  }
  throw Error(ErrorCode::transport, path + " failed after " + std::to_string(config_.max_attempts) +
                                        " attempts: " + last_failure);
}

double RemoteBackend::do_sequence_logprob(std::string_view text, std::uint32_t) {
  nlohmann::json request = {{"model", config_.model_id},
                            {"prompt", config_.document_start + std::string(text)},
                            {"echo", true},
                            {"logprobs", 1},
                            {"max_tokens", 0},
                            {"temperature", 0}};
  const auto response = parse_body(post("/v1/completions", request.dump()));
  try {
    const auto& lps = response.at("choices").at(0).at("logprobs").at("token_logprobs");
    if (!lps.is_array() || lps.empty()) throw Error(ErrorCode::protocol, "empty token_logprobs");
    double total = 0.0;
    for (std::size_t i = 0; i < lps.size(); ++i) {
      // The first term is either the marker's own slot or, without a marker,
      // unconditioned; it is dropped in both cases.
      if (i == 0) continue;
      if (!lps[i].is_number()) {
        throw Error(ErrorCode::protocol, "token " + std::to_string(i) + " has no log-probability");
      }
      total += lps[i].get<double>();
    }
    return total;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::protocol, std::string("unexpected completions response: ") + e.what());
  }
}

std::vector<Fill> RemoteBackend::do_fill_mask(std::string_view tmpl, std::size_t top_k) {
  std::string inputs(tmpl);
  inputs.replace(inputs.find(kSlot), kSlot.size(), config_.mask_token);
  nlohmann::json request = {{"model", config_.model_id}, {"inputs", inputs}, {"top_k", top_k}};
  const auto response = parse_body(post("/v1/fill_mask", request.dump()));
  try {
    const auto& list = response.is_array() ? response : response.at("fills");
    std::vector<Fill> fills;
    for (const auto& item : list) {
      const std::string word = item.contains("token_str") ? item.at("token_str").get<std::string>()
                                                          : item.at("word").get<std::string>();
      const double p = item.contains("score") ? item.at("score").get<double>()
                                              : item.at("probability").get<double>();
      fills.push_back({word, p});
    }
    return fills;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::protocol, std::string("unexpected fill_mask response: ") + e.what());
  }
}

std::vector<double> RemoteBackend::do_embed(std::string_view text) {
  nlohmann::json request = {{"model", config_.model_id}, {"input", std::string(text)}};
  const auto response = parse_body(post("/v1/embeddings", request.dump()));
  try {
    return response.at("data").at(0).at("embedding").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::protocol, std::string("unexpected embeddings response: ") + e.what());
  }
}

RemoteModeration::RemoteModeration(RemoteConfig config, Transport transport)
    : config_(std::move(config)), transport_(transport ? std::move(transport) : http_transport(config_)) {}

ModerationVerdict RemoteModeration::check(const PreferencePairRecord& record) {
  nlohmann::json request = {{"model", config_.model_id},
                            {"input", {record.prompt, record.chosen, record.rejected}}};
  const auto response = transport_("/v1/moderations", request.dump());
  if (response.status != 200) {
    throw Error(response.status == 0 ? ErrorCode::transport : ErrorCode::protocol,
                "moderation returned HTTP " + std::to_string(response.status));
  }
  const auto body = parse_body(response.body);
  try {
    ModerationVerdict verdict;
    for (const auto& r : body.at("results")) verdict.flagged = verdict.flagged || r.at("flagged").get<bool>();
    return verdict;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::protocol, std::string("unexpected moderation response: ") + e.what());
  }
}

Transport http_transport(const RemoteConfig& config) {
  // Split "scheme://host:port/prefix" into the client address and a path prefix.
  std::string base = config.endpoint;
  std::string prefix;
  const auto scheme_end = base.find("://");
  const auto path_start = base.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
  if (path_start != std::string::npos) {
    prefix = base.substr(path_start);
    base.resize(path_start);
  }
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  return [base, prefix, key = config.api_key, timeout = config.timeout](const std::string& path,
                                                                        const std::string& body) {
    httplib::Client client(base);
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);
    httplib::Headers headers;
    if (!key.empty()) headers.emplace("Authorization", "Bearer " + key);
    auto result = client.Post(prefix + path, headers, body, "application/json");
    if (!result) return HttpResponse{0, httplib::to_string(result.error())};
    return HttpResponse{result->status, result->body};
  };
}

}  // namespace humt
