#include "humt/backend.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <set>

#include "humt/error.hpp"
#include "humt/io.hpp"

namespace humt {

nlohmann::json BackendDescriptor::to_json() const {
  nlohmann::json caps = nlohmann::json::array();
  if (has(Capability::sequence_logprob)) caps.push_back("sequence_logprob");
  if (has(Capability::fill_mask)) caps.push_back("fill_mask");
  if (has(Capability::embed)) caps.push_back("embed");
  return {{"backend_id", backend_id},
          {"model_id", model_id},
          {"capabilities", caps},
          {"deterministic", deterministic},
          {"first_token_dropped", first_token_dropped}};
}

namespace {

std::mutex g_ids_mutex;
std::set<std::string>& live_ids() {
  static std::set<std::string> ids;
  return ids;
}

Error unsupported(const BackendDescriptor& d, const char* what) {
  return Error(ErrorCode::unsupported_capability,
               "backend '" + d.backend_id + "' does not support " + what);
}

std::size_t count_slots(std::string_view tmpl) {
  std::size_t n = 0;
  for (auto pos = tmpl.find(kSlot); pos != std::string_view::npos;
       pos = tmpl.find(kSlot, pos + kSlot.size())) {
    ++n;
  }
  return n;
}

}  // namespace

std::string claim_backend_id(const std::string& base) {
  std::lock_guard lock(g_ids_mutex);
  auto& ids = live_ids();
  std::string id = base;
  for (int n = 2; ids.count(id) != 0; ++n) id = base + "#" + std::to_string(n);
  ids.insert(id);
  return id;
}

void release_backend_id(const std::string& id) {
  std::lock_guard lock(g_ids_mutex);
  live_ids().erase(id);
}

Backend::~Backend() = default;

double Backend::sequence_logprob(std::string_view text, std::uint32_t sample) {
  if (!descriptor().has(Capability::sequence_logprob)) throw unsupported(descriptor(), "sequence_logprob");
  ++sequence_calls_;
  const double lp = do_sequence_logprob(text, sample);
  if (std::isnan(lp) || lp > 1e-12) {
    throw Error(ErrorCode::protocol, "backend returned an invalid log-probability");
  }
  return std::min(lp, 0.0);
}

std::vector<Fill> Backend::fill_mask(std::string_view tmpl, std::size_t top_k) {
  if (!descriptor().has(Capability::fill_mask)) throw unsupported(descriptor(), "fill_mask");
  const std::size_t slots = count_slots(tmpl);
  if (slots != 1) {
    throw invalid_argument("fill_mask template must contain exactly one slot, found " +
                           std::to_string(slots));
  }
  if (top_k == 0) throw invalid_argument("fill_mask top_k must be positive");
  auto fills = do_fill_mask(tmpl, top_k);
  for (const auto& f : fills) {
    if (!(f.probability > 0.0 && f.probability <= 1.0)) {
      throw Error(ErrorCode::protocol, "fill probability out of (0,1] for '" + f.word + "'");
    }
  }
  std::sort(fills.begin(), fills.end(), [](const Fill& a, const Fill& b) {
    if (a.probability != b.probability) return a.probability > b.probability;
    return a.word < b.word;
  });
  if (fills.size() > top_k) fills.resize(top_k);
  return fills;
}

std::vector<double> Backend::embed(std::string_view text) {
  if (!descriptor().has(Capability::embed)) throw unsupported(descriptor(), "embed");
  auto vec = do_embed(text);
  if (vec.empty()) throw Error(ErrorCode::protocol, "backend returned an empty embedding");
  for (double v : vec) {
    if (!std::isfinite(v)) throw Error(ErrorCode::protocol, "backend returned a non-finite embedding");
  }
  std::size_t expected = 0;
  if (!embed_dim_.compare_exchange_strong(expected, vec.size()) && expected != vec.size()) {
    throw Error(ErrorCode::protocol, "embedding dimension changed from " + std::to_string(expected) +
                                         " to " + std::to_string(vec.size()));
  }
  return vec;
}

double Backend::do_sequence_logprob(std::string_view, std::uint32_t) {
  throw unsupported(descriptor(), "sequence_logprob");
}

std::vector<Fill> Backend::do_fill_mask(std::string_view, std::size_t) {
  throw unsupported(descriptor(), "fill_mask");
}

std::vector<double> Backend::do_embed(std::string_view) { throw unsupported(descriptor(), "embed"); }

TableBackend::TableBackend(std::map<std::string, double> probabilities, TableBackendOptions options)
    : probabilities_(probabilities.begin(), probabilities.end()), options_(std::move(options)) {
  if (!(options_.floor > 0.0 && options_.floor <= 1.0)) {
    throw invalid_argument("table backend floor must be in (0,1]");
  }
  descriptor_.backend_id = claim_backend_id("table:" + options_.model_id);
  descriptor_.model_id = options_.model_id;
  descriptor_.capabilities = static_cast<unsigned>(Capability::sequence_logprob);
  descriptor_.deterministic = true;
}

TableBackend::~TableBackend() { release_backend_id(descriptor_.backend_id); }

void TableBackend::set_fills(std::string tmpl, std::vector<Fill> fills) {
  fills_[std::move(tmpl)] = std::move(fills);
  descriptor_.capabilities |= static_cast<unsigned>(Capability::fill_mask);
}

void TableBackend::set_embedding(std::string text, std::vector<double> vec) {
  embeddings_[std::move(text)] = std::move(vec);
  descriptor_.capabilities |= static_cast<unsigned>(Capability::embed);
}

double TableBackend::do_sequence_logprob(std::string_view text, std::uint32_t) {
  const auto it = probabilities_.find(text);
  const double p = it == probabilities_.end() ? options_.floor : it->second;
  return std::log(p);
}

std::vector<Fill> TableBackend::do_fill_mask(std::string_view tmpl, std::size_t) {
  auto it = fills_.find(tmpl);
  if (it == fills_.end()) it = fills_.find(std::string_view{});
  if (it == fills_.end()) return {};
  return it->second;
}

std::vector<double> TableBackend::do_embed(std::string_view text) {
  const auto it = embeddings_.find(text);
  if (it == embeddings_.end()) {
    throw Error(ErrorCode::not_found, "no embedding for '" + std::string(text) + "'");
  }
  return it->second;
}

std::unique_ptr<TableBackend> TableBackend::from_json(const nlohmann::json& j) {
  try {
    TableBackendOptions options;
    options.model_id = j.value("model_id", options.model_id);
    options.floor = j.value("floor", options.floor);
    std::map<std::string, double> probs;
    if (j.contains("sequence")) {
      for (const auto& [text, p] : j.at("sequence").items()) probs[text] = p.get<double>();
    }
    auto backend = std::make_unique<TableBackend>(std::move(probs), options);
    if (j.contains("fill")) {
      for (const auto& [tmpl, words] : j.at("fill").items()) {
        std::vector<Fill> fills;
        for (const auto& [word, p] : words.items()) fills.push_back({word, p.get<double>()});
        backend->set_fills(tmpl == "*" ? std::string{} : tmpl, std::move(fills));
      }
    }
    if (j.contains("embed")) {
      for (const auto& [text, vec] : j.at("embed").items()) {
        backend->set_embedding(text, vec.get<std::vector<double>>());
      }
    }
    return backend;
  } catch (const nlohmann::json::exception& e) {
    throw invalid_argument(std::string("malformed table backend definition: ") + e.what());
  }
}

std::unique_ptr<TableBackend> TableBackend::from_file(const std::filesystem::path& path) {
  const std::string contents = io::read_file(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(contents);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::io, path.string() + ": " + e.what());
  }
  auto backend = from_json(j);
  return backend;
}

}  // namespace humt
