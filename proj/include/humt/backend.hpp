#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace humt {

enum class Capability : unsigned {
  sequence_logprob = 1u << 0,
  fill_mask = 1u << 1,
  embed = 1u << 2,
};

struct BackendDescriptor {
  std::string backend_id;
  std::string model_id;
  unsigned capabilities = 0;
  bool deterministic = true;
  // Set when the backend cannot condition the first token on a document-start
  // marker and drops that token's term from every query instead.
  bool first_token_dropped = false;

  bool has(Capability c) const { return (capabilities & static_cast<unsigned>(c)) != 0; }
  nlohmann::json to_json() const;
};

struct Fill {
  std::string word;
  double probability = 0.0;
};

/// The marker a fill-mask template uses for its single slot. Remote backends
/// substitute their own mask token.
inline constexpr std::string_view kSlot = "<slot>";

/// Language-model capabilities behind one contract. The public entry points
/// check capabilities and post-conditions; subclasses implement the do_* hooks.
/// Implementations must be safe to call from several threads at once.
class Backend {
 public:
  virtual ~Backend();

  virtual const BackendDescriptor& descriptor() const = 0;

  /// Natural-log probability of the whole string. `sample` distinguishes
  /// repeated draws from a nondeterministic backend; deterministic backends
  /// ignore it.
  double sequence_logprob(std::string_view text, std::uint32_t sample = 0);

  /// Ranked fills for the single kSlot in `tmpl`: at most top_k entries, in
  /// non-increasing probability with ties ordered by word.
  std::vector<Fill> fill_mask(std::string_view tmpl, std::size_t top_k);

  /// Finite vector whose dimension is constant for the lifetime of the backend.
  std::vector<double> embed(std::string_view text);

  /// Number of sequence_logprob evaluations that reached do_sequence_logprob.
  std::uint64_t sequence_calls() const { return sequence_calls_.load(); }

 protected:
  virtual double do_sequence_logprob(std::string_view text, std::uint32_t sample);
  virtual std::vector<Fill> do_fill_mask(std::string_view tmpl, std::size_t top_k);
  virtual std::vector<double> do_embed(std::string_view text);

 private:
  std::atomic<std::uint64_t> sequence_calls_{0};
  std::atomic<std::size_t> embed_dim_{0};
};

/// Claims a process-unique backend id derived from `base` ("base", "base#2", ...).
std::string claim_backend_id(const std::string& base);
void release_backend_id(const std::string& id);

struct TableBackendOptions {
  std::string model_id = "table";
  double floor = 1e-9;
};

/// Deterministic test double: exact strings map to probabilities, templates to
/// fill lists, texts to embedding vectors. Unknown strings score the floor.
class TableBackend : public Backend {
 public:
  explicit TableBackend(std::map<std::string, double> probabilities = {},
                        TableBackendOptions options = {});
  ~TableBackend() override;

  const BackendDescriptor& descriptor() const override { return descriptor_; }

  void set_probability(std::string text, double p) { probabilities_[std::move(text)] = p; }
  /// Fills for one template; an empty template sets the fallback used for any
  /// template without its own entry.
  void set_fills(std::string tmpl, std::vector<Fill> fills);
  void set_embedding(std::string text, std::vector<double> vec);

  /// {"model_id", "floor", "sequence": {text: p}, "fill": {"*" | template: {word: p}},
  ///  "embed": {text: [..]}}
  static std::unique_ptr<TableBackend> from_json(const nlohmann::json& j);
  static std::unique_ptr<TableBackend> from_file(const std::filesystem::path& path);

 protected:
  double do_sequence_logprob(std::string_view text, std::uint32_t sample) override;
  std::vector<Fill> do_fill_mask(std::string_view tmpl, std::size_t top_k) override;
  std::vector<double> do_embed(std::string_view text) override;

 private:
  std::map<std::string, double, std::less<>> probabilities_;
  std::map<std::string, std::vector<Fill>, std::less<>> fills_;
  std::map<std::string, std::vector<double>, std::less<>> embeddings_;
  TableBackendOptions options_;
  BackendDescriptor descriptor_;
};

}  // namespace humt
