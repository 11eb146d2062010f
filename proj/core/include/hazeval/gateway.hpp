#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <semaphore>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "hazeval/embedding.hpp"

namespace hazeval {

enum class Capability { chat, embed, rerank, score };

std::string_view to_string(Capability c);
Capability parse_capability(std::string_view s);

struct ChatMessage {
  std::string role;  // "system" | "user" | "assistant"
  std::string content;
};

inline constexpr double kGenerationTemperature = 0.1;
inline constexpr double kGenerationTopP = 0.9;

struct ChatRequest {
  std::vector<ChatMessage> messages;
  double temperature = kGenerationTemperature;
  double top_p = kGenerationTopP;
  int max_tokens = 1024;
  // Sampling slot; lets repeated judge calls at temperature 0 be distinct
  // requests (and distinct cache entries).
  std::optional<int> seed;

  // temperature >= 0, 0 < top_p <= 1, max_tokens > 0, >= 1 message.
  void validate() const;
  nlohmann::json to_json() const;

  static ChatRequest user(std::string prompt);
  // Deterministic judge settings: temperature 0.
  static ChatRequest judge(std::string prompt, std::optional<int> seed = std::nullopt);
};

struct TokenScore {
  std::string token;
  double logprob = 0.0;  // <= 0
  // Sorted by descending logprob.
  std::vector<std::pair<std::string, double>> alternatives;
};

// The transport under a provider. Each call is a single attempt; throw
// TransportError for retryable failures and ProviderError otherwise.
class Backend {
 public:
  virtual ~Backend() = default;
  virtual std::string chat(const ChatRequest& request);
  virtual std::vector<Embedding> embed(const std::vector<std::string>& texts);
  virtual double rerank(std::string_view query, std::string_view passage);
  virtual std::vector<TokenScore> score(std::string_view prompt, std::string_view completion);
};

struct RetryPolicy {
  int max_attempts = 3;
  std::chrono::milliseconds initial_backoff{500};
};

struct ProviderProfile {
  std::string name;
  std::string endpoint_url;
  std::string model_id;
  std::set<Capability> capabilities;
  std::string auth_env;  // name of the env var holding the bearer token
  RetryPolicy retry;
  std::size_t max_in_flight = 8;

  bool has(Capability c) const { return capabilities.contains(c); }
};

class ResponseCache;

// Client for one configured provider: enforces declared capabilities before
// any backend activity, retries transient failures with exponential backoff,
// bounds in-flight calls, normalizes embeddings and consults the
// content-addressed response cache. Safe for concurrent use.
class Provider {
 public:
  Provider(ProviderProfile profile, std::shared_ptr<Backend> backend, std::shared_ptr<ResponseCache> cache = nullptr);

  std::string chat(const ChatRequest& request);
  // One unit vector per input text.
  std::vector<Embedding> embed(const std::vector<std::string>& texts);
  Embedding embed_one(const std::string& text);
  double rerank(std::string_view query, std::string_view passage);
  // Per-token scores of `completion` forced after `prompt`.
  std::vector<TokenScore> score_completion(std::string_view prompt, std::string_view completion);

  const ProviderProfile& profile() const { return profile_; }
  const std::string& model_id() const { return profile_.model_id; }
  // Backend attempts made so far (cache hits excluded).
  std::size_t backend_calls() const { return backend_calls_.load(); }
  std::size_t cache_hits() const { return cache_hits_.load(); }

 private:
  void require(Capability c) const;
  template <class Fn>
  auto with_retry(Fn&& fn) -> decltype(fn());
  std::optional<std::string> cache_get(Capability c, const nlohmann::json& request);
  void cache_put(Capability c, const nlohmann::json& request, const std::string& response);

  ProviderProfile profile_;
  std::shared_ptr<Backend> backend_;
  std::shared_ptr<ResponseCache> cache_;
  std::counting_semaphore<4096> in_flight_;
  std::atomic<std::size_t> backend_calls_{0};
  std::atomic<std::size_t> cache_hits_{0};
};

// name -> provider, built from the run config's provider block.
class ProviderRegistry {
 public:
  void add(std::shared_ptr<Provider> provider);
  std::shared_ptr<Provider> get(std::string_view name) const;
  bool contains(std::string_view name) const;
  std::vector<std::string> names() const;
  std::size_t total_backend_calls() const;

  // Entry schema: {"kind": "http"|"mock", "endpoint_url", "model_id",
  // "capabilities": [...], "auth_env", "max_attempts", "backoff_ms",
  // "max_in_flight", "seed"}. Throws ConfigError.
  static ProviderRegistry from_json(const nlohmann::json& providers, std::shared_ptr<ResponseCache> cache);

 private:
  std::map<std::string, std::shared_ptr<Provider>, std::less<>> providers_;
};

ProviderProfile profile_from_json(const std::string& name, const nlohmann::json& j);

}  // namespace hazeval
