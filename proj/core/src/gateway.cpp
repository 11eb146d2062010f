#include "hazeval/gateway.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "hazeval/error.hpp"
#include "hazeval/http_backend.hpp"
#include "hazeval/mock_backend.hpp"
#include "hazeval/response_cache.hpp"
#include "hazeval/text.hpp"

namespace hazeval {

using nlohmann::json;

namespace {

constexpr std::array<std::string_view, 4> kCapabilityNames = {"chat", "embed", "rerank", "score"};

class SemaphoreGuard {
 public:
  explicit SemaphoreGuard(std::counting_semaphore<4096>& s) : s_(s) { s_.acquire(); }
  ~SemaphoreGuard() { s_.release(); }
  SemaphoreGuard(const SemaphoreGuard&) = delete;
  SemaphoreGuard& operator=(const SemaphoreGuard&) = delete;

 private:
  std::counting_semaphore<4096>& s_;
};

json tokens_to_json(const std::vector<TokenScore>& tokens) {
  json arr = json::array();
  for (const auto& t : tokens) {
    json alts = json::array();
    for (const auto& [tok, lp] : t.alternatives) alts.push_back(json::array({tok, lp}));
    arr.push_back({{"token", t.token}, {"logprob", t.logprob}, {"alternatives", alts}});
  }
  return arr;
}

std::vector<TokenScore> tokens_from_json(const json& arr) {
  std::vector<TokenScore> out;
  for (const auto& t : arr) {
    TokenScore s;
    s.token = t.at("token").get<std::string>();
    s.logprob = t.at("logprob").get<double>();
    for (const auto& a : t.at("alternatives")) s.alternatives.emplace_back(a.at(0).get<std::string>(), a.at(1).get<double>());
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace

std::string_view to_string(Capability c) { return kCapabilityNames[static_cast<std::size_t>(c)]; }

Capability parse_capability(std::string_view s) {
  for (std::size_t i = 0; i < kCapabilityNames.size(); ++i) {
    if (s == kCapabilityNames[i]) return static_cast<Capability>(i);
  }
  throw ConfigError("unknown capability '" + std::string(s) + "'");
}

void ChatRequest::validate() const {
  if (messages.empty()) throw PreconditionError("chat request has no messages");
  if (!(temperature >= 0.0)) throw PreconditionError("chat temperature must be >= 0");
  if (!(top_p > 0.0 && top_p <= 1.0)) throw PreconditionError("chat top_p must be in (0, 1]");
  if (max_tokens <= 0) throw PreconditionError("chat max_tokens must be positive");
}

json ChatRequest::to_json() const {
  json msgs = json::array();
  for (const auto& m : messages) msgs.push_back({{"role", m.role}, {"content", m.content}});
  json j = {{"messages", msgs}, {"temperature", temperature}, {"top_p", top_p}, {"max_tokens", max_tokens}};
  if (seed) j["seed"] = *seed;
  return j;
}

ChatRequest ChatRequest::user(std::string prompt) {
  ChatRequest r;
  r.messages.push_back({"user", std::move(prompt)});
  return r;
}

ChatRequest ChatRequest::judge(std::string prompt, std::optional<int> seed) {
  ChatRequest r = user(std::move(prompt));
  r.temperature = 0.0;
  r.top_p = 1.0;
  r.seed = seed;
  return r;
}

// ---------------------------------------------------------------------------
// Backend defaults: a backend that does not override a capability rejects it.

std::string Backend::chat(const ChatRequest&) { throw ProviderError("backend does not implement chat"); }
std::vector<Embedding> Backend::embed(const std::vector<std::string>&) {
  throw ProviderError("backend does not implement embed");
}
double Backend::rerank(std::string_view, std::string_view) { throw ProviderError("backend does not implement rerank"); }
std::vector<TokenScore> Backend::score(std::string_view, std::string_view) {
  throw ProviderError("backend does not expose token logprobs");
}

// ---------------------------------------------------------------------------
// Provider

Provider::Provider(ProviderProfile profile, std::shared_ptr<Backend> backend, std::shared_ptr<ResponseCache> cache)
    : profile_(std::move(profile)),
      backend_(std::move(backend)),
      cache_(std::move(cache)),
      in_flight_(static_cast<std::ptrdiff_t>(std::clamp<std::size_t>(profile_.max_in_flight, 1, 4096))) {
  if (!backend_) throw ConfigError("provider " + profile_.name + " has no backend");
  if (profile_.retry.max_attempts < 1) throw ConfigError("provider " + profile_.name + ": max_attempts must be >= 1");
}

void Provider::require(Capability c) const {
  if (!profile_.has(c)) {
    throw ProviderError("provider '" + profile_.name + "' does not declare capability '" + std::string(to_string(c)) +
                        "'");
  }
}

template <class Fn>
auto Provider::with_retry(Fn&& fn) -> decltype(fn()) {
  auto backoff = profile_.retry.initial_backoff;
  for (int attempt = 1;; ++attempt) {
    try {
      SemaphoreGuard guard(in_flight_);
      ++backend_calls_;
      return fn();
    } catch (const TransportError& e) {
      if (attempt >= profile_.retry.max_attempts) {
        throw TransportError("provider '" + profile_.name + "' failed after " + std::to_string(attempt) +
                             " attempt(s): " + e.what());
      }
    }
    std::this_thread::sleep_for(backoff);
    backoff *= 2;
  }
}

std::optional<std::string> Provider::cache_get(Capability c, const json& request) {
  if (!cache_) return std::nullopt;
  auto hit = cache_->get(ResponseCache::make_key(to_string(c), profile_.model_id, request.dump()));
  if (hit) ++cache_hits_;
  return hit;
}

void Provider::cache_put(Capability c, const json& request, const std::string& response) {
  if (!cache_) return;
  cache_->put(ResponseCache::make_key(to_string(c), profile_.model_id, request.dump()), response);
}

std::string Provider::chat(const ChatRequest& request) {
  require(Capability::chat);
  request.validate();
  const json key = request.to_json();
  if (auto hit = cache_get(Capability::chat, key)) return json::parse(*hit).at("text").get<std::string>();
  std::string text = with_retry([&] { return backend_->chat(request); });
  cache_put(Capability::chat, key, json{{"text", text}}.dump());
  return text;
}

std::vector<Embedding> Provider::embed(const std::vector<std::string>& texts) {
  require(Capability::embed);
  if (texts.empty()) throw PreconditionError("embed: empty batch");

  std::vector<std::optional<Embedding>> raw(texts.size());
  std::vector<std::size_t> missing;
  for (std::size_t i = 0; i < texts.size(); ++i) {
    if (auto hit = cache_get(Capability::embed, json{{"text", texts[i]}})) {
      raw[i] = json::parse(*hit).at("vector").get<Embedding>();
    } else {
      missing.push_back(i);
    }
  }
  if (!missing.empty()) {
    std::vector<std::string> batch;
    for (std::size_t i : missing) batch.push_back(texts[i]);
    auto vectors = with_retry([&] { return backend_->embed(batch); });
    if (vectors.size() != batch.size()) {
      throw ProviderError("embed: provider returned " + std::to_string(vectors.size()) + " vectors for " +
                          std::to_string(batch.size()) + " inputs");
    }
    for (std::size_t k = 0; k < missing.size(); ++k) {
      cache_put(Capability::embed, json{{"text", batch[k]}}, json{{"vector", vectors[k]}}.dump());
      raw[missing[k]] = std::move(vectors[k]);
    }
  }

  std::vector<Embedding> out;
  out.reserve(texts.size());
  for (auto& v : raw) {
    if (!out.empty() && v->size() != out.front().size()) throw ProviderError("embed: dimension inconsistency in batch");
    out.push_back(normalized(std::move(*v)));
  }
  return out;
}

Embedding Provider::embed_one(const std::string& text) { return std::move(embed({text}).front()); }

double Provider::rerank(std::string_view query, std::string_view passage) {
  require(Capability::rerank);
  if (trim(query).empty() || trim(passage).empty()) throw PreconditionError("rerank: empty query or passage");
  const json key = {{"query", query}, {"passage", passage}};
  if (auto hit = cache_get(Capability::rerank, key)) return json::parse(*hit).at("score").get<double>();
  const double s = with_retry([&] { return backend_->rerank(query, passage); });
  if (!std::isfinite(s)) throw ProviderError("rerank: non-finite score");
  cache_put(Capability::rerank, key, json{{"score", s}}.dump());
  return s;
}

std::vector<TokenScore> Provider::score_completion(std::string_view prompt, std::string_view completion) {
  require(Capability::score);
  if (completion.empty()) throw PreconditionError("score_completion: empty completion");
  const json key = {{"prompt", prompt}, {"completion", completion}};
  if (auto hit = cache_get(Capability::score, key)) return tokens_from_json(json::parse(*hit));

  auto tokens = with_retry([&] { return backend_->score(prompt, completion); });
  if (tokens.empty()) throw ProviderError("score_completion: provider returned zero tokens");
  for (auto& t : tokens) {
    if (!std::isfinite(t.logprob) || t.logprob > 1e-9) throw ProviderError("score_completion: invalid logprob");
    t.logprob = std::min(t.logprob, 0.0);
    std::stable_sort(t.alternatives.begin(), t.alternatives.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
  }
  cache_put(Capability::score, key, tokens_to_json(tokens).dump());
  return tokens;
}

// ---------------------------------------------------------------------------
// Registry

void ProviderRegistry::add(std::shared_ptr<Provider> provider) {
  const std::string name = provider->profile().name;
  if (!providers_.emplace(name, std::move(provider)).second) throw ConfigError("duplicate provider '" + name + "'");
}

std::shared_ptr<Provider> ProviderRegistry::get(std::string_view name) const {
  auto it = providers_.find(name);
  if (it == providers_.end()) throw ConfigError("unknown provider '" + std::string(name) + "'");
  return it->second;
}

bool ProviderRegistry::contains(std::string_view name) const { return providers_.find(name) != providers_.end(); }

std::vector<std::string> ProviderRegistry::names() const {
  std::vector<std::string> out;
  for (const auto& [n, _] : providers_) out.push_back(n);
  return out;
}

std::size_t ProviderRegistry::total_backend_calls() const {
  std::size_t n = 0;
  for (const auto& [_, p] : providers_) n += p->backend_calls();
  return n;
}

ProviderProfile profile_from_json(const std::string& name, const json& j) {
  ProviderProfile p;
  p.name = name;
  try {
    p.endpoint_url = j.value("endpoint_url", std::string{});
    p.model_id = j.at("model_id").get<std::string>();
    for (const auto& c : j.at("capabilities")) p.capabilities.insert(parse_capability(c.get<std::string>()));
    p.auth_env = j.value("auth_env", std::string{});
    p.retry.max_attempts = j.value("max_attempts", 3);
    p.retry.initial_backoff = std::chrono::milliseconds(j.value("backoff_ms", 500));
    p.max_in_flight = j.value("max_in_flight", std::size_t{8});
  } catch (const json::exception& e) {
    throw ConfigError("provider '" + name + "': " + e.what());
  }
  if (p.retry.max_attempts < 1) throw ConfigError("provider '" + name + "': max_attempts must be >= 1");
  return p;
}

ProviderRegistry ProviderRegistry::from_json(const json& providers, std::shared_ptr<ResponseCache> cache) {
  if (!providers.is_object()) throw ConfigError("providers must be an object");
  ProviderRegistry reg;
  for (const auto& [name, entry] : providers.items()) {
    ProviderProfile profile = profile_from_json(name, entry);
    const std::string kind = entry.value("kind", std::string{"http"});
    std::shared_ptr<Backend> backend;
    if (kind == "http") {
      if (profile.endpoint_url.empty()) throw ConfigError("provider '" + name + "': endpoint_url required");
      backend = std::make_shared<HttpBackend>(profile);
    } else if (kind == "mock") {
      MockOptions opts;
      opts.seed = entry.value("seed", std::uint64_t{0});
      opts.embed_dim = entry.value("embed_dim", std::size_t{256});
      backend = std::make_shared<MockBackend>(opts);
    } else {
      throw ConfigError("provider '" + name + "': unknown kind '" + kind + "'");
    }
    reg.add(std::make_shared<Provider>(std::move(profile), std::move(backend), cache));
  }
  return reg;
}

}  // namespace hazeval
