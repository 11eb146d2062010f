#pragma once

#include <string>

#include "hazeval/gateway.hpp"

namespace hazeval {

// Speaks the OpenAI-compatible dialect served by common open inference
// servers, relative to `endpoint_url` (e.g. "http://localhost:8000/v1"):
//   chat    POST {base}/chat/completions
//   embed   POST {base}/embeddings
//   rerank  POST {base}/rerank           {"query", "documents": [passage]}
//   score   POST {base}/completions      echo=true, logprobs=k over prompt+completion
// Scores are cut to the completion span using the returned text offsets;
// the server's tokenizer is authoritative.
class HttpBackend : public Backend {
 public:
  // Reads the bearer token from profile.auth_env; a named but unset
  // variable is a ConfigError.
  explicit HttpBackend(const ProviderProfile& profile, int top_logprobs = 5);

  std::string chat(const ChatRequest& request) override;
  std::vector<Embedding> embed(const std::vector<std::string>& texts) override;
  double rerank(std::string_view query, std::string_view passage) override;
  std::vector<TokenScore> score(std::string_view prompt, std::string_view completion) override;

 private:
  nlohmann::json post(const std::string& route, const nlohmann::json& body) const;

  std::string scheme_host_port_;
  std::string base_path_;
  std::string model_id_;
  std::string token_;
  int top_logprobs_;
};

// Number of Unicode code points in UTF-8 `s` (servers report offsets in
// characters, not bytes).
std::size_t utf8_length(std::string_view s);

}  // namespace hazeval
