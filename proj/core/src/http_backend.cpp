#include "hazeval/http_backend.hpp"

#include <cstdlib>

#include <httplib.h>

#include "hazeval/error.hpp"

namespace hazeval {

using nlohmann::json;

std::size_t utf8_length(std::string_view s) {
  std::size_t n = 0;
  for (unsigned char c : s) n += (c & 0xC0) != 0x80 ? 1 : 0;
  return n;
}

HttpBackend::HttpBackend(const ProviderProfile& profile, int top_logprobs)
    : model_id_(profile.model_id), top_logprobs_(top_logprobs) {
  const std::string& url = profile.endpoint_url;
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("endpoint_url needs a scheme: " + url);
  const auto path_begin = url.find('/', scheme_end + 3);
  scheme_host_port_ = url.substr(0, path_begin);
  base_path_ = path_begin == std::string::npos ? "" : url.substr(path_begin);
  while (!base_path_.empty() && base_path_.back() == '/') base_path_.pop_back();
  if (!profile.auth_env.empty()) {
    const char* v = std::getenv(profile.auth_env.c_str());
    if (!v) throw ConfigError("provider '" + profile.name + "': environment variable " + profile.auth_env + " is not set");
    token_ = v;
  }
}

json HttpBackend::post(const std::string& route, const json& body) const {
  httplib::Client client(scheme_host_port_);
  client.set_connection_timeout(10, 0);
  client.set_read_timeout(300, 0);
  client.set_write_timeout(60, 0);
  httplib::Headers headers;
  if (!token_.empty()) headers.emplace("Authorization", "Bearer " + token_);

  auto res = client.Post(base_path_ + route, headers, body.dump(), "application/json");
  if (!res) throw TransportError("POST " + route + ": " + httplib::to_string(res.error()));
  if (res->status >= 500) throw TransportError("POST " + route + ": HTTP " + std::to_string(res->status));
  if (res->status < 200 || res->status >= 300) {
    throw ProviderError("POST " + route + ": HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 300));
  }
  try {
    return json::parse(res->body);
  } catch (const json::exception& e) {
    throw ProviderError("POST " + route + ": malformed response body: " + e.what());
  }
}

std::string HttpBackend::chat(const ChatRequest& request) {
  json body = request.to_json();
  body["model"] = model_id_;
  const json res = post("/chat/completions", body);
  try {
    return res.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception& e) {
    throw ProviderError(std::string("chat: malformed response: ") + e.what());
  }
}

std::vector<Embedding> HttpBackend::embed(const std::vector<std::string>& texts) {
  const json res = post("/embeddings", {{"model", model_id_}, {"input", texts}});
  try {
    std::vector<Embedding> out(texts.size());
    const auto& data = res.at("data");
    if (data.size() != texts.size()) throw ProviderError("embed: wrong number of vectors");
    for (std::size_t i = 0; i < data.size(); ++i) {
      const std::size_t idx = data[i].value("index", i);
      if (idx >= out.size()) throw ProviderError("embed: index out of range");
      out[idx] = data[i].at("embedding").get<Embedding>();
    }
    return out;
  } catch (const json::exception& e) {
    throw ProviderError(std::string("embed: malformed response: ") + e.what());
  }
}

double HttpBackend::rerank(std::string_view query, std::string_view passage) {
  const json res = post("/rerank", {{"model", model_id_}, {"query", query}, {"documents", json::array({passage})}});
  try {
    const auto& r = res.at("results").at(0);
    if (r.contains("relevance_score")) return r.at("relevance_score").get<double>();
    return r.at("score").get<double>();
  } catch (const json::exception& e) {
    throw ProviderError(std::string("rerank: malformed response: ") + e.what());
  }
}

std::vector<TokenScore> HttpBackend::score(std::string_view prompt, std::string_view completion) {
  const std::string full = std::string(prompt) + std::string(completion);
  const json res = post("/completions", {{"model", model_id_},
                                         {"prompt", full},
                                         {"max_tokens", 1},
                                         {"temperature", 0.0},
                                         {"echo", true},
                                         {"logprobs", top_logprobs_}});
  std::vector<TokenScore> out;
  try {
    const json& lp = res.at("choices").at(0).at("logprobs");
    if (lp.is_null()) throw ProviderError("score: provider returned no logprobs");
    const auto& tokens = lp.at("tokens");
    const auto& logprobs = lp.at("token_logprobs");
    const auto& offsets = lp.at("text_offset");
    const json top = lp.value("top_logprobs", json::array());
    const std::size_t begin = utf8_length(prompt);
    const std::size_t end = utf8_length(full);
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      const std::size_t off = offsets.at(i).get<std::size_t>();
      if (off < begin || off >= end) continue;
      if (logprobs.at(i).is_null()) throw ProviderError("score: null logprob inside completion");
      TokenScore t;
      t.token = tokens.at(i).get<std::string>();
      t.logprob = logprobs.at(i).get<double>();
      if (i < top.size() && top.at(i).is_object()) {
        for (const auto& [tok, v] : top.at(i).items()) t.alternatives.emplace_back(tok, v.get<double>());
      }
      out.push_back(std::move(t));
    }
  } catch (const json::exception& e) {
    throw ProviderError(std::string("score: malformed response: ") + e.what());
  }
  return out;
}

}  // namespace hazeval
