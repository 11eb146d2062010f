#include "hazeval/token.hpp"

#include <cstdlib>

#include <nlohmann/json.hpp>
#include <openssl/crypto.h>
#include <openssl/evp.h>
#include <openssl/hmac.h>

#include "hazeval/error.hpp"

namespace hazeval {

std::string base64url_encode(std::string_view bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3) + 1, '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                reinterpret_cast<const unsigned char*>(bytes.data()), static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  while (!out.empty() && out.back() == '=') out.pop_back();
  for (char& c : out) {
    if (c == '+') c = '-';
    if (c == '/') c = '_';
  }
  return out;
}

std::optional<std::string> base64url_decode(std::string_view text) {
  if (text.size() % 4 == 1) return std::nullopt;
  std::string std64;
  std64.reserve(text.size() + 3);
  for (char c : text) {
    const bool alnum = (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9');
    if (alnum) {
      std64 += c;
    } else if (c == '-') {
      std64 += '+';
    } else if (c == '_') {
      std64 += '/';
    } else {
      return std::nullopt;
    }
  }
  const std::size_t pad = (4 - std64.size() % 4) % 4;
  std64.append(pad, '=');
  std::string out(std64.size() / 4 * 3, '\0');
  const int n = EVP_DecodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                reinterpret_cast<const unsigned char*>(std64.data()), static_cast<int>(std64.size()));
  if (n < 0) return std::nullopt;
  out.resize(static_cast<std::size_t>(n) - pad);
  return out;
}

std::string hmac_sha256(std::string_view key, std::string_view message) {
  unsigned char mac[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (HMAC(EVP_sha256(), key.data(), static_cast<int>(key.size()), reinterpret_cast<const unsigned char*>(message.data()),
           message.size(), mac, &len) == nullptr) {
    throw Error("HMAC-SHA256 failed");
  }
  return std::string(reinterpret_cast<const char*>(mac), len);
}

std::int64_t unix_now() {
  return std::chrono::duration_cast<std::chrono::seconds>(std::chrono::system_clock::now().time_since_epoch()).count();
}

TokenSigner::TokenSigner(std::string secret, std::chrono::seconds ttl, UnixClock clock)
    : secret_(std::move(secret)), ttl_(ttl), clock_(std::move(clock)) {
  if (secret_.empty()) throw ConfigError("token secret is empty");
  if (ttl_.count() <= 0) throw ConfigError("token ttl must be positive");
}

TokenSigner TokenSigner::from_env(const std::string& var, std::chrono::seconds ttl, UnixClock clock) {
  const char* value = std::getenv(var.c_str());
  if (value == nullptr) throw ConfigError("environment variable " + var + " is not set");
  std::string secret(value);
  if (secret.size() < 16) throw ConfigError("environment variable " + var + " must hold at least 16 bytes");
  return TokenSigner(std::move(secret), ttl, std::move(clock));
}

std::string TokenSigner::issue(std::string_view subject) const {
  nlohmann::ordered_json payload;
  payload["sub"] = subject;
  payload["exp"] = clock_() + ttl_.count();
  const std::string body = base64url_encode(payload.dump());
  return body + "." + base64url_encode(hmac_sha256(secret_, body));
}

std::optional<std::string> TokenSigner::verify(std::string_view token) const {
  const auto dot = token.find('.');
  if (dot == std::string_view::npos) return std::nullopt;
  const std::string_view body = token.substr(0, dot);
  const auto mac = base64url_decode(token.substr(dot + 1));
  const std::string expected = hmac_sha256(secret_, body);
  if (!mac || mac->size() != expected.size() || CRYPTO_memcmp(mac->data(), expected.data(), expected.size()) != 0) {
    return std::nullopt;
  }
  const auto raw = base64url_decode(body);
  if (!raw) return std::nullopt;
  const auto payload = nlohmann::json::parse(*raw, nullptr, false);
  if (payload.is_discarded() || !payload.is_object()) return std::nullopt;
  const auto sub = payload.find("sub");
  const auto exp = payload.find("exp");
  if (sub == payload.end() || !sub->is_string() || exp == payload.end() || !exp->is_number_integer()) {
    return std::nullopt;
  }
  if (exp->get<std::int64_t>() <= clock_()) return std::nullopt;
  return sub->get<std::string>();
}

std::string TokenSigner::study_code(std::string_view annotator_id) const {
  static constexpr char kAlphabet[] = "abcdefghjkmnpqrstuvwxyz23456789";
  const std::string mac = hmac_sha256(secret_, "study-code:" + std::string(annotator_id));
  std::string code;
  for (std::size_t i = 0; i < 10; ++i) code += kAlphabet[static_cast<unsigned char>(mac[i]) % (sizeof(kAlphabet) - 1)];
  return code;
}

}  // namespace hazeval
