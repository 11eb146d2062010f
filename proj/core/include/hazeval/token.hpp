#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>

namespace hazeval {

std::string base64url_encode(std::string_view bytes);
// nullopt on characters outside the url-safe alphabet or a bad length.
std::optional<std::string> base64url_decode(std::string_view text);

std::string hmac_sha256(std::string_view key, std::string_view message);

// Unix seconds; injectable so expiry can be tested.
using UnixClock = std::function<std::int64_t()>;
std::int64_t unix_now();

// Signed opaque bearer tokens: base64url(payload) "." base64url(mac).
class TokenSigner {
 public:
  TokenSigner(std::string secret, std::chrono::seconds ttl, UnixClock clock = unix_now);

  // Reads the secret from environment variable `var`. ConfigError when the
  // variable is unset or shorter than 16 bytes.
  static TokenSigner from_env(const std::string& var, std::chrono::seconds ttl, UnixClock clock = unix_now);

  std::string issue(std::string_view subject) const;
  // The subject, or nullopt for a forged, malformed or expired token.
  std::optional<std::string> verify(std::string_view token) const;

  // Login code handed to an annotator; derived from the secret, never stored.
  std::string study_code(std::string_view annotator_id) const;

 private:
  std::string secret_;
  std::chrono::seconds ttl_;
  UnixClock clock_;
};

}  // namespace hazeval
