#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

namespace hazeval {

// Hex SHA-256 of `data`.
std::string sha256_hex(std::string_view data);

// Content-addressed store: one file per key hash under `dir`. Writes go to a
// temporary file and are renamed into place, so a killed run never leaves a
// truncated entry behind.
class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path dir);

  // key = SHA-256 over (capability, model id, canonical request).
  static std::string make_key(std::string_view capability, std::string_view model_id,
                              std::string_view canonical_request);

  std::optional<std::string> get(const std::string& key) const;
  void put(const std::string& key, const std::string& value) const;
  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path path_for(const std::string& key) const;
  std::filesystem::path dir_;
};

}  // namespace hazeval
