#include "hazeval/response_cache.hpp"

#include <array>
#include <atomic>
#include <fstream>
#include <sstream>
#include <thread>

#include <openssl/evp.h>

#include "hazeval/error.hpp"

namespace hazeval {

std::string sha256_hex(std::string_view data) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest.data(), &len, EVP_sha256(), nullptr) != 1) {
    throw Error("SHA-256 digest failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xF]);
  }
  return out;
}

ResponseCache::ResponseCache(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::error_code ec;
  std::filesystem::create_directories(dir_, ec);
  if (ec) throw ConfigError("cannot create cache directory " + dir_.string() + ": " + ec.message());
}

std::string ResponseCache::make_key(std::string_view capability, std::string_view model_id,
                                    std::string_view canonical_request) {
  std::string material;
  material.reserve(capability.size() + model_id.size() + canonical_request.size() + 2);
  material.append(capability).append("\n").append(model_id).append("\n").append(canonical_request);
  return sha256_hex(material);
}

std::filesystem::path ResponseCache::path_for(const std::string& key) const { return dir_ / (key + ".json"); }

std::optional<std::string> ResponseCache::get(const std::string& key) const {
  std::ifstream in(path_for(key), std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void ResponseCache::put(const std::string& key, const std::string& value) const {
  static std::atomic<unsigned long> counter{0};
  std::ostringstream tmp_name;
  tmp_name << key << '.' << std::hash<std::thread::id>{}(std::this_thread::get_id()) << '.' << counter++ << ".tmp";
  const auto tmp = dir_ / tmp_name.str();
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write cache entry " + tmp.string());
    out << value;
    out.flush();
    if (!out) throw Error("short write on cache entry " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path_for(key), ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw Error("cannot commit cache entry " + key);
  }
}

}  // namespace hazeval
