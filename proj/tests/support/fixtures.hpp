#pragma once

#include <atomic>
#include <filesystem>
#include <memory>
#include <random>
#include <set>
#include <string>

#include <unistd.h>

#include "hazeval/gateway.hpp"
#include "hazeval/mock_backend.hpp"

namespace testing_support {

inline std::filesystem::path data_dir() { return HAZEVAL_TEST_DATA_DIR; }
inline std::filesystem::path golden_dir() { return HAZEVAL_GOLDEN_DIR; }

class TempDir {
 public:
  explicit TempDir(const std::string& tag = "hz") {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            (tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& leaf) const { return path_ / leaf; }

 private:
  std::filesystem::path path_;
};

inline std::shared_ptr<hazeval::Provider> mock_provider(
    const std::string& name, std::set<hazeval::Capability> caps = {hazeval::Capability::chat, hazeval::Capability::embed,
                                                                    hazeval::Capability::rerank,
                                                                    hazeval::Capability::score},
    hazeval::MockHandlers handlers = {}, std::uint64_t seed = 0,
    std::shared_ptr<hazeval::ResponseCache> cache = nullptr) {
  hazeval::ProviderProfile p;
  p.name = name;
  p.model_id = "mock-" + name;
  p.capabilities = std::move(caps);
  p.retry.initial_backoff = std::chrono::milliseconds(1);
  return std::make_shared<hazeval::Provider>(
      p, std::make_shared<hazeval::MockBackend>(hazeval::MockOptions{seed, 64}, std::move(handlers)), cache);
}

}  // namespace testing_support
