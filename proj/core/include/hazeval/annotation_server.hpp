#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hazeval/annotation.hpp"
#include "hazeval/token.hpp"

namespace hazeval {

struct StudyConfig {
  std::string name = "study";
  std::filesystem::path dataset;  // JSONL written by `generate`
  std::filesystem::path corpus;
  std::vector<std::string> annotators;
  std::optional<std::size_t> questions;  // first N dataset records; all when unset
  std::size_t redundancy = 2;
  std::uint64_t seed = 0;
  std::filesystem::path log;
  std::vector<std::pair<std::string, std::filesystem::path>> automated;  // evaluator name -> rows file
  std::string host = "127.0.0.1";
  int port = 8080;
  std::optional<std::filesystem::path> static_dir;
  std::string secret_env = "HAZEVAL_STUDY_SECRET";
  std::int64_t token_ttl_seconds = 12 * 3600;
  std::filesystem::path agreement_output;
  std::filesystem::path export_output;
  nlohmann::ordered_json guidance;

  static StudyConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
  static StudyConfig load(const std::filesystem::path& path);
};

// Default on-screen wording for the annotation form.
nlohmann::ordered_json default_guidance();

// Everything the service serves, resolved from a StudyConfig.
struct Study {
  StudyConfig config;
  std::vector<AnnotationTask> tasks;
  std::map<std::string, nlohmann::ordered_json> payloads;  // by question id
  std::vector<AutomatedSource> automated;

  // ConfigError when a record does not carry exactly five retrievable sources.
  static Study open(const StudyConfig& config);
};

// JSONL of current annotations, one HumanAnnotation per line.
std::string export_annotations(const AnnotationStore& store);

class AnnotationServer {
 public:
  AnnotationServer(const Study& study, AnnotationStore& store, TokenSigner signer);
  ~AnnotationServer();
  AnnotationServer(const AnnotationServer&) = delete;
  AnnotationServer& operator=(const AnnotationServer&) = delete;

  // Port 0 picks a free port. Returns the bound port.
  int bind(const std::string& host, int port);
  // Serves on the bound socket until stop(); blocking.
  void listen();
  // listen() on a background thread; returns once the server accepts.
  void start();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace hazeval
