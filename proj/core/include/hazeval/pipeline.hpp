#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hazeval/context_utilization.hpp"
#include "hazeval/corpus_index.hpp"
#include "hazeval/dataset.hpp"
#include "hazeval/gateway.hpp"
#include "hazeval/relevance.hpp"
#include "hazeval/robustness.hpp"
#include "hazeval/specificity.hpp"

namespace hazeval {

struct MetricToggles {
  bool specificity = true;
  bool robustness = true;
  bool relevance = true;
  bool cu = true;
  bool readability = true;

  bool any_model_metric() const { return specificity || robustness || relevance || cu; }
};

struct DatasetParams {
  std::size_t count = 10;
  std::uint64_t seed = 0;
  // Optional replacements for the shipped tables.
  std::optional<std::filesystem::path> hazard_locations;
  std::optional<std::filesystem::path> professions;
  std::optional<std::filesystem::path> infrastructure;
  std::optional<std::filesystem::path> templates;
  std::vector<int> timelines = kDefaultTimelines;
};

// Provider names per pipeline role.
struct Roles {
  std::string generator;  // chat: answer generation
  std::string embedder;   // embed: retrieval, relevance, robustness, dedup
  std::string evaluator;  // chat: decomposition, details, masking, inverse questions, paraphrase
  std::vector<std::string> judges;  // chat: one name resampled k times, or k names
  std::string reranker;   // rerank
  std::string scorer;     // score
};

struct OutputPaths {
  std::filesystem::path dataset;
  std::filesystem::path rows;
  std::filesystem::path aggregate;
  std::filesystem::path artifacts;
  std::optional<std::filesystem::path> csv;
  std::optional<std::filesystem::path> claims_dir;
};

struct RunConfig {
  DatasetParams dataset;
  std::filesystem::path corpus;
  nlohmann::json providers = nlohmann::json::object();
  Roles roles;
  MetricToggles metrics;
  std::size_t k_judges = 3;
  std::size_t n_inverse_questions = kDefaultInverseQuestions;
  std::size_t retrieval_k = 5;
  RelevanceMode relevance_mode = RelevanceMode::masked;
  ConfidenceMethod confidence_method = ConfidenceMethod::geometric_mean;
  std::vector<VariantKind> robustness_kinds{kAllVariantKinds.begin(), kAllVariantKinds.end()};
  SpecificityWeights weights;
  std::size_t parallelism = 4;
  std::optional<std::filesystem::path> cache_dir;
  OutputPaths outputs;

  // Relative paths resolve against `base_dir`. Throws ConfigError, including
  // when an enabled metric's role lacks the capability it needs.
  static RunConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
  static RunConfig load(const std::filesystem::path& path);
  void validate() const;
};

struct RowError {
  std::string metric;
  std::string message;
};

struct EvaluationResult {
  std::vector<nlohmann::ordered_json> rows;
  std::vector<nlohmann::ordered_json> artifacts;
  nlohmann::ordered_json aggregate;
  std::size_t rows_with_errors = 0;
};

// Values written to reports are rounded to this many decimals, and the
// aggregate block is computed from the rounded values.
inline constexpr int kReportDecimals = 10;
double round_report(double v);

// Per metric: mean and sample std over non-null values, plus null and error
// counts. Metrics with no value are reported with counts only.
nlohmann::ordered_json aggregate_report(const std::vector<nlohmann::ordered_json>& rows);

// Orchestrates generation and evaluation for one config. Every model call
// goes through the registry (and its response cache when configured).
class Pipeline {
 public:
  explicit Pipeline(RunConfig config);
  ~Pipeline();
  Pipeline(const Pipeline&) = delete;
  Pipeline& operator=(const Pipeline&) = delete;

  const RunConfig& config() const { return config_; }
  const DatasetTables& tables() const { return tables_; }
  ProviderRegistry& registry() { return registry_; }

  // Retrieval plus grounded generation for one question.
  StructuredAnswer answer(const QuestionRecord& question);
  std::vector<DatasetRecord> generate();
  EvaluationResult evaluate(const std::vector<DatasetRecord>& records);

  // Backend calls made by all providers so far (cache hits excluded).
  std::size_t provider_calls() const { return registry_.total_backend_calls(); }

 private:
  const CorpusIndex& index();
  nlohmann::ordered_json evaluate_one(const DatasetRecord& record, std::size_t position,
                                      nlohmann::ordered_json& artifacts);
  std::vector<std::string> evidence_for(const StructuredAnswer& a) const;

  RunConfig config_;
  DatasetTables tables_;
  ProviderRegistry registry_;
  std::unique_ptr<CorpusIndex> index_;
  std::vector<JudgeSlot> judges_;
};

void write_jsonl(const std::filesystem::path& path, const std::vector<nlohmann::ordered_json>& rows);
std::vector<nlohmann::ordered_json> read_jsonl(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const nlohmann::ordered_json& doc);
void write_csv(const std::filesystem::path& path, const std::vector<nlohmann::ordered_json>& rows);

// CLI entry points; each returns the process exit code.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitPartial = 2;

int run_generate(const RunConfig& config);
// Generates first when the dataset file does not exist yet.
int run_evaluate(const RunConfig& config);
// Recomputes the aggregate (and CSV) from an existing rows file.
int run_report(const RunConfig& config);

}  // namespace hazeval
