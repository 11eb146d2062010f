#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "hazeval/error.hpp"
#include "hazeval/specificity.hpp"

namespace hazeval {

inline constexpr std::size_t kSourcesPerTask = 5;

class NotFoundError : public PreconditionError {
 public:
  using PreconditionError::PreconditionError;
};

struct AnnotationTask {
  std::string task_id;
  std::string question_id;
  std::string annotator_id;
};

std::string make_task_id(std::string_view question_id, std::string_view annotator_id);

// Annotators are shuffled once with `seed`; replica r of question j then goes
// to slot (j * redundancy + r) mod |annotators|. Loads differ by at most one
// and no annotator sees a question twice. Tasks come out grouped by question.
std::vector<AnnotationTask> assign_tasks(const std::vector<std::string>& question_ids,
                                         const std::vector<std::string>& annotator_ids, std::size_t redundancy,
                                         std::uint64_t seed);

// Human labels use "yes", "no" and "na".
struct HumanAnnotation {
  std::string task_id;
  PerDimension<std::string> specificity;
  int relevance = 0;
  std::array<bool, kSourcesPerTask> documents_used{};
  int context_overall = 0;
  int confidence = 0;
  std::optional<std::string> comment;
  std::string submitted_at;

  // Equality of everything an annotator chose, ignoring submitted_at.
  bool same_labels(const HumanAnnotation& other) const;
};

nlohmann::ordered_json to_json(const HumanAnnotation& a);

struct FieldError {
  std::string field;
  std::string message;
};

struct AnnotationParse {
  std::optional<HumanAnnotation> annotation;
  std::vector<FieldError> errors;
};

// Checks a submission body against the schema. task_id may be omitted but
// must equal `task_id` when given; submitted_at is ignored. Unknown fields
// are rejected. "N/A" is accepted and stored as "na".
AnnotationParse validate_annotation(const nlohmann::json& body, std::string_view task_id);

nlohmann::ordered_json to_json(const std::vector<FieldError>& errors);

// ISO-8601 UTC timestamp of the current time.
std::string utc_timestamp();

// Append-only JSONL log plus an in-memory view rebuilt from it on open.
// Appends are serialized and fsync'd before the view changes.
class AnnotationStore {
 public:
  using Clock = std::function<std::string()>;

  AnnotationStore(std::filesystem::path log_path, std::vector<AnnotationTask> tasks, Clock clock = utc_timestamp);

  enum class Outcome { stored, unchanged };
  struct Ack {
    Outcome outcome = Outcome::stored;
    std::size_t revision = 0;  // number of stored versions for the task
    HumanAnnotation annotation;
  };

  // Identical labels to the current version are acknowledged without a new
  // log record. Throws NotFoundError for an unknown task.
  Ack submit(HumanAnnotation annotation);

  const std::vector<AnnotationTask>& tasks() const { return tasks_; }
  const AnnotationTask* find_task(std::string_view task_id) const;
  bool done(std::string_view task_id) const;
  std::optional<HumanAnnotation> current(std::string_view task_id) const;
  std::vector<HumanAnnotation> history(std::string_view task_id) const;
  // Current versions in task order.
  std::vector<HumanAnnotation> snapshot() const;
  std::size_t log_records() const;

  // Runs after a record reaches the log and before the view is updated.
  // Tests use it to simulate a crash at that point.
  void set_after_append_hook(std::function<void()> hook);

 private:
  void replay();
  void apply(const HumanAnnotation& a);
  void append(const std::string& line);

  std::filesystem::path log_path_;
  std::vector<AnnotationTask> tasks_;
  std::map<std::string, std::size_t, std::less<>> task_index_;
  Clock clock_;
  std::map<std::string, std::vector<HumanAnnotation>, std::less<>> versions_;
  std::size_t records_ = 0;
  std::function<void()> after_append_;
  mutable std::shared_mutex view_mutex_;
  std::mutex write_mutex_;
};

// Automated scores for one question, read from an evaluation rows file.
struct AutomatedScores {
  PerDimension<std::optional<double>> specificity_averages{};
  bool has_specificity = false;
  std::optional<double> relevance;
  std::optional<double> cu;
};

AutomatedScores automated_from_row(const nlohmann::json& row);
std::map<std::string, AutomatedScores> read_automated_rows(const std::filesystem::path& rows_jsonl);

// Question-level label from a dimension average: undefined -> "na",
// >= 0.5 -> "yes", otherwise "no".
std::string automated_label(const std::optional<double>& dimension_average);

struct AutomatedSource {
  std::string name;
  std::map<std::string, AutomatedScores> rows;
};

// Human-vs-human: over questions with at least two annotations, the first
// two in annotator order are compared. Human-vs-automated: every annotation
// is compared with the automated label of its question. Sections with no
// data are omitted. Throws PreconditionError with no doubly annotated question.
nlohmann::ordered_json agreement_report(const std::vector<AnnotationTask>& tasks,
                                        const std::vector<HumanAnnotation>& annotations,
                                        const std::vector<AutomatedSource>& automated);

}  // namespace hazeval
