#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "hazeval/answer.hpp"
#include "hazeval/dataset.hpp"
#include "hazeval/gateway.hpp"

namespace hazeval {

enum class VariantKind { paraphrase, perturb_hazard, perturb_location, perturb_both };
inline constexpr std::array<VariantKind, 4> kAllVariantKinds = {VariantKind::paraphrase, VariantKind::perturb_hazard,
                                                                VariantKind::perturb_location,
                                                                VariantKind::perturb_both};
std::string_view to_string(VariantKind k);
VariantKind parse_variant_kind(std::string_view s);

inline constexpr std::string_view kParaphraseLead = "Rephrase the following question";
std::string paraphrase_prompt(std::string_view question);

// A rewording that differs from `q` ignoring case and whitespace. One
// regeneration is requested if the first reply does not.
std::string paraphrase_question(std::string_view q, Provider& chat);

// New hazard and/or location drawn from `tables`, then the record's template
// is instantiated again. perturb_hazard keeps the location when the table
// lists it for the new hazard.
QuestionRecord perturb_question(const QuestionRecord& record, const DatasetTables& tables, VariantKind kind,
                                std::uint64_t rng_seed);

// Whole-answer text the consistency embedding is taken over.
std::string answer_text(const StructuredAnswer& a);

double consistency_score(const StructuredAnswer& a, const StructuredAnswer& b, Provider& embedder);

struct RobustnessRecord {
  std::string question_id;
  VariantKind kind = VariantKind::paraphrase;
  std::string variant_question;
  StructuredAnswer variant_answer;
  double consistency = 0.0;
};

struct RobustnessSummary {
  std::optional<double> paraphrase;    // higher is better
  std::optional<double> perturbation;  // mean over the perturbation kinds run; lower is better
};

RobustnessSummary summarize_robustness(const std::vector<RobustnessRecord>& records);

// Retrieval plus generation for one question.
using AnswerFn = std::function<StructuredAnswer(const QuestionRecord&)>;

struct RobustnessOptions {
  std::uint64_t seed = 0;
  std::size_t parallelism = 4;
};

// Builds each requested variant, answers it afresh and compares with `original`.
std::vector<RobustnessRecord> run_robustness(const QuestionRecord& record, const StructuredAnswer& original,
                                             const std::vector<VariantKind>& kinds, const DatasetTables& tables,
                                             Provider& chat, Provider& embedder, const AnswerFn& answer,
                                             const RobustnessOptions& options = {});

nlohmann::ordered_json to_json(const RobustnessRecord& r);

}  // namespace hazeval
