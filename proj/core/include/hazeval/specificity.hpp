#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "hazeval/claims.hpp"
#include "hazeval/gateway.hpp"

namespace hazeval {

enum class JudgeLabel { yes, no, na };

// "yes" | "no" | "N/A"
std::string_view to_string(JudgeLabel l);
// Accepts the three wire forms (case-insensitive) plus "na"; nullopt otherwise.
std::optional<JudgeLabel> parse_judge_label(std::string_view s);

template <class T>
using PerDimension = std::array<T, 4>;

struct ClaimJudgment {
  std::string claim_id;
  std::string judge_id;
  PerDimension<JudgeLabel> labels{JudgeLabel::na, JudgeLabel::na, JudgeLabel::na, JudgeLabel::na};
  PerDimension<std::string> reasoning;

  JudgeLabel label(Dimension d) const { return labels[static_cast<std::size_t>(d)]; }
};

// yes -> 1, no -> 0, na -> nullopt
struct ConsensusVector {
  std::string claim_id;
  PerDimension<std::optional<int>> values;
};

struct SpecificityWeights {
  PerDimension<double> alpha{0.6, 0.2, 0.1, 0.1};

  // Throws ConfigError unless every weight is > 0.
  void validate() const;
  static SpecificityWeights from_json(const nlohmann::json& j);
};

inline constexpr std::string_view kJudgeLead = "You are a strict evaluator of specificity and factuality.";

std::string judge_prompt(std::string_view claim, const SpecificDetails& details,
                         const std::vector<std::string>& evidence);

// Parses one judge reply object; throws ReplyError on a schema violation.
ClaimJudgment parse_judgment(const nlohmann::json& reply, std::string claim_id, std::string judge_id);

struct JudgeSlot {
  Provider* provider = nullptr;
  std::string judge_id;
  std::optional<int> seed;
};

// `count` resamples of one provider, seeds 0..count-1.
std::vector<JudgeSlot> resampled_judges(Provider& provider, int count);

ClaimJudgment judge_claim(const AtomicClaim& claim, const SpecificDetails& details,
                          const std::vector<std::string>& evidence, const JudgeSlot& judge);

// Per dimension the plurality label wins; a tie at the top goes to the most
// conservative tied label (no, then na, then yes).
JudgeLabel vote(const std::vector<JudgeLabel>& labels);
ConsensusVector majority_vote(const std::vector<ClaimJudgment>& judgments);

// Mean over the numeric entries of each dimension; nullopt when all are na.
PerDimension<std::optional<double>> dimension_average(const std::vector<ConsensusVector>& consensus);

// Weighted mean over the defined dimensions only; nullopt when none is defined.
std::optional<double> aggregate(const PerDimension<std::optional<double>>& averages,
                                const SpecificityWeights& weights = {});

struct ClaimAssessment {
  AtomicClaim claim;
  SpecificDetails details;
  std::vector<ClaimJudgment> judgments;
  ConsensusVector consensus;
};

struct SpecificityReport {
  std::vector<ClaimAssessment> claims;
  PerDimension<std::optional<double>> averages;
  std::optional<double> score;

  nlohmann::ordered_json to_json() const;
};

// Details, k judgments per claim, vote, averages and the weighted score.
// Judge calls run concurrently; `parallelism` bounds the pool.
SpecificityReport score_claims(const std::vector<AtomicClaim>& claims, const std::vector<std::string>& evidence,
                               Provider& extractor, const std::vector<JudgeSlot>& judges,
                               const SpecificityWeights& weights = {}, std::size_t parallelism = 8);

// decompose_answer followed by score_claims.
SpecificityReport score_answer(const StructuredAnswer& answer, const std::vector<std::string>& evidence,
                               Provider& extractor, const std::vector<JudgeSlot>& judges,
                               const SpecificityWeights& weights = {}, std::size_t parallelism = 8);

}  // namespace hazeval
