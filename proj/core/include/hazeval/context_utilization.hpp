#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "hazeval/agreement.hpp"
#include "hazeval/claims.hpp"
#include "hazeval/gateway.hpp"

namespace hazeval {

enum class ConfidenceMethod { geometric_mean, entropy_proxy };
std::string_view to_string(ConfidenceMethod m);
ConfidenceMethod parse_confidence_method(std::string_view s);

struct ConfidenceReport {
  double value = 0.0;
  std::size_t token_count = 0;
  ConfidenceMethod method = ConfidenceMethod::geometric_mean;
};

// geometric_mean: exp(mean logprob). entropy_proxy: exp(-mean H), H over the
// top alternatives plus one bucket holding the remaining probability mass.
ConfidenceReport confidence_from_tokens(const std::vector<TokenScore>& tokens, ConfidenceMethod method);

// "Question: <q>\nContext claims:\n- <c1>\n- <c2>\nAnswer:"
std::string conditioning_prompt(std::string_view question, const std::vector<std::string>& claims);

// Scores " " + answer forced after `conditioning`.
ConfidenceReport confidence(std::string_view answer, std::string_view conditioning, Provider& scorer,
                            ConfidenceMethod method = ConfidenceMethod::geometric_mean);

struct ClaimContribution {
  std::string claim_id;
  double without = 0.0;           // f(a | q, C \ c_i)
  double delta = 0.0;             // f(a | q, C) - without
  std::optional<double> relative;  // delta / f(a | q, C); null when f = 0
};

// Throws Error when delta leaves (-1, 1) or relative exceeds 1.
void check_contribution(const ClaimContribution& c);

ClaimContribution claim_contribution(std::string_view answer, std::string_view question,
                                     const std::vector<AtomicClaim>& claims, std::size_t i, Provider& scorer,
                                     ConfidenceMethod method = ConfidenceMethod::geometric_mean,
                                     std::optional<double> baseline = std::nullopt);

struct CuReport {
  ConfidenceMethod method = ConfidenceMethod::geometric_mean;
  double baseline_confidence = 0.0;
  std::vector<ClaimContribution> per_claim;
  double cu = 0.0;  // mean delta
  std::optional<double> cu_rel;
  double min_delta = 0.0;
  double max_delta = 0.0;

  std::optional<double> cu_rel_percent() const { return cu_rel ? std::optional(*cu_rel * 100.0) : std::nullopt; }
  nlohmann::ordered_json to_json() const;
};

// From a baseline and per-claim leave-one-out confidences.
CuReport assemble_cu(double baseline, const std::vector<std::string>& claim_ids, const std::vector<double>& without,
                     ConfidenceMethod method);

// |C| + 1 scorer calls, the leave-one-out ones concurrent.
CuReport cu_scores(std::string_view answer, std::string_view question, const std::vector<AtomicClaim>& claims,
                   Provider& scorer, ConfidenceMethod method = ConfidenceMethod::geometric_mean,
                   std::size_t parallelism = 8);

// Spearman between confidences conditioned on claims and on documents.
Correlation sensitivity_correlation(const std::vector<double>& f_claims, const std::vector<double>& f_docs);

}  // namespace hazeval
