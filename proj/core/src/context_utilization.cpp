#include "hazeval/context_utilization.hpp"

#include <algorithm>
#include <cmath>

#include "hazeval/error.hpp"
#include "hazeval/parallel.hpp"
#include "hazeval/text.hpp"

namespace hazeval {

using nlohmann::ordered_json;

namespace {

double token_entropy(const TokenScore& t) {
  std::vector<double> probs;
  bool has_self = false;
  for (const auto& [tok, lp] : t.alternatives) {
    probs.push_back(std::exp(lp));
    has_self = has_self || tok == t.token;
  }
  if (!has_self) probs.push_back(std::exp(t.logprob));
  double mass = 0.0;
  for (double p : probs) mass += p;
  if (mass > 1.0) {
    for (double& p : probs) p /= mass;
    mass = 1.0;
  }
  probs.push_back(1.0 - mass);  // residual bucket
  double h = 0.0;
  for (double p : probs) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

}  // namespace

std::string_view to_string(ConfidenceMethod m) {
  return m == ConfidenceMethod::geometric_mean ? "geometric_mean" : "entropy_proxy";
}

ConfidenceMethod parse_confidence_method(std::string_view s) {
  if (s == "geometric_mean") return ConfidenceMethod::geometric_mean;
  if (s == "entropy_proxy") return ConfidenceMethod::entropy_proxy;
  throw ConfigError("confidence method must be \"geometric_mean\" or \"entropy_proxy\"");
}

ConfidenceReport confidence_from_tokens(const std::vector<TokenScore>& tokens, ConfidenceMethod method) {
  if (tokens.empty()) throw ProviderError("confidence: zero scored tokens");
  double sum = 0.0;
  for (const auto& t : tokens) sum += method == ConfidenceMethod::geometric_mean ? t.logprob : -token_entropy(t);
  return {std::exp(sum / static_cast<double>(tokens.size())), tokens.size(), method};
}

std::string conditioning_prompt(std::string_view question, const std::vector<std::string>& claims) {
  std::string p = "Question: ";
  p += question;
  p += "\nContext claims:\n";
  for (const auto& c : claims) p += "- " + c + "\n";
  p += "Answer:";
  return p;
}

ConfidenceReport confidence(std::string_view answer, std::string_view conditioning, Provider& scorer,
                            ConfidenceMethod method) {
  if (trim(answer).empty()) throw PreconditionError("confidence: empty answer");
  return confidence_from_tokens(scorer.score_completion(conditioning, " " + std::string(answer)), method);
}

void check_contribution(const ClaimContribution& c) {
  if (!(c.delta > -1.0 && c.delta < 1.0)) {
    throw Error("context contribution out of range for " + c.claim_id + ": delta=" + std::to_string(c.delta));
  }
  if (c.relative && !(*c.relative <= 1.0)) {
    throw Error("relative contribution above 1 for " + c.claim_id + ": " + std::to_string(*c.relative));
  }
}

namespace {

std::vector<std::string> texts_without(const std::vector<AtomicClaim>& claims, std::size_t skip) {
  std::vector<std::string> out;
  for (std::size_t k = 0; k < claims.size(); ++k) {
    if (k != skip) out.push_back(claims[k].text);
  }
  return out;
}

ClaimContribution contribution(std::string claim_id, double baseline, double without) {
  ClaimContribution c{std::move(claim_id), without, baseline - without, std::nullopt};
  if (baseline > 0.0) c.relative = c.delta / baseline;
  check_contribution(c);
  return c;
}

}  // namespace

ClaimContribution claim_contribution(std::string_view answer, std::string_view question,
                                     const std::vector<AtomicClaim>& claims, std::size_t i, Provider& scorer,
                                     ConfidenceMethod method, std::optional<double> baseline) {
  if (claims.empty()) throw PreconditionError("claim_contribution: empty claim set");
  if (i >= claims.size()) throw PreconditionError("claim_contribution: claim index out of range");
  if (!baseline) {
    baseline = confidence(answer, conditioning_prompt(question, texts_without(claims, claims.size())), scorer, method)
                   .value;
  }
  const double without =
      confidence(answer, conditioning_prompt(question, texts_without(claims, i)), scorer, method).value;
  return contribution(claims[i].claim_id, *baseline, without);
}

CuReport assemble_cu(double baseline, const std::vector<std::string>& claim_ids, const std::vector<double>& without,
                     ConfidenceMethod method) {
  if (claim_ids.empty()) throw PreconditionError("context utilization over an empty claim set");
  if (claim_ids.size() != without.size()) throw PreconditionError("assemble_cu: size mismatch");
  CuReport r;
  r.method = method;
  r.baseline_confidence = baseline;
  double sum = 0.0;
  double rel_sum = 0.0;
  std::size_t rel_n = 0;
  for (std::size_t i = 0; i < claim_ids.size(); ++i) {
    r.per_claim.push_back(contribution(claim_ids[i], baseline, without[i]));
    const auto& c = r.per_claim.back();
    sum += c.delta;
    if (c.relative) {
      rel_sum += *c.relative;
      ++rel_n;
    }
  }
  r.cu = sum / static_cast<double>(claim_ids.size());
  if (rel_n > 0) r.cu_rel = rel_sum / static_cast<double>(rel_n);
  const auto [lo, hi] = std::minmax_element(r.per_claim.begin(), r.per_claim.end(),
                                            [](const auto& a, const auto& b) { return a.delta < b.delta; });
  r.min_delta = lo->delta;
  r.max_delta = hi->delta;
  return r;
}

CuReport cu_scores(std::string_view answer, std::string_view question, const std::vector<AtomicClaim>& claims,
                   Provider& scorer, ConfidenceMethod method, std::size_t parallelism) {
  if (claims.empty()) throw PreconditionError("context utilization over an empty claim set");
  // Slot 0 conditions on every claim; slot i+1 leaves claim i out.
  std::vector<double> f(claims.size() + 1);
  parallel_for(f.size(), parallelism, [&](std::size_t s) {
    const auto kept = texts_without(claims, s == 0 ? claims.size() : s - 1);
    f[s] = confidence(answer, conditioning_prompt(question, kept), scorer, method).value;
  });
  std::vector<std::string> ids;
  for (const auto& c : claims) ids.push_back(c.claim_id);
  return assemble_cu(f[0], ids, std::vector<double>(f.begin() + 1, f.end()), method);
}

ordered_json CuReport::to_json() const {
  ordered_json j;
  j["method"] = to_string(method);
  j["baseline_confidence"] = baseline_confidence;
  j["cu"] = cu;
  j["cu_rel"] = cu_rel ? ordered_json(*cu_rel) : ordered_json(nullptr);
  j["cu_rel_percent"] = cu_rel ? ordered_json(*cu_rel * 100.0) : ordered_json(nullptr);
  j["min_delta"] = min_delta;
  j["max_delta"] = max_delta;
  j["mean_delta"] = cu;
  j["per_claim"] = ordered_json::array();
  for (const auto& c : per_claim) {
    j["per_claim"].push_back({{"claim_id", c.claim_id},
                              {"without", c.without},
                              {"delta", c.delta},
                              {"relative", c.relative ? ordered_json(*c.relative) : ordered_json(nullptr)}});
  }
  return j;
}

Correlation sensitivity_correlation(const std::vector<double>& f_claims, const std::vector<double>& f_docs) {
  return spearman(f_claims, f_docs);
}

}  // namespace hazeval
