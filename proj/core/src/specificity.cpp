#include "hazeval/specificity.hpp"

#include <algorithm>

#include "hazeval/error.hpp"
#include "hazeval/json_reply.hpp"
#include "hazeval/parallel.hpp"
#include "hazeval/text.hpp"

namespace hazeval {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr std::string_view kJudgeTemplate = R"(You are a strict evaluator of specificity and factuality.

Given for each claim:
- A factual claim
- A list of evidence passages from a trusted source
- A set of specific details extracted from the claim (hazard type, location, timeline, intensity)
Your task is to evaluate the claim using ONLY the provided evidence.

LABEL DEFINITIONS

For each specific detail (hazard, location, timeline, intensity), use EXACTLY one of the following labels:
- "yes":
The detail is explicitly mentioned in the claim AND it matches the same specific detail discussed in the knowledge source.
- "no":
The detail is explicitly mentioned in the claim BUT the knowledge source does NOT provide sufficient information to verify it. (This includes cases where the evidence contradicts the claim or does not confirm it.)
- "N/A":
The detail is NOT mentioned in the claim at all.
For location matching, agreement at the STATE level is sufficient; an exact county or city match is not required.
Do NOT infer or assume any facts beyond the evidence.
Lack of verification MUST be labeled as "no" (not "N/A").

EVALUATION STEPS

Your task is to:
1. Determine whether the **claim is factually true, false, or partially correct**, using ONLY the evidence.
2. For each of the 4 specific details (hazard, location, timeline, intensity):
 - Assign "yes", "no", or "N/A" based on the rules above.
 - Provide a brief factual explanation for your decision.
3. Justify your overall factuality decision concisely and objectively.
4. If the claim is "true", cite the exact evidence passage(s) that support it.
5. If the claim is "false" or "partially correct", explain precisely which details are unsupported or incorrect.

OUTPUT FORMAT

Return your answer as a SINGLE JSON object in the following format (with no markdown, no extra text, and no explanations outside the JSON):
{
"claim": "<Claim>",
"hazard": "yes" | "no" | "N/A",
"hazard_reasoning": "<Explain whether hazard mentioned in the claim is explicitly supported>",
"location": "yes" | "no" | "N/A",
"location_reasoning": "<Explain whether location mentioned in the claim is supported>",
"timeline": "yes" | "no" | "N/A",
"timeline_reasoning": "<Explain whether timeline like date and range of years mentioned in the claim is supported>",
"intensity": "yes" | "no" | "N/A",
"intensity_reasoning": "<Explain whether intensity mentioned in the claim is supported>"
}

INPUTS

Claim: {claim}
Specific Details to Check:
{specific_info}
Evidence Passages: {knowledge})";

JudgeLabel conservative_rank_pick(const std::array<int, 3>& counts) {
  const int top = std::max({counts[0], counts[1], counts[2]});
  for (JudgeLabel l : {JudgeLabel::no, JudgeLabel::na, JudgeLabel::yes}) {
    if (counts[static_cast<std::size_t>(l)] == top) return l;
  }
  return JudgeLabel::no;
}

ordered_json per_dimension_json(const auto& values, auto&& convert) {
  ordered_json j = ordered_json::object();
  for (Dimension d : kAllDimensions) j[std::string(to_string(d))] = convert(values[static_cast<std::size_t>(d)]);
  return j;
}

ordered_json optional_json(const auto& v) { return v ? ordered_json(*v) : ordered_json(nullptr); }

}  // namespace

std::string_view to_string(JudgeLabel l) {
  switch (l) {
    case JudgeLabel::yes: return "yes";
    case JudgeLabel::no: return "no";
    case JudgeLabel::na: return "N/A";
  }
  return "N/A";
}

std::optional<JudgeLabel> parse_judge_label(std::string_view s) {
  const std::string v = to_lower(trim(s));
  if (v == "yes") return JudgeLabel::yes;
  if (v == "no") return JudgeLabel::no;
  if (v == "n/a" || v == "na") return JudgeLabel::na;
  return std::nullopt;
}

void SpecificityWeights::validate() const {
  for (double a : alpha) {
    if (!(a > 0.0)) throw ConfigError("specificity weights must all be > 0");
  }
}

SpecificityWeights SpecificityWeights::from_json(const json& j) {
  SpecificityWeights w;
  if (!j.is_object()) throw ConfigError("specificity weights must be an object");
  for (Dimension d : kAllDimensions) {
    const std::string key(to_string(d));
    if (!j.contains(key)) continue;
    if (!j[key].is_number()) throw ConfigError("weight '" + key + "' must be a number");
    w.alpha[static_cast<std::size_t>(d)] = j[key].get<double>();
  }
  w.validate();
  return w;
}

std::string judge_prompt(std::string_view claim, const SpecificDetails& details,
                         const std::vector<std::string>& evidence) {
  std::string knowledge;
  for (std::size_t i = 0; i < evidence.size(); ++i) {
    knowledge += "\n[" + std::to_string(i + 1) + "] " + normalize_space(evidence[i]);
  }
  std::string p(kJudgeTemplate);
  p = replace_all(std::move(p), "{claim}", claim);
  p = replace_all(std::move(p), "{specific_info}", details.to_json().dump());
  return replace_all(std::move(p), "{knowledge}", knowledge);
}

ClaimJudgment parse_judgment(const json& reply, std::string claim_id, std::string judge_id) {
  if (!reply.is_object()) throw ReplyError("expected a single JSON object");
  ClaimJudgment out;
  out.claim_id = std::move(claim_id);
  out.judge_id = std::move(judge_id);
  for (Dimension d : kAllDimensions) {
    const std::string key(to_string(d));
    const auto i = static_cast<std::size_t>(d);
    if (!reply.contains(key) || !reply[key].is_string()) throw ReplyError("missing label '" + key + "'");
    const auto label = parse_judge_label(reply[key].get<std::string>());
    if (!label) throw ReplyError("label '" + key + "' must be \"yes\", \"no\" or \"N/A\"");
    out.labels[i] = *label;
    const std::string rkey = key + "_reasoning";
    if (reply.contains(rkey) && reply[rkey].is_string()) out.reasoning[i] = reply[rkey].get<std::string>();
  }
  return out;
}

std::vector<JudgeSlot> resampled_judges(Provider& provider, int count) {
  if (count < 1) throw ConfigError("at least one judge is required");
  std::vector<JudgeSlot> slots;
  for (int s = 0; s < count; ++s) {
    slots.push_back({&provider, provider.profile().name + "#" + std::to_string(s), s});
  }
  return slots;
}

ClaimJudgment judge_claim(const AtomicClaim& claim, const SpecificDetails& details,
                          const std::vector<std::string>& evidence, const JudgeSlot& judge) {
  if (evidence.empty()) throw PreconditionError("judge_claim: evidence is empty");
  if (judge.provider == nullptr) throw PreconditionError("judge_claim: no provider");
  const std::function<ClaimJudgment(const json&)> convert = [&](const json& j) {
    return parse_judgment(j, claim.claim_id, judge.judge_id);
  };
  return ask_json(*judge.provider, ChatRequest::judge(judge_prompt(claim.text, details, evidence), judge.seed),
                  convert);
}

JudgeLabel vote(const std::vector<JudgeLabel>& labels) {
  if (labels.empty()) throw PreconditionError("vote: no labels");
  std::array<int, 3> counts{};
  for (JudgeLabel l : labels) ++counts[static_cast<std::size_t>(l)];
  return conservative_rank_pick(counts);
}

ConsensusVector majority_vote(const std::vector<ClaimJudgment>& judgments) {
  if (judgments.empty()) throw PreconditionError("majority_vote: no judgments");
  ConsensusVector out;
  out.claim_id = judgments.front().claim_id;
  for (const auto& j : judgments) {
    if (j.claim_id != out.claim_id) throw PreconditionError("majority_vote: judgments cover different claims");
  }
  for (Dimension d : kAllDimensions) {
    std::vector<JudgeLabel> labels;
    for (const auto& j : judgments) labels.push_back(j.label(d));
    switch (vote(labels)) {
      case JudgeLabel::yes: out.values[static_cast<std::size_t>(d)] = 1; break;
      case JudgeLabel::no: out.values[static_cast<std::size_t>(d)] = 0; break;
      case JudgeLabel::na: break;
    }
  }
  return out;
}

PerDimension<std::optional<double>> dimension_average(const std::vector<ConsensusVector>& consensus) {
  if (consensus.empty()) throw PreconditionError("dimension_average: no consensus vectors");
  PerDimension<std::optional<double>> out;
  for (std::size_t d = 0; d < 4; ++d) {
    double sum = 0.0;
    int n = 0;
    for (const auto& c : consensus) {
      if (c.values[d]) {
        sum += *c.values[d];
        ++n;
      }
    }
    if (n > 0) out[d] = sum / n;
  }
  return out;
}

std::optional<double> aggregate(const PerDimension<std::optional<double>>& averages, const SpecificityWeights& weights) {
  weights.validate();
  double num = 0.0;
  double den = 0.0;
  for (std::size_t d = 0; d < 4; ++d) {
    if (!averages[d]) continue;
    num += weights.alpha[d] * *averages[d];
    den += weights.alpha[d];
  }
  if (den == 0.0) return std::nullopt;
  return num / den;
}

ordered_json SpecificityReport::to_json() const {
  ordered_json j;
  j["score"] = optional_json(score);
  j["averages"] = per_dimension_json(averages, [](const auto& v) { return optional_json(v); });
  j["claims"] = ordered_json::array();
  for (const auto& c : claims) {
    ordered_json cj;
    cj["claim_id"] = c.claim.claim_id;
    cj["text"] = c.claim.text;
    cj["details"] = c.details.to_json();
    cj["judgments"] = ordered_json::array();
    for (const auto& jd : c.judgments) {
      ordered_json jj;
      jj["judge_id"] = jd.judge_id;
      jj["labels"] = per_dimension_json(jd.labels, [](JudgeLabel l) { return ordered_json(to_string(l)); });
      jj["reasoning"] = per_dimension_json(jd.reasoning, [](const std::string& r) { return ordered_json(r); });
      cj["judgments"].push_back(std::move(jj));
    }
    cj["consensus"] = per_dimension_json(c.consensus.values, [](const auto& v) { return optional_json(v); });
    j["claims"].push_back(std::move(cj));
  }
  return j;
}

SpecificityReport score_claims(const std::vector<AtomicClaim>& claims, const std::vector<std::string>& evidence,
                               Provider& extractor, const std::vector<JudgeSlot>& judges,
                               const SpecificityWeights& weights, std::size_t parallelism) {
  if (claims.empty()) throw PreconditionError("score_claims: no claims to score");
  if (evidence.empty()) throw PreconditionError("score_claims: evidence is empty");
  if (judges.empty()) throw PreconditionError("score_claims: no judges");
  weights.validate();

  SpecificityReport report;
  report.claims.resize(claims.size());
  parallel_for(claims.size(), parallelism, [&](std::size_t i) {
    report.claims[i].claim = claims[i];
    report.claims[i].details = extract_details(claims[i], extractor);
    report.claims[i].judgments.resize(judges.size());
  });

  const std::size_t k = judges.size();
  parallel_for(claims.size() * k, parallelism, [&](std::size_t t) {
    auto& c = report.claims[t / k];
    c.judgments[t % k] = judge_claim(c.claim, c.details, evidence, judges[t % k]);
  });

  std::vector<ConsensusVector> consensus;
  for (auto& c : report.claims) {
    c.consensus = majority_vote(c.judgments);
    consensus.push_back(c.consensus);
  }
  report.averages = dimension_average(consensus);
  report.score = aggregate(report.averages, weights);
  return report;
}

SpecificityReport score_answer(const StructuredAnswer& answer, const std::vector<std::string>& evidence,
                               Provider& extractor, const std::vector<JudgeSlot>& judges,
                               const SpecificityWeights& weights, std::size_t parallelism) {
  return score_claims(decompose_answer(answer, extractor), evidence, extractor, judges, weights, parallelism);
}

}  // namespace hazeval
