#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "hazeval/answer.hpp"
#include "hazeval/gateway.hpp"
#include "hazeval/lexicon.hpp"

namespace hazeval {

inline constexpr std::string_view kMaskerLead = "You are a semantic masker.";
inline constexpr std::string_view kInverseLead = "Generate exactly ";
inline constexpr std::size_t kDefaultInverseQuestions = 5;

std::string masker_prompt(std::string_view answer_text);
std::string inverse_prompt(std::string_view answer_text, std::size_t n);

// Masks the rendered answer through the chat model. Any bracketed token
// outside {[HAZARD], [PROFESSION], [CONCERN], [INFRASTRUCTURE]} triggers the
// repair turn.
MaskedAnswer mask_answer(const StructuredAnswer& a, Provider& chat);

// Exactly n distinct non-empty questions.
std::vector<std::string> invert_questions(std::string_view answer_text, std::size_t n, Provider& chat);

enum class RelevanceMode { masked, unmasked };
std::string_view to_string(RelevanceMode m);
RelevanceMode parse_relevance_mode(std::string_view s);

struct RelevanceReport {
  RelevanceMode mode = RelevanceMode::masked;
  std::string source_text;  // masked or rendered answer fed to the inverse step
  std::vector<Replacement> replacements;
  std::vector<std::string> inverse_questions;
  std::vector<double> similarities;
  double relevance = 0.0;

  nlohmann::ordered_json to_json() const;
};

// Mean cosine between the question and each inverse question.
RelevanceReport masked_relevance(std::string_view question, const StructuredAnswer& a, std::size_t n, Provider& chat,
                                 Provider& embedder, RelevanceMode mode = RelevanceMode::masked);

struct SegmentAttribution {
  std::size_t segment_index = 0;  // 0-based
  double delta = 0.0;
  double full_score = 0.0;
};

// Answer with segment `skip` removed and the rest renumbered.
std::string render_without(const StructuredAnswer& a, std::size_t skip);

// One rerank call for the full answer and one per left-out segment. A
// leave-one-out text that renders empty scores 0 without a call.
std::vector<SegmentAttribution> loo_attribution(std::string_view question, const StructuredAnswer& a,
                                                Provider& reranker, std::size_t parallelism = 8);

struct RerankedAnswer {
  std::vector<std::size_t> order;  // 0-based original indices
  bool changed = false;
  double average_full_score = 0.0;
};

// Stable descending sort on delta; the intro is not part of the permutation.
RerankedAnswer rerank_answer(const StructuredAnswer& a, const std::vector<SegmentAttribution>& attributions);

}  // namespace hazeval
