#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "hazeval/answer.hpp"
#include "hazeval/corpus_index.hpp"
#include "hazeval/gateway.hpp"

namespace hazeval {

enum class ClaimOrigin { answer, context };

struct AtomicClaim {
  std::string claim_id;
  std::string text;
  ClaimOrigin origin = ClaimOrigin::answer;
  std::optional<std::string> source_doc_id;  // set iff origin == context
};

// The four specificity dimensions in weight order.
enum class Dimension { hazard, location, timeline, intensity };
inline constexpr std::array<Dimension, 4> kAllDimensions = {Dimension::hazard, Dimension::location,
                                                            Dimension::timeline, Dimension::intensity};
std::string_view to_string(Dimension d);

struct SpecificDetails {
  std::optional<std::string> hazard;
  std::optional<std::string> location;
  std::optional<std::string> timeline;
  std::optional<std::string> intensity;

  const std::optional<std::string>& get(Dimension d) const;
  std::optional<std::string>& get(Dimension d);
  nlohmann::ordered_json to_json() const;
};

// Prompt builders. Each ends with a labelled payload block.
inline constexpr std::string_view kDecomposeLead = "Decompose the following answer into atomic claims.";
inline constexpr std::string_view kDetailsLead = "Extract the specific details mentioned in the claim below";
inline constexpr std::string_view kContextClaimsLead = "Extract the unique, non-redundant factual claims";
std::string decompose_prompt(std::string_view answer_text);
std::string details_prompt(std::string_view claim_text);
std::string context_claims_prompt(std::string_view document_body);

// Answer -> atomic claims (intro included). Ids are "<prefix>c<n>".
// Throws PreconditionError for an empty answer and ReplyError when the model
// yields no usable claims.
std::vector<AtomicClaim> decompose_answer(const StructuredAnswer& answer, Provider& chat,
                                          std::string_view id_prefix = "");

SpecificDetails extract_details(const AtomicClaim& claim, Provider& chat);

inline constexpr double kDedupThreshold = 0.95;

// Indices of vectors kept by a first-seen-wins sweep: a vector is dropped
// when its cosine with any earlier kept vector is >= threshold.
std::vector<std::size_t> dedup_keep(const std::vector<Embedding>& vectors, double threshold = kDedupThreshold);

// Claims from every document, then near-duplicates removed across the whole
// input-ordered list.
std::vector<AtomicClaim> extract_context_claims(const std::vector<DocumentRecord>& docs, Provider& chat,
                                                Provider& embedder, double threshold = kDedupThreshold);

nlohmann::ordered_json to_json(const AtomicClaim& c);
AtomicClaim claim_from_json(const nlohmann::json& j);

// Claim cache file: one AtomicClaim per line.
void save_claims(const std::filesystem::path& path, const std::vector<AtomicClaim>& claims);
std::optional<std::vector<AtomicClaim>> load_claims(const std::filesystem::path& path);

}  // namespace hazeval
