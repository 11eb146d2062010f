#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "hazeval/dataset.hpp"

namespace hazeval {

inline constexpr std::string_view kHazardSlot = "[HAZARD]";
inline constexpr std::string_view kProfessionSlot = "[PROFESSION]";
inline constexpr std::string_view kConcernSlot = "[CONCERN]";
inline constexpr std::string_view kInfrastructureSlot = "[INFRASTRUCTURE]";

struct Replacement {
  std::string surface;
  std::string placeholder;
  friend bool operator==(const Replacement&, const Replacement&) = default;
};

struct MaskedAnswer {
  std::string text;
  std::vector<Replacement> replacements;
  // False when the replacements could not be aligned with the source text.
  bool aligned = true;
};

// Surface forms and the placeholder each one masks to.
class MaskLexicon {
 public:
  MaskLexicon() = default;
  explicit MaskLexicon(std::vector<std::pair<std::string, std::string>> terms);

  // Hazard names and their common inflections, every profession, the concern
  // phrases the masking instruction lists and every infrastructure item.
  static MaskLexicon from_tables(const ProfessionRoster& roster, const InfrastructureCatalog& infrastructure);
  static const MaskLexicon& builtin();

  // Longest first.
  const std::vector<std::pair<std::string, std::string>>& terms() const { return terms_; }

 private:
  std::vector<std::pair<std::string, std::string>> terms_;
};

// Hazard surface forms only, longest first.
const std::vector<std::string>& hazard_terms();

// Case-insensitive whole-word replacement, longest term first, never inside
// an existing [PLACEHOLDER]. Idempotent.
MaskedAnswer lexicon_mask(std::string_view text, const MaskLexicon& lexicon);

// Surface forms of `lexicon` terms found in `text` (whole-word, outside placeholders).
std::vector<Replacement> lexicon_hits(std::string_view text, const MaskLexicon& lexicon);

// Bracketed upper-case tokens in `text`, e.g. "[HAZARD]".
std::vector<std::string> placeholders_in(std::string_view text);
bool is_mask_placeholder(std::string_view token);

// Recovers (surface, placeholder) pairs by walking the original text along the
// literal pieces of the masked text.
MaskedAnswer align_mask(std::string_view original, std::string masked);

}  // namespace hazeval
