#include "hazeval/lexicon.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include "hazeval/text.hpp"

namespace hazeval {

namespace {

bool is_word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

bool iequal(std::string_view a, std::string_view b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::tolower(static_cast<unsigned char>(a[i])) != std::tolower(static_cast<unsigned char>(b[i]))) return false;
  }
  return true;
}

// Length of the placeholder starting at text[i], or 0.
std::size_t placeholder_at(std::string_view text, std::size_t i) {
  if (text[i] != '[') return 0;
  std::size_t j = i + 1;
  while (j < text.size() && (std::isupper(static_cast<unsigned char>(text[j])) || text[j] == '_')) ++j;
  if (j == i + 1 || j >= text.size() || text[j] != ']') return 0;
  return j - i + 1;
}

std::vector<std::string> hazard_surface_forms() {
  std::vector<std::string> out;
  for (HazardKind h : kAllHazards) {
    const std::string name(to_string(h));
    out.push_back(name);
    out.push_back(name + "s");
  }
  for (const char* extra : {"heatwave", "heatwaves", "flooding", "floods", "flood", "storm surge", "extreme heat",
                            "extreme cold", "wildland fire", "wildland fires"}) {
    out.emplace_back(extra);
  }
  return out;
}

void sort_longest_first(std::vector<std::pair<std::string, std::string>>& terms) {
  std::stable_sort(terms.begin(), terms.end(),
                   [](const auto& a, const auto& b) { return a.first.size() > b.first.size(); });
}

template <class OnHit>
std::string scan(std::string_view text, const MaskLexicon& lexicon, OnHit&& on_hit) {
  std::string out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    if (const std::size_t ph = placeholder_at(text, i)) {
      out.append(text.substr(i, ph));
      i += ph;
      continue;
    }
    const bool word_start = is_word_char(text[i]) && (i == 0 || !is_word_char(text[i - 1]));
    bool matched = false;
    if (word_start) {
      for (const auto& [term, slot] : lexicon.terms()) {
        const std::size_t n = term.size();
        if (i + n > text.size() || !iequal(text.substr(i, n), term)) continue;
        if (i + n < text.size() && is_word_char(text[i + n])) continue;
        on_hit(Replacement{std::string(text.substr(i, n)), slot});
        out += slot;
        i += n;
        matched = true;
        break;
      }
    }
    if (!matched) out += text[i++];
  }
  return out;
}

}  // namespace

MaskLexicon::MaskLexicon(std::vector<std::pair<std::string, std::string>> terms) : terms_(std::move(terms)) {
  std::set<std::string> seen;
  std::erase_if(terms_, [&](const auto& t) { return t.first.empty() || !seen.insert(to_lower(t.first)).second; });
  sort_longest_first(terms_);
}

MaskLexicon MaskLexicon::from_tables(const ProfessionRoster& roster, const InfrastructureCatalog& infrastructure) {
  std::vector<std::pair<std::string, std::string>> terms;
  for (const auto& h : hazard_surface_forms()) terms.emplace_back(h, kHazardSlot);
  for (const auto& p : roster.all()) {
    terms.emplace_back(p.name, kProfessionSlot);
    terms.emplace_back(p.name + "s", kProfessionSlot);
  }
  for (const char* c : {"critical vulnerabilities", "maintenance strategies", "modernization measures",
                        "projected impact", "projected impacts", "design standards", "cascading impacts"}) {
    terms.emplace_back(c, kConcernSlot);
  }
  for (Sector s : kAllSectors) {
    for (const auto& item : infrastructure.for_sector(s)) terms.emplace_back(item, kInfrastructureSlot);
  }
  return MaskLexicon(std::move(terms));
}

const MaskLexicon& MaskLexicon::builtin() {
  static const MaskLexicon lexicon = from_tables(ProfessionRoster::builtin(), InfrastructureCatalog::builtin());
  return lexicon;
}

const std::vector<std::string>& hazard_terms() {
  static const std::vector<std::string> terms = [] {
    auto forms = hazard_surface_forms();
    std::stable_sort(forms.begin(), forms.end(), [](const auto& a, const auto& b) { return a.size() > b.size(); });
    return forms;
  }();
  return terms;
}

MaskedAnswer lexicon_mask(std::string_view text, const MaskLexicon& lexicon) {
  MaskedAnswer m;
  m.text = scan(text, lexicon, [&](Replacement r) { m.replacements.push_back(std::move(r)); });
  return m;
}

std::vector<Replacement> lexicon_hits(std::string_view text, const MaskLexicon& lexicon) {
  return lexicon_mask(text, lexicon).replacements;
}

std::vector<std::string> placeholders_in(std::string_view text) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (const std::size_t ph = placeholder_at(text, i)) {
      out.emplace_back(text.substr(i, ph));
      i += ph - 1;
    }
  }
  return out;
}

bool is_mask_placeholder(std::string_view token) {
  return token == kHazardSlot || token == kProfessionSlot || token == kConcernSlot || token == kInfrastructureSlot;
}

MaskedAnswer align_mask(std::string_view original, std::string masked) {
  // Split the masked text into literal pieces around placeholders.
  std::vector<std::string> literals{""};
  std::vector<std::string> slots;
  for (std::size_t i = 0; i < masked.size();) {
    if (const std::size_t ph = placeholder_at(masked, i); ph && is_mask_placeholder(std::string_view(masked).substr(i, ph))) {
      slots.emplace_back(masked.substr(i, ph));
      literals.emplace_back();
      i += ph;
    } else {
      literals.back() += masked[i++];
    }
  }

  MaskedAnswer m;
  m.text = std::move(masked);
  if (!original.starts_with(literals[0])) {
    m.aligned = slots.empty() && original == literals[0];
    return m;
  }
  std::size_t pos = literals[0].size();
  for (std::size_t k = 0; k < slots.size(); ++k) {
    const std::string& next = literals[k + 1];
    std::size_t end;
    if (k + 1 == slots.size()) {
      end = original.size() - std::min(next.size(), original.size());
      if (end < pos || original.substr(end) != next) end = std::string_view::npos;
    } else {
      end = next.empty() ? std::string_view::npos : original.find(next, pos + 1);
    }
    if (end == std::string_view::npos || end <= pos) {
      m.aligned = false;
      return m;
    }
    m.replacements.push_back({std::string(original.substr(pos, end - pos)), slots[k]});
    pos = end + next.size();
  }
  if (slots.empty()) m.aligned = original == literals[0];
  return m;
}

}  // namespace hazeval
