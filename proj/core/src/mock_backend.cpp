#include "hazeval/mock_backend.hpp"

#include <cmath>
#include <regex>
#include <set>

#include "hazeval/claims.hpp"
#include "hazeval/context_utilization.hpp"
#include "hazeval/error.hpp"
#include "hazeval/json_reply.hpp"
#include "hazeval/lexicon.hpp"
#include "hazeval/readability.hpp"
#include "hazeval/relevance.hpp"
#include "hazeval/robustness.hpp"
#include "hazeval/specificity.hpp"
#include "hazeval/text.hpp"

namespace hazeval {

using nlohmann::json;

namespace {

constexpr std::string_view kAnswerLead = "You are tasked with writing a recommendation/fact-based answer";

double hash01(std::string_view key, std::uint64_t seed) {
  return static_cast<double>(fnv1a(key, seed) >> 11) * 0x1.0p-53;
}

// Text after the first occurrence of `marker`, or empty.
std::string_view after(std::string_view s, std::string_view marker) {
  const auto p = s.find(marker);
  return p == std::string_view::npos ? std::string_view{} : s.substr(p + marker.size());
}

std::string_view after_last(std::string_view s, std::string_view marker) {
  const auto p = s.rfind(marker);
  return p == std::string_view::npos ? std::string_view{} : s.substr(p + marker.size());
}

std::string_view between(std::string_view s, std::string_view open, std::string_view close) {
  std::string_view rest = after(s, open);
  const auto e = rest.find(close);
  return e == std::string_view::npos ? rest : rest.substr(0, e);
}

std::string context_field(std::string_view context, std::string_view key) {
  std::string_view v = after(context, std::string(key) + ": ");
  const auto e = v.find(';');
  return trim(e == std::string_view::npos ? v : v.substr(0, e));
}

std::string answer_reply(std::string_view prompt, std::uint64_t seed) {
  std::vector<std::string> abstracts;
  const std::string_view block = between(prompt, "Here are the 5 research abstracts:\n\n", "\nContext: ");
  for (int i = 1; i <= 5; ++i) {
    const std::string open = (i == 1 ? "" : "\n") + std::to_string(i) + ". ";
    const std::string close = "\n" + std::to_string(i + 1) + ". ";
    std::string_view start = i == 1 ? after(block, "1. ") : after(block, open);
    const auto e = i == 5 ? std::string_view::npos : start.find(close);
    abstracts.push_back(normalize_space(e == std::string_view::npos ? start : start.substr(0, e)));
  }
  const std::string context(between(prompt, "\nContext: ", "\n"));
  const std::string profession = context_field(context, "Profession");
  const std::string hazard = context_field(context, "Hazard");
  std::string location = context_field(context, "Location");
  const std::string timeline = context_field(context, "Timeline");
  const std::string question(between(prompt, "\nQuestion: ", "\n"));

  std::string out = "For a " + profession + " concerned about " + hazard + " in " + location +
                    ", the research points to the following.";
  for (std::size_t i = 0; i < abstracts.size(); ++i) {
    const auto sentences = split_sentences(abstracts[i]);
    std::string point = sentences.empty() ? abstracts[i] : sentences.front();
    if (fnv1a(question + "#" + std::to_string(i), seed) % 3 == 0) {
      point += " This matters for " + location + " over the next " + timeline + ".";
    }
    out += "\n" + std::to_string(i + 1) + ". " + point;
  }
  const int pct = 60 + static_cast<int>(fnv1a(question, seed) % 35);
  out += "\nConfidence: " + std::to_string(pct) + "% because the abstracts only partly address the question.";
  return out;
}

std::string decompose_reply(std::string_view prompt) {
  const StructuredAnswer a = parse_answer(after(prompt, "\nAnswer:\n"));
  json claims = json::array();
  if (!trim(a.intro).empty()) claims.push_back(normalize_space(a.intro));
  for (const auto& s : a.segments) claims.push_back(normalize_space(s));
  return claims.dump();
}

std::string context_claims_reply(std::string_view prompt) {
  const std::string body = trim(after(prompt, "\nAbstract:\n"));
  json claims = json::array();
  for (const auto& s : split_sentences(body)) claims.push_back(normalize_space(s));
  if (claims.empty() && !body.empty()) claims.push_back(body);
  return claims.dump();
}

bool evidence_supports(Dimension d, const std::string& detail, std::string_view evidence) {
  if (contains_ci(evidence, detail)) return true;
  if (d == Dimension::hazard && detail.size() > 1 && (detail.back() == 's' || detail.back() == 'S')) {
    return contains_ci(evidence, std::string_view(detail).substr(0, detail.size() - 1));
  }
  if (d == Dimension::location) {
    static const std::regex state(R"(,\s*([A-Z]{2})$)");
    std::smatch m;
    if (std::regex_search(detail, m, state)) {
      const std::regex code("\\b" + m[1].str() + "\\b");
      return std::regex_search(evidence.begin(), evidence.end(), code);
    }
  }
  return false;
}

std::string judge_reply(std::string_view prompt, std::optional<int> slot, std::uint64_t seed) {
  const std::string_view inputs = after_last(prompt, "\nClaim: ");
  const std::string claim = trim(between(inputs, "", "\nSpecific Details to Check:\n"));
  const std::string details_text(between(inputs, "\nSpecific Details to Check:\n", "\nEvidence Passages: "));
  const std::string_view evidence = after(inputs, "\nEvidence Passages: ");
  const json details = json::parse(details_text, nullptr, false);

  json reply;
  reply["claim"] = claim;
  for (Dimension d : kAllDimensions) {
    const std::string key(to_string(d));
    JudgeLabel label = JudgeLabel::na;
    std::string why = "The claim does not mention this detail.";
    if (details.is_object() && details.contains(key) && details[key].is_string()) {
      const std::string detail = details[key].get<std::string>();
      if (contains_ci(claim, detail)) {
        label = evidence_supports(d, detail, evidence) ? JudgeLabel::yes : JudgeLabel::no;
        why = label == JudgeLabel::yes ? "The evidence states \"" + detail + "\"."
                                       : "The evidence does not confirm \"" + detail + "\".";
      }
    }
    if (slot && *slot > 0 && label != JudgeLabel::na && fnv1a(claim + "|" + key, seed + *slot) % 100 < 20) {
      label = label == JudgeLabel::yes ? JudgeLabel::no : JudgeLabel::yes;
    }
    reply[key] = to_string(label);
    reply[key + "_reasoning"] = why;
  }
  return reply.dump();
}

std::string inverse_reply(std::string_view prompt) {
  const std::size_t n = std::stoul(std::string(after(prompt, kInverseLead)));
  const StructuredAnswer a = parse_answer(after(prompt, "\nAnswer:\n"));
  std::vector<std::string> sources = a.segments;
  if (!trim(a.intro).empty()) sources.push_back(a.intro);
  if (sources.empty()) sources.emplace_back("this answer");

  static constexpr std::array<std::string_view, 5> kForms = {
      "What is known about {}?", "Why does it matter that {}?", "What should planners know about {}?",
      "What evidence describes {}?", "How should one respond to {}?"};
  json out = json::array();
  std::set<std::string> seen;
  for (std::size_t i = 0; out.size() < n; ++i) {
    std::vector<std::string> words;
    for (const auto& w : split_words(sources[i % sources.size()])) {
      if (words.size() == 8) break;
      words.push_back(w);
    }
    std::string phrase = join(words, " ");
    while (!phrase.empty() && std::ispunct(static_cast<unsigned char>(phrase.back())) && phrase.back() != ']') {
      phrase.pop_back();
    }
    std::string q = replace_all(std::string(kForms[(i / sources.size()) % kForms.size()]), "{}", phrase);
    if (i >= sources.size() * kForms.size()) q += " (" + std::to_string(i + 1) + ")";
    if (seen.insert(to_lower(q)).second) out.push_back(q);
  }
  return out.dump();
}

std::string paraphrase_reply(std::string_view prompt) {
  std::string q = trim(after(prompt, "\nQuestion:\n"));
  const bool question_mark = !q.empty() && q.back() == '?';
  if (question_mark) q.pop_back();
  std::vector<std::string> words;
  for (const auto& w : split_words(q)) words.push_back(w);
  if (words.size() > 1) std::rotate(words.begin(), words.begin() + 1, words.end());
  return join(words, " ") + (question_mark ? "?" : "");
}

}  // namespace

SpecificDetails gazetteer_details(std::string_view claim) {
  SpecificDetails d;
  const std::string text(claim);
  std::smatch m;

  const std::string lower = to_lower(text);
  std::size_t best = std::string::npos;
  std::size_t best_len = 0;
  for (const auto& term : hazard_terms()) {
    for (auto p = lower.find(term); p != std::string::npos; p = lower.find(term, p + 1)) {
      const bool left = p == 0 || !std::isalnum(static_cast<unsigned char>(lower[p - 1]));
      const bool right = p + term.size() >= lower.size() || !std::isalnum(static_cast<unsigned char>(lower[p + term.size()]));
      if (left && right && (p < best || (p == best && term.size() > best_len))) {
        best = p;
        best_len = term.size();
      }
    }
  }
  if (best != std::string::npos) d.hazard = text.substr(best, best_len);

  static const std::regex location(R"(([A-Z][A-Za-z.'\-]*(?: [A-Z][A-Za-z.'\-]*)*), ([A-Z]{2})\b)");
  if (std::regex_search(text, m, location)) d.location = m[0].str();

  static const std::regex timeline(
      R"(\b(?:(?:next|within|over|in) )?\d+(?:-\d+)? years?\b|\bby (?:19|20)\d{2}\b|\b(?:19|20)\d{2}s?\b)");
  if (std::regex_search(text, m, timeline)) d.timeline = m[0].str();

  static const std::regex intensity(
      R"(\bCategory [1-5]\b|\b\d+(?:\.\d+)?(?: ?(?:mph|°F|°C|degrees|inches|inch|feet|ft|mm|cm|km/h|percent)\b| ?%))");
  if (std::regex_search(text, m, intensity)) d.intensity = m[0].str();
  return d;
}

double token_overlap(std::string_view query, std::string_view passage) {
  const auto q = word_tokens(query);
  const auto p = word_tokens(passage);
  const std::set<std::string> qs(q.begin(), q.end());
  const std::set<std::string> ps(p.begin(), p.end());
  double n = 0.0;
  for (const auto& t : qs) n += ps.contains(t) ? 1.0 : 0.0;
  return n;
}

Embedding hashed_embedding(std::string_view text, std::size_t dim, std::uint64_t seed) {
  Embedding v(dim, 0.0);
  const auto tokens = word_tokens(text);
  for (const auto& t : tokens) {
    const std::uint64_t h = fnv1a(t, seed);
    v[h % dim] += (h >> 63) ? 1.0 : -1.0;
  }
  if (tokens.empty() || l2_norm(v) == 0.0) v[0] += 1.0;
  return v;
}

MockBackend::MockBackend(MockOptions options, MockHandlers handlers)
    : options_(options), handlers_(std::move(handlers)) {
  if (options_.embed_dim == 0) throw ConfigError("mock embed_dim must be > 0");
}

std::string MockBackend::chat(const ChatRequest& request) {
  if (handlers_.chat) return handlers_.chat(request);
  return builtin_chat(request);
}

std::string MockBackend::builtin_chat(const ChatRequest& request) const {
  const std::string_view prompt = first_user_message(request);
  const std::uint64_t seed = options_.seed;
  if (prompt.starts_with(kAnswerLead)) return answer_reply(prompt, seed);
  if (prompt.starts_with(kDecomposeLead)) return decompose_reply(prompt);
  if (prompt.starts_with(kDetailsLead)) return gazetteer_details(after(prompt, "\nClaim:\n")).to_json().dump();
  if (prompt.starts_with(kContextClaimsLead)) return context_claims_reply(prompt);
  if (prompt.starts_with(kJudgeLead)) return judge_reply(prompt, request.seed, seed);
  if (prompt.starts_with(kMaskerLead)) return lexicon_mask(after_last(prompt, "\nAnswer: "), MaskLexicon::builtin()).text;
  if (prompt.starts_with(kInverseLead)) return inverse_reply(prompt);
  if (prompt.starts_with(kParaphraseLead)) return paraphrase_reply(prompt);
  return std::string(prompt);
}

std::vector<Embedding> MockBackend::embed(const std::vector<std::string>& texts) {
  if (handlers_.embed) return handlers_.embed(texts);
  std::vector<Embedding> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(hashed_embedding(t, options_.embed_dim, options_.seed));
  return out;
}

double MockBackend::rerank(std::string_view query, std::string_view passage) {
  if (handlers_.rerank) return handlers_.rerank(query, passage);
  return token_overlap(query, passage);
}

std::vector<TokenScore> MockBackend::score(std::string_view prompt, std::string_view completion) {
  if (handlers_.score) return handlers_.score(prompt, completion);
  const auto prompt_tokens = word_tokens(prompt);
  const std::set<std::string> context(prompt_tokens.begin(), prompt_tokens.end());

  std::vector<TokenScore> out;
  static const std::regex piece(R"(\s*\S+)");
  const std::string text(completion);
  for (auto it = std::sregex_iterator(text.begin(), text.end(), piece); it != std::sregex_iterator(); ++it) {
    const std::string tok = it->str();
    const auto words = word_tokens(tok);
    bool seen = true;
    for (const auto& w : words) seen = seen && context.contains(w);
    const double u = hash01(to_lower(trim(tok)), options_.seed);
    const double lp = seen ? -0.05 - 0.05 * u : -(0.6 + 0.8 * u);
    const double rest = 1.0 - std::exp(lp);
    out.push_back({tok, lp, {{tok, lp}, {"<alt1>", std::log(0.6 * rest)}, {"<alt2>", std::log(0.3 * rest)}}});
  }
  return out;
}

}  // namespace hazeval
