#include "hazeval/relevance.hpp"

#include <algorithm>
#include <numeric>
#include <set>

#include "hazeval/error.hpp"
#include "hazeval/json_reply.hpp"
#include "hazeval/parallel.hpp"
#include "hazeval/text.hpp"

namespace hazeval {

using nlohmann::json;
using nlohmann::ordered_json;

std::string masker_prompt(std::string_view answer_text) {
  std::string p(kMaskerLead);
  p += " Given the following answer, replace:\n\n"
       "- hazard types with [HAZARD]\n"
       "- profession-related terms with [PROFESSION]\n"
       "- concern with [CONCERN] (e.g., critical vulnerabilities, maintenance strategies, modernization measures, "
       "maintenance strategies, projected impact, design standards, cascading impacts etc.)\n"
       "- infrastructure with [INFRASTRUCTURE] (e.g., \"highway network\", \"bridge system\", \"public transit "
       "system\", \"railway infrastructure\", \"airport facilities\", \"port facilities\", \"freight terminals\", "
       "\"traffic control systems\", \"water treatment plant\", \"wastewater system\", \"dam infrastructure\", "
       "\"stormwater system\", \"coastal protection\", \"water distribution network\", \"electrical grid\", \"power "
       "distribution network\", \"EV charging network\", \"renewable energy infrastructure\", \"energy storage "
       "facilities\", \"power transmission lines\", \"substations\", \"public buildings\", \"critical facilities\", "
       "\"commercial structures\", etc.)\n\n"
       "Keep the structure natural and readable.\n\n"
       "Answer: ";
  p += answer_text;
  return p;
}

std::string inverse_prompt(std::string_view answer_text, std::size_t n) {
  std::string p(kInverseLead);
  p += std::to_string(n) +
       " distinct questions for which the following answer would be an appropriate response. Bracketed "
       "placeholders stand for withheld details; keep them as written.\n"
       "Return ONLY a JSON array of exactly " +
       std::to_string(n) + " question strings, with no markdown and no extra text.\n\nAnswer:\n";
  p += answer_text;
  return p;
}

MaskedAnswer mask_answer(const StructuredAnswer& a, Provider& chat) {
  if (a.empty()) throw PreconditionError("mask_answer: empty answer");
  const std::string original = render_answer(a);
  const std::function<MaskedAnswer(const std::string&)> convert = [&](const std::string& reply) {
    std::string text = trim(reply);
    if (text.empty()) throw ReplyError("the masked answer is empty");
    for (const auto& ph : placeholders_in(text)) {
      if (!is_mask_placeholder(ph)) throw ReplyError("placeholder " + ph + " is not one of the allowed placeholders");
    }
    return align_mask(original, std::move(text));
  };
  return ask_checked(chat, ChatRequest::judge(masker_prompt(original)), convert,
                     "Reply again with only the masked answer, using only [HAZARD], [PROFESSION], [CONCERN] and "
                     "[INFRASTRUCTURE].");
}

std::vector<std::string> invert_questions(std::string_view answer_text, std::size_t n, Provider& chat) {
  if (n < 1) throw PreconditionError("invert_questions: n must be >= 1");
  if (trim(answer_text).empty()) throw PreconditionError("invert_questions: empty answer");
  const std::function<std::vector<std::string>(const json&)> convert = [n](const json& j) {
    if (!j.is_array()) throw ReplyError("expected a JSON array of questions");
    std::vector<std::string> out;
    std::set<std::string> seen;
    for (const auto& item : j) {
      if (!item.is_string()) throw ReplyError("every question must be a string");
      std::string q = normalize_space(item.get<std::string>());
      if (q.empty()) throw ReplyError("a question is empty");
      if (!seen.insert(to_lower(q)).second) throw ReplyError("questions must be distinct");
      out.push_back(std::move(q));
    }
    if (out.size() != n) {
      throw ReplyError("expected exactly " + std::to_string(n) + " questions, got " + std::to_string(out.size()));
    }
    return out;
  };
  return ask_json(chat, ChatRequest::user(inverse_prompt(answer_text, n)), convert);
}

std::string_view to_string(RelevanceMode m) { return m == RelevanceMode::masked ? "masked" : "unmasked"; }

RelevanceMode parse_relevance_mode(std::string_view s) {
  if (s == "masked") return RelevanceMode::masked;
  if (s == "unmasked") return RelevanceMode::unmasked;
  throw ConfigError("relevance mode must be \"masked\" or \"unmasked\"");
}

ordered_json RelevanceReport::to_json() const {
  ordered_json j;
  j["mode"] = to_string(mode);
  j["source_text"] = source_text;
  j["replacements"] = ordered_json::array();
  for (const auto& r : replacements) j["replacements"].push_back({{"surface", r.surface}, {"placeholder", r.placeholder}});
  j["inverse_questions"] = inverse_questions;
  j["similarities"] = similarities;
  j["relevance"] = relevance;
  return j;
}

RelevanceReport masked_relevance(std::string_view question, const StructuredAnswer& a, std::size_t n, Provider& chat,
                                 Provider& embedder, RelevanceMode mode) {
  if (trim(question).empty()) throw PreconditionError("masked_relevance: empty question");
  RelevanceReport r;
  r.mode = mode;
  if (mode == RelevanceMode::masked) {
    MaskedAnswer m = mask_answer(a, chat);
    r.source_text = std::move(m.text);
    r.replacements = std::move(m.replacements);
  } else {
    if (a.empty()) throw PreconditionError("masked_relevance: empty answer");
    r.source_text = render_answer(a);
  }
  r.inverse_questions = invert_questions(r.source_text, n, chat);

  std::vector<std::string> texts{std::string(question)};
  texts.insert(texts.end(), r.inverse_questions.begin(), r.inverse_questions.end());
  const auto vectors = embedder.embed(texts);
  for (std::size_t i = 1; i < vectors.size(); ++i) r.similarities.push_back(cosine(vectors[0], vectors[i]));
  r.relevance = std::accumulate(r.similarities.begin(), r.similarities.end(), 0.0) /
                static_cast<double>(r.similarities.size());
  return r;
}

std::string render_without(const StructuredAnswer& a, std::size_t skip) {
  std::vector<std::string> rest;
  for (std::size_t i = 0; i < a.segments.size(); ++i) {
    if (i != skip) rest.push_back(a.segments[i]);
  }
  return render_answer(a.intro, rest);
}

std::vector<SegmentAttribution> loo_attribution(std::string_view question, const StructuredAnswer& a,
                                                Provider& reranker, std::size_t parallelism) {
  const std::size_t m = a.segments.size();
  if (m == 0) throw PreconditionError("loo_attribution: answer has no segments");
  // Slot 0 is the full answer, slot i+1 leaves segment i out.
  std::vector<std::string> passages{render_answer(a)};
  for (std::size_t i = 0; i < m; ++i) passages.push_back(render_without(a, i));

  std::vector<double> scores(m + 1, 0.0);
  parallel_for(m + 1, parallelism, [&](std::size_t i) {
    if (!trim(passages[i]).empty()) scores[i] = reranker.rerank(question, passages[i]);
  });

  std::vector<SegmentAttribution> out;
  out.reserve(m);
  for (std::size_t i = 0; i < m; ++i) out.push_back({i, scores[0] - scores[i + 1], scores[0]});
  return out;
}

RerankedAnswer rerank_answer(const StructuredAnswer& a, const std::vector<SegmentAttribution>& attributions) {
  const std::size_t m = a.segments.size();
  if (attributions.size() != m) throw PreconditionError("rerank_answer: attributions do not cover every segment");
  std::vector<double> delta(m);
  std::vector<bool> covered(m, false);
  double full = 0.0;
  for (const auto& at : attributions) {
    if (at.segment_index >= m || covered[at.segment_index]) {
      throw PreconditionError("rerank_answer: attribution/segment mismatch");
    }
    covered[at.segment_index] = true;
    delta[at.segment_index] = at.delta;
    full += at.full_score;
  }

  RerankedAnswer r;
  r.order.resize(m);
  std::iota(r.order.begin(), r.order.end(), std::size_t{0});
  std::stable_sort(r.order.begin(), r.order.end(), [&](std::size_t x, std::size_t y) { return delta[x] > delta[y]; });
  for (std::size_t i = 0; i < m; ++i) r.changed = r.changed || r.order[i] != i;
  r.average_full_score = m ? full / static_cast<double>(m) : 0.0;
  return r;
}

}  // namespace hazeval
