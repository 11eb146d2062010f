#include "hazeval/robustness.hpp"

#include <algorithm>

#include "hazeval/error.hpp"
#include "hazeval/json_reply.hpp"
#include "hazeval/parallel.hpp"
#include "hazeval/text.hpp"

namespace hazeval {

using nlohmann::ordered_json;

std::string_view to_string(VariantKind k) {
  switch (k) {
    case VariantKind::paraphrase: return "paraphrase";
    case VariantKind::perturb_hazard: return "perturb_hazard";
    case VariantKind::perturb_location: return "perturb_location";
    case VariantKind::perturb_both: return "perturb_both";
  }
  return "";
}

VariantKind parse_variant_kind(std::string_view s) {
  for (VariantKind k : kAllVariantKinds) {
    if (to_string(k) == s) return k;
  }
  throw ConfigError("unknown variant kind '" + std::string(s) + "'");
}

std::string paraphrase_prompt(std::string_view question) {
  std::string p(kParaphraseLead);
  p += " so that its meaning is fully preserved but its wording differs. Return only the rephrased question.\n\n"
       "Question:\n";
  p += question;
  return p;
}

std::string paraphrase_question(std::string_view q, Provider& chat) {
  if (trim(q).empty()) throw PreconditionError("paraphrase_question: empty question");
  const std::string original = to_lower(normalize_space(q));
  const std::function<std::string(const std::string&)> convert = [&](const std::string& reply) {
    std::string p = normalize_space(reply);
    if (p.empty()) throw ReplyError("the paraphrase is empty");
    if (to_lower(p) == original) throw ReplyError("the paraphrase is identical to the question");
    return p;
  };
  return ask_checked(chat, ChatRequest::user(paraphrase_prompt(q)), convert,
                     "Reply again with a rephrased question whose wording differs from the original.");
}

namespace {

std::vector<Location> locations_except(const HazardLocationTable& table, HazardKind h, const Location& skip) {
  std::vector<Location> out;
  for (const auto& l : table.locations(h)) {
    if (l != skip) out.push_back(l);
  }
  return out;
}

}  // namespace

QuestionRecord perturb_question(const QuestionRecord& record, const DatasetTables& tables, VariantKind kind,
                                std::uint64_t rng_seed) {
  if (kind == VariantKind::paraphrase) throw PreconditionError("perturb_question: paraphrase is not a perturbation");
  const HazardLocationTable& table = tables.hazards;
  Rng rng(rng_seed);
  UserProfile p = record.profile;

  std::vector<HazardKind> other_hazards;
  for (HazardKind h : table.hazards()) {
    if (h == p.hazard) continue;
    if (kind == VariantKind::perturb_both && locations_except(table, h, p.location).empty()) continue;
    other_hazards.push_back(h);
  }

  switch (kind) {
    case VariantKind::perturb_hazard: {
      if (other_hazards.empty()) throw PreconditionError("perturb_question: no alternative hazard in the table");
      p.hazard = pick(rng, other_hazards);
      if (!table.contains(p.hazard, p.location)) p.location = pick(rng, table.locations(p.hazard));
      break;
    }
    case VariantKind::perturb_location: {
      const auto candidates = locations_except(table, p.hazard, p.location);
      if (candidates.empty()) throw PreconditionError("perturb_question: no alternative location for the hazard");
      p.location = pick(rng, candidates);
      break;
    }
    case VariantKind::perturb_both: {
      if (other_hazards.empty()) throw PreconditionError("perturb_question: no alternative hazard and location");
      const Location old = p.location;
      p.hazard = pick(rng, other_hazards);
      p.location = pick(rng, locations_except(table, p.hazard, old));
      break;
    }
    case VariantKind::paraphrase: break;
  }

  const QuestionTemplate& tmpl = tables.templates.by_id(record.template_id);
  return instantiate_question(p, tmpl, record.infrastructure, record.id + "~" + std::string(to_string(kind)));
}

std::string answer_text(const StructuredAnswer& a) { return render_answer(a); }

double consistency_score(const StructuredAnswer& a, const StructuredAnswer& b, Provider& embedder) {
  const std::string ta = answer_text(a);
  const std::string tb = answer_text(b);
  if (trim(ta).empty() || trim(tb).empty()) throw PreconditionError("consistency_score: empty answer text");
  const auto v = embedder.embed({ta, tb});
  return cosine(v[0], v[1]);
}

RobustnessSummary summarize_robustness(const std::vector<RobustnessRecord>& records) {
  RobustnessSummary s;
  double para = 0.0;
  int para_n = 0;
  double pert = 0.0;
  int pert_n = 0;
  for (const auto& r : records) {
    if (r.kind == VariantKind::paraphrase) {
      para += r.consistency;
      ++para_n;
    } else {
      pert += r.consistency;
      ++pert_n;
    }
  }
  if (para_n > 0) s.paraphrase = para / para_n;
  if (pert_n > 0) s.perturbation = pert / pert_n;
  return s;
}

std::vector<RobustnessRecord> run_robustness(const QuestionRecord& record, const StructuredAnswer& original,
                                             const std::vector<VariantKind>& kinds, const DatasetTables& tables,
                                             Provider& chat, Provider& embedder, const AnswerFn& answer,
                                             const RobustnessOptions& options) {
  std::vector<RobustnessRecord> out(kinds.size());
  parallel_for(kinds.size(), options.parallelism, [&](std::size_t i) {
    const VariantKind kind = kinds[i];
    QuestionRecord variant;
    if (kind == VariantKind::paraphrase) {
      variant = record;
      variant.id = record.id + "~paraphrase";
      variant.question_text = paraphrase_question(record.question_text, chat);
    } else {
      variant = perturb_question(record, tables, kind, fnv1a(to_string(kind), options.seed));
    }
    RobustnessRecord& r = out[i];
    r.question_id = record.id;
    r.kind = kind;
    r.variant_question = variant.question_text;
    r.variant_answer = answer(variant);
    r.consistency = consistency_score(original, r.variant_answer, embedder);
  });
  return out;
}

ordered_json to_json(const RobustnessRecord& r) {
  ordered_json j;
  j["question_id"] = r.question_id;
  j["kind"] = to_string(r.kind);
  j["variant_question"] = r.variant_question;
  j["variant_answer_intro"] = r.variant_answer.intro;
  j["variant_answer_segments"] = r.variant_answer.segments;
  j["variant_retrieved_doc_ids"] = r.variant_answer.retrieved_doc_ids;
  j["consistency"] = r.consistency;
  return j;
}

}  // namespace hazeval
