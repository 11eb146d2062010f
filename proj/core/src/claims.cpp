#include "hazeval/claims.hpp"

#include <fstream>

#include "hazeval/error.hpp"
#include "hazeval/json_reply.hpp"
#include "hazeval/parallel.hpp"
#include "hazeval/text.hpp"

namespace hazeval {

using nlohmann::json;

namespace {

constexpr std::array<std::string_view, 4> kDimensionNames = {"hazard", "location", "timeline", "intensity"};

std::vector<std::string> string_array(const json& j) {
  if (!j.is_array()) throw ReplyError("expected a JSON array of strings");
  std::vector<std::string> out;
  for (const auto& item : j) {
    if (!item.is_string()) throw ReplyError("array element is not a string");
    std::string s = normalize_space(item.get<std::string>());
    if (!s.empty()) out.push_back(std::move(s));
  }
  return out;
}

}  // namespace

std::string_view to_string(Dimension d) { return kDimensionNames[static_cast<std::size_t>(d)]; }

const std::optional<std::string>& SpecificDetails::get(Dimension d) const {
  switch (d) {
    case Dimension::hazard: return hazard;
    case Dimension::location: return location;
    case Dimension::timeline: return timeline;
    case Dimension::intensity: return intensity;
  }
  return intensity;
}

std::optional<std::string>& SpecificDetails::get(Dimension d) {
  return const_cast<std::optional<std::string>&>(std::as_const(*this).get(d));
}

nlohmann::ordered_json SpecificDetails::to_json() const {
  nlohmann::ordered_json j;
  for (Dimension d : kAllDimensions) {
    const auto& v = get(d);
    j[std::string(to_string(d))] = v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
  }
  return j;
}

std::string decompose_prompt(std::string_view answer_text) {
  std::string p(kDecomposeLead);
  p += " Each claim must be a single, self-contained factual statement that can be understood without the rest of "
       "the answer. Keep the wording of the answer where possible and do not add information.\n"
       "Return ONLY a JSON array of strings, one string per claim, with no markdown and no extra text.\n\n"
       "Answer:\n";
  p += answer_text;
  return p;
}

std::string details_prompt(std::string_view claim_text) {
  std::string p(kDetailsLead);
  p += " along four dimensions: hazard type, location, timeline, and intensity. Copy each mention exactly as "
       "written in the claim. Use null for a dimension that the claim does not mention.\n"
       "Return ONLY a JSON object with the keys \"hazard\", \"location\", \"timeline\" and \"intensity\", with no "
       "markdown and no extra text.\n\n"
       "Claim:\n";
  p += claim_text;
  return p;
}

std::string context_claims_prompt(std::string_view document_body) {
  std::string p(kContextClaimsLead);
  p += " stated in the research abstract below. Each claim must be a single, self-contained factual statement.\n"
       "Return ONLY a JSON array of strings, with no markdown and no extra text.\n\n"
       "Abstract:\n";
  p += document_body;
  return p;
}

std::vector<AtomicClaim> decompose_answer(const StructuredAnswer& answer, Provider& chat, std::string_view id_prefix) {
  if (answer.segments.empty() && trim(answer.intro).empty()) {
    throw PreconditionError("decompose_answer: answer has no intro and no segments");
  }
  const std::function<std::vector<std::string>(const json&)> convert = [](const json& j) {
    auto claims = string_array(j);
    if (claims.empty()) throw ReplyError("the claim list is empty");
    return claims;
  };
  const auto texts = ask_json(chat, ChatRequest::judge(decompose_prompt(render_answer(answer))), convert);

  std::vector<AtomicClaim> out;
  out.reserve(texts.size());
  for (std::size_t i = 0; i < texts.size(); ++i) {
    out.push_back({std::string(id_prefix) + "c" + std::to_string(i + 1), texts[i], ClaimOrigin::answer, std::nullopt});
  }
  return out;
}

SpecificDetails extract_details(const AtomicClaim& claim, Provider& chat) {
  if (trim(claim.text).empty()) throw PreconditionError("extract_details: empty claim");
  const std::function<SpecificDetails(const json&)> convert = [](const json& j) {
    if (!j.is_object()) throw ReplyError("expected a JSON object");
    SpecificDetails d;
    for (Dimension dim : kAllDimensions) {
      const std::string key(to_string(dim));
      if (!j.contains(key) || j[key].is_null()) continue;
      if (!j[key].is_string()) throw ReplyError("field '" + key + "' must be a string or null");
      std::string v = trim(j[key].get<std::string>());
      const std::string lower = to_lower(v);
      if (v.empty() || lower == "null" || lower == "none" || lower == "n/a") continue;
      d.get(dim) = std::move(v);
    }
    return d;
  };
  return ask_json(chat, ChatRequest::judge(details_prompt(claim.text)), convert);
}

std::vector<std::size_t> dedup_keep(const std::vector<Embedding>& vectors, double threshold) {
  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    bool duplicate = false;
    for (std::size_t k : kept) {
      if (cosine(vectors[i], vectors[k]) >= threshold) {
        duplicate = true;
        break;
      }
    }
    if (!duplicate) kept.push_back(i);
  }
  return kept;
}

std::vector<AtomicClaim> extract_context_claims(const std::vector<DocumentRecord>& docs, Provider& chat,
                                                Provider& embedder, double threshold) {
  if (docs.empty()) throw PreconditionError("extract_context_claims: no documents");
  const std::function<std::vector<std::string>(const json&)> convert = [](const json& j) { return string_array(j); };

  std::vector<std::vector<std::string>> per_doc(docs.size());
  parallel_for(docs.size(), chat.profile().max_in_flight, [&](std::size_t i) {
    per_doc[i] = ask_json(chat, ChatRequest::judge(context_claims_prompt(docs[i].body)), convert);
  });

  std::vector<AtomicClaim> all;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    for (std::size_t k = 0; k < per_doc[i].size(); ++k) {
      all.push_back({docs[i].doc_id + "#" + std::to_string(k + 1), per_doc[i][k], ClaimOrigin::context, docs[i].doc_id});
    }
  }
  if (all.empty()) return all;

  std::vector<std::string> texts;
  texts.reserve(all.size());
  for (const auto& c : all) texts.push_back(c.text);
  const auto kept = dedup_keep(embedder.embed(texts), threshold);

  std::vector<AtomicClaim> out;
  out.reserve(kept.size());
  for (std::size_t i : kept) out.push_back(std::move(all[i]));
  return out;
}

nlohmann::ordered_json to_json(const AtomicClaim& c) {
  nlohmann::ordered_json j;
  j["claim_id"] = c.claim_id;
  j["text"] = c.text;
  j["origin"] = c.origin == ClaimOrigin::answer ? "answer" : "context";
  j["source_doc_id"] = c.source_doc_id ? nlohmann::ordered_json(*c.source_doc_id) : nlohmann::ordered_json(nullptr);
  return j;
}

AtomicClaim claim_from_json(const json& j) {
  AtomicClaim c;
  c.claim_id = j.at("claim_id").get<std::string>();
  c.text = j.at("text").get<std::string>();
  const std::string origin = j.at("origin").get<std::string>();
  if (origin == "answer") {
    c.origin = ClaimOrigin::answer;
  } else if (origin == "context") {
    c.origin = ClaimOrigin::context;
  } else {
    throw ConfigError("unknown claim origin '" + origin + "'");
  }
  if (j.contains("source_doc_id") && !j["source_doc_id"].is_null()) c.source_doc_id = j["source_doc_id"].get<std::string>();
  if (c.origin == ClaimOrigin::context && !c.source_doc_id) throw ConfigError("context claim without source_doc_id");
  return c;
}

void save_claims(const std::filesystem::path& path, const std::vector<AtomicClaim>& claims) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc | std::ios::binary);
    if (!out) throw Error("cannot write claim cache " + tmp);
    for (const auto& c : claims) out << to_json(c).dump() << '\n';
  }
  std::filesystem::rename(tmp, path);
}

std::optional<std::vector<AtomicClaim>> load_claims(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) return std::nullopt;
  std::vector<AtomicClaim> out;
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    try {
      out.push_back(claim_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw ConfigError("claim cache " + path.string() + ": " + e.what());
    }
  }
  return out;
}

}  // namespace hazeval
