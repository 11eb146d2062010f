#include "hazeval/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include "builtin_data.hpp"
#include "hazeval/error.hpp"
#include "hazeval/text.hpp"

namespace hazeval {

using nlohmann::json;

namespace {

constexpr std::array<std::string_view, 7> kHazardNames = {"cold wave", "heat wave", "coastal flooding", "ice storm",
                                                          "hurricane", "drought",   "wildfire"};
constexpr std::array<std::string_view, 5> kSectorNames = {"transportation", "water", "energy", "buildings",
                                                          "communications"};
constexpr std::array<std::string_view, 3> kConcernNames = {"fact", "recommendation", "hybrid"};

constexpr std::array<std::string_view, 6> kPlaceholders = {"INFRASTRUCTURE", "HAZARD",     "LOCATION",
                                                           "CONCERN",        "PROFESSION", "TIMELINE"};

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("invalid JSON in " + path.string() + ": " + e.what());
  }
}

// Every "[WORD]" token in `body` where WORD is uppercase letters/underscores.
std::vector<std::pair<std::size_t, std::string>> placeholder_tokens(std::string_view body) {
  std::vector<std::pair<std::size_t, std::string>> out;
  for (std::size_t i = 0; i < body.size(); ++i) {
    if (body[i] != '[') continue;
    std::size_t j = i + 1;
    while (j < body.size() && (std::isupper(static_cast<unsigned char>(body[j])) || body[j] == '_')) ++j;
    if (j > i + 1 && j < body.size() && body[j] == ']') {
      out.emplace_back(i, std::string(body.substr(i + 1, j - i - 1)));
    }
  }
  return out;
}

}  // namespace

std::string_view to_string(HazardKind h) { return kHazardNames[static_cast<std::size_t>(h)]; }

HazardKind parse_hazard(std::string_view s) {
  const std::string key = to_lower(trim(s));
  for (std::size_t i = 0; i < kHazardNames.size(); ++i) {
    if (key == kHazardNames[i]) return kAllHazards[i];
  }
  throw PreconditionError("unknown hazard type '" + std::string(s) + "'");
}

std::string_view to_string(Sector s) { return kSectorNames[static_cast<std::size_t>(s)]; }

Sector parse_sector(std::string_view s) {
  const std::string key = to_lower(trim(s));
  for (std::size_t i = 0; i < kSectorNames.size(); ++i) {
    if (key == kSectorNames[i]) return kAllSectors[i];
  }
  throw PreconditionError("unknown sector '" + std::string(s) + "'");
}

std::string_view to_string(ConcernKind c) { return kConcernNames[static_cast<std::size_t>(c)]; }

ConcernKind parse_concern(std::string_view s) {
  const std::string key = to_lower(trim(s));
  for (std::size_t i = 0; i < kConcernNames.size(); ++i) {
    if (key == kConcernNames[i]) return kAllConcerns[i];
  }
  throw PreconditionError("unknown concern kind '" + std::string(s) + "'");
}

std::string_view concern_phrase(ConcernKind c) {
  switch (c) {
    case ConcernKind::fact: return "fact-based";
    case ConcernKind::recommendation: return "recommendation-seeking";
    case ConcernKind::hybrid: return "hybrid";
  }
  return "";
}

// ---------------------------------------------------------------------------
// Tables

HazardLocationTable::HazardLocationTable(std::map<HazardKind, std::vector<Location>> entries)
    : entries_(std::move(entries)) {
  for (const auto& [hazard, locs] : entries_) {
    if (locs.empty()) throw ConfigError("hazard '" + std::string(to_string(hazard)) + "' has no locations");
    for (const Location& loc : locs) {
      const bool ok = loc.state.size() == 2 && std::isupper(static_cast<unsigned char>(loc.state[0])) &&
                      std::isupper(static_cast<unsigned char>(loc.state[1]));
      if (!ok) throw ConfigError("invalid state code '" + loc.state + "' for " + loc.county);
      if (loc.county.empty()) throw ConfigError("empty county name");
    }
  }
}

HazardLocationTable HazardLocationTable::from_json(const json& j) {
  std::map<HazardKind, std::vector<Location>> entries;
  try {
    for (const json& h : j.at("hazards")) {
      auto& locs = entries[parse_hazard(h.at("hazard").get<std::string>())];
      for (const json& l : h.at("locations")) {
        locs.push_back({l.at("county").get<std::string>(), l.at("state").get<std::string>()});
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("hazard table: ") + e.what());
  } catch (const PreconditionError& e) {
    throw ConfigError(std::string("hazard table: ") + e.what());
  }
  return HazardLocationTable(std::move(entries));
}

HazardLocationTable HazardLocationTable::load(const std::filesystem::path& path) {
  return from_json(read_json_file(path));
}

const HazardLocationTable& HazardLocationTable::builtin() {
  static const HazardLocationTable table = from_json(json::parse(detail::builtin_hazard_locations_json()));
  return table;
}

const std::vector<Location>& HazardLocationTable::locations(HazardKind h) const {
  auto it = entries_.find(h);
  if (it == entries_.end()) throw ConfigError("hazard '" + std::string(to_string(h)) + "' not in table");
  return it->second;
}

bool HazardLocationTable::contains(HazardKind h, const Location& loc) const {
  auto it = entries_.find(h);
  if (it == entries_.end()) return false;
  return std::find(it->second.begin(), it->second.end(), loc) != it->second.end();
}

std::vector<HazardKind> HazardLocationTable::hazards() const {
  std::vector<HazardKind> out;
  for (const auto& [h, _] : entries_) out.push_back(h);
  return out;
}

ProfessionRoster::ProfessionRoster(std::vector<Profession> professions) : professions_(std::move(professions)) {
  std::set<std::string> seen;
  for (const auto& p : professions_) {
    if (p.name.empty()) throw ConfigError("empty profession name");
    if (!seen.insert(p.name).second) throw ConfigError("duplicate profession '" + p.name + "'");
  }
}

ProfessionRoster ProfessionRoster::from_json(const json& j) {
  std::vector<Profession> out;
  try {
    for (const json& s : j.at("sectors")) {
      const Sector sector = parse_sector(s.at("sector").get<std::string>());
      for (const json& p : s.at("professions")) out.push_back({p.get<std::string>(), sector});
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("profession roster: ") + e.what());
  } catch (const PreconditionError& e) {
    throw ConfigError(std::string("profession roster: ") + e.what());
  }
  return ProfessionRoster(std::move(out));
}

ProfessionRoster ProfessionRoster::load(const std::filesystem::path& path) { return from_json(read_json_file(path)); }

const ProfessionRoster& ProfessionRoster::builtin() {
  static const ProfessionRoster roster = from_json(json::parse(detail::builtin_professions_json()));
  return roster;
}

std::optional<Sector> ProfessionRoster::sector_of(std::string_view profession) const {
  for (const auto& p : professions_) {
    if (p.name == profession) return p.sector;
  }
  return std::nullopt;
}

InfrastructureCatalog::InfrastructureCatalog(std::map<Sector, std::vector<std::string>> items)
    : items_(std::move(items)) {
  for (const auto& [sector, names] : items_) {
    if (names.empty()) throw ConfigError("no infrastructure for sector " + std::string(to_string(sector)));
  }
}

InfrastructureCatalog InfrastructureCatalog::from_json(const json& j) {
  std::map<Sector, std::vector<std::string>> items;
  try {
    for (const json& s : j.at("sectors")) {
      items[parse_sector(s.at("sector").get<std::string>())] = s.at("infrastructure").get<std::vector<std::string>>();
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("infrastructure catalog: ") + e.what());
  } catch (const PreconditionError& e) {
    throw ConfigError(std::string("infrastructure catalog: ") + e.what());
  }
  return InfrastructureCatalog(std::move(items));
}

InfrastructureCatalog InfrastructureCatalog::load(const std::filesystem::path& path) {
  return from_json(read_json_file(path));
}

const InfrastructureCatalog& InfrastructureCatalog::builtin() {
  static const InfrastructureCatalog catalog = from_json(json::parse(detail::builtin_infrastructure_json()));
  return catalog;
}

const std::vector<std::string>& InfrastructureCatalog::for_sector(Sector s) const {
  auto it = items_.find(s);
  if (it == items_.end()) throw ConfigError("no infrastructure for sector " + std::string(to_string(s)));
  return it->second;
}

void validate_template(const QuestionTemplate& t) {
  const auto tokens = placeholder_tokens(t.body);
  if (tokens.empty()) throw ConfigError("template " + t.id + " has no placeholder");
  for (const auto& [_, name] : tokens) {
    if (std::find(kPlaceholders.begin(), kPlaceholders.end(), name) == kPlaceholders.end()) {
      throw ConfigError("template " + t.id + " uses unknown placeholder [" + name + "]");
    }
  }
}

TemplateCatalog::TemplateCatalog(std::vector<QuestionTemplate> templates) : templates_(std::move(templates)) {
  std::set<std::string> ids;
  for (const auto& t : templates_) {
    validate_template(t);
    if (!ids.insert(t.id).second) throw ConfigError("duplicate template id " + t.id);
  }
}

TemplateCatalog TemplateCatalog::from_json(const json& j) {
  std::vector<QuestionTemplate> out;
  try {
    for (const json& t : j.at("templates")) {
      out.push_back({t.at("id").get<std::string>(), parse_concern(t.at("concern_kind").get<std::string>()),
                     t.at("body").get<std::string>()});
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("template catalog: ") + e.what());
  } catch (const PreconditionError& e) {
    throw ConfigError(std::string("template catalog: ") + e.what());
  }
  return TemplateCatalog(std::move(out));
}

TemplateCatalog TemplateCatalog::load(const std::filesystem::path& path) { return from_json(read_json_file(path)); }

const TemplateCatalog& TemplateCatalog::builtin() {
  static const TemplateCatalog catalog = from_json(json::parse(detail::builtin_templates_json()));
  return catalog;
}

const QuestionTemplate& TemplateCatalog::by_id(std::string_view id) const {
  for (const auto& t : templates_) {
    if (t.id == id) return t;
  }
  throw ConfigError("unknown template id '" + std::string(id) + "'");
}

std::vector<const QuestionTemplate*> TemplateCatalog::pool(ConcernKind c) const {
  std::vector<const QuestionTemplate*> out;
  for (const auto& t : templates_) {
    if (t.concern_kind == c) out.push_back(&t);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Sampling and instantiation

UserProfile sample_profile(Rng& rng, const HazardLocationTable& table, const ProfessionRoster& roster,
                           const std::vector<int>& timelines) {
  if (table.empty()) throw ConfigError("hazard-location table is empty");
  if (roster.empty()) throw ConfigError("profession roster is empty");
  if (timelines.empty()) throw ConfigError("timeline set is empty");

  UserProfile p;
  const auto hazards = table.hazards();
  p.hazard = pick(rng, hazards);
  p.location = pick(rng, table.locations(p.hazard));
  const Profession& prof = pick(rng, roster.all());
  p.profession = prof.name;
  p.sector = prof.sector;
  p.timeline_years = pick(rng, timelines);
  p.concern_kind = kAllConcerns[uniform_index(rng, kAllConcerns.size())];
  return p;
}

UserProfile sample_profile(std::uint64_t rng_seed, const HazardLocationTable& table, const ProfessionRoster& roster,
                           const std::vector<int>& timelines) {
  Rng rng(rng_seed);
  return sample_profile(rng, table, roster, timelines);
}

QuestionRecord instantiate_question(const UserProfile& profile, const QuestionTemplate& tmpl,
                                    std::string_view infrastructure, std::string id) {
  if (tmpl.concern_kind != profile.concern_kind) {
    throw PreconditionError("template " + tmpl.id + " is for concern '" + std::string(to_string(tmpl.concern_kind)) +
                            "' but profile concern is '" + std::string(to_string(profile.concern_kind)) + "'");
  }
  const std::string timeline = std::to_string(profile.timeline_years) + " years";
  std::string out;
  const std::string_view body = tmpl.body;
  std::size_t cursor = 0;
  for (const auto& [pos, name] : placeholder_tokens(body)) {
    if (pos < cursor) continue;
    out.append(body.substr(cursor, pos - cursor));
    cursor = pos + name.size() + 2;
    if (name == "INFRASTRUCTURE") {
      out.append(infrastructure);
    } else if (name == "HAZARD") {
      out.append(to_string(profile.hazard));
    } else if (name == "LOCATION") {
      out.append(profile.location.render());
    } else if (name == "CONCERN") {
      out.append(concern_phrase(profile.concern_kind));
    } else if (name == "PROFESSION") {
      out.append(profile.profession);
    } else if (name == "TIMELINE") {
      out.append(timeline);
      if (body.substr(cursor).starts_with(" years")) cursor += 6;
    } else {
      throw PreconditionError("unknown placeholder [" + name + "] in template " + tmpl.id);
    }
  }
  out.append(body.substr(cursor));

  QuestionRecord r;
  r.id = std::move(id);
  r.profile = profile;
  r.template_id = tmpl.id;
  r.infrastructure = std::string(infrastructure);
  r.question_text = std::move(out);
  return r;
}

bool has_residual_placeholder(std::string_view text) {
  for (std::size_t i = 0; i + 1 < text.size(); ++i) {
    if (text[i] == '[' && std::isupper(static_cast<unsigned char>(text[i + 1]))) return true;
  }
  return false;
}

std::string render_profile_context(const UserProfile& p) {
  std::ostringstream os;
  os << "Profession: " << p.profession << "; Sector: " << to_string(p.sector)
     << "; Concern: " << concern_phrase(p.concern_kind) << "; Hazard: " << to_string(p.hazard)
     << "; Location: " << p.location.render() << "; Timeline: " << p.timeline_years << " years";
  return os.str();
}

std::string build_answer_prompt(const QuestionRecord& question, const std::vector<std::string>& docs,
                                const UserProfile& profile) {
  if (docs.size() != 5) {
    throw PreconditionError("answer prompt needs exactly 5 documents, got " + std::to_string(docs.size()));
  }
  if (trim(question.question_text).empty()) throw PreconditionError("answer prompt: empty question");

  std::string p;
  p += "You are tasked with writing a recommendation/fact-based answer that answers the user’s question based on "
       "a provided list of research abstracts and contextual information. Your response must:\n\n";
  p += "1. Directly address the user's concern, ensuring the answer is supported by the provided literature.\n\n";
  p += "2. Incorporate the user's profile like timeline, professional background, Location, and concerns into the "
       "recommendations.\n\n";
  p += "3. Clearly connect insights from the abstracts to the user's specific context and goals.\n\n";
  p += "4. Make sure to output in points (1,2,3..) without inserting any **.\n\n";
  p += "5. End your response with a confidence score (in percentage) and a short explanation for that score.\n\n";
  p += "Here are the 5 research abstracts:\n\n";
  for (std::size_t i = 0; i < docs.size(); ++i) {
    p += std::to_string(i + 1) + ". " + docs[i] + "\n";
  }
  p += "\nContext: " + render_profile_context(profile) + "\n";
  p += "Question: " + question.question_text + "\n\n";
  p += "Based on the above abstracts, write the answer in points. Make sure to take into account all the information "
       "in the context like profession, timeline, etc. Do not include subpoints.";
  return p;
}

QuestionRecord generate_question(const DatasetTables& tables, std::uint64_t base_seed, std::size_t index) {
  Rng rng(base_seed + index);
  const UserProfile profile = sample_profile(rng, tables.hazards, tables.roster, tables.timelines);
  const auto pool = tables.templates.pool(profile.concern_kind);
  if (pool.empty()) throw ConfigError("no templates for concern " + std::string(to_string(profile.concern_kind)));
  const QuestionTemplate& tmpl = *pool[uniform_index(rng, pool.size())];
  const std::string& infra = pick(rng, tables.infrastructure.for_sector(profile.sector));
  return instantiate_question(profile, tmpl, infra, "Q" + std::to_string(index + 1));
}

std::vector<QuestionRecord> generate_questions(const DatasetTables& tables, std::uint64_t base_seed,
                                               std::size_t count) {
  std::vector<QuestionRecord> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(generate_question(tables, base_seed, i));
  return out;
}

// ---------------------------------------------------------------------------
// Dataset file

nlohmann::ordered_json to_json(const DatasetRecord& r) {
  const auto& q = r.question;
  nlohmann::ordered_json j;
  j["id"] = q.id;
  j["profession"] = q.profile.profession;
  j["sector"] = to_string(q.profile.sector);
  j["concern_kind"] = to_string(q.profile.concern_kind);
  j["hazard"] = to_string(q.profile.hazard);
  j["county"] = q.profile.location.county;
  j["state"] = q.profile.location.state;
  j["timeline_years"] = q.profile.timeline_years;
  j["infrastructure"] = q.infrastructure;
  j["template_id"] = q.template_id;
  j["question"] = q.question_text;
  j["answer_intro"] = r.answer.intro;
  j["answer_segments"] = r.answer.segments;
  j["retrieved_doc_ids"] = r.answer.retrieved_doc_ids;
  j["generator_model"] = r.generator_model;
  return j;
}

DatasetRecord dataset_record_from_json(const json& j) {
  DatasetRecord r;
  try {
    auto& q = r.question;
    q.id = j.at("id").get<std::string>();
    q.profile.profession = j.at("profession").get<std::string>();
    q.profile.sector = parse_sector(j.at("sector").get<std::string>());
    q.profile.concern_kind = parse_concern(j.at("concern_kind").get<std::string>());
    q.profile.hazard = parse_hazard(j.at("hazard").get<std::string>());
    q.profile.location = {j.at("county").get<std::string>(), j.at("state").get<std::string>()};
    q.profile.timeline_years = j.at("timeline_years").get<int>();
    q.infrastructure = j.at("infrastructure").get<std::string>();
    q.template_id = j.at("template_id").get<std::string>();
    q.question_text = j.at("question").get<std::string>();
    r.answer.intro = j.at("answer_intro").get<std::string>();
    r.answer.segments = j.at("answer_segments").get<std::vector<std::string>>();
    r.answer.retrieved_doc_ids = j.at("retrieved_doc_ids").get<std::vector<std::string>>();
    r.generator_model = j.at("generator_model").get<std::string>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("dataset record: ") + e.what());
  }
  return r;
}

std::vector<DatasetRecord> read_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open dataset " + path.string());
  std::vector<DatasetRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    try {
      out.push_back(dataset_record_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw ConfigError("dataset " + path.string() + ": " + e.what());
    }
  }
  return out;
}

void write_dataset(const std::filesystem::path& path, const std::vector<DatasetRecord>& records) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write dataset " + path.string());
    for (const auto& r : records) out << to_json(r).dump() << '\n';
    if (!out) throw Error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace hazeval
