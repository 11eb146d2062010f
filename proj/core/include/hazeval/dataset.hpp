#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "hazeval/answer.hpp"
#include "hazeval/rng.hpp"

namespace hazeval {

enum class HazardKind { cold_wave, heat_wave, coastal_flooding, ice_storm, hurricane, drought, wildfire };
inline constexpr std::array<HazardKind, 7> kAllHazards = {
    HazardKind::cold_wave, HazardKind::heat_wave, HazardKind::coastal_flooding, HazardKind::ice_storm,
    HazardKind::hurricane, HazardKind::drought,   HazardKind::wildfire};

enum class Sector { transportation, water, energy, buildings, communications };
inline constexpr std::array<Sector, 5> kAllSectors = {Sector::transportation, Sector::water, Sector::energy,
                                                      Sector::buildings, Sector::communications};

enum class ConcernKind { fact, recommendation, hybrid };
inline constexpr std::array<ConcernKind, 3> kAllConcerns = {ConcernKind::fact, ConcernKind::recommendation,
                                                            ConcernKind::hybrid};

// "cold wave", "heat wave", ... ; parse throws PreconditionError on anything else.
std::string_view to_string(HazardKind h);
HazardKind parse_hazard(std::string_view s);
std::string_view to_string(Sector s);
Sector parse_sector(std::string_view s);
std::string_view to_string(ConcernKind c);
ConcernKind parse_concern(std::string_view s);
// Reader-facing phrase used when a template asks for [CONCERN].
std::string_view concern_phrase(ConcernKind c);

struct Location {
  std::string county;
  std::string state;  // two uppercase letters

  std::string render() const { return county + ", " + state; }
  friend bool operator==(const Location&, const Location&) = default;
  friend auto operator<=>(const Location&, const Location&) = default;
};

class HazardLocationTable {
 public:
  HazardLocationTable() = default;
  // Validates state codes; every listed hazard needs at least one location.
  explicit HazardLocationTable(std::map<HazardKind, std::vector<Location>> entries);

  static HazardLocationTable from_json(const nlohmann::json& j);
  static HazardLocationTable load(const std::filesystem::path& path);
  // The shipped hazard -> county table.
  static const HazardLocationTable& builtin();

  const std::vector<Location>& locations(HazardKind h) const;
  bool contains(HazardKind h, const Location& loc) const;
  std::vector<HazardKind> hazards() const;
  bool empty() const { return entries_.empty(); }

 private:
  std::map<HazardKind, std::vector<Location>> entries_;
};

struct Profession {
  std::string name;
  Sector sector;
};

class ProfessionRoster {
 public:
  ProfessionRoster() = default;
  explicit ProfessionRoster(std::vector<Profession> professions);

  static ProfessionRoster from_json(const nlohmann::json& j);
  static ProfessionRoster load(const std::filesystem::path& path);
  static const ProfessionRoster& builtin();

  const std::vector<Profession>& all() const { return professions_; }
  std::optional<Sector> sector_of(std::string_view profession) const;
  bool empty() const { return professions_.empty(); }

 private:
  std::vector<Profession> professions_;
};

// Sector -> infrastructure names substituted for [INFRASTRUCTURE].
class InfrastructureCatalog {
 public:
  InfrastructureCatalog() = default;
  explicit InfrastructureCatalog(std::map<Sector, std::vector<std::string>> items);

  static InfrastructureCatalog from_json(const nlohmann::json& j);
  static InfrastructureCatalog load(const std::filesystem::path& path);
  static const InfrastructureCatalog& builtin();

  const std::vector<std::string>& for_sector(Sector s) const;

 private:
  std::map<Sector, std::vector<std::string>> items_;
};

struct QuestionTemplate {
  std::string id;
  ConcernKind concern_kind;
  std::string body;
};

// Checks the placeholder invariants of a template body: at least one
// placeholder, all from the allowed set. Throws ConfigError.
void validate_template(const QuestionTemplate& t);

class TemplateCatalog {
 public:
  TemplateCatalog() = default;
  explicit TemplateCatalog(std::vector<QuestionTemplate> templates);

  static TemplateCatalog from_json(const nlohmann::json& j);
  static TemplateCatalog load(const std::filesystem::path& path);
  static const TemplateCatalog& builtin();

  const QuestionTemplate& by_id(std::string_view id) const;
  std::vector<const QuestionTemplate*> pool(ConcernKind c) const;
  const std::vector<QuestionTemplate>& all() const { return templates_; }

 private:
  std::vector<QuestionTemplate> templates_;
};

inline const std::vector<int> kDefaultTimelines = {5, 10, 20, 30, 50};

struct UserProfile {
  std::string profession;
  Sector sector = Sector::transportation;
  ConcernKind concern_kind = ConcernKind::fact;
  HazardKind hazard = HazardKind::wildfire;
  Location location;
  int timeline_years = 10;

  friend bool operator==(const UserProfile&, const UserProfile&) = default;
};

struct QuestionRecord {
  std::string id;
  UserProfile profile;
  std::string template_id;
  std::string infrastructure;
  std::string question_text;
};

// Hazard first, then a location conditional on it, then profession,
// timeline and concern, each uniform. Same seed, same profile.
UserProfile sample_profile(std::uint64_t rng_seed, const HazardLocationTable& table, const ProfessionRoster& roster,
                           const std::vector<int>& timelines = kDefaultTimelines);
UserProfile sample_profile(Rng& rng, const HazardLocationTable& table, const ProfessionRoster& roster,
                           const std::vector<int>& timelines = kDefaultTimelines);

// Fills every placeholder of `tmpl` from the profile. [LOCATION] renders as
// "County, ST" and [TIMELINE] as "<n> years" (a literal " years" following
// the placeholder is absorbed so "[TIMELINE] years" does not double up).
QuestionRecord instantiate_question(const UserProfile& profile, const QuestionTemplate& tmpl,
                                    std::string_view infrastructure, std::string id = {});

// True when `text` still holds "[" followed by an uppercase placeholder word.
bool has_residual_placeholder(std::string_view text);

// The grounded answer-generation prompt; requires exactly five documents.
std::string build_answer_prompt(const QuestionRecord& question, const std::vector<std::string>& docs,
                                const UserProfile& profile);
std::string render_profile_context(const UserProfile& profile);

struct DatasetTables {
  HazardLocationTable hazards = HazardLocationTable::builtin();
  ProfessionRoster roster = ProfessionRoster::builtin();
  InfrastructureCatalog infrastructure = InfrastructureCatalog::builtin();
  TemplateCatalog templates = TemplateCatalog::builtin();
  std::vector<int> timelines = kDefaultTimelines;
};

// Record i is drawn from its own stream seeded with base_seed + i.
QuestionRecord generate_question(const DatasetTables& tables, std::uint64_t base_seed, std::size_t index);
std::vector<QuestionRecord> generate_questions(const DatasetTables& tables, std::uint64_t base_seed,
                                               std::size_t count);

// One dataset line: question + generated answer + provenance.
struct DatasetRecord {
  QuestionRecord question;
  StructuredAnswer answer;
  std::string generator_model;
};

nlohmann::ordered_json to_json(const DatasetRecord& r);
DatasetRecord dataset_record_from_json(const nlohmann::json& j);
std::vector<DatasetRecord> read_dataset(const std::filesystem::path& path);
void write_dataset(const std::filesystem::path& path, const std::vector<DatasetRecord>& records);

}  // namespace hazeval
