#include "hazeval/pipeline.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>

#include "hazeval/claims.hpp"
#include "hazeval/error.hpp"
#include "hazeval/parallel.hpp"
#include "hazeval/readability.hpp"
#include "hazeval/response_cache.hpp"
#include "hazeval/text.hpp"

namespace hazeval {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

double round_report(double v) {
  static const double scale = std::pow(10.0, kReportDecimals);
  const double r = std::round(v * scale) / scale;
  return r == 0.0 ? 0.0 : r;  // no "-0.0" in reports
}

namespace {

ordered_json num(double v) { return round_report(v); }
ordered_json opt(const std::optional<double>& v) { return v ? num(*v) : ordered_json(nullptr); }

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

template <class T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key) || j[key].is_null()) return fallback;
  try {
    return j[key].get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config field '") + key + "': " + e.what());
  }
}

void reject_unknown(const json& j, std::initializer_list<std::string_view> known, const std::string& where) {
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (auto k : known) ok = ok || key == k;
    if (!ok) throw ConfigError("unknown config key '" + key + "' in " + where);
  }
}

void atomic_write(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out << content;
    if (!out) throw Error("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

}  // namespace

RunConfig RunConfig::from_json(const json& j, const fs::path& base_dir) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  reject_unknown(j,
                 {"dataset", "corpus", "providers", "roles", "metrics", "k_judges", "n_inverse_questions",
                  "retrieval_k", "relevance_mode", "confidence_method", "robustness_kinds", "weights", "parallelism",
                  "cache_dir", "outputs"},
                 "config");
  RunConfig c;

  const json ds = j.value("dataset", json::object());
  reject_unknown(ds, {"count", "seed", "tables", "timelines"}, "dataset");
  c.dataset.count = get_or<std::size_t>(ds, "count", 10);
  c.dataset.seed = get_or<std::uint64_t>(ds, "seed", 0);
  c.dataset.timelines = get_or<std::vector<int>>(ds, "timelines", kDefaultTimelines);
  if (ds.contains("tables")) {
    const json& t = ds["tables"];
    reject_unknown(t, {"hazard_locations", "professions", "infrastructure", "templates"}, "dataset.tables");
    auto table = [&](const char* key) -> std::optional<fs::path> {
      if (!t.contains(key)) return std::nullopt;
      return resolve(base_dir, get_or<std::string>(t, key, ""));
    };
    c.dataset.hazard_locations = table("hazard_locations");
    c.dataset.professions = table("professions");
    c.dataset.infrastructure = table("infrastructure");
    c.dataset.templates = table("templates");
  }

  if (!j.contains("corpus")) throw ConfigError("config needs a 'corpus' path");
  c.corpus = resolve(base_dir, get_or<std::string>(j, "corpus", ""));
  c.providers = j.value("providers", json::object());

  const json roles = j.value("roles", json::object());
  reject_unknown(roles, {"generator", "embedder", "evaluator", "judges", "reranker", "scorer"}, "roles");
  c.roles.generator = get_or<std::string>(roles, "generator", "");
  c.roles.embedder = get_or<std::string>(roles, "embedder", "");
  c.roles.evaluator = get_or<std::string>(roles, "evaluator", c.roles.generator);
  if (roles.contains("judges") && roles["judges"].is_string()) {
    c.roles.judges = {roles["judges"].get<std::string>()};
  } else {
    c.roles.judges = get_or<std::vector<std::string>>(roles, "judges", {c.roles.evaluator});
  }
  c.roles.reranker = get_or<std::string>(roles, "reranker", "");
  c.roles.scorer = get_or<std::string>(roles, "scorer", "");

  const json metrics = j.value("metrics", json::object());
  reject_unknown(metrics, {"specificity", "robustness", "relevance", "cu", "readability"}, "metrics");
  c.metrics.specificity = get_or<bool>(metrics, "specificity", true);
  c.metrics.robustness = get_or<bool>(metrics, "robustness", true);
  c.metrics.relevance = get_or<bool>(metrics, "relevance", true);
  c.metrics.cu = get_or<bool>(metrics, "cu", true);
  c.metrics.readability = get_or<bool>(metrics, "readability", true);

  c.k_judges = get_or<std::size_t>(j, "k_judges", 3);
  c.n_inverse_questions = get_or<std::size_t>(j, "n_inverse_questions", kDefaultInverseQuestions);
  c.retrieval_k = get_or<std::size_t>(j, "retrieval_k", 5);
  c.relevance_mode = parse_relevance_mode(get_or<std::string>(j, "relevance_mode", "masked"));
  c.confidence_method = parse_confidence_method(get_or<std::string>(j, "confidence_method", "geometric_mean"));
  if (j.contains("robustness_kinds")) {
    c.robustness_kinds.clear();
    for (const auto& k : get_or<std::vector<std::string>>(j, "robustness_kinds", {})) {
      c.robustness_kinds.push_back(parse_variant_kind(k));
    }
  }
  if (j.contains("weights")) c.weights = SpecificityWeights::from_json(j["weights"]);
  c.parallelism = get_or<std::size_t>(j, "parallelism", 4);
  if (j.contains("cache_dir") && !j["cache_dir"].is_null()) {
    c.cache_dir = resolve(base_dir, get_or<std::string>(j, "cache_dir", ""));
  }

  const json out = j.value("outputs", json::object());
  reject_unknown(out, {"dir", "dataset", "rows", "aggregate", "artifacts", "csv", "claims_dir"}, "outputs");
  const fs::path dir = resolve(base_dir, get_or<std::string>(out, "dir", "out"));
  auto output = [&](const char* key, const char* fallback) {
    return out.contains(key) ? resolve(base_dir, get_or<std::string>(out, key, "")) : dir / fallback;
  };
  c.outputs.dataset = output("dataset", "dataset.jsonl");
  c.outputs.rows = output("rows", "rows.jsonl");
  c.outputs.aggregate = output("aggregate", "aggregate.json");
  c.outputs.artifacts = output("artifacts", "artifacts.jsonl");
  if (out.contains("csv")) c.outputs.csv = output("csv", "report.csv");
  if (out.contains("claims_dir")) c.outputs.claims_dir = output("claims_dir", "claims");

  c.validate();
  return c;
}

RunConfig RunConfig::load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  return from_json(j, fs::absolute(path).parent_path());
}

void RunConfig::validate() const {
  if (retrieval_k != 5) throw ConfigError("retrieval_k must be 5: the answer prompt is built from five abstracts");
  if (parallelism < 1) throw ConfigError("parallelism must be >= 1");
  if (k_judges < 1) throw ConfigError("k_judges must be >= 1");
  if (n_inverse_questions < 1) throw ConfigError("n_inverse_questions must be >= 1");
  if (dataset.timelines.empty()) throw ConfigError("dataset.timelines must not be empty");
  weights.validate();
  if (!providers.is_object()) throw ConfigError("providers must be an object");

  auto require = [&](const std::string& role, const std::string& name, Capability cap) {
    if (name.empty()) throw ConfigError("role '" + role + "' is not assigned");
    if (!providers.contains(name)) throw ConfigError("role '" + role + "' names unknown provider '" + name + "'");
    const ProviderProfile p = profile_from_json(name, providers[name]);
    if (!p.has(cap)) {
      throw ConfigError("provider '" + name + "' (role " + role + ") lacks capability " + std::string(to_string(cap)));
    }
  };
  require("generator", roles.generator, Capability::chat);
  require("embedder", roles.embedder, Capability::embed);
  if (metrics.any_model_metric()) require("evaluator", roles.evaluator, Capability::chat);
  if (metrics.specificity) {
    if (roles.judges.empty()) throw ConfigError("role 'judges' is empty");
    if (roles.judges.size() != 1 && roles.judges.size() != k_judges) {
      throw ConfigError("roles.judges must name one provider or exactly k_judges providers");
    }
    for (const auto& name : roles.judges) require("judges", name, Capability::chat);
  }
  if (metrics.relevance) require("reranker", roles.reranker, Capability::rerank);
  if (metrics.cu) require("scorer", roles.scorer, Capability::score);
}

Pipeline::Pipeline(RunConfig config) : config_(std::move(config)) {
  config_.validate();
  if (config_.dataset.hazard_locations) tables_.hazards = HazardLocationTable::load(*config_.dataset.hazard_locations);
  if (config_.dataset.professions) tables_.roster = ProfessionRoster::load(*config_.dataset.professions);
  if (config_.dataset.infrastructure) tables_.infrastructure = InfrastructureCatalog::load(*config_.dataset.infrastructure);
  if (config_.dataset.templates) tables_.templates = TemplateCatalog::load(*config_.dataset.templates);
  tables_.timelines = config_.dataset.timelines;

  std::shared_ptr<ResponseCache> cache;
  if (config_.cache_dir) cache = std::make_shared<ResponseCache>(*config_.cache_dir);
  registry_ = ProviderRegistry::from_json(config_.providers, cache);

  if (config_.metrics.specificity) {
    if (config_.roles.judges.size() == 1) {
      judges_ = resampled_judges(*registry_.get(config_.roles.judges.front()), static_cast<int>(config_.k_judges));
    } else {
      for (std::size_t i = 0; i < config_.roles.judges.size(); ++i) {
        const auto& name = config_.roles.judges[i];
        judges_.push_back({registry_.get(name).get(), name + "#" + std::to_string(i), static_cast<int>(i)});
      }
    }
  }
}

Pipeline::~Pipeline() = default;

const CorpusIndex& Pipeline::index() {
  if (!index_) {
    const auto docs = read_corpus(config_.corpus);
    if (docs.size() < config_.retrieval_k) {
      throw ConfigError("corpus has " + std::to_string(docs.size()) + " documents, fewer than retrieval_k");
    }
    index_ = std::make_unique<CorpusIndex>(build_index(docs, *registry_.get(config_.roles.embedder)));
  }
  return *index_;
}

StructuredAnswer Pipeline::answer(const QuestionRecord& question) {
  Provider& embedder = *registry_.get(config_.roles.embedder);
  const auto hits = index().retrieve(embedder.embed_one(question.question_text), config_.retrieval_k);
  std::vector<std::string> docs;
  std::vector<std::string> ids;
  for (const auto& h : hits) {
    docs.push_back(index().find(h.doc_id)->body);
    ids.push_back(h.doc_id);
  }
  const std::string reply =
      registry_.get(config_.roles.generator)->chat(ChatRequest::user(build_answer_prompt(question, docs, question.profile)));
  StructuredAnswer a = parse_answer(reply);
  a.retrieved_doc_ids = std::move(ids);
  return a;
}

std::vector<DatasetRecord> Pipeline::generate() {
  index();
  const auto questions = generate_questions(tables_, config_.dataset.seed, config_.dataset.count);
  const std::string model = registry_.get(config_.roles.generator)->model_id();
  std::vector<DatasetRecord> out(questions.size());
  parallel_for(questions.size(), config_.parallelism, [&](std::size_t i) {
    out[i] = {questions[i], answer(questions[i]), model};
  });
  return out;
}

std::vector<std::string> Pipeline::evidence_for(const StructuredAnswer& a) const {
  std::vector<std::string> out;
  for (const auto& id : a.retrieved_doc_ids) {
    const DocumentRecord* d = index_->find(id);
    if (d == nullptr) throw PreconditionError("retrieved document '" + id + "' is not in the corpus");
    out.push_back(d->body);
  }
  if (out.empty()) throw PreconditionError("answer has no retrieved documents");
  return out;
}

namespace {

std::vector<AtomicClaim> cached_claims(const std::optional<fs::path>& dir, const std::string& file,
                                       const std::function<std::vector<AtomicClaim>()>& make) {
  if (dir) {
    if (auto hit = load_claims(*dir / file)) return *hit;
  }
  auto claims = make();
  if (dir) save_claims(*dir / file, claims);
  return claims;
}

std::string safe_name(const std::string& id) {
  std::string s = id;
  for (char& ch : s) {
    if (!std::isalnum(static_cast<unsigned char>(ch)) && ch != '-' && ch != '_' && ch != '.') ch = '_';
  }
  return s;
}

}  // namespace

ordered_json Pipeline::evaluate_one(const DatasetRecord& record, std::size_t position, ordered_json& artifacts) {
  const QuestionRecord& q = record.question;
  const StructuredAnswer& a = record.answer;
  Provider& embedder = *registry_.get(config_.roles.embedder);
  const std::size_t par = config_.parallelism;
  std::vector<RowError> errors;

  ordered_json row;
  row["id"] = q.id;
  row["generator"] = record.generator_model;
  row["evaluator"] = config_.metrics.any_model_metric() ? registry_.get(config_.roles.evaluator)->model_id() : "";
  row["hazard"] = to_string(q.profile.hazard);
  row["concern_kind"] = to_string(q.profile.concern_kind);
  artifacts["id"] = q.id;

  auto guarded = [&](const char* metric, auto&& body) {
    try {
      body();
    } catch (const std::exception& e) {
      row[metric] = nullptr;
      errors.push_back({metric, e.what()});
    }
  };

  if (config_.metrics.specificity) {
    guarded("specificity", [&] {
      Provider& evaluator = *registry_.get(config_.roles.evaluator);
      const auto claims = cached_claims(config_.outputs.claims_dir, safe_name(q.id) + ".answer.jsonl",
                                        [&] { return decompose_answer(a, evaluator, q.id + ":"); });
      const SpecificityReport rep = score_claims(claims, evidence_for(a), evaluator, judges_, config_.weights, par);
      ordered_json s;
      s["score"] = opt(rep.score);
      for (Dimension d : kAllDimensions) s[std::string(to_string(d))] = opt(rep.averages[static_cast<std::size_t>(d)]);
      s["n_claims"] = rep.claims.size();
      row["specificity"] = std::move(s);
      artifacts["specificity"] = rep.to_json();
    });
  }

  if (config_.metrics.relevance) {
    guarded("relevance", [&] {
      Provider& evaluator = *registry_.get(config_.roles.evaluator);
      const RelevanceReport rel = masked_relevance(q.question_text, a, config_.n_inverse_questions, evaluator, embedder,
                                                   config_.relevance_mode);
      ordered_json r;
      r["mode"] = to_string(rel.mode);
      r["relevance"] = num(rel.relevance);
      ordered_json art;
      art["masked"] = rel.to_json();
      if (!a.segments.empty()) {
        const auto attributions = loo_attribution(q.question_text, a, *registry_.get(config_.roles.reranker), par);
        const RerankedAnswer re = rerank_answer(a, attributions);
        r["full_rerank_score"] = num(attributions.front().full_score);
        r["segment_deltas"] = ordered_json::array();
        for (const auto& at : attributions) r["segment_deltas"].push_back(num(at.delta));
        r["order"] = ordered_json::array();
        for (std::size_t i : re.order) r["order"].push_back(i + 1);
        r["changed"] = re.changed;
        std::vector<std::string> reordered;
        for (std::size_t i : re.order) reordered.push_back(a.segments[i]);
        art["reranked_answer"] = render_answer(a.intro, reordered);
      } else {
        r["full_rerank_score"] = nullptr;
        r["segment_deltas"] = ordered_json::array();
        r["order"] = ordered_json::array();
        r["changed"] = false;
      }
      row["relevance"] = std::move(r);
      artifacts["relevance"] = std::move(art);
    });
  }

  if (config_.metrics.robustness) {
    guarded("robustness", [&] {
      Provider& evaluator = *registry_.get(config_.roles.evaluator);
      RobustnessOptions opts{fnv1a(q.id, config_.dataset.seed), par};
      const auto records = run_robustness(q, a, config_.robustness_kinds, tables_, evaluator, embedder,
                                          [this](const QuestionRecord& v) { return answer(v); }, opts);
      const RobustnessSummary sum = summarize_robustness(records);
      ordered_json r;
      r["paraphrase"] = opt(sum.paraphrase);
      r["perturbation"] = opt(sum.perturbation);
      for (const auto& rec : records) r[std::string(to_string(rec.kind))] = num(rec.consistency);
      row["robustness"] = std::move(r);
      artifacts["robustness"] = ordered_json::array();
      for (const auto& rec : records) artifacts["robustness"].push_back(to_json(rec));
    });
  }

  if (config_.metrics.cu) {
    guarded("context_utilization", [&] {
      Provider& evaluator = *registry_.get(config_.roles.evaluator);
      std::vector<DocumentRecord> docs;
      for (const auto& id : a.retrieved_doc_ids) {
        const DocumentRecord* d = index_->find(id);
        if (d == nullptr) throw PreconditionError("retrieved document '" + id + "' is not in the corpus");
        docs.push_back(*d);
      }
      const auto claims = cached_claims(config_.outputs.claims_dir, safe_name(q.id) + ".context.jsonl",
                                        [&] { return extract_context_claims(docs, evaluator, embedder); });
      const CuReport cu = cu_scores(answer_text(a), q.question_text, claims, *registry_.get(config_.roles.scorer),
                                    config_.confidence_method, par);
      ordered_json r;
      r["method"] = to_string(cu.method);
      r["baseline"] = num(cu.baseline_confidence);
      r["cu"] = num(cu.cu);
      r["cu_rel"] = opt(cu.cu_rel);
      r["cu_rel_percent"] = opt(cu.cu_rel_percent());
      r["min_delta"] = num(cu.min_delta);
      r["max_delta"] = num(cu.max_delta);
      r["mean_delta"] = num(cu.cu);
      r["n_claims"] = claims.size();
      row["context_utilization"] = std::move(r);
      ordered_json art = cu.to_json();
      art["claims"] = ordered_json::array();
      for (const auto& c : claims) art["claims"].push_back(to_json(c));
      artifacts["context_utilization"] = std::move(art);
    });
  }

  if (config_.metrics.readability) {
    guarded("readability", [&] {
      const ReadabilityReport rd = readability(answer_text(a));
      row["readability"] = {{"fre", num(rd.fre)},
                            {"fkgl", num(rd.fkgl)},
                            {"fre_band", rd.fre_band},
                            {"fkgl_band", rd.fkgl_band}};
    });
  }

  (void)position;
  row["errors"] = ordered_json::array();
  for (const auto& e : errors) row["errors"].push_back({{"metric", e.metric}, {"message", e.message}});
  return row;
}

EvaluationResult Pipeline::evaluate(const std::vector<DatasetRecord>& records) {
  // The index is built up front so workers only ever read it.
  index();
  EvaluationResult result;
  result.rows.resize(records.size());
  result.artifacts.resize(records.size());
  parallel_for(records.size(), config_.parallelism, [&](std::size_t i) {
    result.rows[i] = evaluate_one(records[i], i, result.artifacts[i]);
  });
  for (const auto& r : result.rows) result.rows_with_errors += r["errors"].empty() ? 0 : 1;
  result.aggregate = aggregate_report(result.rows);
  return result;
}

namespace {

struct MetricPath {
  const char* name;
  const char* section;
  const char* field;
};

constexpr MetricPath kMetricPaths[] = {
    {"specificity", "specificity", "score"},
    {"specificity_hazard", "specificity", "hazard"},
    {"specificity_location", "specificity", "location"},
    {"specificity_timeline", "specificity", "timeline"},
    {"specificity_intensity", "specificity", "intensity"},
    {"relevance", "relevance", "relevance"},
    {"rerank_score", "relevance", "full_rerank_score"},
    {"robustness_paraphrase", "robustness", "paraphrase"},
    {"robustness_perturbation", "robustness", "perturbation"},
    {"cu", "context_utilization", "cu"},
    {"cu_rel", "context_utilization", "cu_rel"},
    {"cu_rel_percent", "context_utilization", "cu_rel_percent"},
    {"fre", "readability", "fre"},
    {"fkgl", "readability", "fkgl"},
};

bool section_errored(const ordered_json& row, const char* section) {
  if (!row.contains("errors")) return false;
  for (const auto& e : row["errors"]) {
    if (e.value("metric", "") == section) return true;
  }
  return false;
}

}  // namespace

ordered_json aggregate_report(const std::vector<ordered_json>& rows) {
  if (rows.empty()) throw PreconditionError("aggregate_report: no rows");
  ordered_json agg;
  std::set<std::string> generators;
  std::set<std::string> evaluators;
  std::size_t with_errors = 0;
  for (const auto& r : rows) {
    generators.insert(r.value("generator", ""));
    evaluators.insert(r.value("evaluator", ""));
    if (r.contains("errors") && !r["errors"].empty()) ++with_errors;
  }
  agg["generator"] = join(std::vector<std::string>(generators.begin(), generators.end()), ",");
  agg["evaluator"] = join(std::vector<std::string>(evaluators.begin(), evaluators.end()), ",");
  agg["rows"] = rows.size();
  agg["rows_with_errors"] = with_errors;

  ordered_json metrics = ordered_json::object();
  for (const auto& mp : kMetricPaths) {
    std::vector<double> values;
    std::size_t nulls = 0;
    std::size_t errors = 0;
    bool present = false;
    for (const auto& r : rows) {
      if (!r.contains(mp.section)) continue;
      present = true;
      const auto& sec = r[mp.section];
      if (sec.is_null()) {
        if (section_errored(r, mp.section)) {
          ++errors;
        } else {
          ++nulls;
        }
        continue;
      }
      if (!sec.contains(mp.field) || sec[mp.field].is_null()) {
        ++nulls;
        continue;
      }
      values.push_back(sec[mp.field].get<double>());
    }
    if (!present) continue;
    ordered_json m;
    m["n"] = values.size();
    if (!values.empty()) {
      double mean = 0.0;
      for (double v : values) mean += v;
      mean /= static_cast<double>(values.size());
      double ss = 0.0;
      for (double v : values) ss += (v - mean) * (v - mean);
      const double sd = values.size() > 1 ? std::sqrt(ss / static_cast<double>(values.size() - 1)) : 0.0;
      m["mean"] = round_report(mean);
      m["std"] = round_report(sd);
      m["single_value"] = values.size() == 1;
    }
    m["nulls"] = nulls;
    m["errors"] = errors;
    metrics[mp.name] = std::move(m);
  }
  agg["metrics"] = std::move(metrics);

  std::map<std::string, std::size_t> changed;
  std::map<std::string, std::size_t> fre_counts;
  std::map<std::string, std::size_t> fkgl_counts;
  bool any_relevance = false;
  bool any_readability = false;
  for (const auto& r : rows) {
    if (r.contains("relevance") && r["relevance"].is_object() && r["relevance"].contains("changed") &&
        !r["relevance"]["segment_deltas"].empty()) {
      any_relevance = true;
      ++changed[r["relevance"]["changed"].get<bool>() ? "yes" : "no"];
    }
    if (r.contains("readability") && r["readability"].is_object()) {
      any_readability = true;
      ++fre_counts[r["readability"]["fre_band"].get<std::string>()];
      ++fkgl_counts[r["readability"]["fkgl_band"].get<std::string>()];
    }
  }
  if (any_relevance) agg["answer_changed"] = {{"yes", changed["yes"]}, {"no", changed["no"]}};
  if (any_readability) {
    ordered_json bands;
    bands["fre"] = ordered_json::object();
    for (auto b : fre_bands()) bands["fre"][std::string(b)] = fre_counts[std::string(b)];
    bands["fkgl"] = ordered_json::object();
    for (auto b : fkgl_bands()) bands["fkgl"][std::string(b)] = fkgl_counts[std::string(b)];
    agg["readability_bands"] = std::move(bands);
  }
  return agg;
}

void write_jsonl(const fs::path& path, const std::vector<ordered_json>& rows) {
  std::string content;
  for (const auto& r : rows) content += r.dump() + "\n";
  atomic_write(path, content);
}

std::vector<ordered_json> read_jsonl(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::vector<ordered_json> out;
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    try {
      out.push_back(ordered_json::parse(line));
    } catch (const json::exception& e) {
      throw ConfigError(path.string() + ": " + e.what());
    }
  }
  return out;
}

void write_json(const fs::path& path, const ordered_json& doc) { atomic_write(path, doc.dump(2) + "\n"); }

namespace {

std::string csv_field(const ordered_json& v) {
  if (v.is_null()) return "";
  if (v.is_string()) {
    const std::string s = v.get<std::string>();
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    return "\"" + replace_all(s, "\"", "\"\"") + "\"";
  }
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  return v.dump();
}

ordered_json field(const ordered_json& row, const char* section, const char* name) {
  if (!row.contains(section) || !row[section].is_object() || !row[section].contains(name)) return nullptr;
  return row[section][name];
}

}  // namespace

void write_csv(const fs::path& path, const std::vector<ordered_json>& rows) {
  std::ostringstream os;
  os << "id,generator,evaluator,hazard,concern_kind";
  for (const auto& mp : kMetricPaths) os << ',' << mp.name;
  os << ",answer_changed,fre_band,fkgl_band,errors\n";
  for (const auto& r : rows) {
    auto top = [&r](const char* key) { return r.contains(key) ? r[key] : ordered_json(); };
    os << csv_field(top("id")) << ',' << csv_field(top("generator")) << ',' << csv_field(top("evaluator")) << ','
       << csv_field(top("hazard")) << ',' << csv_field(top("concern_kind"));
    for (const auto& mp : kMetricPaths) os << ',' << csv_field(field(r, mp.section, mp.field));
    os << ',' << csv_field(field(r, "relevance", "changed")) << ',' << csv_field(field(r, "readability", "fre_band"))
       << ',' << csv_field(field(r, "readability", "fkgl_band")) << ','
       << (r.contains("errors") ? r["errors"].size() : 0) << '\n';
  }
  atomic_write(path, os.str());
}

int run_generate(const RunConfig& config) {
  Pipeline p(config);
  write_dataset(config.outputs.dataset, p.generate());
  return kExitOk;
}

int run_evaluate(const RunConfig& config) {
  Pipeline p(config);
  std::vector<DatasetRecord> records;
  if (fs::exists(config.outputs.dataset)) {
    records = read_dataset(config.outputs.dataset);
  } else {
    records = p.generate();
    write_dataset(config.outputs.dataset, records);
  }
  if (records.empty()) throw ConfigError("dataset is empty");
  const EvaluationResult r = p.evaluate(records);
  write_jsonl(config.outputs.rows, r.rows);
  write_jsonl(config.outputs.artifacts, r.artifacts);
  write_json(config.outputs.aggregate, r.aggregate);
  if (config.outputs.csv) write_csv(*config.outputs.csv, r.rows);
  return r.rows_with_errors > 0 ? kExitPartial : kExitOk;
}

int run_report(const RunConfig& config) {
  const auto rows = read_jsonl(config.outputs.rows);
  if (rows.empty()) throw ConfigError("rows file " + config.outputs.rows.string() + " is empty");
  write_json(config.outputs.aggregate, aggregate_report(rows));
  if (config.outputs.csv) write_csv(*config.outputs.csv, rows);
  for (const auto& r : rows) {
    if (r.contains("errors") && !r["errors"].empty()) return kExitPartial;
  }
  return kExitOk;
}

}  // namespace hazeval
