#include "hazeval/annotation_server.hpp"

#include <fstream>
#include <set>
#include <thread>

#include <httplib.h>

#include "hazeval/corpus_index.hpp"
#include "hazeval/dataset.hpp"
#include "hazeval/text.hpp"

namespace hazeval {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

template <class T>
T field(const json& j, const char* key, T fallback) {
  if (!j.contains(key) || j[key].is_null()) return fallback;
  try {
    return j[key].get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("study config field '") + key + "': " + e.what());
  }
}

}  // namespace

ordered_json default_guidance() {
  ordered_json g;
  g["specificity"] = {
      {"hazard", "Yes if the answer addresses the hazard named in the question with concrete detail; No if it is vague "
                 "or about another hazard; N/A if the question does not call for it."},
      {"location", "Yes if the answer refers to the asked location; a state-level match is enough. No if the location "
                   "is missing or wrong; N/A if not applicable."},
      {"timeline", "Yes if the answer states a time frame that fits the question; No if it is missing or conflicts "
                   "with the sources; N/A if not applicable."},
      {"intensity", "Yes if the answer quantifies severity or magnitude; No if it stays qualitative; N/A if not "
                    "applicable."}};
  g["relevance"] = "How well does the answer address the question? 1 = not at all, 10 = fully.";
  g["context_used"] = "Mark each retrieved source the answer actually draws on, then rate overall use from 1 to 10.";
  g["confidence"] = "How confident are you in your own ratings? 1 = guessing, 10 = certain.";
  g["comment"] = "Optional notes for the study team.";
  return g;
}

StudyConfig StudyConfig::from_json(const json& j, const fs::path& base_dir) {
  if (!j.is_object()) throw ConfigError("study config must be a JSON object");
  StudyConfig c;
  c.name = field<std::string>(j, "name", "study");
  if (!j.contains("dataset")) throw ConfigError("study config needs 'dataset'");
  if (!j.contains("corpus")) throw ConfigError("study config needs 'corpus'");
  c.dataset = resolve(base_dir, field<std::string>(j, "dataset", ""));
  c.corpus = resolve(base_dir, field<std::string>(j, "corpus", ""));
  c.annotators = field<std::vector<std::string>>(j, "annotators", {});
  if (c.annotators.empty()) throw ConfigError("study config needs a non-empty 'annotators' list");
  if (j.contains("questions") && !j["questions"].is_null()) c.questions = field<std::size_t>(j, "questions", 0);
  c.redundancy = field<std::size_t>(j, "redundancy", 2);
  c.seed = field<std::uint64_t>(j, "seed", 0);
  c.log = resolve(base_dir, field<std::string>(j, "log", "annotations.jsonl"));
  for (const auto& a : j.value("automated", json::array())) {
    if (!a.contains("name") || !a.contains("rows")) throw ConfigError("each 'automated' entry needs name and rows");
    c.automated.emplace_back(a["name"].get<std::string>(), resolve(base_dir, a["rows"].get<std::string>()));
  }
  const json server = j.value("server", json::object());
  c.host = field<std::string>(server, "host", "127.0.0.1");
  c.port = field<int>(server, "port", 8080);
  if (server.contains("static_dir") && !server["static_dir"].is_null()) {
    c.static_dir = resolve(base_dir, field<std::string>(server, "static_dir", ""));
  }
  const json auth = j.value("auth", json::object());
  c.secret_env = field<std::string>(auth, "secret_env", "HAZEVAL_STUDY_SECRET");
  c.token_ttl_seconds = field<std::int64_t>(auth, "token_ttl_seconds", 12 * 3600);
  c.agreement_output = resolve(base_dir, field<std::string>(j, "agreement_output", "agreement.json"));
  c.export_output = resolve(base_dir, field<std::string>(j, "export_output", "annotations_export.jsonl"));
  c.guidance = j.contains("guidance") ? ordered_json(j["guidance"]) : default_guidance();
  if (c.port < 0 || c.port > 65535) throw ConfigError("server.port out of range");
  return c;
}

StudyConfig StudyConfig::load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open study config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("study config " + path.string() + ": " + e.what());
  }
  return from_json(j, fs::absolute(path).parent_path());
}

Study Study::open(const StudyConfig& config) {
  Study s;
  s.config = config;
  auto records = read_dataset(config.dataset);
  if (config.questions) {
    if (*config.questions > records.size()) {
      throw ConfigError("study asks for " + std::to_string(*config.questions) + " questions, dataset has " +
                        std::to_string(records.size()));
    }
    records.resize(*config.questions);
  }
  std::map<std::string, std::string> bodies;
  for (auto& d : read_corpus(config.corpus)) bodies[d.doc_id] = std::move(d.body);

  std::vector<std::string> ids;
  for (const auto& r : records) {
    const auto& q = r.question;
    if (r.answer.retrieved_doc_ids.size() != kSourcesPerTask) {
      throw ConfigError("record '" + q.id + "' does not carry exactly " + std::to_string(kSourcesPerTask) + " sources");
    }
    ordered_json p;
    p["question_id"] = q.id;
    p["profile"] = {{"profession", q.profile.profession},
                    {"sector", to_string(q.profile.sector)},
                    {"concern", concern_phrase(q.profile.concern_kind)},
                    {"hazard", to_string(q.profile.hazard)},
                    {"location", q.profile.location.county + ", " + q.profile.location.state},
                    {"timeline_years", q.profile.timeline_years}};
    p["question"] = q.question_text;
    p["answer"] = {{"intro", r.answer.intro}, {"segments", r.answer.segments}};
    p["sources"] = ordered_json::array();
    for (const auto& id : r.answer.retrieved_doc_ids) {
      const auto it = bodies.find(id);
      if (it == bodies.end()) throw ConfigError("record '" + q.id + "' cites document '" + id + "' missing from corpus");
      p["sources"].push_back({{"doc_id", id}, {"body", it->second}});
    }
    s.payloads[q.id] = std::move(p);
    ids.push_back(q.id);
  }
  try {
    s.tasks = assign_tasks(ids, config.annotators, config.redundancy, config.seed);
  } catch (const PreconditionError& e) {
    throw ConfigError(e.what());
  }
  for (const auto& [name, rows] : config.automated) s.automated.push_back({name, read_automated_rows(rows)});
  return s;
}

std::string export_annotations(const AnnotationStore& store) {
  std::string out;
  for (const auto& a : store.snapshot()) out += to_json(a).dump() + "\n";
  return out;
}

struct AnnotationServer::Impl {
  const Study& study;
  AnnotationStore& store;
  TokenSigner signer;
  httplib::Server server;
  std::thread thread;
  std::map<std::string, std::string> annotator_by_code;

  Impl(const Study& s, AnnotationStore& st, TokenSigner sg) : study(s), store(st), signer(std::move(sg)) {
    for (const auto& a : study.config.annotators) annotator_by_code[signer.study_code(a)] = a;
    routes();
  }

  static void reply(httplib::Response& res, int status, const ordered_json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }
  static void fail(httplib::Response& res, int status, const std::string& message) {
    reply(res, status, {{"error", message}});
  }

  // The authenticated annotator, or nullopt after writing a 401.
  std::optional<std::string> authenticate(const httplib::Request& req, httplib::Response& res) const {
    const std::string header = req.get_header_value("Authorization");
    constexpr std::string_view prefix = "Bearer ";
    if (header.rfind(prefix, 0) != 0) {
      fail(res, 401, "missing bearer token");
      return std::nullopt;
    }
    auto who = signer.verify(std::string_view(header).substr(prefix.size()));
    if (!who) fail(res, 401, "invalid or expired token");
    return who;
  }

  // The task if it exists and belongs to `who`; otherwise writes 404 or 403.
  const AnnotationTask* owned_task(const std::string& id, const std::string& who, httplib::Response& res) const {
    const AnnotationTask* t = store.find_task(id);
    if (t == nullptr) {
      fail(res, 404, "unknown task '" + id + "'");
      return nullptr;
    }
    if (t->annotator_id != who) {
      fail(res, 403, "task belongs to another annotator");
      return nullptr;
    }
    return t;
  }

  ordered_json task_summary(const AnnotationTask& t) const {
    return {{"task_id", t.task_id}, {"question_id", t.question_id}, {"status", store.done(t.task_id) ? "done" : "pending"}};
  }

  void routes() {
    server.Get("/api/health", [this](const httplib::Request&, httplib::Response& res) {
      std::size_t done = 0;
      for (const auto& t : store.tasks()) done += store.done(t.task_id) ? 1 : 0;
      reply(res, 200, {{"status", "ok"}, {"study", study.config.name}, {"tasks", store.tasks().size()}, {"done", done}});
    });

    server.Get("/api/study", [this](const httplib::Request&, httplib::Response& res) {
      ordered_json j;
      j["name"] = study.config.name;
      j["sources_per_task"] = kSourcesPerTask;
      j["labels"] = {"yes", "no", "na"};
      j["scale"] = {{"min", 1}, {"max", 10}};
      j["guidance"] = study.config.guidance;
      reply(res, 200, j);
    });

    server.Post("/api/login", [this](const httplib::Request& req, httplib::Response& res) {
      const json body = json::parse(req.body, nullptr, false);
      if (body.is_discarded() || !body.is_object() || !body.contains("study_code") || !body["study_code"].is_string()) {
        fail(res, 400, "body must be {\"study_code\": \"...\"}");
        return;
      }
      const auto it = annotator_by_code.find(trim(body["study_code"].get<std::string>()));
      if (it == annotator_by_code.end()) {
        fail(res, 401, "unknown study code");
        return;
      }
      reply(res, 200, {{"token", signer.issue(it->second)}, {"annotator_id", it->second}});
    });

    server.Get("/api/tasks", [this](const httplib::Request& req, httplib::Response& res) {
      const auto who = authenticate(req, res);
      if (!who) return;
      const std::string annotator = req.has_param("annotator") ? req.get_param_value("annotator") : *who;
      if (annotator != *who) {
        fail(res, 403, "annotators can only list their own tasks");
        return;
      }
      ordered_json list = ordered_json::array();
      for (const auto& t : store.tasks()) {
        if (t.annotator_id == annotator) list.push_back(task_summary(t));
      }
      reply(res, 200, {{"annotator_id", annotator}, {"tasks", std::move(list)}});
    });

    server.Get(R"(/api/tasks/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      const auto who = authenticate(req, res);
      if (!who) return;
      const AnnotationTask* t = owned_task(req.matches[1], *who, res);
      if (t == nullptr) return;
      ordered_json j = task_summary(*t);
      j["annotator_id"] = t->annotator_id;
      j["payload"] = study.payloads.at(t->question_id);
      const auto current = store.current(t->task_id);
      j["annotation"] = current ? to_json(*current) : ordered_json(nullptr);
      j["revisions"] = store.history(t->task_id).size();
      reply(res, 200, j);
    });

    server.Post(R"(/api/tasks/([^/]+)/annotation)", [this](const httplib::Request& req, httplib::Response& res) {
      const auto who = authenticate(req, res);
      if (!who) return;
      const AnnotationTask* t = owned_task(req.matches[1], *who, res);
      if (t == nullptr) return;
      const json body = json::parse(req.body, nullptr, false);
      if (body.is_discarded()) {
        fail(res, 400, "body is not valid JSON");
        return;
      }
      auto parsed = validate_annotation(body, t->task_id);
      if (!parsed.annotation) {
        reply(res, 422, {{"error", "validation failed"}, {"fields", to_json(parsed.errors)}});
        return;
      }
      try {
        const auto ack = store.submit(std::move(*parsed.annotation));
        reply(res, 200,
              {{"status", ack.outcome == AnnotationStore::Outcome::stored ? "stored" : "unchanged"},
               {"revision", ack.revision},
               {"annotation", to_json(ack.annotation)}});
      } catch (const NotFoundError& e) {
        fail(res, 404, e.what());
      } catch (const std::exception& e) {
        fail(res, 500, e.what());
      }
    });

    server.Get("/api/agreement", [this](const httplib::Request& req, httplib::Response& res) {
      if (!authenticate(req, res)) return;
      try {
        reply(res, 200, agreement_report(store.tasks(), store.snapshot(), study.automated));
      } catch (const PreconditionError& e) {
        fail(res, 409, e.what());
      }
    });

    server.Get("/api/export", [this](const httplib::Request& req, httplib::Response& res) {
      if (!authenticate(req, res)) return;
      res.set_content(export_annotations(store), "application/x-ndjson");
    });

    if (study.config.static_dir) {
      if (!server.set_mount_point("/", study.config.static_dir->string())) {
        throw ConfigError("static_dir " + study.config.static_dir->string() + " is not a directory");
      }
    }
  }
};

AnnotationServer::AnnotationServer(const Study& study, AnnotationStore& store, TokenSigner signer)
    : impl_(std::make_unique<Impl>(study, store, std::move(signer))) {}

AnnotationServer::~AnnotationServer() { stop(); }

int AnnotationServer::bind(const std::string& host, int port) {
  if (port == 0) {
    const int p = impl_->server.bind_to_any_port(host);
    if (p < 0) throw Error("cannot bind " + host);
    return p;
  }
  if (!impl_->server.bind_to_port(host, port)) throw Error("cannot bind " + host + ":" + std::to_string(port));
  return port;
}

void AnnotationServer::listen() { impl_->server.listen_after_bind(); }

void AnnotationServer::start() {
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
}

void AnnotationServer::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace hazeval
