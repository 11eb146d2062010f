#include <gtest/gtest.h>

#include <httplib.h>

#include <cstdlib>
#include <fstream>
#include <set>

#include "fixtures.hpp"
#include "hazeval/annotation.hpp"
#include "hazeval/annotation_server.hpp"
#include "hazeval/error.hpp"
#include "hazeval/pipeline.hpp"
#include "hazeval/token.hpp"
#include "oracles.hpp"

using namespace hazeval;
using testing_support::data_dir;
using testing_support::TempDir;
using nlohmann::json;

namespace {

json valid_body(std::string relevance_label = "yes", int relevance = 7) {
  return {{"specificity", {{"hazard", relevance_label}, {"location", "no"}, {"timeline", "N/A"}, {"intensity", "yes"}}},
          {"relevance", relevance},
          {"context_used", {{"documents", {true, false, true, false, false}}, {"overall", 6}}},
          {"confidence", 8},
          {"comment", "fine"}};
}

HumanAnnotation parsed(const json& body, const std::string& task) {
  auto p = validate_annotation(body, task);
  EXPECT_TRUE(p.annotation.has_value());
  return *p.annotation;
}

std::vector<std::string> fields_of(const AnnotationParse& p) {
  std::vector<std::string> out;
  for (const auto& e : p.errors) out.push_back(e.field);
  return out;
}

std::vector<std::string> ids(const std::string& prefix, int n) {
  std::vector<std::string> out;
  for (int i = 0; i < n; ++i) out.push_back(prefix + std::to_string(i));
  return out;
}

std::string fixed_clock() { return "2024-01-01T00:00:00Z"; }

}  // namespace

TEST(AssignTasks, FiftyQuestionsTenAnnotatorsTwice) {
  const auto tasks = assign_tasks(ids("q", 50), ids("a", 10), 2, 7);
  ASSERT_EQ(tasks.size(), 100u);
  std::map<std::string, int> load;
  std::map<std::string, std::set<std::string>> per_question;
  for (const auto& t : tasks) {
    ++load[t.annotator_id];
    EXPECT_TRUE(per_question[t.question_id].insert(t.annotator_id).second);
    EXPECT_EQ(t.task_id, make_task_id(t.question_id, t.annotator_id));
  }
  for (const auto& [a, n] : load) EXPECT_EQ(n, 10) << a;
  for (const auto& [q, s] : per_question) EXPECT_EQ(s.size(), 2u);
  EXPECT_EQ(assign_tasks(ids("q", 50), ids("a", 10), 2, 7).front().annotator_id, tasks.front().annotator_id);
}

TEST(AssignTasks, ExhaustiveSmallCases) {
  for (int q = 1; q <= 12; ++q) {
    for (int a = 1; a <= 6; ++a) {
      for (int r = 1; r <= a; ++r) {
        const auto tasks = assign_tasks(ids("q", q), ids("a", a), r, q * 31 + a);
        ASSERT_EQ(tasks.size(), static_cast<std::size_t>(q * r));
        std::map<std::string, int> load;
        std::map<std::string, std::set<std::string>> per_question;
        for (const auto& t : tasks) {
          ++load[t.annotator_id];
          per_question[t.question_id].insert(t.annotator_id);
        }
        for (const auto& [qid, s] : per_question) EXPECT_EQ(s.size(), static_cast<std::size_t>(r));
        int lo = q * r, hi = 0;
        for (const auto& aid : ids("a", a)) {
          lo = std::min(lo, load[aid]);
          hi = std::max(hi, load[aid]);
        }
        EXPECT_LE(hi - lo, 1) << q << "/" << a << "/" << r;
      }
    }
  }
}

TEST(AssignTasks, Preconditions) {
  EXPECT_THROW(assign_tasks({}, ids("a", 2), 1, 0), PreconditionError);
  EXPECT_THROW(assign_tasks(ids("q", 2), {}, 1, 0), PreconditionError);
  EXPECT_THROW(assign_tasks(ids("q", 2), ids("a", 2), 0, 0), PreconditionError);
  EXPECT_THROW(assign_tasks(ids("q", 2), ids("a", 2), 3, 0), PreconditionError);
  EXPECT_THROW(assign_tasks({"q", "q"}, ids("a", 2), 1, 0), PreconditionError);
  EXPECT_THROW(assign_tasks(ids("q", 2), {"a", "a"}, 1, 0), PreconditionError);
}

TEST(ValidateAnnotation, AcceptsValidBody) {
  const auto a = parsed(valid_body("N/A"), "t1");
  EXPECT_EQ(a.task_id, "t1");
  EXPECT_EQ(a.specificity[0], "na");
  EXPECT_EQ(a.specificity[2], "na");
  EXPECT_EQ(a.relevance, 7);
  EXPECT_TRUE(a.documents_used[0]);
  EXPECT_FALSE(a.documents_used[1]);
  EXPECT_EQ(a.context_overall, 6);
  EXPECT_EQ(a.comment, "fine");
  json with_id = valid_body();
  with_id["task_id"] = "t1";
  with_id["submitted_at"] = "ignored";
  EXPECT_TRUE(validate_annotation(with_id, "t1").annotation.has_value());
}

TEST(ValidateAnnotation, FieldErrors) {
  json b = valid_body();
  b["relevance"] = 11;
  auto p = validate_annotation(b, "t");
  EXPECT_FALSE(p.annotation.has_value());
  EXPECT_EQ(fields_of(p), (std::vector<std::string>{"relevance"}));

  b = valid_body();
  b["context_used"]["documents"][3] = "yes";
  b["confidence"] = 0;
  b["specificity"]["location"] = "maybe";
  b["extra"] = 1;
  b["task_id"] = "other";
  p = validate_annotation(b, "t");
  const auto f = fields_of(p);
  for (const char* expected :
       {"context_used.documents[3]", "confidence", "specificity.location", "extra", "task_id"}) {
    EXPECT_NE(std::find(f.begin(), f.end(), expected), f.end()) << expected;
  }

  b = valid_body();
  b["context_used"]["documents"] = {true, true};
  EXPECT_EQ(fields_of(validate_annotation(b, "t")), (std::vector<std::string>{"context_used.documents"}));
  b = valid_body();
  b["relevance"] = 7.5;
  EXPECT_EQ(fields_of(validate_annotation(b, "t")), (std::vector<std::string>{"relevance"}));
  b = valid_body();
  b["specificity"].erase("timeline");
  EXPECT_EQ(fields_of(validate_annotation(b, "t")), (std::vector<std::string>{"specificity.timeline"}));
  EXPECT_FALSE(validate_annotation(json::array(), "t").annotation.has_value());
}

TEST(ValidateAnnotation, ScaleBoundariesExhaustive) {
  for (int v = -2; v <= 13; ++v) {
    json b = valid_body();
    b["confidence"] = v;
    EXPECT_EQ(validate_annotation(b, "t").annotation.has_value(), v >= 1 && v <= 10) << v;
  }
}

class Store : public ::testing::Test {
 protected:
  TempDir dir_{"hz-store"};
  std::vector<AnnotationTask> tasks_ = assign_tasks({"q1", "q2"}, {"alice", "bob"}, 2, 1);
  std::filesystem::path log() const { return dir_ / "log.jsonl"; }
  std::string task(const std::string& q, const std::string& a) const { return make_task_id(q, a); }
};

TEST_F(Store, SubmitReviseAndIdempotence) {
  AnnotationStore store(log(), tasks_, fixed_clock);
  const auto t = task("q1", "alice");
  auto ack = store.submit(parsed(valid_body(), t));
  EXPECT_EQ(ack.outcome, AnnotationStore::Outcome::stored);
  EXPECT_EQ(ack.revision, 1u);
  EXPECT_EQ(ack.annotation.submitted_at, "2024-01-01T00:00:00Z");

  ack = store.submit(parsed(valid_body(), t));
  EXPECT_EQ(ack.outcome, AnnotationStore::Outcome::unchanged);
  EXPECT_EQ(store.log_records(), 1u);

  ack = store.submit(parsed(valid_body("no"), t));
  EXPECT_EQ(ack.outcome, AnnotationStore::Outcome::stored);
  EXPECT_EQ(ack.revision, 2u);
  EXPECT_EQ(store.history(t).size(), 2u);
  EXPECT_EQ(store.current(t)->specificity[0], "no");
  EXPECT_TRUE(store.done(t));
  EXPECT_FALSE(store.done(task("q2", "bob")));
  EXPECT_THROW(store.submit(parsed(valid_body(), "q9~zed")), NotFoundError);
}

TEST_F(Store, ReplayRebuildsTheView) {
  {
    AnnotationStore store(log(), tasks_, fixed_clock);
    store.submit(parsed(valid_body(), task("q1", "alice")));
    store.submit(parsed(valid_body("no"), task("q1", "alice")));
    store.submit(parsed(valid_body(), task("q2", "bob")));
  }
  AnnotationStore again(log(), tasks_, fixed_clock);
  EXPECT_EQ(again.log_records(), 3u);
  EXPECT_EQ(again.history(task("q1", "alice")).size(), 2u);
  EXPECT_EQ(again.snapshot().size(), 2u);
}

TEST_F(Store, CrashAfterAppendLosesNothing) {
  {
    AnnotationStore store(log(), tasks_, fixed_clock);
    store.set_after_append_hook([] { throw std::runtime_error("simulated crash"); });
    EXPECT_THROW(store.submit(parsed(valid_body(), task("q1", "bob"))), std::runtime_error);
    EXPECT_FALSE(store.done(task("q1", "bob")));
  }
  AnnotationStore recovered(log(), tasks_, fixed_clock);
  EXPECT_TRUE(recovered.done(task("q1", "bob")));
  EXPECT_EQ(recovered.current(task("q1", "bob"))->relevance, 7);
}

TEST_F(Store, TruncatedTailIsDroppedCorruptMiddleIsFatal) {
  {
    AnnotationStore store(log(), tasks_, fixed_clock);
    store.submit(parsed(valid_body(), task("q1", "alice")));
  }
  std::ofstream(log(), std::ios::app) << R"({"task_id":"q2~bob","specif)";
  {
    AnnotationStore store(log(), tasks_, fixed_clock);
    EXPECT_EQ(store.log_records(), 1u);
    store.submit(parsed(valid_body(), task("q2", "bob")));
  }
  AnnotationStore clean(log(), tasks_, fixed_clock);
  EXPECT_EQ(clean.log_records(), 2u);

  std::ofstream(dir_ / "bad.jsonl") << "garbage\n" << to_json(parsed(valid_body(), task("q1", "alice"))).dump() << "\n";
  EXPECT_THROW(AnnotationStore(dir_ / "bad.jsonl", tasks_, fixed_clock), ConfigError);
  std::ofstream(dir_ / "stranger.jsonl") << to_json(parsed(valid_body(), "q7~eve")).dump() << "\n";
  EXPECT_THROW(AnnotationStore(dir_ / "stranger.jsonl", tasks_, fixed_clock), ConfigError);
}

TEST(Token, IssueVerifyForgeExpire) {
  std::int64_t now = 1'000'000;
  TokenSigner signer("0123456789abcdef0123", std::chrono::seconds(60), [&now] { return now; });
  const auto token = signer.issue("alice");
  EXPECT_EQ(signer.verify(token), "alice");

  std::string forged = token;
  forged.back() = forged.back() == 'A' ? 'B' : 'A';
  EXPECT_FALSE(signer.verify(forged).has_value());
  const auto dot = token.find('.');
  const std::string other_payload = base64url_encode(R"({"sub":"bob","exp":99999999})");
  EXPECT_FALSE(signer.verify(other_payload + token.substr(dot)).has_value());
  EXPECT_FALSE(signer.verify("").has_value());
  EXPECT_FALSE(signer.verify("no-dot").has_value());

  TokenSigner stranger("another-secret-value!", std::chrono::seconds(60), [&now] { return now; });
  EXPECT_FALSE(stranger.verify(token).has_value());

  now += 61;
  EXPECT_FALSE(signer.verify(token).has_value());
}

TEST(Token, StudyCodesAndEnv) {
  TokenSigner signer("0123456789abcdef0123", std::chrono::seconds(60));
  const auto a = signer.study_code("alice");
  EXPECT_EQ(a.size(), 10u);
  EXPECT_EQ(a, signer.study_code("alice"));
  EXPECT_NE(a, signer.study_code("bob"));

  ::unsetenv("HZ_TEST_SECRET");
  EXPECT_THROW(TokenSigner::from_env("HZ_TEST_SECRET", std::chrono::seconds(1)), ConfigError);
  ::setenv("HZ_TEST_SECRET", "short", 1);
  EXPECT_THROW(TokenSigner::from_env("HZ_TEST_SECRET", std::chrono::seconds(1)), ConfigError);
  ::setenv("HZ_TEST_SECRET", "0123456789abcdef0123", 1);
  const auto env = TokenSigner::from_env("HZ_TEST_SECRET", std::chrono::seconds(60));
  EXPECT_EQ(env.study_code("alice"), a);
  EXPECT_EQ(env.verify(signer.issue("carol")), "carol");
}

TEST(Base64Url, RoundTrip) {
  for (const std::string& s : std::vector<std::string>{"", "f", "fo", "foo", "foob", "fooba", "foobar", std::string("\xff\xfe\x00", 3)}) {
    EXPECT_EQ(base64url_decode(base64url_encode(s)), s);
    EXPECT_EQ(base64url_encode(s).find_first_of("+/="), std::string::npos);
  }
  EXPECT_FALSE(base64url_decode("a+b/").has_value());
}

TEST(Agreement, HandBuiltStudy) {
  const std::vector<std::string> qs = {"q1", "q2", "q3", "q4"};
  const auto tasks = assign_tasks(qs, {"a1", "a2"}, 2, 3);
  // relevance and context scores per question for a1 / a2
  const std::map<std::string, std::pair<int, int>> rel = {{"q1", {2, 3}}, {"q2", {5, 4}}, {"q3", {9, 9}}, {"q4", {7, 8}}};
  const std::map<std::string, std::pair<std::string, std::string>> hazard = {
      {"q1", {"yes", "yes"}}, {"q2", {"no", "yes"}}, {"q3", {"na", "na"}}, {"q4", {"yes", "yes"}}};
  std::vector<HumanAnnotation> anns;
  for (const auto& t : tasks) {
    json b = valid_body();
    const bool first = t.annotator_id == "a1";
    b["relevance"] = first ? rel.at(t.question_id).first : rel.at(t.question_id).second;
    b["context_used"]["overall"] = first ? rel.at(t.question_id).second : rel.at(t.question_id).first;
    b["specificity"]["hazard"] = first ? hazard.at(t.question_id).first : hazard.at(t.question_id).second;
    anns.push_back(parsed(b, t.task_id));
  }
  AutomatedSource auto_src{"mock", {}};
  for (const auto& q : qs) {
    AutomatedScores s;
    s.has_specificity = true;
    s.specificity_averages = {1.0, 0.0, std::nullopt, 0.75};
    s.relevance = 0.1 * rel.at(q).first;
    s.cu = 0.01 * rel.at(q).second;
    auto_src.rows[q] = s;
  }
  const auto report = agreement_report(tasks, anns, {auto_src});
  EXPECT_EQ(report["doubly_annotated_questions"], 4);
  const auto& hz = report["human_human"]["specificity"]["hazard"];
  EXPECT_EQ(hz["agree"], 3);
  EXPECT_EQ(hz["disagree"], 1);
  EXPECT_NEAR(hz["agree_percent"].get<double>(), 75.0, 1e-9);
  // rows: q1 yes/yes, q2 no/yes, q3 na/na, q4 yes/yes over (yes, no, na)
  const double kappa = oracle::fleiss_kappa({{2, 0, 0}, {1, 1, 0}, {0, 0, 2}, {2, 0, 0}});
  EXPECT_NEAR(hz["fleiss_kappa"].get<double>(), kappa, 1e-9);
  EXPECT_EQ(report["human_human"]["specificity"]["location"]["agree"], 4);

  const auto& r = report["human_human"]["relevance"];
  EXPECT_EQ(r["n"], 4);
  EXPECT_NEAR(r["spearman"].get<double>(), oracle::spearman({2, 5, 9, 7}, {3, 4, 9, 8}), 1e-9);
  EXPECT_TRUE(report["human_automated"].contains("mock"));
  const auto& ha = report["human_automated"]["mock"];
  EXPECT_EQ(ha["rows"], 8);
  // automated hazard average 1.0 -> "yes"; human a1/a2 give yes 5 of 8 times
  EXPECT_EQ(ha["specificity"]["hazard"]["agree"], 5);
}

TEST(Agreement, NeedsADoublyAnnotatedQuestion) {
  const auto tasks = assign_tasks({"q1"}, {"a1", "a2"}, 2, 0);
  EXPECT_THROW(agreement_report(tasks, {parsed(valid_body(), tasks[0].task_id)}, {}), PreconditionError);
}

TEST(Agreement, AutomatedLabels) {
  EXPECT_EQ(automated_label(std::nullopt), "na");
  EXPECT_EQ(automated_label(0.5), "yes");
  EXPECT_EQ(automated_label(0.4999), "no");
}

class StudyServer : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new TempDir("hz-study");
    json run;
    {
      std::ifstream in(data_dir() / "e2e_config.json");
      run = json::parse(in);
    }
    run["corpus"] = (data_dir() / "corpus.jsonl").string();
    run["dataset"]["count"] = 3;
    run.erase("cache_dir");
    const auto cfg = RunConfig::from_json(run, dir_->path());
    ASSERT_EQ(run_evaluate(cfg), kExitOk);
    study_json_ = {{"name", "pilot"},
                   {"dataset", cfg.outputs.dataset.string()},
                   {"corpus", (data_dir() / "corpus.jsonl").string()},
                   {"annotators", {"alice", "bob"}},
                   {"redundancy", 2},
                   {"seed", 5},
                   {"automated", {{{"name", "mock"}, {"rows", cfg.outputs.rows.string()}}}}};
  }
  static void TearDownTestSuite() {
    delete dir_;
    dir_ = nullptr;
  }

  void SetUp() override {
    config_ = StudyConfig::from_json(study_json_, dir_->path());
    config_.log = dir_->path() / (std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()) + ".jsonl");
    study_ = Study::open(config_);
    store_ = std::make_unique<AnnotationStore>(config_.log, study_.tasks);
    server_ = std::make_unique<AnnotationServer>(study_, *store_, signer_);
    port_ = server_->bind("127.0.0.1", 0);
    server_->start();
    client_ = std::make_unique<httplib::Client>("127.0.0.1", port_);
  }
  void TearDown() override { server_->stop(); }

  std::string login(const std::string& who) {
    const auto res = client_->Post("/api/login", json{{"study_code", signer_.study_code(who)}}.dump(), "application/json");
    EXPECT_EQ(res->status, 200);
    return json::parse(res->body)["token"].get<std::string>();
  }
  httplib::Headers auth(const std::string& token) { return {{"Authorization", "Bearer " + token}}; }
  std::string task_of(const std::string& who) {
    for (const auto& t : study_.tasks) {
      if (t.annotator_id == who) return t.task_id;
    }
    return {};
  }

  static inline TempDir* dir_ = nullptr;
  static inline json study_json_;
  TokenSigner signer_{"test-secret-0123456789", std::chrono::seconds(600)};
  StudyConfig config_;
  Study study_;
  std::unique_ptr<AnnotationStore> store_;
  std::unique_ptr<AnnotationServer> server_;
  std::unique_ptr<httplib::Client> client_;
  int port_ = 0;
};

TEST_F(StudyServer, StudyPayloadsCarryFiveSources) {
  EXPECT_EQ(study_.tasks.size(), 6u);
  for (const auto& [q, p] : study_.payloads) {
    EXPECT_EQ(p["sources"].size(), kSourcesPerTask);
    EXPECT_TRUE(p.contains("profile"));
    EXPECT_FALSE(p["answer"]["segments"].empty());
  }
  EXPECT_EQ(study_.automated.size(), 1u);
}

TEST_F(StudyServer, HealthAndLogin) {
  auto res = client_->Get("/api/health");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  EXPECT_EQ(json::parse(res->body)["tasks"], 6);
  EXPECT_EQ(client_->Get("/api/study")->status, 200);
  EXPECT_EQ(client_->Post("/api/login", R"({"study_code":"WRONGCODE1"})", "application/json")->status, 401);
  EXPECT_EQ(client_->Post("/api/login", "nope", "application/json")->status, 400);
  EXPECT_EQ(client_->Get("/api/tasks?annotator=alice")->status, 401);
  EXPECT_EQ(client_->Get("/api/tasks", auth("forged.token"))->status, 401);
}

TEST_F(StudyServer, TaskListingIsPerAnnotator) {
  const auto token = login("alice");
  auto res = client_->Get("/api/tasks?annotator=alice", auth(token));
  ASSERT_EQ(res->status, 200);
  const auto list = json::parse(res->body);
  EXPECT_EQ(list["tasks"].size(), 3u);
  for (const auto& t : list["tasks"]) EXPECT_EQ(t["status"], "pending");
  EXPECT_EQ(client_->Get("/api/tasks?annotator=bob", auth(token))->status, 403);
  EXPECT_EQ(client_->Get("/api/tasks/" + task_of("bob"), auth(token))->status, 403);
  EXPECT_EQ(client_->Get("/api/tasks/nothing", auth(token))->status, 404);

  res = client_->Get("/api/tasks/" + task_of("alice"), auth(token));
  ASSERT_EQ(res->status, 200);
  const auto detail = json::parse(res->body);
  EXPECT_EQ(detail["payload"]["sources"].size(), 5u);
  EXPECT_TRUE(detail["annotation"].is_null());
}

TEST_F(StudyServer, SubmitValidateReviseAndAgree) {
  const auto alice = login("alice");
  const auto bob = login("bob");
  const std::string path = "/api/tasks/" + task_of("alice") + "/annotation";

  json bad = valid_body();
  bad["relevance"] = 11;
  auto res = client_->Post(path, auth(alice), bad.dump(), "application/json");
  ASSERT_EQ(res->status, 422);
  const auto err = json::parse(res->body);
  EXPECT_EQ(err["error"], "validation failed");
  EXPECT_EQ(err["fields"][0]["field"], "relevance");
  EXPECT_EQ(client_->Post(path, auth(alice), "{oops", "application/json")->status, 400);
  EXPECT_EQ(client_->Post(path, auth(bob), valid_body().dump(), "application/json")->status, 403);

  res = client_->Post(path, auth(alice), valid_body().dump(), "application/json");
  ASSERT_EQ(res->status, 200);
  EXPECT_EQ(json::parse(res->body)["status"], "stored");
  res = client_->Post(path, auth(alice), valid_body().dump(), "application/json");
  EXPECT_EQ(json::parse(res->body)["status"], "unchanged");
  EXPECT_EQ(json::parse(res->body)["revision"], 1);

  EXPECT_EQ(client_->Get("/api/agreement", auth(alice))->status, 409);

  // bob annotates every question alice has, which makes them doubly annotated
  for (const auto& t : study_.tasks) {
    if (t.annotator_id != "bob") continue;
    res = client_->Post("/api/tasks/" + t.task_id + "/annotation", auth(bob), valid_body().dump(), "application/json");
    EXPECT_EQ(res->status, 200);
  }
  res = client_->Get("/api/agreement", auth(bob));
  ASSERT_EQ(res->status, 200);
  const auto report = json::parse(res->body);
  EXPECT_GE(report["doubly_annotated_questions"].get<int>(), 1);
  EXPECT_TRUE(report["human_automated"].contains("mock"));

  res = client_->Get("/api/export", auth(bob));
  ASSERT_EQ(res->status, 200);
  EXPECT_EQ(std::count(res->body.begin(), res->body.end(), '\n'), 4);

  res = client_->Get("/api/tasks/" + task_of("alice"), auth(alice));
  EXPECT_EQ(json::parse(res->body)["status"], "done");
  EXPECT_EQ(json::parse(res->body)["revisions"], 1);
}

TEST(StudyConfigParse, RequiredFields) {
  EXPECT_THROW(StudyConfig::from_json(json{{"corpus", "c"}, {"annotators", {"a"}}}), ConfigError);
  EXPECT_THROW(StudyConfig::from_json(json{{"dataset", "d"}, {"corpus", "c"}, {"annotators", json::array()}}),
               ConfigError);
  const auto c = StudyConfig::from_json(json{{"dataset", "d"}, {"corpus", "c"}, {"annotators", {"a"}}}, "/base");
  EXPECT_EQ(c.redundancy, 2u);
  EXPECT_EQ(c.log, std::filesystem::path("/base/annotations.jsonl"));
  EXPECT_EQ(c.secret_env, "HAZEVAL_STUDY_SECRET");
  EXPECT_FALSE(c.guidance.empty());
}
