#include <gtest/gtest.h>

#include <atomic>
#include <httplib.h>
#include <random>

#include "fixtures.hpp"
#include "hazeval/corpus_index.hpp"
#include "hazeval/error.hpp"
#include "hazeval/http_backend.hpp"
#include "hazeval/json_reply.hpp"
#include "hazeval/response_cache.hpp"
#include "hazeval/text.hpp"
#include "oracles.hpp"

using namespace hazeval;
using testing_support::mock_provider;
using nlohmann::json;

namespace {

// Serves /v1/chat/completions, failing with 500 for the first `failures` calls.
class FlakyServer {
 public:
  explicit FlakyServer(int failures) : failures_(failures) {
    server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
      last_auth_ = req.get_header_value("Authorization");
      if (calls_++ < failures_) {
        res.status = 500;
        res.set_content("busy", "text/plain");
        return;
      }
      const auto body = json::parse(req.body);
      json reply = {{"choices", {{{"message", {{"role", "assistant"}, {"content", "ok:" + body["model"].get<std::string>()}}}}}}};
      res.set_content(reply.dump(), "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FlakyServer() {
    server_.stop();
    thread_.join();
  }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1"; }
  int calls() const { return calls_.load(); }
  std::string last_auth() const { return last_auth_; }

 private:
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  int failures_;
  std::atomic<int> calls_{0};
  std::string last_auth_;
};

ProviderProfile http_profile(const std::string& url, int attempts) {
  ProviderProfile p;
  p.name = "live";
  p.endpoint_url = url;
  p.model_id = "m1";
  p.capabilities = {Capability::chat};
  p.retry = {attempts, std::chrono::milliseconds(1)};
  return p;
}

}  // namespace

TEST(Gateway, RetriesServerErrorsUntilSuccess) {
  FlakyServer server(2);
  const auto profile = http_profile(server.url(), 3);
  Provider p(profile, std::make_shared<HttpBackend>(profile));
  EXPECT_EQ(p.chat(ChatRequest::user("hi")), "ok:m1");
  EXPECT_EQ(server.calls(), 3);
  EXPECT_EQ(p.backend_calls(), 3u);
}

TEST(Gateway, SingleAttemptSurfacesTransportError) {
  FlakyServer server(5);
  const auto profile = http_profile(server.url(), 1);
  Provider p(profile, std::make_shared<HttpBackend>(profile));
  EXPECT_THROW(p.chat(ChatRequest::user("hi")), TransportError);
  EXPECT_EQ(server.calls(), 1);
}

TEST(Gateway, BearerTokenComesFromEnvironment) {
  FlakyServer server(0);
  auto profile = http_profile(server.url(), 1);
  profile.auth_env = "HAZEVAL_TEST_PROVIDER_TOKEN";
  ::unsetenv("HAZEVAL_TEST_PROVIDER_TOKEN");
  EXPECT_THROW(HttpBackend{profile}, ConfigError);
  ::setenv("HAZEVAL_TEST_PROVIDER_TOKEN", "sekret", 1);
  Provider p(profile, std::make_shared<HttpBackend>(profile));
  p.chat(ChatRequest::user("hi"));
  EXPECT_EQ(server.last_auth(), "Bearer sekret");
}

TEST(Gateway, UndeclaredCapabilityFailsBeforeAnyCall) {
  auto p = mock_provider("m", {Capability::chat});
  EXPECT_THROW(p->embed({"x"}), ProviderError);
  EXPECT_THROW(p->rerank("q", "p"), ProviderError);
  EXPECT_THROW(p->score_completion("q", "a"), ProviderError);
  EXPECT_EQ(p->backend_calls(), 0u);
}

TEST(Gateway, ScriptedChatReplyIsReturnedVerbatim) {
  MockHandlers h;
  h.chat = [](const ChatRequest&) { return std::string("fixed reply"); };
  auto p = mock_provider("m", {Capability::chat}, h);
  EXPECT_EQ(p->chat(ChatRequest::user("anything")), "fixed reply");
}

TEST(Gateway, ChatRequestValidation) {
  ChatRequest r = ChatRequest::user("x");
  r.top_p = 0.0;
  EXPECT_THROW(r.validate(), PreconditionError);
  EXPECT_DOUBLE_EQ(ChatRequest::user("x").temperature, 0.1);
  EXPECT_DOUBLE_EQ(ChatRequest::user("x").top_p, 0.9);
  EXPECT_DOUBLE_EQ(ChatRequest::judge("x").temperature, 0.0);
}

TEST(Gateway, EmbeddingsAreDeterministicUnitVectors) {
  auto p = mock_provider("m");
  const auto a = p->embed({"storm surge damage", "heat wave", "drought"});
  ASSERT_EQ(a.size(), 3u);
  EXPECT_EQ(a[0].size(), a[1].size());
  EXPECT_EQ(a[1].size(), a[2].size());
  EXPECT_EQ(p->embed_one("storm surge damage"), a[0]);
  EXPECT_NEAR(cosine(a[0], a[0]), 1.0, 1e-12);
  EXPECT_NEAR(l2_norm(a[1]), 1.0, 1e-12);
}

TEST(Gateway, MockRerankCountsOverlap) {
  auto p = mock_provider("m");
  // distinct query tokens {flood, risk, ports} of which {flood, ports} appear
  EXPECT_DOUBLE_EQ(p->rerank("flood risk ports", "ports face flood damage"), 2.0);
  const std::string q = "wildfire smoke near transmission lines";
  EXPECT_GE(p->rerank(q, q), p->rerank(q, "wildfire damage"));
  EXPECT_DOUBLE_EQ(p->rerank(q, q), 5.0);
  EXPECT_THROW(p->rerank(q, ""), PreconditionError);
}

TEST(Gateway, ScoredTokensCoverCompletionOnly) {
  MockHandlers h;
  h.score = [](std::string_view, std::string_view completion) {
    std::vector<TokenScore> out;
    for (const auto& w : word_tokens(completion)) out.push_back({w, -0.1, {}});
    return out;
  };
  auto p = mock_provider("m", {Capability::score}, h);
  const auto s = p->score_completion("prompt words", "a b c d");
  ASSERT_EQ(s.size(), 4u);
  for (const auto& t : s) EXPECT_DOUBLE_EQ(t.logprob, -0.1);
}

TEST(Gateway, BuiltinScorerIsDeterministicAndContextSensitive) {
  auto p = mock_provider("m");
  const auto a = p->score_completion("Question: q\nContext claims:\n- ports flood\nAnswer:", " ports flood often");
  const auto b = p->score_completion("Question: q\nContext claims:\n- ports flood\nAnswer:", " ports flood often");
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].logprob, b[i].logprob);
  const auto c = p->score_completion("Question: q\nContext claims:\nAnswer:", " ports flood often");
  EXPECT_LT(c[0].logprob, a[0].logprob);
  EXPECT_THROW(p->score_completion("x", ""), PreconditionError);
}

TEST(Gateway, ResponseCacheServesRepeatsWithoutBackendCalls) {
  testing_support::TempDir dir;
  auto cache = std::make_shared<ResponseCache>(dir.path());
  auto p = mock_provider("m", {Capability::chat, Capability::embed}, {}, 0, cache);
  const std::string first = p->chat(ChatRequest::user("cache me"));
  p->embed({"one", "two"});
  const auto calls = p->backend_calls();

  auto fresh = mock_provider("m", {Capability::chat, Capability::embed}, {}, 0, cache);
  EXPECT_EQ(fresh->chat(ChatRequest::user("cache me")), first);
  fresh->embed({"two", "one"});
  EXPECT_EQ(fresh->backend_calls(), 0u);
  EXPECT_EQ(fresh->cache_hits(), 3u);
  EXPECT_GT(calls, 0u);
}

TEST(Gateway, RegistryRejectsBadEntries) {
  EXPECT_THROW(ProviderRegistry::from_json(json{{"x", {{"kind", "carrier-pigeon"}}}}, nullptr), ConfigError);
  const auto reg = ProviderRegistry::from_json(
      json{{"mock", {{"kind", "mock"}, {"model_id", "m"}, {"capabilities", {"chat", "embed"}}}}}, nullptr);
  EXPECT_TRUE(reg.contains("mock"));
  EXPECT_TRUE(reg.get("mock")->profile().has(Capability::embed));
  EXPECT_FALSE(reg.get("mock")->profile().has(Capability::score));
}

TEST(ReplyContract, OneRepairTurnThenReplyError) {
  std::atomic<int> calls{0};
  MockHandlers h;
  h.chat = [&](const ChatRequest& r) {
    ++calls;
    return r.messages.size() == 1 ? std::string("not json") : std::string("```json\n[1, 2]\n```");
  };
  auto p = mock_provider("m", {Capability::chat}, h);
  const std::function<std::vector<int>(const json&)> conv = [](const json& j) { return j.get<std::vector<int>>(); };
  EXPECT_EQ(ask_json(*p, ChatRequest::user("x"), conv), (std::vector<int>{1, 2}));
  EXPECT_EQ(calls.load(), 2);

  MockHandlers bad;
  bad.chat = [](const ChatRequest&) { return std::string("never json"); };
  auto q = mock_provider("m", {Capability::chat}, bad);
  EXPECT_THROW(ask_json(*q, ChatRequest::user("x"), conv), ReplyError);
  EXPECT_EQ(q->backend_calls(), 2u);
}

TEST(ReplyContract, ExtractsJsonFromNoisyReplies) {
  EXPECT_EQ(*extract_json("Sure! {\"a\": 1} hope that helps"), json({{"a", 1}}));
  EXPECT_EQ(*extract_json("prefix [\"x\", {\"b\": 2}] suffix"), json::parse(R"(["x", {"b": 2}])"));
  EXPECT_FALSE(extract_json("nothing here").has_value());
}

TEST(CorpusIndex, SizesIdsAndDuplicates) {
  auto p = mock_provider("m");
  std::vector<Document> docs{{"a", "storm surge"}, {"b", "heat wave"}, {"c", "ice storm"}};
  const auto idx = build_index(docs, *p);
  EXPECT_EQ(idx.size(), 3u);
  docs.push_back({"a", "dup"});
  EXPECT_THROW(build_index(docs, *p), PreconditionError);
}

TEST(CorpusIndex, SelfQueryRanksFirstAndLargeK) {
  auto p = mock_provider("m");
  const auto docs = read_corpus(testing_support::data_dir() / "corpus.jsonl");
  const auto idx = build_index(docs, *p);
  for (const auto& d : docs) {
    const auto hits = idx.retrieve(p->embed_one(d.body), 5);
    ASSERT_EQ(hits.size(), 5u);
    EXPECT_EQ(hits[0].doc_id, d.doc_id);
  }
  EXPECT_EQ(idx.retrieve(p->embed_one("x"), 500).size(), docs.size());
}

TEST(CorpusIndex, RandomRecordsRoundTripAndMatchBruteForce) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g;
  std::vector<DocumentRecord> records;
  for (int i = 0; i < 100; ++i) {
    Embedding v(16);
    for (auto& x : v) x = g(rng);
    records.push_back({"doc" + std::to_string(i), "body", normalized(v)});
  }
  const auto idx = CorpusIndex::from_records(records);
  ASSERT_EQ(idx.size(), 100u);
  for (const auto& r : records) ASSERT_NE(idx.find(r.doc_id), nullptr);

  Embedding q(16);
  for (auto& x : q) x = g(rng);
  std::vector<double> scores;
  for (const auto& r : records) scores.push_back(oracle::cosine(q, r.embedding));
  const auto order = oracle::stable_argsort_desc(scores);
  const auto hits = idx.retrieve(q, 5);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(hits[i].doc_id, records[order[i]].doc_id);
}

TEST(CorpusIndex, SidecarReusesEmbeddings) {
  testing_support::TempDir dir;
  auto p = mock_provider("m");
  const std::vector<Document> docs{{"a", "storm surge"}, {"b", "heat wave"}};
  {
    EmbeddingSidecar side(dir / "emb.jsonl");
    build_index(docs, *p, &side);
    side.save();
  }
  auto q = mock_provider("m");
  EmbeddingSidecar side(dir / "emb.jsonl");
  const auto idx = build_index(docs, *q, &side);
  EXPECT_EQ(q->backend_calls(), 0u);
  EXPECT_EQ(idx.size(), 2u);
}
