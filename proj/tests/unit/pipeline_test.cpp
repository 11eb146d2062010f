#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <fstream>

#include "fixtures.hpp"
#include "hazeval/error.hpp"
#include "hazeval/pipeline.hpp"

using namespace hazeval;
using testing_support::data_dir;
using testing_support::TempDir;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

json base_config() {
  std::ifstream in(data_dir() / "e2e_config.json");
  return json::parse(in);
}

RunConfig config_in(const TempDir& dir, json j) {
  j["corpus"] = (data_dir() / "corpus.jsonl").string();
  return RunConfig::from_json(j, dir.path());
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

int run_cli(const std::string& sub, const std::filesystem::path& config) {
  const std::string cmd = std::string(HAZEVAL_CLI_PATH) + " " + sub + " --config " + config.string() + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(RunConfigParse, ShippedTestConfig) {
  TempDir dir;
  const auto c = config_in(dir, base_config());
  EXPECT_EQ(c.dataset.count, 10u);
  EXPECT_EQ(c.roles.judges, (std::vector<std::string>{"evaluator"}));
  EXPECT_EQ(c.outputs.rows, dir.path() / "out" / "rows.jsonl");
  EXPECT_EQ(c.outputs.csv, dir.path() / "out" / "report.csv");
  EXPECT_EQ(c.cache_dir, dir.path() / "out" / "cache");
  EXPECT_EQ(c.robustness_kinds.size(), 4u);
}

TEST(RunConfigParse, RejectsBadConfigs) {
  TempDir dir;
  auto with = [&](auto edit) {
    json j = base_config();
    edit(j);
    return j;
  };
  EXPECT_THROW(config_in(dir, with([](json& j) { j["colour"] = "blue"; })), ConfigError);
  EXPECT_THROW(config_in(dir, with([](json& j) { j["metrics"]["speed"] = true; })), ConfigError);
  EXPECT_THROW(config_in(dir, with([](json& j) { j["retrieval_k"] = 4; })), ConfigError);
  EXPECT_THROW(config_in(dir, with([](json& j) { j["k_judges"] = 0; })), ConfigError);
  EXPECT_THROW(config_in(dir, with([](json& j) { j["roles"]["judges"] = json::array({"evaluator", "generator"}); })),
               ConfigError);
  EXPECT_THROW(config_in(dir, with([](json& j) { j["roles"]["reranker"] = "scorer"; })), ConfigError);
  EXPECT_THROW(config_in(dir, with([](json& j) { j["roles"]["embedder"] = "generator"; })), ConfigError);
  EXPECT_THROW(config_in(dir, with([](json& j) { j["relevance_mode"] = "partial"; })), ConfigError);
  EXPECT_THROW(config_in(dir, with([](json& j) { j["weights"] = {{"hazard", -1}}; })), ConfigError);
  EXPECT_THROW(config_in(dir, with([](json& j) { j["robustness_kinds"] = json::array({"perturb_time"}); })),
               ConfigError);
  EXPECT_THROW(RunConfig::from_json(with([](json& j) { j.erase("corpus"); }), dir.path()), ConfigError);
  EXPECT_THROW(RunConfig::load(dir / "absent.json"), ConfigError);
}

TEST(RunConfigParse, CapabilitiesOnlyCheckedForEnabledMetrics) {
  TempDir dir;
  json j = base_config();
  j["roles"]["reranker"] = "scorer";
  j["metrics"]["relevance"] = false;
  EXPECT_NO_THROW(config_in(dir, j));
  j["roles"]["judges"] = json::array({"evaluator", "generator", "evaluator"});
  EXPECT_NO_THROW(config_in(dir, j));
}

TEST(Rounding, TenDecimals) {
  EXPECT_DOUBLE_EQ(round_report(1.0 / 3.0), 0.3333333333);
  EXPECT_DOUBLE_EQ(round_report(0.12345678915), 0.1234567892);
  EXPECT_FALSE(std::signbit(round_report(-1e-13)));
}

TEST(Aggregate, MeanSampleStdNullsAndErrors) {
  std::vector<ordered_json> rows(4);
  rows[0] = {{"id", "a"}, {"specificity", {{"score", 0.5}}}, {"errors", ordered_json::array()}};
  rows[1] = {{"id", "b"}, {"specificity", {{"score", 0.7}}}, {"errors", ordered_json::array()}};
  rows[2] = {{"id", "c"}, {"specificity", {{"score", nullptr}}}, {"errors", ordered_json::array()}};
  rows[3] = {{"id", "d"},
             {"specificity", nullptr},
             {"errors", ordered_json::array({{{"metric", "specificity"}, {"message", "boom"}}})}};
  const auto agg = aggregate_report(rows);
  const auto& s = agg["metrics"]["specificity"];
  EXPECT_EQ(s["n"], 2);
  EXPECT_NEAR(s["mean"].get<double>(), 0.6, 1e-12);
  EXPECT_NEAR(s["std"].get<double>(), std::sqrt(0.02), 1e-10);
  EXPECT_EQ(s["nulls"], 1);
  EXPECT_EQ(s["errors"], 1);
  EXPECT_EQ(agg["rows"], 4);
  EXPECT_EQ(agg["rows_with_errors"], 1);
  EXPECT_FALSE(agg["metrics"].contains("cu"));
}

TEST(Aggregate, SingleValueHasNoStd) {
  ordered_json row = {{"id", "a"}, {"specificity", {{"score", 0.25}}}, {"errors", ordered_json::array()}};
  const std::vector<ordered_json> rows = {row};
  const auto agg = aggregate_report(rows);
  const auto& s = agg["metrics"]["specificity"];
  EXPECT_EQ(s["n"], 1);
  EXPECT_DOUBLE_EQ(s["mean"].get<double>(), 0.25);
  EXPECT_TRUE(s.contains("single_value"));
}

TEST(Jsonl, RoundTripAndCsv) {
  TempDir dir;
  std::vector<ordered_json> rows = {{{"id", "q1"}, {"x", 1.5}}, {{"id", "q2"}, {"x", nullptr}}};
  write_jsonl(dir / "a" / "rows.jsonl", rows);
  EXPECT_EQ(read_jsonl(dir / "a" / "rows.jsonl"), rows);
  write_csv(dir / "rows.csv", rows);
  const auto csv = slurp(dir / "rows.csv");
  EXPECT_NE(csv.find("id"), std::string::npos);
  EXPECT_NE(csv.find("q2"), std::string::npos);
}

class PipelineRun : public ::testing::Test {
 protected:
  TempDir dir_{"hz-pipe"};
};

TEST_F(PipelineRun, EvaluateWritesOutputsAndWarmRerunIsFree) {
  auto cfg = config_in(dir_, base_config());
  cfg.dataset.count = 4;
  EXPECT_EQ(run_evaluate(cfg), kExitOk);
  const auto rows = read_jsonl(cfg.outputs.rows);
  ASSERT_EQ(rows.size(), 4u);
  for (const auto& r : rows) {
    EXPECT_TRUE(r["errors"].empty()) << r.dump();
    for (const char* key : {"specificity", "relevance", "robustness", "context_utilization", "readability"}) {
      EXPECT_TRUE(r.contains(key)) << key;
    }
    const double s = r["specificity"]["score"].get<double>();
    EXPECT_GE(s, 0.0);
    EXPECT_LE(s, 1.0);
  }
  EXPECT_TRUE(std::filesystem::exists(*cfg.outputs.csv));
  const auto first_rows = slurp(cfg.outputs.rows);
  const auto first_agg = slurp(cfg.outputs.aggregate);

  Pipeline warm(cfg);
  const auto records = read_dataset(cfg.outputs.dataset);
  const auto result = warm.evaluate(records);
  EXPECT_EQ(warm.provider_calls(), 0u);
  EXPECT_EQ(result.rows.size(), 4u);

  EXPECT_EQ(run_evaluate(cfg), kExitOk);
  EXPECT_EQ(slurp(cfg.outputs.rows), first_rows);
  EXPECT_EQ(slurp(cfg.outputs.aggregate), first_agg);
}

TEST_F(PipelineRun, DisabledMetricsAreAbsent) {
  json j = base_config();
  j["metrics"] = {{"specificity", false}, {"robustness", false}, {"relevance", false}, {"cu", false},
                  {"readability", true}};
  j["dataset"]["count"] = 3;
  j.erase("cache_dir");
  auto cfg = config_in(dir_, j);
  Pipeline p(cfg);
  const auto records = p.generate();
  const std::size_t after_generation = p.provider_calls();
  const auto result = p.evaluate(records);
  EXPECT_EQ(p.provider_calls(), after_generation);
  for (const auto& r : result.rows) {
    EXPECT_FALSE(r.contains("specificity"));
    EXPECT_FALSE(r.contains("context_utilization"));
    EXPECT_TRUE(r.contains("readability"));
  }
}

TEST_F(PipelineRun, FailingProviderGivesPartialExit) {
  json j = base_config();
  j["providers"]["scorer"] = {{"kind", "http"},
                              {"endpoint_url", "http://127.0.0.1:1"},
                              {"model_id", "down"},
                              {"capabilities", {"score"}},
                              {"max_attempts", 1},
                              {"backoff_ms", 1}};
  j["dataset"]["count"] = 2;
  j.erase("cache_dir");
  auto cfg = config_in(dir_, j);
  EXPECT_EQ(run_evaluate(cfg), kExitPartial);
  const auto rows = read_jsonl(cfg.outputs.rows);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_TRUE(rows[0]["context_utilization"].is_null());
  EXPECT_EQ(rows[0]["errors"][0]["metric"], "context_utilization");
  EXPECT_FALSE(rows[0]["specificity"].is_null());
  const auto agg = json::parse(slurp(cfg.outputs.aggregate));
  EXPECT_EQ(agg["rows_with_errors"], 2);
  EXPECT_EQ(agg["metrics"]["cu"]["errors"], 2);
}

TEST_F(PipelineRun, GenerateIsDeterministic) {
  json j = base_config();
  j["dataset"]["count"] = 3;
  j.erase("cache_dir");
  auto cfg = config_in(dir_, j);
  EXPECT_EQ(run_generate(cfg), kExitOk);
  const auto first = slurp(cfg.outputs.dataset);
  EXPECT_EQ(run_generate(cfg), kExitOk);
  EXPECT_EQ(slurp(cfg.outputs.dataset), first);
  EXPECT_EQ(read_dataset(cfg.outputs.dataset).size(), 3u);
}

TEST_F(PipelineRun, ReportRecomputesAggregate) {
  auto cfg = config_in(dir_, base_config());
  cfg.dataset.count = 2;
  ASSERT_EQ(run_evaluate(cfg), kExitOk);
  const auto agg = slurp(cfg.outputs.aggregate);
  std::filesystem::remove(cfg.outputs.aggregate);
  EXPECT_EQ(run_report(cfg), kExitOk);
  EXPECT_EQ(slurp(cfg.outputs.aggregate), agg);
}

TEST_F(PipelineRun, CliExitCodes) {
  json j = base_config();
  j["corpus"] = (data_dir() / "corpus.jsonl").string();
  j["dataset"]["count"] = 2;
  {
    std::ofstream(dir_ / "ok.json") << j.dump();
    json bad = j;
    bad["surprise"] = 1;
    std::ofstream(dir_ / "bad.json") << bad.dump();
    std::ofstream(dir_ / "broken.json") << "{not json";
  }
  EXPECT_EQ(run_cli("evaluate", dir_ / "ok.json"), 0);
  EXPECT_EQ(run_cli("report", dir_ / "ok.json"), 0);
  EXPECT_EQ(run_cli("evaluate", dir_ / "bad.json"), 1);
  EXPECT_EQ(run_cli("generate", dir_ / "broken.json"), 1);
  EXPECT_EQ(run_cli("evaluate", dir_ / "missing.json"), 1);
}
