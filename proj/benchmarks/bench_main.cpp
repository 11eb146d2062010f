#include <benchmark/benchmark.h>

#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include "hazeval/corpus_index.hpp"
#include "hazeval/dataset.hpp"
#include "hazeval/mock_backend.hpp"
#include "hazeval/readability.hpp"
#include "hazeval/specificity.hpp"

using namespace hazeval;

namespace {

std::vector<Document> random_corpus(std::size_t n, std::uint64_t seed) {
  static const std::vector<std::string> vocab = {"flood", "levee", "storm", "surge", "heat",   "grid",
                                                 "bridge", "drought", "pump", "culvert", "rail", "outage"};
  std::mt19937_64 gen(seed);
  std::vector<Document> docs;
  for (std::size_t i = 0; i < n; ++i) {
    std::string body;
    for (int w = 0; w < 40; ++w) body += vocab[gen() % vocab.size()] + " ";
    char id[32];
    std::snprintf(id, sizeof id, "doc%06zu", i);
    docs.push_back({id, body});
  }
  return docs;
}

EmbedFn hashed(std::size_t dim) {
  return [dim](const std::vector<std::string>& texts) {
    std::vector<Embedding> out;
    for (const auto& t : texts) out.push_back(hashed_embedding(t, dim, 7));
    return out;
  };
}

void BM_Retrieve(benchmark::State& state) {
  const auto docs = random_corpus(static_cast<std::size_t>(state.range(0)), 1);
  const auto index = CorpusIndex::build(docs, hashed(256));
  const auto query = hashed_embedding("storm surge levee outage", 256, 7);
  for (auto _ : state) benchmark::DoNotOptimize(index.retrieve(query, 5));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Retrieve)->Arg(1000)->Arg(10000);

void BM_SpecificityAggregate(benchmark::State& state) {
  std::mt19937_64 gen(2);
  std::vector<ConsensusVector> consensus;
  for (int c = 0; c < state.range(0); ++c) {
    std::vector<ClaimJudgment> js(3);
    for (auto& j : js) {
      for (auto& l : j.labels) l = static_cast<JudgeLabel>(gen() % 3);
    }
    consensus.push_back(majority_vote(js));
  }
  const SpecificityWeights w;
  for (auto _ : state) benchmark::DoNotOptimize(aggregate(dimension_average(consensus), w));
}
BENCHMARK(BM_SpecificityAggregate)->Arg(10)->Arg(1000);

void BM_Readability(benchmark::State& state) {
  std::string text;
  for (int i = 0; i < state.range(0); ++i) {
    text += "Coastal flooding can overtop the levee and damage pumping infrastructure. ";
  }
  for (auto _ : state) benchmark::DoNotOptimize(readability(text));
  state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(text.size()));
}
BENCHMARK(BM_Readability)->Arg(10)->Arg(200);

void BM_GenerateQuestions(benchmark::State& state) {
  const DatasetTables tables;
  for (auto _ : state) benchmark::DoNotOptimize(generate_questions(tables, 3, static_cast<std::size_t>(state.range(0))));
}
BENCHMARK(BM_GenerateQuestions)->Arg(100);

}  // namespace

BENCHMARK_MAIN();
