#include <gtest/gtest.h>

#include <algorithm>
#include <mutex>
#include <random>

#include "fixtures.hpp"
#include "hazeval/error.hpp"
#include "hazeval/robustness.hpp"
#include "hazeval/text.hpp"

using namespace hazeval;
using testing_support::mock_provider;

namespace {

std::vector<std::string> sorted_words(std::string_view s) {
  std::vector<std::string> w;
  std::string cur;
  for (char c : s) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      cur += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    } else if (!cur.empty()) {
      w.push_back(cur);
      cur.clear();
    }
  }
  if (!cur.empty()) w.push_back(cur);
  std::sort(w.begin(), w.end());
  return w;
}

StructuredAnswer fixed_answer() {
  StructuredAnswer a;
  a.intro = "Roads and bridges face stress.";
  a.segments = {"Raise culverts.", "Inspect joints."};
  return a;
}

}  // namespace

TEST(Paraphrase, MockRotatesWords) {
  auto chat = mock_provider("chat", {Capability::chat});
  const std::string q = "How will heat waves affect rail lines in Pima County, AZ?";
  const auto p = paraphrase_question(q, *chat);
  EXPECT_NE(to_lower(p), to_lower(q));
  EXPECT_EQ(sorted_words(p), sorted_words(q));
}

TEST(Paraphrase, IdenticalReplyIsRepairedOnce) {
  int calls = 0;
  MockHandlers h;
  h.chat = [&calls](const ChatRequest&) -> std::string { return ++calls == 1 ? "  is it  SAFE? " : "Safe, is it?"; };
  auto chat = mock_provider("chat", {Capability::chat}, h);
  EXPECT_EQ(paraphrase_question("Is it safe?", *chat), "Safe, is it?");
  EXPECT_EQ(calls, 2);

  MockHandlers echo;
  echo.chat = [](const ChatRequest&) { return std::string("is it safe?"); };
  auto parrot = mock_provider("chat", {Capability::chat}, echo);
  EXPECT_THROW(paraphrase_question("Is it safe?", *parrot), ReplyError);
  EXPECT_THROW(paraphrase_question("  ", *parrot), PreconditionError);
}

TEST(Perturb, TableMembershipOverManyRecords) {
  const DatasetTables tables;
  const auto& table = tables.hazards;
  std::mt19937_64 gen(99);
  for (std::size_t i = 0; i < 1000; ++i) {
    const auto q = generate_question(tables, 5000, i);
    const std::uint64_t seed = gen();

    const auto h = perturb_question(q, tables, VariantKind::perturb_hazard, seed);
    EXPECT_NE(h.profile.hazard, q.profile.hazard);
    EXPECT_TRUE(table.contains(h.profile.hazard, h.profile.location));
    if (table.contains(h.profile.hazard, q.profile.location)) EXPECT_EQ(h.profile.location, q.profile.location);

    const auto l = perturb_question(q, tables, VariantKind::perturb_location, seed);
    EXPECT_EQ(l.profile.hazard, q.profile.hazard);
    EXPECT_NE(l.profile.location, q.profile.location);
    EXPECT_TRUE(table.contains(l.profile.hazard, l.profile.location));

    const auto b = perturb_question(q, tables, VariantKind::perturb_both, seed);
    EXPECT_NE(b.profile.hazard, q.profile.hazard);
    EXPECT_NE(b.profile.location, q.profile.location);
    EXPECT_TRUE(table.contains(b.profile.hazard, b.profile.location));

    for (const auto* v : {&h, &l, &b}) {
      EXPECT_FALSE(has_residual_placeholder(v->question_text)) << v->question_text;
      EXPECT_EQ(v->template_id, q.template_id);
      EXPECT_EQ(v->profile.profession, q.profile.profession);
      EXPECT_EQ(v->profile.timeline_years, q.profile.timeline_years);
    }
    if (i < 20) {
      const auto again = perturb_question(q, tables, VariantKind::perturb_both, seed);
      EXPECT_EQ(again.question_text, b.question_text);
    }
  }
}

TEST(Perturb, ParaphraseIsNotAPerturbation) {
  const DatasetTables tables;
  EXPECT_THROW(perturb_question(generate_question(tables, 1, 0), tables, VariantKind::paraphrase, 1),
               PreconditionError);
}

TEST(Perturb, SingleLocationTableCannotPerturbLocation) {
  DatasetTables tables;
  tables.hazards = HazardLocationTable({{HazardKind::drought, {{"Kern County", "CA"}}},
                                        {HazardKind::wildfire, {{"Kern County", "CA"}}}});
  const auto q = generate_question(tables, 3, 0);
  EXPECT_THROW(perturb_question(q, tables, VariantKind::perturb_location, 1), PreconditionError);
  EXPECT_THROW(perturb_question(q, tables, VariantKind::perturb_both, 1), PreconditionError);
  const auto h = perturb_question(q, tables, VariantKind::perturb_hazard, 1);
  EXPECT_NE(h.profile.hazard, q.profile.hazard);
}

TEST(VariantKinds, Names) {
  for (VariantKind k : kAllVariantKinds) EXPECT_EQ(parse_variant_kind(to_string(k)), k);
  EXPECT_THROW(parse_variant_kind("perturb_time"), ConfigError);
}

TEST(RunRobustness, NoKindsNoWork) {
  const DatasetTables tables;
  auto p = mock_provider("p");
  int answered = 0;
  const auto records = run_robustness(generate_question(tables, 1, 0), fixed_answer(), {}, tables, *p, *p,
                                      [&](const QuestionRecord&) { ++answered; return fixed_answer(); });
  EXPECT_TRUE(records.empty());
  EXPECT_EQ(answered, 0);
  EXPECT_EQ(p->backend_calls(), 0u);
  const auto s = summarize_robustness(records);
  EXPECT_FALSE(s.paraphrase.has_value());
  EXPECT_FALSE(s.perturbation.has_value());
}

TEST(RunRobustness, IdenticalAnswersAreFullyConsistent) {
  const DatasetTables tables;
  auto p = mock_provider("p");
  const auto q = generate_question(tables, 1, 0);
  const std::vector<VariantKind> kinds(kAllVariantKinds.begin(), kAllVariantKinds.end());
  const auto records = run_robustness(q, fixed_answer(), kinds, tables, *p, *p,
                                      [](const QuestionRecord&) { return fixed_answer(); });
  ASSERT_EQ(records.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(records[i].kind, kinds[i]);
    EXPECT_NEAR(records[i].consistency, 1.0, 1e-12);
    EXPECT_NE(records[i].variant_question, q.question_text);
  }
  const auto s = summarize_robustness(records);
  EXPECT_NEAR(*s.paraphrase, 1.0, 1e-12);
  EXPECT_NEAR(*s.perturbation, 1.0, 1e-12);
}

TEST(RunRobustness, VariantQuestionReachesTheAnswerer) {
  const DatasetTables tables;
  auto p = mock_provider("p");
  const auto q = generate_question(tables, 8, 2);
  std::mutex m;
  std::vector<std::string> seen;
  const auto records = run_robustness(q, fixed_answer(), {VariantKind::perturb_location}, tables, *p, *p,
                                      [&](const QuestionRecord& v) {
                                        std::lock_guard lock(m);
                                        seen.push_back(v.question_text);
                                        StructuredAnswer a;
                                        a.intro = v.question_text;
                                        return a;
                                      },
                                      {42, 1});
  ASSERT_EQ(seen.size(), 1u);
  EXPECT_EQ(records[0].variant_question, seen[0]);
  EXPECT_LT(records[0].consistency, 1.0);
  EXPECT_EQ(to_json(records[0])["kind"], "perturb_location");
}

TEST(Summary, SeparatesParaphraseFromPerturbations) {
  std::vector<RobustnessRecord> rs(4);
  rs[0].kind = VariantKind::paraphrase;
  rs[0].consistency = 0.9;
  rs[1].kind = VariantKind::perturb_hazard;
  rs[1].consistency = 0.2;
  rs[2].kind = VariantKind::perturb_location;
  rs[2].consistency = 0.4;
  rs[3].kind = VariantKind::perturb_both;
  rs[3].consistency = 0.6;
  const auto s = summarize_robustness(rs);
  EXPECT_DOUBLE_EQ(*s.paraphrase, 0.9);
  EXPECT_NEAR(*s.perturbation, 0.4, 1e-15);
}

TEST(Consistency, EmptyAnswerRejected) {
  auto p = mock_provider("p");
  EXPECT_THROW(consistency_score(StructuredAnswer{}, fixed_answer(), *p), PreconditionError);
}
