#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <random>

#include "iotriage/error.hpp"
#include "iotriage/judging.hpp"
#include "iotriage/util.hpp"

namespace iotriage::judging {
namespace {

std::string fixture(const std::string& name) {
  return read_text_file(std::filesystem::path(IOTRIAGE_TEST_DATA) / "verdicts" / name);
}

// Random score on the half-point grid within each metric's range.
RubricScore random_score(std::mt19937_64& rng) {
  auto pick = [&](int max_points) { return static_cast<double>(rng() % (2 * max_points + 1)) / 2.0; };
  return RubricScore::from_metrics(pick(3), pick(3), pick(2), pick(2));
}

TEST(Verdict, ScoreBlockRoundTrip) {
  std::mt19937_64 rng(77);
  for (int i = 0; i < 500; ++i) {
    const auto a = random_score(rng);
    const auto b = random_score(rng);
    const auto pref = static_cast<Preference>(rng() % 3);
    const auto text = "Some reasoning first.\n" + render_score_block(a, b, pref) + "\nTrailing words.";
    const auto v = parse_verdict(text);
    EXPECT_EQ(v.score_a, a);
    EXPECT_EQ(v.score_b, b);
    ASSERT_TRUE(v.preferred);
    EXPECT_EQ(*v.preferred, pref);
    EXPECT_FALSE(v.preferred_inferred);
    EXPECT_EQ(v.path, ParsePath::score_block);
    EXPECT_EQ(v.justification, "Some reasoning first.");
  }
}

TEST(Verdict, LastScoreBlockWins) {
  const auto a = RubricScore::from_metrics(1, 1, 1, 1);
  const auto b = RubricScore::from_metrics(3, 3, 2, 2);
  const auto text = render_score_block(b, a, Preference::a) + "\nOn reflection:\n" + render_score_block(a, b, Preference::b);
  const auto v = parse_verdict(text);
  EXPECT_EQ(v.score_a.total(), 4.0);
  EXPECT_EQ(*v.preferred, Preference::b);
}

TEST(Verdict, NumericStringsAreAccepted) {
  const auto v = parse_verdict(R"(BEGIN_SCORES
{"response_a": {"attack_analysis": "3", "mitigation": 2.5, "technical_depth": 2, "clarity": "1.5", "total": "9"},
 "response_b": {"attack_analysis": 1, "mitigation": 1, "technical_depth": 1, "clarity": 1, "total": 4},
 "preferred": "Response A"}
END_SCORES)");
  EXPECT_EQ(v.score_a.total(), 9.0);
  EXPECT_EQ(*v.preferred, Preference::a);
}

TEST(Verdict, ProseWithHeadings) {
  const auto v = parse_verdict(fixture("prose_headings.txt"));
  EXPECT_EQ(v.path, ParsePath::prose);
  EXPECT_EQ(v.score_a, RubricScore::from_metrics(3, 3, 2, 1.5));
  EXPECT_EQ(v.score_b, RubricScore::from_metrics(2.5, 2.5, 1.5, 1.5));
  EXPECT_DOUBLE_EQ(v.score_a.total(), 9.5);
  EXPECT_DOUBLE_EQ(v.score_b.total(), 8.0);
  EXPECT_EQ(*v.preferred, Preference::a);
  EXPECT_FALSE(v.preferred_inferred);
  EXPECT_TRUE(validate(v).empty());
}

TEST(Verdict, ProseTable) {
  const auto v = parse_verdict(fixture("prose_table.txt"));
  EXPECT_EQ(v.score_a, RubricScore::from_metrics(2, 2, 1.5, 2));
  EXPECT_EQ(v.score_b, RubricScore::from_metrics(3, 2.5, 2, 2));
  EXPECT_EQ(*v.preferred, Preference::b);
  EXPECT_TRUE(validate(v).empty());
}

TEST(Verdict, ProseTotalsOnly) {
  const auto v = parse_verdict(fixture("totals_only.txt"));
  EXPECT_FALSE(v.score_a.has_any_metric());
  EXPECT_EQ(v.score_a.stated_total, 6.0);
  EXPECT_EQ(v.score_b.stated_total, 8.5);
  EXPECT_EQ(*v.preferred, Preference::b);
  EXPECT_TRUE(validate(v).empty());
}

TEST(Verdict, PreferenceInferredFromTotals) {
  const auto v = parse_verdict("Response A: 7/10\nResponse B: 9/10\n");
  EXPECT_EQ(*v.preferred, Preference::b);
  EXPECT_TRUE(v.preferred_inferred);
  const auto tie = parse_verdict("Response A: 7/10\nResponse B: 7/10\n");
  EXPECT_EQ(*tie.preferred, Preference::tie);
}

TEST(Verdict, UnparseableTextCarriesTheRawText) {
  const auto raw = fixture("unparseable.txt");
  try {
    (void)parse_verdict(raw);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("I cannot decide"), std::string::npos);
  }
  EXPECT_THROW((void)parse_verdict(""), ParseError);
  EXPECT_THROW((void)parse_verdict("BEGIN_SCORES\n{\"response_a\": \nEND_SCORES"), ParseError);
  EXPECT_THROW((void)parse_verdict("BEGIN_SCORES\n{}\n"), ParseError);
  EXPECT_THROW((void)parse_verdict(
                   R"(BEGIN_SCORES {"response_a": {"attack_analysis": 1}, "response_b": {"attack_analysis": 1}} END_SCORES)"),
               ParseError);
}

TEST(Verdict, JsonRoundTrip) {
  auto v = parse_verdict(fixture("prose_headings.txt"));
  v.judge_id = "judge-x";
  v.scenario_id = "edge-iiotset__password-cracking";
  const auto back = JudgeVerdict::from_json(v.to_json());
  EXPECT_EQ(back.to_json(), v.to_json());
}

TEST(Validate, RangeGridAndTotals) {
  auto s = RubricScore::from_metrics(3.5, 1, 1, 1);
  EXPECT_EQ(validate(s, "A").size(), 1u);  // stated total 6.5 is fine, 3.5 is not
  s = RubricScore::from_metrics(1.25, 1, 1, 1);
  auto v = validate(s, "A");
  ASSERT_FALSE(v.empty());
  EXPECT_EQ(v[0].field, "A.attack_analysis");
  s = RubricScore::from_metrics(1, 1, 1, 1);
  s.stated_total = 5;
  v = validate(s, "B");
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0].field, "B.total");
  RubricScore partial;
  partial.attack_analysis = 1;
  partial.stated_total = 8;
  EXPECT_FALSE(validate(partial, "A").empty());
  EXPECT_FALSE(validate(RubricScore{}, "A").empty());
  RubricScore over;
  over.stated_total = 10.5;
  EXPECT_FALSE(validate(over, "A").empty());
}

TEST(Validate, PreferenceMustAgreeWithTotals) {
  JudgeVerdict v;
  v.score_a = RubricScore::from_metrics(3, 3, 2, 2);
  v.score_b = RubricScore::from_metrics(1, 1, 1, 1);
  v.preferred = Preference::b;
  ASSERT_EQ(validate(v).size(), 1u);
  EXPECT_EQ(validate(v)[0].field, "preferred");
  v.preferred = Preference::a;
  EXPECT_TRUE(validate(v).empty());
  v.score_b = v.score_a;
  v.preferred = Preference::b;  // equal totals leave the choice to the judge
  EXPECT_TRUE(validate(v).empty());
}

TEST(Deanonymize, MapsBackThroughTheAssignment) {
  JudgeVerdict v;
  v.judge_id = "j";
  v.scenario_id = "s1";
  v.score_a = RubricScore::from_metrics(3, 3, 2, 2);
  v.score_b = RubricScore::from_metrics(1, 1, 1, 1);
  const promptkit::Assignment asg{"s1", "model-b", "model-a", 9};
  const auto scores = deanonymize(v, asg, "ds");
  ASSERT_EQ(scores.size(), 2u);
  EXPECT_EQ(scores[0].model_id, "model-b");
  EXPECT_EQ(scores[0].score.total(), 10.0);
  EXPECT_EQ(scores[1].model_id, "model-a");
  const auto again = anonymize(scores, asg);
  EXPECT_EQ(again.score_a, v.score_a);
  EXPECT_EQ(again.score_b, v.score_b);

  AssignmentStore store;
  store.put(asg);
  EXPECT_EQ(AssignmentStore::from_json(store.to_json()).get("s1"), asg);
  EXPECT_THROW((void)store.get("s2"), DataError);
  v.scenario_id = "s2";
  EXPECT_THROW((void)deanonymize(v, asg, "ds"), DataError);
}

TEST(Deanonymize, RandomizedAssignmentsRecoverModelScores) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 200; ++i) {
    const auto x = random_score(rng);
    const auto y = random_score(rng);
    const bool swap = promptkit::swap_for_seed(rng());
    const promptkit::Assignment asg{"s", swap ? "y" : "x", swap ? "x" : "y", 0};
    JudgeVerdict v;
    v.scenario_id = "s";
    v.score_a = swap ? y : x;
    v.score_b = swap ? x : y;
    for (const auto& s : deanonymize(v, asg, "d")) EXPECT_EQ(s.score, s.model_id == "x" ? x : y);
  }
}

TEST(HumanScores, ParsesAndValidates) {
  const auto h = parse_human_scores(
      "scenario_id,model_id,m1,m2,m3,m4\n"
      "edge-iiotset__xss,alpha,3,3,2,2\n"
      "ciciot2023__xss,alpha,2.5,2,1,1\n"
      "ciciot2023__xss,beta,4,2,1,1\n");
  ASSERT_EQ(h.scores.size(), 3u);
  EXPECT_EQ(h.scores[0].dataset, "edge-iiotset");
  EXPECT_EQ(h.scores[0].judge_id, "human");
  EXPECT_EQ(h.scores[1].score.total(), 6.5);
  ASSERT_EQ(h.violations.size(), 1u);
  EXPECT_EQ(h.violations[0].field.rfind("row 4", 0), 0u);
}

TEST(HumanScores, DatasetColumnAndErrors) {
  const auto h = parse_human_scores("dataset,scenario_id,model_id,m1,m2,m3,m4\ncustom,s1,m,1,1,1,1\n");
  EXPECT_EQ(h.scores[0].dataset, "custom");
  try {
    (void)parse_human_scores("scenario_id,model_id,m1,m2,m3,m4\ns,m,1,x,1,1\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("row 2"), std::string::npos);
  }
  EXPECT_THROW((void)parse_human_scores("scenario_id,model_id,m1,m2,m3\n"), ParseError);
  EXPECT_THROW((void)parse_human_scores("scenario_id,model_id,m1,m2,m3,m4\ns,m,1,1,1,1\ns,m,2,2,2,2\n"), DataError);
}

// Three judges plus human scores for two models on one dataset.
std::vector<ModelScore> hand_scores() {
  auto s = [](const char* scenario, const char* judge, const char* model, double a, double b, double c, double d) {
    return ModelScore{"ds", scenario, judge, model, RubricScore::from_metrics(a, b, c, d)};
  };
  return {s("ds__1", "j1", "alpha", 3, 3, 2, 1.5), s("ds__2", "j1", "alpha", 3, 3, 2, 2),
          s("ds__1", "j2", "alpha", 3, 3, 2, 2),   s("ds__1", "j3", "alpha", 3, 2.5, 2, 2),
          s("ds__1", "j1", "beta", 2.5, 2.5, 1.5, 1.5), s("ds__2", "j1", "beta", 2, 2, 1, 1),
          s("ds__1", "j2", "beta", 2.5, 2, 1.5, 1.5),   s("ds__1", "j3", "beta", 2, 2.5, 1.5, 1.5),
          s("ds__1", "human", "alpha", 3, 3, 2, 2),     s("ds__1", "human", "beta", 2, 2, 2, 2)};
}

TEST(Aggregate, HandComputedMeans) {
  const auto r = aggregate(hand_scores());
  // j1 alpha: (9.5 + 10) / 2 = 9.75; j2 alpha 10; j3 alpha 9.5.
  // j1 beta: (8 + 6) / 2 = 7; j2 beta 7.5; j3 beta 7.5.
  ASSERT_EQ(r.overall.size(), 2u);
  EXPECT_NEAR(*r.overall[0].judge_mean, (9.75 + 10 + 9.5) / 3, 1e-12);
  EXPECT_NEAR(*r.overall[1].judge_mean, (7 + 7.5 + 7.5) / 3, 1e-12);
  EXPECT_EQ(r.overall[0].n_judges, 3u);
  EXPECT_EQ(*r.overall[0].human_mean, 10.0);
  EXPECT_EQ(*r.overall[1].human_mean, 8.0);
  EXPECT_EQ(r.judges(), (std::vector<std::string>{"j1", "j2", "j3"}));
  const auto j1_alpha = std::find_if(r.per_judge.begin(), r.per_judge.end(),
                                     [](const auto& row) { return row.judge == "j1" && row.model == "alpha"; });
  EXPECT_EQ(j1_alpha->mean, 9.75);
  EXPECT_EQ(j1_alpha->n_cells, 2u);
}

TEST(Aggregate, OrderIndependent) {
  auto scores = hand_scores();
  const auto ref = aggregate(scores);
  std::mt19937_64 rng(8);
  for (int i = 0; i < 20; ++i) {
    std::shuffle(scores.begin(), scores.end(), rng);
    EXPECT_EQ(aggregate(scores), ref);
    EXPECT_EQ(export_csv(aggregate(scores)), export_csv(ref));
  }
}

TEST(Aggregate, MissingCellsAreCounted) {
  const std::vector<MissingCell> missing = {{"ds", "ds__3", "j2", "", "judge call failed"},
                                            {"ds", "ds__4", "j4", "alpha", "parse error"}};
  const auto r = aggregate(hand_scores(), missing);
  EXPECT_EQ(r.missing_cells, 2u);
  for (const auto& row : r.per_judge) {
    if (row.judge == "j2") EXPECT_EQ(row.n_missing, 1u);
    if (row.judge == "j4") {
      EXPECT_EQ(row.model, "alpha");
      EXPECT_EQ(row.n_cells, 0u);
    }
  }
  // A judge with no usable cell does not enter the ensemble.
  EXPECT_EQ(r.overall[0].n_judges, 3u);
  EXPECT_THROW((void)aggregate({}), DataError);
}

TEST(Export, CsvJsonSvg) {
  const auto r = aggregate(hand_scores());
  const auto csv = export_csv(r);
  const auto rows = parse_csv(csv);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"dataset", "model", "judge", "mean", "n_cells"}));
  ASSERT_EQ(rows.size(), 1u + 6u + 4u);
  EXPECT_EQ(rows[7], (std::vector<std::string>{"ds", "alpha", "ensemble", "9.7500", "3"}));
  EXPECT_EQ(rows[8], (std::vector<std::string>{"ds", "alpha", "human", "10.0000", "1"}));
  EXPECT_EQ(AggregateReport::from_json(nlohmann::json::parse(export_json(r))), r);
  const auto svg = export_svg(r);
  EXPECT_EQ(svg.rfind("<svg", 0), 0u);
  for (const char* j : {"j1", "j2", "j3"}) {
    EXPECT_NE(svg.find(std::string("data-judge=\"") + j + "\""), std::string::npos);
  }
  EXPECT_NE(svg.find("ensemble"), std::string::npos);
  EXPECT_NE(svg.find("</svg>"), std::string::npos);
}

TEST(Misc, DatasetOfScenario) {
  EXPECT_EQ(dataset_of_scenario("edge-iiotset__password-cracking"), "edge-iiotset");
  EXPECT_EQ(dataset_of_scenario("plain"), "plain");
}

}  // namespace
}  // namespace iotriage::judging
