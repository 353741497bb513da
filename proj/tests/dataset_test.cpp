#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <set>

#include "iotriage/dataset.hpp"
#include "iotriage/error.hpp"
#include "synthetic.hpp"

namespace iotriage::dataset {
namespace {

LabeledDataset edge(std::size_t rows_per_class = 20, std::uint64_t seed = 1) {
  const auto table = parse_csv_table(testing::synthetic_edge_csv(rows_per_class, seed), source_ids::kEdgeIIoTset);
  return preprocess(table, PreprocessConfig::for_source(source_ids::kEdgeIIoTset));
}

TEST(Dataset, ParseNumberAndMissing) {
  EXPECT_EQ(parse_number("1.5"), 1.5);
  EXPECT_EQ(parse_number(" 2 "), 2.0);
  EXPECT_EQ(parse_number("abc"), std::nullopt);
  EXPECT_TRUE(is_missing(""));
  EXPECT_TRUE(is_missing("NaN"));
  EXPECT_TRUE(is_missing("null"));
  EXPECT_FALSE(is_missing("0"));
}

TEST(Dataset, ColumnKindsAreInferred) {
  const auto t = parse_csv_table("a,b,label\n1,x,A\n2.5,y,B\n,z,A\n", source_ids::kCustom);
  ASSERT_EQ(t.columns.size(), 3u);
  EXPECT_EQ(t.columns[0].kind, ColumnKind::numeric);
  EXPECT_EQ(t.columns[1].kind, ColumnKind::categorical);
}

TEST(Dataset, EdgePreprocessDropsLeaksAndNormalizesLabels) {
  const auto ds = edge();
  for (const auto& name : ds.feature_names()) {
    EXPECT_EQ(name.find("Attack_label"), std::string::npos);
    EXPECT_EQ(name.find("ip.src_host"), std::string::npos);
    EXPECT_EQ(name.find("frame.time"), std::string::npos);
  }
  const std::set<std::string> classes(ds.class_set.begin(), ds.class_set.end());
  EXPECT_EQ(classes.size(), 14u);
  EXPECT_TRUE(classes.count("Password Cracking"));
  EXPECT_TRUE(classes.count("TCP SYN Flood"));
  EXPECT_FALSE(classes.count("DDoS_TCP"));
  EXPECT_TRUE(std::is_sorted(ds.class_set.begin(), ds.class_set.end()));
}

TEST(Dataset, OneHotEncodesNarrowCategoricals) {
  const auto ds = edge();
  std::size_t method_columns = 0;
  for (const auto& name : ds.feature_names()) {
    if (name.rfind("http.request.method", 0) == 0) ++method_columns;
  }
  EXPECT_EQ(method_columns, 4u);
}

TEST(Dataset, StandardizedTrainColumnsHaveZeroMean) {
  const auto ds = edge(30);
  for (std::size_t c = 0; c < ds.features.cols(); ++c) {
    double sum = 0.0;
    for (std::size_t r = 0; r < ds.features.rows(); ++r) sum += ds.features(r, c);
    EXPECT_NEAR(sum / static_cast<double>(ds.features.rows()), 0.0, 1e-9) << ds.feature_names()[c];
  }
}

TEST(Dataset, DuplicatesAndOutOfFrameworkLabelsAreRemoved) {
  const std::string csv =
      "x,y,label\n1,2,Backdoor_Malware\n1,2,Backdoor_Malware\n3,4,XSS\n5,6,Mirai-udpplain\n7,8,XSS\n";
  const auto t = parse_csv_table(csv, source_ids::kCICIoT2023);
  const auto ds = preprocess(t, PreprocessConfig::for_source(source_ids::kCICIoT2023));
  EXPECT_EQ(ds.size(), 3u);
  EXPECT_EQ(ds.class_counts().at("Backdoor"), 1u);
}

TEST(Dataset, SingleClassTableIsRejected) {
  const auto t = parse_csv_table("x,label\n1,A\n2,A\n", source_ids::kCustom);
  EXPECT_THROW((void)preprocess(t, PreprocessConfig::for_source(source_ids::kCustom)), DataError);
}

TEST(Dataset, MissingLabelColumnIsDataError) {
  const auto t = parse_csv_table("x,y\n1,2\n", source_ids::kCustom);
  EXPECT_THROW((void)preprocess(t, PreprocessConfig::for_source(source_ids::kCustom)), DataError);
}

TEST(Dataset, SplitIsStratifiedDisjointAndDeterministic) {
  const auto ds = edge(25);
  const auto a = split(ds, 0.8, kDefaultSeed);
  const auto b = split(ds, 0.8, kDefaultSeed);
  EXPECT_EQ(a.train_indices, b.train_indices);
  EXPECT_EQ(a.test_indices, b.test_indices);
  std::set<std::size_t> train(a.train_indices.begin(), a.train_indices.end());
  for (auto i : a.test_indices) EXPECT_FALSE(train.count(i));
  EXPECT_EQ(a.train.size() + a.test.size(), ds.size());
  const auto total = ds.class_counts();
  const auto tr = a.train.class_counts();
  for (const auto& [label, n] : total) {
    const auto expected = std::llround(0.8 * static_cast<double>(n));
    EXPECT_NEAR(static_cast<double>(tr.at(label)), static_cast<double>(expected), 1.0) << label;
  }
  const auto c = split(ds, 0.8, 7);
  EXPECT_NE(a.train_indices, c.train_indices);
}

TEST(Dataset, SplitRejectsBadRatio) {
  const auto ds = edge(5);
  EXPECT_THROW((void)split(ds, 1.0), ConfigError);
  EXPECT_THROW((void)split(ds, 0.0), ConfigError);
}

TEST(Dataset, SubsampleKeepsEveryClass) {
  const auto t = parse_csv_table(testing::synthetic_edge_csv(50, 3), source_ids::kEdgeIIoTset);
  const auto small = stratified_subsample(t, "Attack_type", 140, 42);
  EXPECT_LE(small.rows.size(), 150u);
  std::set<std::string> labels;
  for (const auto& r : small.rows) labels.insert(r.back());
  EXPECT_EQ(labels.size(), 14u);
  EXPECT_EQ(stratified_subsample(t, "Attack_type", 140, 42).rows, small.rows);
}

TEST(Dataset, ScenarioSampleHasRawValuesOfTheLabel) {
  const auto ds = edge();
  const auto record = sample_scenario_record(ds, "Password Cracking", 42);
  ASSERT_TRUE(record.is_object());
  EXPECT_TRUE(record.contains("http.request.method"));
  EXPECT_FALSE(record.contains("Attack_type"));
  EXPECT_EQ(sample_scenario(ds, "Password Cracking", 42), sample_scenario(ds, "Password Cracking", 42));
  EXPECT_THROW((void)sample_scenario(ds, "Nope", 42), DataError);
}

TEST(Dataset, PipelineRoundTripsThroughJson) {
  const auto ds = edge();
  const auto copy = FeaturePipeline::from_json(ds.pipeline.to_json());
  std::vector<std::size_t> rows(ds.raw_rows.begin(), ds.raw_rows.begin() + 10);
  const auto a = ds.pipeline.transform(ds.raw->rows, rows);
  const auto b = copy.transform(ds.raw->rows, rows);
  ASSERT_EQ(a.cols(), b.cols());
  for (std::size_t r = 0; r < a.rows(); ++r) {
    for (std::size_t c = 0; c < a.cols(); ++c) EXPECT_DOUBLE_EQ(a(r, c), b(r, c));
  }
}

TEST(Dataset, ShuffleIsAPermutation) {
  std::vector<std::size_t> v(100);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = i;
  auto w = v;
  shuffle_indices(w, 9);
  EXPECT_NE(v, w);
  std::sort(w.begin(), w.end());
  EXPECT_EQ(v, w);
}

}  // namespace
}  // namespace iotriage::dataset
