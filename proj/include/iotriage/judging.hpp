#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "iotriage/promptkit.hpp"

namespace iotriage::judging {

inline constexpr std::string_view kHumanJudge = "human";
inline constexpr std::string_view kEnsembleJudge = "ensemble";

/// Scores of one response. Metrics may be absent when a judge only stated a
/// total in prose; otherwise the total is always the metric sum.
struct RubricScore {
  std::optional<double> attack_analysis;  // 0..3
  std::optional<double> mitigation;       // 0..3
  std::optional<double> technical_depth;  // 0..2
  std::optional<double> clarity;          // 0..2
  std::optional<double> stated_total;     // as written by the judge

  [[nodiscard]] bool has_all_metrics() const noexcept;
  [[nodiscard]] bool has_any_metric() const noexcept;
  /// Metric sum when all metrics are present, else the stated total.
  /// Throws DataError when neither is available.
  [[nodiscard]] double total() const;

  static RubricScore from_metrics(double m1, double m2, double m3, double m4);
  [[nodiscard]] nlohmann::json to_json() const;
  static RubricScore from_json(const nlohmann::json& j);
  friend bool operator==(const RubricScore&, const RubricScore&) = default;
};

enum class Preference { a, b, tie };
[[nodiscard]] std::string_view to_string(Preference p) noexcept;

enum class ParsePath { score_block, prose };

struct JudgeVerdict {
  std::string judge_id;
  std::string scenario_id;
  RubricScore score_a;
  RubricScore score_b;
  std::optional<Preference> preferred;
  bool preferred_inferred = false;  // prose without an explicit choice: taken from totals
  std::string justification;
  std::string raw;
  ParsePath path = ParsePath::score_block;

  [[nodiscard]] nlohmann::json to_json() const;
  static JudgeVerdict from_json(const nlohmann::json& j);
};

/// The block the evaluation prompt asks for: BEGIN_SCORES / one JSON line / END_SCORES.
[[nodiscard]] std::string render_score_block(const RubricScore& a, const RubricScore& b, Preference preferred);

/// Reads the last score block, else falls back to prose ("x/10", "x out of
/// 10", "<metric name>: x/y" lines under Response A / Response B headings).
/// Throws ParseError carrying the raw text when no scores can be found.
[[nodiscard]] JudgeVerdict parse_verdict(std::string_view raw);

struct Violation {
  std::string field;
  std::string message;
};

/// Range, half-point grid and stated-total checks for one score.
[[nodiscard]] std::vector<Violation> validate(const RubricScore& score, std::string_view label);
/// Both scores plus the preferred-vs-totals consistency check.
[[nodiscard]] std::vector<Violation> validate(const JudgeVerdict& verdict);

// --- de-anonymization -------------------------------------------------------

/// One judge's score of one evaluated model on one scenario.
struct ModelScore {
  std::string dataset;
  std::string scenario_id;
  std::string judge_id;
  std::string model_id;
  RubricScore score;

  friend bool operator==(const ModelScore&, const ModelScore&) = default;
};

/// Scenario id -> assignment, persisted as JSON next to the prompts.
class AssignmentStore {
 public:
  void put(const promptkit::Assignment& assignment);
  /// Throws DataError when nothing was recorded for the scenario.
  [[nodiscard]] const promptkit::Assignment& get(const std::string& scenario_id) const;
  [[nodiscard]] bool contains(const std::string& scenario_id) const;
  [[nodiscard]] std::size_t size() const noexcept { return by_scenario_.size(); }

  [[nodiscard]] nlohmann::json to_json() const;
  static AssignmentStore from_json(const nlohmann::json& j);

 private:
  std::map<std::string, promptkit::Assignment> by_scenario_;
};

/// Maps A/B back to model ids: {score of model A, score of model B}.
[[nodiscard]] std::vector<ModelScore> deanonymize(const JudgeVerdict& verdict, const promptkit::Assignment& assignment,
                                                  const std::string& dataset);
[[nodiscard]] std::vector<ModelScore> deanonymize(const JudgeVerdict& verdict, const AssignmentStore& store,
                                                  const std::string& dataset);
/// Inverse of deanonymize for the score part of a verdict.
[[nodiscard]] JudgeVerdict anonymize(const std::vector<ModelScore>& scores, const promptkit::Assignment& assignment);

// --- human scores -----------------------------------------------------------

struct HumanScores {
  std::vector<ModelScore> scores;        // judge_id "human", total = metric sum
  std::vector<Violation> violations;     // field prefixed with "row N"
};

/// CSV columns scenario_id, model_id, m1, m2, m3, m4 and optionally dataset
/// (otherwise the scenario id prefix before "__"). Throws ParseError naming
/// the row for malformed rows and DataError for duplicate (scenario, model) rows.
[[nodiscard]] HumanScores parse_human_scores(std::string_view csv_text);
[[nodiscard]] HumanScores ingest_human_scores(const std::filesystem::path& path);

/// "edge-iiotset__password-cracking" -> "edge-iiotset".
[[nodiscard]] std::string dataset_of_scenario(std::string_view scenario_id);

// --- aggregation ------------------------------------------------------------

/// A cell that produced no usable score (failed call, parse error, violation).
struct MissingCell {
  std::string dataset;
  std::string scenario_id;
  std::string judge_id;
  std::string model_id;  // empty when the whole verdict is missing
  std::string reason;

  friend bool operator==(const MissingCell&, const MissingCell&) = default;
};

struct AggregateRow {
  std::string dataset;
  std::string model;
  std::string judge;
  double mean = 0.0;
  std::size_t n_cells = 0;
  std::size_t n_missing = 0;

  friend bool operator==(const AggregateRow&, const AggregateRow&) = default;
};

struct OverallRow {
  std::string dataset;
  std::string model;
  std::optional<double> judge_mean;  // mean of the per-judge means
  std::size_t n_judges = 0;
  std::optional<double> human_mean;
  std::size_t n_human = 0;

  friend bool operator==(const OverallRow&, const OverallRow&) = default;
};

struct AggregateReport {
  std::vector<AggregateRow> per_judge;  // sorted by dataset, model, judge; human rows included
  std::vector<OverallRow> overall;      // sorted by dataset, model
  std::size_t missing_cells = 0;

  [[nodiscard]] std::vector<std::string> judges() const;  // non-human, sorted
  [[nodiscard]] nlohmann::json to_json() const;
  static AggregateReport from_json(const nlohmann::json& j);
  friend bool operator==(const AggregateReport&, const AggregateReport&) = default;
};

/// Means per (judge, model, dataset), then per (model, dataset) the mean of
/// the non-human judges' means and the human mean. Independent of input order.
/// Throws DataError when there are no scores.
[[nodiscard]] AggregateReport aggregate(const std::vector<ModelScore>& scores,
                                        const std::vector<MissingCell>& missing = {});

/// Columns dataset, model, judge, mean, n_cells; per-judge rows, then
/// "ensemble" and "human" rows per (dataset, model).
[[nodiscard]] std::string export_csv(const AggregateReport& report);
[[nodiscard]] std::string export_json(const AggregateReport& report);
/// Grouped bars: one group per judge plus the overall ensemble and human means.
[[nodiscard]] std::string export_svg(const AggregateReport& report);

}  // namespace iotriage::judging
