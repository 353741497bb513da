#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "iotriage/dataset.hpp"
#include "iotriage/detect.hpp"
#include "iotriage/judging.hpp"
#include "iotriage/llm_gateway.hpp"

namespace iotriage::pipeline {

inline constexpr std::string_view kVersion = "0.1.0";

struct DatasetSpec {
  std::string source_id;
  std::filesystem::path path;
  std::size_t max_rows = 0;  // stratified subsample when nonzero
  dataset::PreprocessConfig preprocess;

  [[nodiscard]] nlohmann::json to_json() const;
};

struct EmbedderSpec {
  std::string kind = "hashing";  // "hashing" or "remote"
  std::size_t dimension = 384;
  std::optional<llm::EndpointConfig> endpoint;  // remote only
  double similarity_floor = 0.15;

  [[nodiscard]] nlohmann::json to_json() const;
};

/// One JSON file drives every subcommand. Relative paths resolve against the
/// directory of the config file.
struct RunConfig {
  std::vector<DatasetSpec> datasets;
  double split_ratio = 0.8;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> models = {"rf", "knn", "gnb", "logreg"};
  detect::ForestParams forest;
  std::size_t knn_k = detect::kDefaultK;
  detect::LogRegParams logreg;

  std::optional<std::filesystem::path> attack_kb;  // shipped KB when empty
  std::optional<std::filesystem::path> device_kb;
  EmbedderSpec embedder;
  std::string device = "Raspberry Pi 4 Model B";

  std::vector<llm::EndpointConfig> evaluated;
  std::vector<llm::EndpointConfig> judges;
  std::optional<std::filesystem::path> scenario_template;
  std::optional<std::filesystem::path> evaluation_template;
  std::vector<std::string> redact_names;  // besides the evaluated endpoint ids and models
  /// Sources whose native attack labels become scenarios; defaults to the dataset sources.
  std::vector<std::string> scenario_sources;
  std::optional<std::filesystem::path> human_scores;

  std::filesystem::path out_dir = "runs/default";
  llm::Mode mode = llm::Mode::replay;
  std::optional<std::filesystem::path> fixture_dir;  // <out_dir>/fixtures when empty
  double max_requests_per_second = 0.0;
  std::size_t parallel_scenarios = 4;

  /// Throws ConfigError on invalid values, a missing seed or a missing file.
  void validate() const;
  [[nodiscard]] std::uint64_t run_seed() const;
  [[nodiscard]] std::filesystem::path fixtures() const;
  [[nodiscard]] std::vector<std::string> sources_for_scenarios() const;

  [[nodiscard]] nlohmann::json to_json() const;
  static RunConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
  static RunConfig load(const std::filesystem::path& path);
};

/// Sub-paths of a run directory.
struct RunLayout {
  std::filesystem::path root;

  [[nodiscard]] std::filesystem::path prompts() const { return root / "prompts"; }
  [[nodiscard]] std::filesystem::path completions() const { return root / "completions"; }
  [[nodiscard]] std::filesystem::path verdicts() const { return root / "verdicts"; }
  [[nodiscard]] std::filesystem::path reports() const { return root / "reports"; }
  [[nodiscard]] std::filesystem::path models() const { return root / "models"; }
  [[nodiscard]] std::filesystem::path kb() const { return root / "kb"; }
  [[nodiscard]] std::filesystem::path manifest() const { return root / "manifest.json"; }
  [[nodiscard]] std::filesystem::path assignments() const { return root / "assignments.json"; }
};

/// Config snapshot, seed, mode and resource versions; enough to rerun in replay mode.
void write_manifest(const RunConfig& config, const std::string& command);

// --- detect -----------------------------------------------------------------

struct DetectResult {
  std::map<std::string, detect::BenchmarkResult> by_source;
};

/// Preprocess, split, train every configured model, benchmark and write
/// reports/detect/<source>/ plus models/<source>/<kind>.json.
DetectResult cmd_detect(const RunConfig& config);

// --- kb ---------------------------------------------------------------------

struct KbResult {
  std::size_t attack_entries = 0;
  std::size_t device_entries = 0;
  std::filesystem::path attack_index;
  std::filesystem::path device_index;
};

/// Validates both KBs and writes their indices under kb/.
KbResult cmd_kb(const RunConfig& config);
/// The shipped label mapping in its file shape.
[[nodiscard]] std::string dump_labels();

// --- triage and judging -----------------------------------------------------

struct TriageOptions {
  /// See select_scenarios.
  std::string scenario_filter;
  std::shared_ptr<llm::Transport> transport;  // HttpTransport when null
  llm::Sleeper sleeper;
  llm::EnvLookup env = llm::process_env;
};

struct TriageResult {
  std::vector<std::string> scenario_ids;
  llm::MatrixBundle bundle;
  std::vector<judging::JudgeVerdict> verdicts;
  std::vector<judging::MissingCell> missing;
  std::optional<judging::AggregateReport> report;  // empty when nothing could be scored
  std::size_t network_calls = 0;
  std::size_t new_completions = 0;  // cells not resumed from the run directory
};

/// The full pipeline from scenario enumeration to exported reports. Triage
/// works from ground-truth labels; the datasets only supply feature instances.
TriageResult cmd_triage(const RunConfig& config, const TriageOptions& options = {});

/// Re-judges from the scenario prompts and evaluated completions already in
/// the run directory; no datasets are read.
TriageResult cmd_judge(const RunConfig& config, const TriageOptions& options = {});

/// Re-renders reports/aggregate.{csv,svg,json} from reports/aggregate.json,
/// into out_dir when given. Re-export of an unchanged report is byte-identical.
void cmd_report(const std::filesystem::path& run_dir, const std::optional<std::filesystem::path>& out_dir = {});

/// Scenarios whose id or native label equals the filter (case-insensitive);
/// when none does, those whose canonical name does. Empty filter keeps all.
[[nodiscard]] std::vector<promptkit::ScenarioSpec> select_scenarios(const std::vector<promptkit::ScenarioSpec>& all,
                                                                    const std::string& filter);

/// Per-scenario seed for instance sampling and the A/B coin flip.
[[nodiscard]] std::uint64_t scenario_seed(std::uint64_t run_seed, const std::string& scenario_id);

}  // namespace iotriage::pipeline
