#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "iotriage/labels.hpp"
#include "iotriage/matrix.hpp"

namespace iotriage::dataset {

enum class ColumnKind { categorical, numeric, text };

[[nodiscard]] std::string_view to_string(ColumnKind kind) noexcept;

struct Column {
  std::string name;
  ColumnKind kind = ColumnKind::categorical;

  friend bool operator==(const Column&, const Column&) = default;
};

/// A CSV as loaded: every cell kept as its original text.
struct RawTable {
  std::vector<Column> columns;
  std::vector<std::vector<std::string>> rows;
  std::string source_id{source_ids::kCustom};

  [[nodiscard]] std::optional<std::size_t> column_index(std::string_view name) const;
};

struct LoadOptions {
  /// Forces a column kind instead of inferring it.
  std::map<std::string, ColumnKind, std::less<>> kind_overrides;
};

/// Empty, "nan", "NA", "null", ... (case-insensitive).
[[nodiscard]] bool is_missing(std::string_view cell) noexcept;
/// Finite or infinite number; nullopt for anything else.
[[nodiscard]] std::optional<double> parse_number(std::string_view cell) noexcept;

[[nodiscard]] RawTable load_csv(const std::filesystem::path& path, std::string_view source_id,
                                const LoadOptions& options = {});
[[nodiscard]] RawTable parse_csv_table(std::string_view text, std::string_view source_id,
                                       const LoadOptions& options = {});

/// Keeps about max_rows rows, sampling each class proportionally (at least
/// two rows per class when available). Row order of the survivors is preserved.
[[nodiscard]] RawTable stratified_subsample(const RawTable& table, std::string_view label_column,
                                            std::size_t max_rows, std::uint64_t seed);

struct PreprocessConfig {
  std::string label_column = "label";
  std::vector<std::string> drop_columns;
  bool drop_constant_columns = true;
  /// Categorical columns with at most this many distinct values are one-hot
  /// encoded; wider ones are ordinal-encoded with a reserved unseen index.
  std::size_t onehot_max_cardinality = 32;
  bool dedupe = true;
  bool standardize = true;
  /// Rewrite raw dataset labels to native labels and drop rows whose class is
  /// outside the framework (e.g. Ransomware). Ignored for custom sources.
  bool normalize_labels = true;

  /// Defaults for edge-iiotset / ciciot2023 / custom.
  static PreprocessConfig for_source(std::string_view source_id);
  void validate() const;

  [[nodiscard]] nlohmann::json to_json() const;
  static PreprocessConfig from_json(const nlohmann::json& j);
};

/// Identifier-like Edge-IIoTset columns (hosts, timestamps, payloads) and the
/// binary label that would leak the target.
[[nodiscard]] const std::vector<std::string>& edge_iiotset_drop_columns();

/// Fitted imputation, encoding and scaling state for one set of columns.
class FeaturePipeline {
 public:
  enum class Encoding { numeric, onehot, ordinal };

  struct ColumnEncoder {
    Column column;
    Encoding encoding = Encoding::numeric;
    double numeric_fill = 0.0;       // median of the fit rows
    std::string category_fill;       // mode of the fit rows
    std::vector<std::string> categories;  // sorted; ordinal unseen index == categories.size()
    std::size_t offset = 0;
    std::size_t width = 1;
  };

  /// Fits on the listed rows of `rows`. All cells of a row are feature cells.
  static FeaturePipeline fit(const std::vector<Column>& columns,
                             const std::vector<std::vector<std::string>>& rows,
                             std::span<const std::size_t> row_indices,
                             const PreprocessConfig& config);

  [[nodiscard]] Matrix transform(const std::vector<std::vector<std::string>>& rows,
                                 std::span<const std::size_t> row_indices) const;
  /// Imputed values before encoding; numeric cells as numbers, others as text.
  [[nodiscard]] std::string imputed_key(const std::vector<std::string>& row) const;

  [[nodiscard]] const std::vector<std::string>& feature_names() const noexcept { return feature_names_; }
  [[nodiscard]] const std::vector<ColumnEncoder>& encoders() const noexcept { return encoders_; }
  [[nodiscard]] const std::vector<double>& means() const noexcept { return means_; }
  /// 1.0 for features that were constant on the fit rows (centered only).
  [[nodiscard]] const std::vector<double>& stddevs() const noexcept { return stddevs_; }
  [[nodiscard]] bool standardized() const noexcept { return standardize_; }

  [[nodiscard]] nlohmann::json to_json() const;
  static FeaturePipeline from_json(const nlohmann::json& j);

 private:
  void encode_row(const std::vector<std::string>& row, std::span<double> out) const;

  std::vector<ColumnEncoder> encoders_;
  std::vector<std::string> feature_names_;
  std::vector<double> means_;
  std::vector<double> stddevs_;
  bool standardize_ = true;
};

/// Feature cells of the cleaned rows, shared between a dataset and its splits.
struct RawStore {
  std::vector<Column> columns;
  std::vector<std::vector<std::string>> rows;
};

struct LabeledDataset {
  std::string source_id;
  PreprocessConfig config;
  Matrix features;
  std::vector<std::string> labels;
  std::vector<std::string> class_set;  // sorted distinct labels
  FeaturePipeline pipeline;
  std::shared_ptr<const RawStore> raw;
  std::vector<std::size_t> raw_rows;  // features row i <-> raw->rows[raw_rows[i]]

  [[nodiscard]] std::size_t size() const noexcept { return labels.size(); }
  [[nodiscard]] const std::vector<std::string>& feature_names() const noexcept {
    return pipeline.feature_names();
  }
  /// Index of each label in class_set.
  [[nodiscard]] std::vector<std::size_t> label_indices() const;
  [[nodiscard]] std::map<std::string, std::size_t> class_counts() const;
  /// The encoded matrix as an all-numeric table (plus label column).
  [[nodiscard]] RawTable to_table() const;
};

[[nodiscard]] LabeledDataset preprocess(const RawTable& table, const PreprocessConfig& config);

struct SplitPair {
  LabeledDataset train;
  LabeledDataset test;
  double ratio = 0.8;
  std::uint64_t seed = 42;
  std::vector<std::size_t> train_indices;  // rows of the source dataset
  std::vector<std::size_t> test_indices;
};

inline constexpr std::uint64_t kDefaultSeed = 42;

/// Stratified split; the pipeline is refit on the train side and re-applied to test.
[[nodiscard]] SplitPair split(const LabeledDataset& ds, double ratio = 0.8,
                              std::uint64_t seed = kDefaultSeed);

/// One instance of the label as a JSON object of raw feature values, keys in column order.
[[nodiscard]] nlohmann::ordered_json sample_scenario_record(const LabeledDataset& ds,
                                                            std::string_view native_label,
                                                            std::uint64_t seed);
[[nodiscard]] std::string sample_scenario(const LabeledDataset& ds, std::string_view native_label,
                                          std::uint64_t seed);

/// Deterministic Fisher-Yates driven by mt19937_64 raw output.
void shuffle_indices(std::vector<std::size_t>& indices, std::uint64_t seed);

}  // namespace iotriage::dataset
