#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "iotriage/dataset.hpp"
#include "iotriage/matrix.hpp"
#include "iotriage/metrics.hpp"

namespace iotriage::detect {

inline constexpr int kModelFormatVersion = 1;

/// Common interface of every detection model, built-in or plug-in.
/// Implementations are immutable after training; predict is reentrant.
class Classifier {
 public:
  virtual ~Classifier() = default;

  /// "rf", "knn", "gnb", "logreg" or a plug-in name.
  [[nodiscard]] virtual std::string kind() const = 0;
  [[nodiscard]] virtual const std::vector<std::string>& class_set() const = 0;
  [[nodiscard]] virtual std::size_t feature_count() const = 0;
  /// Position in class_set of the predicted class.
  [[nodiscard]] virtual std::size_t predict_index(std::span<const double> row) const = 0;
  /// Posterior over class_set, for models that have one.
  [[nodiscard]] virtual std::optional<std::vector<double>> predict_proba(std::span<const double> /*row*/) const {
    return std::nullopt;
  }

  [[nodiscard]] virtual nlohmann::json params_json() const = 0;
  [[nodiscard]] virtual nlohmann::json state_json() const = 0;
};

struct TrainMeta {
  std::uint64_t seed = 0;
  double train_seconds = 0.0;
  std::size_t rows = 0;
  std::size_t features = 0;

  [[nodiscard]] nlohmann::json to_json() const;
  static TrainMeta from_json(const nlohmann::json& j);
};

struct TrainedModel {
  std::shared_ptr<const Classifier> model;
  TrainMeta meta;

  [[nodiscard]] std::string kind() const { return model->kind(); }
  [[nodiscard]] const std::vector<std::string>& class_set() const { return model->class_set(); }
};

// --- training ---------------------------------------------------------------

struct ForestParams {
  enum class FeatureSampling { sqrt, log2, fixed };

  std::size_t n_trees = 100;
  std::optional<std::size_t> max_depth;  // nullopt = unlimited
  std::size_t min_samples_split = 2;
  FeatureSampling features_per_split = FeatureSampling::sqrt;
  std::size_t fixed_features = 0;  // used when features_per_split == fixed
  bool bootstrap = true;
  std::uint64_t seed = 42;
  /// Candidate thresholds per feature. Features with at most this many distinct
  /// training values are split exactly; wider ones on quantile cut points.
  std::size_t max_bins = 256;
  std::size_t n_threads = 0;  // 0 = hardware concurrency

  void validate() const;
  [[nodiscard]] std::size_t candidate_features(std::size_t n_features) const;
  [[nodiscard]] nlohmann::json to_json() const;
  static ForestParams from_json(const nlohmann::json& j);
};

struct LogRegParams {
  std::size_t epochs = 300;
  double learning_rate = 0.1;
  double l2 = 1e-4;

  [[nodiscard]] nlohmann::json to_json() const;
  static LogRegParams from_json(const nlohmann::json& j);
};

inline constexpr std::size_t kDefaultK = 5;

/// Throws DataError on an empty set, non-finite features or a label outside
/// class_set. A set holding one class yields a model that always predicts it.
[[nodiscard]] TrainedModel train_random_forest(const dataset::LabeledDataset& train, const ForestParams& params);
[[nodiscard]] TrainedModel train_random_forest(const Matrix& features, std::span<const std::size_t> labels,
                                               const std::vector<std::string>& class_set,
                                               const ForestParams& params);

[[nodiscard]] TrainedModel train_knn(const dataset::LabeledDataset& train, std::size_t k = kDefaultK);
[[nodiscard]] TrainedModel train_knn(const Matrix& features, std::span<const std::size_t> labels,
                                     const std::vector<std::string>& class_set, std::size_t k = kDefaultK);

[[nodiscard]] TrainedModel train_gaussian_nb(const dataset::LabeledDataset& train);
[[nodiscard]] TrainedModel train_gaussian_nb(const Matrix& features, std::span<const std::size_t> labels,
                                             const std::vector<std::string>& class_set);

[[nodiscard]] TrainedModel train_logreg(const dataset::LabeledDataset& train, const LogRegParams& params = {});
[[nodiscard]] TrainedModel train_logreg(const Matrix& features, std::span<const std::size_t> labels,
                                        const std::vector<std::string>& class_set,
                                        const LogRegParams& params = {});

// --- prediction -------------------------------------------------------------

/// Throws DataError when the width does not match the training width.
[[nodiscard]] std::vector<std::size_t> predict_indices(const TrainedModel& model, const Matrix& features);
[[nodiscard]] std::vector<std::string> predict_batch(const TrainedModel& model, const Matrix& features);

// --- persistence ------------------------------------------------------------

[[nodiscard]] std::string serialize_model(const TrainedModel& model);
/// Refuses documents whose format_version differs from kModelFormatVersion.
[[nodiscard]] TrainedModel deserialize_model(std::string_view text);
void save_model(const TrainedModel& model, const std::filesystem::path& path);
[[nodiscard]] TrainedModel load_model(const std::filesystem::path& path);

using ModelLoader = std::function<std::shared_ptr<const Classifier>(
    const std::vector<std::string>& class_set, std::size_t n_features, const nlohmann::json& params,
    const nlohmann::json& state)>;
/// Lets plug-in model kinds participate in deserialize_model.
void register_model_loader(const std::string& kind, ModelLoader loader);

// --- benchmarking -----------------------------------------------------------

struct BenchmarkRow {
  std::string model;
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;
  double weighted_precision = 0.0;
  double weighted_recall = 0.0;
  double weighted_f1 = 0.0;
  double accuracy = 0.0;
  double train_seconds = 0.0;
  double test_seconds = 0.0;
};

struct BenchmarkResult {
  std::vector<BenchmarkRow> rows;  // macro-F1 descending
  std::vector<metrics::ClassReport> reports;  // aligned with rows
};

[[nodiscard]] BenchmarkResult benchmark(const std::vector<TrainedModel>& models, const dataset::SplitPair& split);

[[nodiscard]] std::string render_benchmark(const std::vector<BenchmarkRow>& rows, metrics::ReportFormat format);

// --- softmax regression internals, exposed for gradient checking ------------

/// weights: n_classes x (n_features + 1), last column is the bias.
/// Loss = mean cross-entropy + l2/2 * ||W without bias||^2.
[[nodiscard]] double softmax_loss(const Matrix& weights, const Matrix& features, std::span<const std::size_t> labels,
                                  double l2);
[[nodiscard]] Matrix softmax_gradient(const Matrix& weights, const Matrix& features,
                                      std::span<const std::size_t> labels, double l2);

}  // namespace iotriage::detect
