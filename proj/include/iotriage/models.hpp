#pragma once

// Concrete detection models. Most callers only need detect.hpp; these types
// are public so tests and tools can inspect learned state.

#include <cstdint>
#include <vector>

#include "iotriage/detect.hpp"

namespace iotriage::detect {

/// CART tree; rows with feature <= threshold go left.
struct DecisionTree {
  struct Node {
    std::int32_t feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    std::int32_t left = -1;
    std::int32_t right = -1;
    std::uint32_t label = 0;  // majority class of the node
  };
  std::vector<Node> nodes;

  [[nodiscard]] std::size_t predict(std::span<const double> row) const noexcept;
  [[nodiscard]] std::size_t depth() const;
};

class RandomForest final : public Classifier {
 public:
  RandomForest(std::vector<std::string> class_set, std::size_t n_features, ForestParams params,
               std::vector<DecisionTree> trees);

  [[nodiscard]] std::string kind() const override { return "rf"; }
  [[nodiscard]] const std::vector<std::string>& class_set() const override { return classes_; }
  [[nodiscard]] std::size_t feature_count() const override { return n_features_; }
  /// Majority vote; ties go to the earliest class in class_set.
  [[nodiscard]] std::size_t predict_index(std::span<const double> row) const override;
  [[nodiscard]] nlohmann::json params_json() const override { return params_.to_json(); }
  [[nodiscard]] nlohmann::json state_json() const override;

  [[nodiscard]] const std::vector<DecisionTree>& trees() const noexcept { return trees_; }
  [[nodiscard]] const ForestParams& params() const noexcept { return params_; }

  static std::shared_ptr<const RandomForest> from_json(const std::vector<std::string>& class_set,
                                                       std::size_t n_features, const nlohmann::json& params,
                                                       const nlohmann::json& state);

  /// Seed of tree t, derived only from the master seed and t.
  [[nodiscard]] static std::uint64_t tree_seed(std::uint64_t master_seed, std::size_t t) noexcept;
  /// In-bag multiplicity of each of n rows for a tree seed (all ones without bootstrap).
  [[nodiscard]] static std::vector<std::uint32_t> bootstrap_counts(std::uint64_t tree_seed, std::size_t n,
                                                                   bool bootstrap);

 private:
  std::vector<std::string> classes_;
  std::size_t n_features_;
  ForestParams params_;
  std::vector<DecisionTree> trees_;
};

/// Exact Euclidean k-NN vote over the stored training matrix. Vote ties go to
/// the class with the closest neighbor, then to class_set order.
class KNearestNeighbors final : public Classifier {
 public:
  KNearestNeighbors(std::vector<std::string> class_set, Matrix features, std::vector<std::size_t> labels,
                    std::size_t k);

  [[nodiscard]] std::string kind() const override { return "knn"; }
  [[nodiscard]] const std::vector<std::string>& class_set() const override { return classes_; }
  [[nodiscard]] std::size_t feature_count() const override { return features_.cols(); }
  [[nodiscard]] std::size_t predict_index(std::span<const double> row) const override;
  [[nodiscard]] nlohmann::json params_json() const override { return {{"k", k_}}; }
  [[nodiscard]] nlohmann::json state_json() const override;

  static std::shared_ptr<const KNearestNeighbors> from_json(const std::vector<std::string>& class_set,
                                                            std::size_t n_features, const nlohmann::json& params,
                                                            const nlohmann::json& state);

 private:
  std::vector<std::string> classes_;
  Matrix features_;
  std::vector<std::size_t> labels_;
  std::size_t k_;
};

class GaussianNaiveBayes final : public Classifier {
 public:
  static constexpr double kVarianceFloor = 1e-9;

  GaussianNaiveBayes(std::vector<std::string> class_set, Matrix means, Matrix variances,
                     std::vector<double> log_priors);

  [[nodiscard]] std::string kind() const override { return "gnb"; }
  [[nodiscard]] const std::vector<std::string>& class_set() const override { return classes_; }
  [[nodiscard]] std::size_t feature_count() const override { return means_.cols(); }
  [[nodiscard]] std::size_t predict_index(std::span<const double> row) const override;
  [[nodiscard]] std::optional<std::vector<double>> predict_proba(std::span<const double> row) const override;
  [[nodiscard]] nlohmann::json params_json() const override { return {{"variance_floor", kVarianceFloor}}; }
  [[nodiscard]] nlohmann::json state_json() const override;

  [[nodiscard]] const Matrix& means() const noexcept { return means_; }
  [[nodiscard]] const Matrix& variances() const noexcept { return variances_; }

  static std::shared_ptr<const GaussianNaiveBayes> from_json(const std::vector<std::string>& class_set,
                                                             std::size_t n_features, const nlohmann::json& params,
                                                             const nlohmann::json& state);

 private:
  [[nodiscard]] std::vector<double> joint_log_likelihood(std::span<const double> row) const;

  std::vector<std::string> classes_;
  Matrix means_;
  Matrix variances_;
  std::vector<double> log_priors_;
};

class SoftmaxRegression final : public Classifier {
 public:
  SoftmaxRegression(std::vector<std::string> class_set, Matrix weights, LogRegParams params,
                    std::vector<double> loss_history);

  [[nodiscard]] std::string kind() const override { return "logreg"; }
  [[nodiscard]] const std::vector<std::string>& class_set() const override { return classes_; }
  [[nodiscard]] std::size_t feature_count() const override { return weights_.cols() - 1; }
  [[nodiscard]] std::size_t predict_index(std::span<const double> row) const override;
  [[nodiscard]] std::optional<std::vector<double>> predict_proba(std::span<const double> row) const override;
  [[nodiscard]] nlohmann::json params_json() const override { return params_.to_json(); }
  [[nodiscard]] nlohmann::json state_json() const override;

  [[nodiscard]] const Matrix& weights() const noexcept { return weights_; }
  /// Loss before each epoch's update, then the final loss (epochs + 1 entries).
  [[nodiscard]] const std::vector<double>& loss_history() const noexcept { return loss_history_; }

  static std::shared_ptr<const SoftmaxRegression> from_json(const std::vector<std::string>& class_set,
                                                            std::size_t n_features, const nlohmann::json& params,
                                                            const nlohmann::json& state);

 private:
  std::vector<std::string> classes_;
  Matrix weights_;
  LogRegParams params_;
  std::vector<double> loss_history_;
};

}  // namespace iotriage::detect
