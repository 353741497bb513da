#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace iotriage::metrics {

/// Row = true class, column = predicted class.
struct ConfusionMatrix {
  std::vector<std::string> class_set;
  std::vector<std::uint64_t> counts;  // row-major |C| x |C|

  [[nodiscard]] std::size_t size() const noexcept { return class_set.size(); }
  [[nodiscard]] std::uint64_t at(std::size_t truth, std::size_t predicted) const noexcept {
    return counts[truth * class_set.size() + predicted];
  }
  [[nodiscard]] std::uint64_t total() const noexcept;

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

/// Throws DataError on length mismatch or a label outside class_set.
[[nodiscard]] ConfusionMatrix confusion(std::span<const std::string> y_true, std::span<const std::string> y_pred,
                                        const std::vector<std::string>& class_set);
/// Index form: labels are positions in class_set.
[[nodiscard]] ConfusionMatrix confusion(std::span<const std::size_t> y_true, std::span<const std::size_t> y_pred,
                                        const std::vector<std::string>& class_set);

struct ClassMetrics {
  std::string label;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::uint64_t support = 0;
};

struct AverageMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::uint64_t support = 0;
};

struct ClassReport {
  std::vector<ClassMetrics> per_class;  // class_set order
  AverageMetrics macro;
  AverageMetrics weighted;
  double accuracy = 0.0;  // fraction in [0, 1]
  std::uint64_t total = 0;

  [[nodiscard]] double accuracy_percent() const noexcept { return accuracy * 100.0; }
};

/// Rates with a zero denominator are reported as 0. Weighted F1 is the
/// support-weighted mean of per-class F1. Throws DataError on an empty matrix.
[[nodiscard]] ClassReport report(const ConfusionMatrix& matrix);

enum class ReportFormat { markdown, csv, json };

/// Header: Attack Class | Precision | Recall | F1-score | Support, then
/// Macro Average, Weighted Average and Accuracy (%) rows.
[[nodiscard]] std::string render_report(const ClassReport& report, ReportFormat format);

[[nodiscard]] ReportFormat report_format_from_string(std::string_view name);

}  // namespace iotriage::metrics
