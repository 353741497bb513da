#include "iotriage/metrics.hpp"

#include <algorithm>
#include <map>
#include <numeric>

#include <nlohmann/json.hpp>

#include "iotriage/error.hpp"
#include "iotriage/util.hpp"

namespace iotriage::metrics {

std::uint64_t ConfusionMatrix::total() const noexcept {
  return std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
}

ConfusionMatrix confusion(std::span<const std::size_t> y_true, std::span<const std::size_t> y_pred,
                          const std::vector<std::string>& class_set) {
  if (y_true.size() != y_pred.size()) {
    throw DataError("confusion: y_true has " + std::to_string(y_true.size()) + " labels but y_pred has " +
                    std::to_string(y_pred.size()));
  }
  const auto k = class_set.size();
  ConfusionMatrix m{class_set, std::vector<std::uint64_t>(k * k, 0)};
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    if (y_true[i] >= k || y_pred[i] >= k) throw DataError("confusion: class index out of range");
    ++m.counts[y_true[i] * k + y_pred[i]];
  }
  return m;
}

ConfusionMatrix confusion(std::span<const std::string> y_true, std::span<const std::string> y_pred,
                          const std::vector<std::string>& class_set) {
  if (y_true.size() != y_pred.size()) {
    throw DataError("confusion: y_true has " + std::to_string(y_true.size()) + " labels but y_pred has " +
                    std::to_string(y_pred.size()));
  }
  std::map<std::string_view, std::size_t> index;
  for (std::size_t i = 0; i < class_set.size(); ++i) index.emplace(class_set[i], i);
  auto lookup = [&](const std::string& label) {
    const auto it = index.find(label);
    if (it == index.end()) throw DataError("confusion: unknown label '" + label + "'");
    return it->second;
  };
  std::vector<std::size_t> t(y_true.size());
  std::vector<std::size_t> p(y_pred.size());
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    t[i] = lookup(y_true[i]);
    p[i] = lookup(y_pred[i]);
  }
  return confusion(std::span<const std::size_t>(t), std::span<const std::size_t>(p), class_set);
}

namespace {

double safe_div(double num, double den) noexcept { return den == 0.0 ? 0.0 : num / den; }

}  // namespace

ClassReport report(const ConfusionMatrix& matrix) {
  const auto k = matrix.size();
  const auto total = matrix.total();
  if (total == 0) throw DataError("classification report: no rows evaluated");

  ClassReport r;
  r.total = total;
  std::uint64_t trace = 0;
  for (std::size_t c = 0; c < k; ++c) {
    std::uint64_t row_sum = 0;
    std::uint64_t col_sum = 0;
    for (std::size_t j = 0; j < k; ++j) {
      row_sum += matrix.at(c, j);
      col_sum += matrix.at(j, c);
    }
    const auto tp = static_cast<double>(matrix.at(c, c));
    trace += matrix.at(c, c);
    ClassMetrics m;
    m.label = matrix.class_set[c];
    m.support = row_sum;
    m.precision = safe_div(tp, static_cast<double>(col_sum));
    m.recall = safe_div(tp, static_cast<double>(row_sum));
    m.f1 = safe_div(2.0 * m.precision * m.recall, m.precision + m.recall);
    r.per_class.push_back(std::move(m));
  }

  for (const auto& m : r.per_class) {
    r.macro.precision += m.precision;
    r.macro.recall += m.recall;
    r.macro.f1 += m.f1;
    const auto w = static_cast<double>(m.support);
    r.weighted.precision += w * m.precision;
    r.weighted.recall += w * m.recall;
    r.weighted.f1 += w * m.f1;
  }
  const auto n_classes = static_cast<double>(k);
  const auto n_rows = static_cast<double>(total);
  r.macro.precision /= n_classes;
  r.macro.recall /= n_classes;
  r.macro.f1 /= n_classes;
  r.macro.support = total;
  r.weighted.precision /= n_rows;
  r.weighted.recall /= n_rows;
  r.weighted.f1 /= n_rows;
  r.weighted.support = total;
  r.accuracy = static_cast<double>(trace) / n_rows;
  return r;
}

ReportFormat report_format_from_string(std::string_view name) {
  if (name == "markdown" || name == "md") return ReportFormat::markdown;
  if (name == "csv") return ReportFormat::csv;
  if (name == "json") return ReportFormat::json;
  throw ConfigError("unknown report format '" + std::string(name) + "'");
}

namespace {

struct Row {
  std::string name;
  double precision;
  double recall;
  double f1;
  std::uint64_t support;
};

std::vector<Row> table_rows(const ClassReport& r) {
  std::vector<Row> rows;
  for (const auto& m : r.per_class) rows.push_back({m.label, m.precision, m.recall, m.f1, m.support});
  rows.push_back({"Macro Average", r.macro.precision, r.macro.recall, r.macro.f1, r.macro.support});
  rows.push_back({"Weighted Average", r.weighted.precision, r.weighted.recall, r.weighted.f1, r.weighted.support});
  return rows;
}

// Numbers printed with a fixed number of decimals, re-read so JSON matches the text tables.
double rounded(double value, int digits) { return std::stod(format_fixed(value, digits)); }

}  // namespace

std::string render_report(const ClassReport& r, ReportFormat format) {
  const auto rows = table_rows(r);
  std::string out;
  switch (format) {
    case ReportFormat::markdown: {
      out += "| Attack Class | Precision | Recall | F1-score | Support |\n";
      out += "|---|---:|---:|---:|---:|\n";
      for (const auto& row : rows) {
        out += "| " + row.name + " | " + format_fixed(row.precision, 4) + " | " + format_fixed(row.recall, 4) +
               " | " + format_fixed(row.f1, 4) + " | " + std::to_string(row.support) + " |\n";
      }
      out += "| Accuracy (%) | " + format_fixed(r.accuracy_percent(), 2) + " | | | |\n";
      break;
    }
    case ReportFormat::csv: {
      out += "Attack Class,Precision,Recall,F1-score,Support\n";
      for (const auto& row : rows) {
        out += csv_escape(row.name) + "," + format_fixed(row.precision, 4) + "," + format_fixed(row.recall, 4) +
               "," + format_fixed(row.f1, 4) + "," + std::to_string(row.support) + "\n";
      }
      out += "Accuracy (%)," + format_fixed(r.accuracy_percent(), 2) + ",,,\n";
      break;
    }
    case ReportFormat::json: {
      nlohmann::ordered_json j;
      auto to_obj = [](const Row& row) {
        return nlohmann::ordered_json{{"precision", rounded(row.precision, 4)},
                                      {"recall", rounded(row.recall, 4)},
                                      {"f1_score", rounded(row.f1, 4)},
                                      {"support", row.support}};
      };
      j["classes"] = nlohmann::ordered_json::array();
      for (std::size_t i = 0; i < r.per_class.size(); ++i) {
        auto obj = nlohmann::ordered_json{{"attack_class", rows[i].name}};
        obj.update(to_obj(rows[i]));
        j["classes"].push_back(std::move(obj));
      }
      j["macro_average"] = to_obj(rows[rows.size() - 2]);
      j["weighted_average"] = to_obj(rows[rows.size() - 1]);
      j["accuracy_percent"] = rounded(r.accuracy_percent(), 2);
      out = j.dump(2) + "\n";
      break;
    }
  }
  return out;
}

}  // namespace iotriage::metrics
