#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <numbers>
#include <set>
#include <thread>

#include "iotriage/error.hpp"
#include "iotriage/models.hpp"
#include "iotriage/util.hpp"

namespace iotriage::detect {

using json = nlohmann::json;

namespace {

void check_input(const Matrix& x, std::span<const std::size_t> labels, std::size_t n_classes) {
  if (x.rows() == 0) throw DataError("empty training set");
  if (labels.size() != x.rows()) throw DataError("label count does not match feature rows");
  if (n_classes == 0) throw DataError("empty class set");
  for (auto y : labels) {
    if (y >= n_classes) throw DataError("label index outside class set");
  }
  for (std::size_t r = 0; r < x.rows(); ++r) {
    for (double v : x.row(r)) {
      if (!std::isfinite(v)) throw DataError("non-finite feature value in row " + std::to_string(r));
    }
  }
}

std::size_t argmax(const std::vector<double>& v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

std::vector<double> softmax(std::vector<double> z) {
  const double top = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (auto& v : z) {
    v = std::exp(v - top);
    sum += v;
  }
  for (auto& v : z) v /= sum;
  return z;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

Matrix matrix_from_json(const json& j) {
  const auto rows = j.at("rows").get<std::size_t>();
  const auto cols = j.at("cols").get<std::size_t>();
  auto data = j.at("data").get<std::vector<double>>();
  if (data.size() != rows * cols) throw ParseError("matrix payload has the wrong number of values");
  return Matrix(rows, cols, std::move(data));
}

json matrix_to_json(const Matrix& m) { return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", m.data()}}; }

}  // namespace

json TrainMeta::to_json() const {
  return {{"seed", seed}, {"train_seconds", train_seconds}, {"rows", rows}, {"features", features}};
}

TrainMeta TrainMeta::from_json(const json& j) {
  TrainMeta m;
  m.seed = j.value("seed", m.seed);
  m.train_seconds = j.value("train_seconds", m.train_seconds);
  m.rows = j.value("rows", m.rows);
  m.features = j.value("features", m.features);
  return m;
}

json LogRegParams::to_json() const { return {{"epochs", epochs}, {"learning_rate", learning_rate}, {"l2", l2}}; }

LogRegParams LogRegParams::from_json(const json& j) {
  LogRegParams p;
  p.epochs = j.value("epochs", p.epochs);
  p.learning_rate = j.value("learning_rate", p.learning_rate);
  p.l2 = j.value("l2", p.l2);
  if (!(p.learning_rate > 0.0)) throw ConfigError("logreg: learning_rate must be > 0");
  if (!(p.l2 >= 0.0)) throw ConfigError("logreg: l2 must be >= 0");
  return p;
}

// --- k-NN -------------------------------------------------------------------

KNearestNeighbors::KNearestNeighbors(std::vector<std::string> class_set, Matrix features,
                                     std::vector<std::size_t> labels, std::size_t k)
    : classes_(std::move(class_set)), features_(std::move(features)), labels_(std::move(labels)), k_(k) {}

std::size_t KNearestNeighbors::predict_index(std::span<const double> row) const {
  const auto n = features_.rows();
  std::vector<std::pair<double, std::size_t>> dist(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto t = features_.row(i);
    double d = 0.0;
    for (std::size_t c = 0; c < t.size(); ++c) {
      const double diff = t[c] - row[c];
      d += diff * diff;
    }
    dist[i] = {d, i};
  }
  const auto k = std::min(k_, n);
  std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());

  std::vector<std::size_t> votes(classes_.size(), 0);
  std::vector<double> closest(classes_.size(), std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < k; ++i) {
    const auto label = labels_[dist[i].second];
    ++votes[label];
    closest[label] = std::min(closest[label], dist[i].first);
  }
  std::size_t best = 0;
  for (std::size_t c = 1; c < classes_.size(); ++c) {
    if (votes[c] > votes[best] || (votes[c] == votes[best] && closest[c] < closest[best])) best = c;
  }
  return best;
}

json KNearestNeighbors::state_json() const { return {{"features", matrix_to_json(features_)}, {"labels", labels_}}; }

std::shared_ptr<const KNearestNeighbors> KNearestNeighbors::from_json(const std::vector<std::string>& class_set,
                                                                      std::size_t n_features, const json& params,
                                                                      const json& state) {
  auto features = matrix_from_json(state.at("features"));
  auto labels = state.at("labels").get<std::vector<std::size_t>>();
  if (features.cols() != n_features || labels.size() != features.rows()) {
    throw ParseError("knn: state does not match n_features");
  }
  for (auto y : labels) {
    if (y >= class_set.size()) throw ParseError("knn: label index out of range");
  }
  const auto k = params.at("k").get<std::size_t>();
  if (k == 0) throw ParseError("knn: k must be >= 1");
  return std::make_shared<KNearestNeighbors>(class_set, std::move(features), std::move(labels), k);
}

TrainedModel train_knn(const Matrix& features, std::span<const std::size_t> labels,
                       const std::vector<std::string>& class_set, std::size_t k) {
  if (k == 0) throw ConfigError("knn: k must be >= 1");
  check_input(features, labels, class_set.size());
  const auto start = std::chrono::steady_clock::now();
  TrainedModel out;
  out.model = std::make_shared<KNearestNeighbors>(class_set, features,
                                                  std::vector<std::size_t>(labels.begin(), labels.end()), k);
  out.meta.rows = features.rows();
  out.meta.features = features.cols();
  out.meta.train_seconds = seconds_since(start);
  return out;
}

TrainedModel train_knn(const dataset::LabeledDataset& train, std::size_t k) {
  const auto labels = train.label_indices();
  return train_knn(train.features, labels, train.class_set, k);
}

// --- Gaussian naive Bayes ---------------------------------------------------

GaussianNaiveBayes::GaussianNaiveBayes(std::vector<std::string> class_set, Matrix means, Matrix variances,
                                       std::vector<double> log_priors)
    : classes_(std::move(class_set)),
      means_(std::move(means)),
      variances_(std::move(variances)),
      log_priors_(std::move(log_priors)) {}

std::vector<double> GaussianNaiveBayes::joint_log_likelihood(std::span<const double> row) const {
  std::vector<double> jll(classes_.size());
  for (std::size_t c = 0; c < classes_.size(); ++c) {
    double s = log_priors_[c];
    for (std::size_t f = 0; f < means_.cols(); ++f) {
      const double var = variances_(c, f);
      const double diff = row[f] - means_(c, f);
      s -= 0.5 * std::log(2.0 * std::numbers::pi * var) + diff * diff / (2.0 * var);
    }
    jll[c] = s;
  }
  return jll;
}

std::size_t GaussianNaiveBayes::predict_index(std::span<const double> row) const {
  return argmax(joint_log_likelihood(row));
}

std::optional<std::vector<double>> GaussianNaiveBayes::predict_proba(std::span<const double> row) const {
  return softmax(joint_log_likelihood(row));
}

json GaussianNaiveBayes::state_json() const {
  json priors = json::array();
  // -inf (a class absent from training) is not representable in JSON.
  for (double p : log_priors_) priors.push_back(std::isfinite(p) ? json(p) : json(nullptr));
  return {{"means", matrix_to_json(means_)}, {"variances", matrix_to_json(variances_)}, {"log_priors", priors}};
}

std::shared_ptr<const GaussianNaiveBayes> GaussianNaiveBayes::from_json(const std::vector<std::string>& class_set,
                                                                        std::size_t n_features, const json& /*params*/,
                                                                        const json& state) {
  auto means = matrix_from_json(state.at("means"));
  auto variances = matrix_from_json(state.at("variances"));
  std::vector<double> priors;
  for (const auto& p : state.at("log_priors")) {
    priors.push_back(p.is_null() ? -std::numeric_limits<double>::infinity() : p.get<double>());
  }
  const auto k = class_set.size();
  if (means.rows() != k || variances.rows() != k || priors.size() != k || means.cols() != n_features ||
      variances.cols() != n_features) {
    throw ParseError("gnb: state does not match class_set and n_features");
  }
  return std::make_shared<GaussianNaiveBayes>(class_set, std::move(means), std::move(variances), std::move(priors));
}

TrainedModel train_gaussian_nb(const Matrix& features, std::span<const std::size_t> labels,
                               const std::vector<std::string>& class_set) {
  check_input(features, labels, class_set.size());
  const auto start = std::chrono::steady_clock::now();
  const auto k = class_set.size();
  const auto d = features.cols();
  Matrix means(k, d);
  Matrix variances(k, d);
  std::vector<double> counts(k, 0.0);
  for (std::size_t r = 0; r < features.rows(); ++r) {
    counts[labels[r]] += 1.0;
    for (std::size_t f = 0; f < d; ++f) means(labels[r], f) += features(r, f);
  }
  for (std::size_t c = 0; c < k; ++c) {
    for (std::size_t f = 0; f < d; ++f) means(c, f) = counts[c] > 0 ? means(c, f) / counts[c] : 0.0;
  }
  for (std::size_t r = 0; r < features.rows(); ++r) {
    for (std::size_t f = 0; f < d; ++f) {
      const double diff = features(r, f) - means(labels[r], f);
      variances(labels[r], f) += diff * diff;
    }
  }
  std::vector<double> log_priors(k);
  const auto n = static_cast<double>(features.rows());
  for (std::size_t c = 0; c < k; ++c) {
    for (std::size_t f = 0; f < d; ++f) {
      const double var = counts[c] > 0 ? variances(c, f) / counts[c] : 0.0;
      variances(c, f) = std::max(var, GaussianNaiveBayes::kVarianceFloor);
    }
    log_priors[c] = counts[c] > 0 ? std::log(counts[c] / n) : -std::numeric_limits<double>::infinity();
  }
  TrainedModel out;
  out.model =
      std::make_shared<GaussianNaiveBayes>(class_set, std::move(means), std::move(variances), std::move(log_priors));
  out.meta.rows = features.rows();
  out.meta.features = d;
  out.meta.train_seconds = seconds_since(start);
  return out;
}

TrainedModel train_gaussian_nb(const dataset::LabeledDataset& train) {
  const auto labels = train.label_indices();
  return train_gaussian_nb(train.features, labels, train.class_set);
}

// --- softmax regression -----------------------------------------------------

namespace {

std::vector<double> logits(const Matrix& w, std::span<const double> x) {
  const auto d = x.size();
  std::vector<double> z(w.rows());
  for (std::size_t c = 0; c < w.rows(); ++c) {
    const auto wc = w.row(c);
    double s = wc[d];
    for (std::size_t f = 0; f < d; ++f) s += wc[f] * x[f];
    z[c] = s;
  }
  return z;
}

void check_weights(const Matrix& w, const Matrix& x, std::span<const std::size_t> labels) {
  if (w.cols() != x.cols() + 1) throw DataError("softmax: weights must have n_features + 1 columns");
  if (labels.size() != x.rows() || x.rows() == 0) throw DataError("softmax: label count does not match rows");
  for (auto y : labels) {
    if (y >= w.rows()) throw DataError("softmax: label index out of range");
  }
}

}  // namespace

double softmax_loss(const Matrix& weights, const Matrix& features, std::span<const std::size_t> labels, double l2) {
  check_weights(weights, features, labels);
  double loss = 0.0;
  for (std::size_t r = 0; r < features.rows(); ++r) {
    const auto z = logits(weights, features.row(r));
    const double top = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (double v : z) sum += std::exp(v - top);
    loss += top + std::log(sum) - z[labels[r]];
  }
  loss /= static_cast<double>(features.rows());
  double reg = 0.0;
  for (std::size_t c = 0; c < weights.rows(); ++c) {
    for (std::size_t f = 0; f < features.cols(); ++f) reg += weights(c, f) * weights(c, f);
  }
  return loss + 0.5 * l2 * reg;
}

Matrix softmax_gradient(const Matrix& weights, const Matrix& features, std::span<const std::size_t> labels,
                        double l2) {
  check_weights(weights, features, labels);
  const auto d = features.cols();
  Matrix grad(weights.rows(), weights.cols());
  for (std::size_t r = 0; r < features.rows(); ++r) {
    const auto x = features.row(r);
    auto p = softmax(logits(weights, x));
    p[labels[r]] -= 1.0;
    for (std::size_t c = 0; c < weights.rows(); ++c) {
      auto g = grad.row(c);
      for (std::size_t f = 0; f < d; ++f) g[f] += p[c] * x[f];
      g[d] += p[c];
    }
  }
  const double inv_n = 1.0 / static_cast<double>(features.rows());
  for (std::size_t c = 0; c < weights.rows(); ++c) {
    for (std::size_t f = 0; f <= d; ++f) {
      grad(c, f) *= inv_n;
      if (f < d) grad(c, f) += l2 * weights(c, f);
    }
  }
  return grad;
}

SoftmaxRegression::SoftmaxRegression(std::vector<std::string> class_set, Matrix weights, LogRegParams params,
                                     std::vector<double> loss_history)
    : classes_(std::move(class_set)),
      weights_(std::move(weights)),
      params_(params),
      loss_history_(std::move(loss_history)) {}

std::size_t SoftmaxRegression::predict_index(std::span<const double> row) const {
  return argmax(logits(weights_, row));
}

std::optional<std::vector<double>> SoftmaxRegression::predict_proba(std::span<const double> row) const {
  return softmax(logits(weights_, row));
}

json SoftmaxRegression::state_json() const {
  return {{"weights", matrix_to_json(weights_)}, {"loss_history", loss_history_}};
}

std::shared_ptr<const SoftmaxRegression> SoftmaxRegression::from_json(const std::vector<std::string>& class_set,
                                                                      std::size_t n_features, const json& params,
                                                                      const json& state) {
  auto weights = matrix_from_json(state.at("weights"));
  if (weights.rows() != class_set.size() || weights.cols() != n_features + 1) {
    throw ParseError("logreg: weights do not match class_set and n_features");
  }
  return std::make_shared<SoftmaxRegression>(class_set, std::move(weights), LogRegParams::from_json(params),
                                             state.value("loss_history", std::vector<double>{}));
}

TrainedModel train_logreg(const Matrix& features, std::span<const std::size_t> labels,
                          const std::vector<std::string>& class_set, const LogRegParams& params) {
  LogRegParams::from_json(params.to_json());  // validates
  check_input(features, labels, class_set.size());
  const auto start = std::chrono::steady_clock::now();
  Matrix w(class_set.size(), features.cols() + 1);
  std::vector<double> history;
  for (std::size_t epoch = 0; epoch <= params.epochs; ++epoch) {
    const double loss = softmax_loss(w, features, labels, params.l2);
    if (!std::isfinite(loss)) {
      throw DataError("logreg: loss became non-finite at epoch " + std::to_string(epoch) +
                      "; lower the learning rate or standardize features");
    }
    history.push_back(loss);
    if (epoch == params.epochs) break;
    const auto grad = softmax_gradient(w, features, labels, params.l2);
    for (std::size_t c = 0; c < w.rows(); ++c) {
      for (std::size_t f = 0; f < w.cols(); ++f) w(c, f) -= params.learning_rate * grad(c, f);
    }
  }
  TrainedModel out;
  out.model = std::make_shared<SoftmaxRegression>(class_set, std::move(w), params, std::move(history));
  out.meta.rows = features.rows();
  out.meta.features = features.cols();
  out.meta.train_seconds = seconds_since(start);
  return out;
}

TrainedModel train_logreg(const dataset::LabeledDataset& train, const LogRegParams& params) {
  const auto labels = train.label_indices();
  return train_logreg(train.features, labels, train.class_set, params);
}

// --- prediction -------------------------------------------------------------

std::vector<std::size_t> predict_indices(const TrainedModel& model, const Matrix& features) {
  if (!model.model) throw ConfigError("predict: model is empty");
  if (!features.empty() && features.cols() != model.model->feature_count()) {
    throw DataError("predict: expected " + std::to_string(model.model->feature_count()) + " features, got " +
                    std::to_string(features.cols()));
  }
  std::vector<std::size_t> out(features.rows());
  constexpr std::size_t kChunk = 256;
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (auto begin = next.fetch_add(kChunk); begin < out.size(); begin = next.fetch_add(kChunk)) {
      const auto end = std::min(out.size(), begin + kChunk);
      for (auto r = begin; r < end; ++r) out[r] = model.model->predict_index(features.row(r));
    }
  };
  const auto chunks = (out.size() + kChunk - 1) / kChunk;
  const auto n_threads = std::min<std::size_t>(std::max(1u, std::thread::hardware_concurrency()), chunks);
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t i = 0; i < n_threads; ++i) pool.emplace_back(worker);
  }
  return out;
}

std::vector<std::string> predict_batch(const TrainedModel& model, const Matrix& features) {
  const auto idx = predict_indices(model, features);
  std::vector<std::string> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(model.class_set()[i]);
  return out;
}

// --- persistence ------------------------------------------------------------

namespace {

std::mutex& registry_mutex() {
  static std::mutex m;
  return m;
}

std::map<std::string, ModelLoader>& registry() {
  static std::map<std::string, ModelLoader> loaders = {
      {"rf", RandomForest::from_json},
      {"knn", KNearestNeighbors::from_json},
      {"gnb", GaussianNaiveBayes::from_json},
      {"logreg", SoftmaxRegression::from_json},
  };
  return loaders;
}

}  // namespace

void register_model_loader(const std::string& kind, ModelLoader loader) {
  std::lock_guard lock(registry_mutex());
  registry()[kind] = std::move(loader);
}

std::string serialize_model(const TrainedModel& model) {
  if (!model.model) throw ConfigError("serialize: model is empty");
  nlohmann::ordered_json j;
  j["format"] = "iotriage-model";
  j["format_version"] = kModelFormatVersion;
  j["kind"] = model.kind();
  j["class_set"] = model.class_set();
  j["n_features"] = model.model->feature_count();
  j["params"] = model.model->params_json();
  j["state"] = model.model->state_json();
  j["train_meta"] = model.meta.to_json();
  return j.dump() + "\n";
}

TrainedModel deserialize_model(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("model file is not valid JSON: ") + e.what());
  }
  try {
    if (j.value("format", std::string()) != "iotriage-model") throw ParseError("not an iotriage model file");
    const auto version = j.at("format_version").get<int>();
    if (version != kModelFormatVersion) {
      throw ParseError("unsupported model format_version " + std::to_string(version) + " (expected " +
                       std::to_string(kModelFormatVersion) + ")");
    }
    const auto kind = j.at("kind").get<std::string>();
    ModelLoader loader;
    {
      std::lock_guard lock(registry_mutex());
      const auto it = registry().find(kind);
      if (it == registry().end()) throw ParseError("no loader registered for model kind '" + kind + "'");
      loader = it->second;
    }
    const auto class_set = j.at("class_set").get<std::vector<std::string>>();
    const auto n_features = j.at("n_features").get<std::size_t>();
    TrainedModel out;
    out.model = loader(class_set, n_features, j.at("params"), j.at("state"));
    out.meta = TrainMeta::from_json(j.value("train_meta", json::object()));
    return out;
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed model file: ") + e.what());
  }
}

void save_model(const TrainedModel& model, const std::filesystem::path& path) {
  write_text_file(path, serialize_model(model));
}

TrainedModel load_model(const std::filesystem::path& path) { return deserialize_model(read_text_file(path)); }

// --- benchmarking -----------------------------------------------------------

BenchmarkResult benchmark(const std::vector<TrainedModel>& models, const dataset::SplitPair& split) {
  struct Entry {
    BenchmarkRow row;
    metrics::ClassReport report;
  };
  std::vector<Entry> entries;
  for (const auto& model : models) {
    std::set<std::string> classes(split.test.class_set.begin(), split.test.class_set.end());
    classes.insert(model.class_set().begin(), model.class_set().end());
    const std::vector<std::string> class_set(classes.begin(), classes.end());

    const auto start = std::chrono::steady_clock::now();
    const auto predicted = predict_batch(model, split.test.features);
    const double test_seconds = seconds_since(start);

    const auto rep = metrics::report(metrics::confusion(std::span<const std::string>(split.test.labels),
                                                        std::span<const std::string>(predicted), class_set));
    BenchmarkRow row;
    row.model = model.kind();
    row.macro_precision = rep.macro.precision;
    row.macro_recall = rep.macro.recall;
    row.macro_f1 = rep.macro.f1;
    row.weighted_precision = rep.weighted.precision;
    row.weighted_recall = rep.weighted.recall;
    row.weighted_f1 = rep.weighted.f1;
    row.accuracy = rep.accuracy;
    row.train_seconds = model.meta.train_seconds;
    row.test_seconds = test_seconds;
    entries.push_back({std::move(row), rep});
  }
  std::stable_sort(entries.begin(), entries.end(),
                   [](const Entry& a, const Entry& b) { return a.row.macro_f1 > b.row.macro_f1; });
  BenchmarkResult out;
  for (auto& e : entries) {
    out.rows.push_back(std::move(e.row));
    out.reports.push_back(std::move(e.report));
  }
  return out;
}

std::string render_benchmark(const std::vector<BenchmarkRow>& rows, metrics::ReportFormat format) {
  std::string out;
  switch (format) {
    case metrics::ReportFormat::markdown:
      out += "| Model | Macro Precision | Macro Recall | Macro F1 | Weighted F1 | Accuracy (%) | Train (s) | Test (s) |\n";
      out += "|---|---:|---:|---:|---:|---:|---:|---:|\n";
      for (const auto& r : rows) {
        out += "| " + r.model + " | " + format_fixed(r.macro_precision, 4) + " | " + format_fixed(r.macro_recall, 4) +
               " | " + format_fixed(r.macro_f1, 4) + " | " + format_fixed(r.weighted_f1, 4) + " | " +
               format_fixed(r.accuracy * 100.0, 2) + " | " + format_fixed(r.train_seconds, 3) + " | " +
               format_fixed(r.test_seconds, 3) + " |\n";
      }
      break;
    case metrics::ReportFormat::csv:
      out += "Model,Macro Precision,Macro Recall,Macro F1,Weighted F1,Accuracy (%),Train (s),Test (s)\n";
      for (const auto& r : rows) {
        out += csv_escape(r.model) + "," + format_fixed(r.macro_precision, 4) + "," +
               format_fixed(r.macro_recall, 4) + "," + format_fixed(r.macro_f1, 4) + "," +
               format_fixed(r.weighted_f1, 4) + "," + format_fixed(r.accuracy * 100.0, 2) + "," +
               format_fixed(r.train_seconds, 3) + "," + format_fixed(r.test_seconds, 3) + "\n";
      }
      break;
    case metrics::ReportFormat::json: {
      nlohmann::ordered_json j = nlohmann::ordered_json::array();
      for (const auto& r : rows) {
        j.push_back({{"model", r.model},
                     {"macro_precision", r.macro_precision},
                     {"macro_recall", r.macro_recall},
                     {"macro_f1", r.macro_f1},
                     {"weighted_precision", r.weighted_precision},
                     {"weighted_recall", r.weighted_recall},
                     {"weighted_f1", r.weighted_f1},
                     {"accuracy_percent", r.accuracy * 100.0},
                     {"train_seconds", r.train_seconds},
                     {"test_seconds", r.test_seconds}});
      }
      out = j.dump(2) + "\n";
      break;
    }
  }
  return out;
}

}  // namespace iotriage::detect
