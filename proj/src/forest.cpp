#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <thread>

#include "iotriage/error.hpp"
#include "iotriage/models.hpp"
#include "iotriage/util.hpp"

namespace iotriage::detect {

using json = nlohmann::json;

void ForestParams::validate() const {
  if (n_trees < 1) throw ConfigError("forest: n_trees must be >= 1");
  if (min_samples_split < 2) throw ConfigError("forest: min_samples_split must be >= 2");
  if (features_per_split == FeatureSampling::fixed && fixed_features < 1) {
    throw ConfigError("forest: fixed features_per_split must be >= 1");
  }
  if (max_bins < 2 || max_bins > 256) throw ConfigError("forest: max_bins must be in [2, 256]");
  if (max_depth && *max_depth < 1) throw ConfigError("forest: max_depth must be >= 1");
}

std::size_t ForestParams::candidate_features(std::size_t n_features) const {
  std::size_t m = 1;
  switch (features_per_split) {
    case FeatureSampling::sqrt:
      m = static_cast<std::size_t>(std::sqrt(static_cast<double>(n_features)));
      break;
    case FeatureSampling::log2:
      m = static_cast<std::size_t>(std::log2(static_cast<double>(std::max<std::size_t>(n_features, 1))));
      break;
    case FeatureSampling::fixed:
      m = fixed_features;
      break;
  }
  return std::clamp<std::size_t>(m, 1, std::max<std::size_t>(n_features, 1));
}

json ForestParams::to_json() const {
  json j{{"n_trees", n_trees},
         {"max_depth", max_depth ? json(*max_depth) : json(nullptr)},
         {"min_samples_split", min_samples_split},
         {"features_per_split", features_per_split == FeatureSampling::sqrt   ? "sqrt"
                                : features_per_split == FeatureSampling::log2 ? "log2"
                                                                              : "fixed"},
         {"fixed_features", fixed_features},
         {"bootstrap", bootstrap},
         {"seed", seed},
         {"max_bins", max_bins}};
  return j;
}

ForestParams ForestParams::from_json(const json& j) {
  ForestParams p;
  p.n_trees = j.value("n_trees", p.n_trees);
  if (j.contains("max_depth") && !j.at("max_depth").is_null()) p.max_depth = j.at("max_depth").get<std::size_t>();
  p.min_samples_split = j.value("min_samples_split", p.min_samples_split);
  const auto mode = j.value("features_per_split", std::string("sqrt"));
  if (mode == "sqrt") {
    p.features_per_split = FeatureSampling::sqrt;
  } else if (mode == "log2") {
    p.features_per_split = FeatureSampling::log2;
  } else if (mode == "fixed") {
    p.features_per_split = FeatureSampling::fixed;
  } else {
    throw ConfigError("forest: unknown features_per_split '" + mode + "'");
  }
  p.fixed_features = j.value("fixed_features", p.fixed_features);
  p.bootstrap = j.value("bootstrap", p.bootstrap);
  p.seed = j.value("seed", p.seed);
  p.max_bins = j.value("max_bins", p.max_bins);
  p.n_threads = j.value("n_threads", p.n_threads);
  p.validate();
  return p;
}

// ---------------------------------------------------------------------------

std::size_t DecisionTree::predict(std::span<const double> row) const noexcept {
  std::size_t node = 0;
  while (nodes[node].feature >= 0) {
    const auto& n = nodes[node];
    node = static_cast<std::size_t>(row[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right);
  }
  return nodes[node].label;
}

std::size_t DecisionTree::depth() const {
  std::vector<std::pair<std::size_t, std::size_t>> stack{{0, 0}};
  std::size_t deepest = 0;
  while (!stack.empty()) {
    auto [node, d] = stack.back();
    stack.pop_back();
    deepest = std::max(deepest, d);
    if (nodes[node].feature >= 0) {
      stack.emplace_back(static_cast<std::size_t>(nodes[node].left), d + 1);
      stack.emplace_back(static_cast<std::size_t>(nodes[node].right), d + 1);
    }
  }
  return deepest;
}

RandomForest::RandomForest(std::vector<std::string> class_set, std::size_t n_features, ForestParams params,
                           std::vector<DecisionTree> trees)
    : classes_(std::move(class_set)), n_features_(n_features), params_(params), trees_(std::move(trees)) {}

std::size_t RandomForest::predict_index(std::span<const double> row) const {
  std::vector<std::uint32_t> votes(classes_.size(), 0);
  for (const auto& tree : trees_) ++votes[tree.predict(row)];
  return static_cast<std::size_t>(std::max_element(votes.begin(), votes.end()) - votes.begin());
}

std::uint64_t RandomForest::tree_seed(std::uint64_t master_seed, std::size_t t) noexcept {
  return splitmix64(master_seed ^ splitmix64(static_cast<std::uint64_t>(t) + 1));
}

std::vector<std::uint32_t> RandomForest::bootstrap_counts(std::uint64_t tree_seed, std::size_t n, bool bootstrap) {
  if (!bootstrap) return std::vector<std::uint32_t>(n, 1);
  std::vector<std::uint32_t> counts(n, 0);
  std::mt19937_64 rng(tree_seed);
  for (std::size_t i = 0; i < n; ++i) ++counts[static_cast<std::size_t>(rng() % n)];
  return counts;
}

json RandomForest::state_json() const {
  json trees = json::array();
  for (const auto& tree : trees_) {
    std::vector<std::int32_t> feature;
    std::vector<double> threshold;
    std::vector<std::int32_t> left;
    std::vector<std::int32_t> right;
    std::vector<std::uint32_t> label;
    for (const auto& n : tree.nodes) {
      feature.push_back(n.feature);
      threshold.push_back(n.threshold);
      left.push_back(n.left);
      right.push_back(n.right);
      label.push_back(n.label);
    }
    trees.push_back(
        {{"feature", feature}, {"threshold", threshold}, {"left", left}, {"right", right}, {"label", label}});
  }
  return json{{"trees", std::move(trees)}};
}

std::shared_ptr<const RandomForest> RandomForest::from_json(const std::vector<std::string>& class_set,
                                                            std::size_t n_features, const json& params,
                                                            const json& state) {
  std::vector<DecisionTree> trees;
  for (const auto& t : state.at("trees")) {
    const auto feature = t.at("feature").get<std::vector<std::int32_t>>();
    const auto threshold = t.at("threshold").get<std::vector<double>>();
    const auto left = t.at("left").get<std::vector<std::int32_t>>();
    const auto right = t.at("right").get<std::vector<std::int32_t>>();
    const auto label = t.at("label").get<std::vector<std::uint32_t>>();
    const auto n = feature.size();
    if (threshold.size() != n || left.size() != n || right.size() != n || label.size() != n || n == 0) {
      throw ParseError("forest: malformed tree arrays");
    }
    DecisionTree tree;
    for (std::size_t i = 0; i < n; ++i) {
      const bool leaf = feature[i] < 0;
      if (!leaf && (static_cast<std::size_t>(feature[i]) >= n_features || left[i] <= 0 || right[i] <= 0 ||
                    static_cast<std::size_t>(left[i]) >= n || static_cast<std::size_t>(right[i]) >= n)) {
        throw ParseError("forest: node " + std::to_string(i) + " references out-of-range data");
      }
      if (label[i] >= class_set.size()) throw ParseError("forest: node label out of range");
      tree.nodes.push_back({feature[i], threshold[i], left[i], right[i], label[i]});
    }
    trees.push_back(std::move(tree));
  }
  return std::make_shared<RandomForest>(class_set, n_features, ForestParams::from_json(params), std::move(trees));
}

// ---------------------------------------------------------------------------

namespace {

/// Per-feature cut points and the bin code of every training value
/// (code = index of the first cut >= value), stored column-major.
struct BinnedFeatures {
  std::size_t n = 0;
  std::vector<std::vector<double>> cuts;
  std::vector<std::uint8_t> codes;

  [[nodiscard]] std::uint8_t code(std::size_t f, std::size_t i) const noexcept { return codes[f * n + i]; }
  [[nodiscard]] std::size_t n_bins(std::size_t f) const noexcept { return cuts[f].size() + 1; }
};

BinnedFeatures bin_features(const Matrix& x, std::size_t max_bins) {
  BinnedFeatures b;
  b.n = x.rows();
  b.cuts.resize(x.cols());
  b.codes.resize(x.rows() * x.cols());
  std::vector<double> column(x.rows());
  for (std::size_t f = 0; f < x.cols(); ++f) {
    for (std::size_t i = 0; i < x.rows(); ++i) column[i] = x(i, f);
    std::vector<double> sorted = column;
    std::sort(sorted.begin(), sorted.end());
    std::vector<double> unique = sorted;
    unique.erase(std::unique(unique.begin(), unique.end()), unique.end());

    auto& cuts = b.cuts[f];
    if (unique.size() <= max_bins) {
      for (std::size_t u = 0; u + 1 < unique.size(); ++u) {
        double mid = unique[u] + (unique[u + 1] - unique[u]) / 2.0;
        if (!(mid < unique[u + 1])) mid = unique[u];
        cuts.push_back(mid);
      }
    } else {
      for (std::size_t q = 1; q < max_bins; ++q) {
        const double v = sorted[q * sorted.size() / max_bins];
        if (v < unique.back() && (cuts.empty() || v > cuts.back())) cuts.push_back(v);
      }
    }
    for (std::size_t i = 0; i < x.rows(); ++i) {
      b.codes[f * b.n + i] =
          static_cast<std::uint8_t>(std::lower_bound(cuts.begin(), cuts.end(), column[i]) - cuts.begin());
    }
  }
  return b;
}

class TreeBuilder {
 public:
  TreeBuilder(const BinnedFeatures& bins, std::span<const std::size_t> labels, std::size_t n_classes,
              const ForestParams& params, std::uint64_t seed)
      : bins_(bins),
        labels_(labels),
        k_(n_classes),
        params_(params),
        mtry_(params.candidate_features(bins.cuts.size())),
        rng_(seed),
        features_(bins.cuts.size()) {
    std::iota(features_.begin(), features_.end(), std::size_t{0});
    // Same draw sequence as RandomForest::bootstrap_counts.
    weights_.assign(bins.n, params.bootstrap ? 0 : 1);
    if (params.bootstrap) {
      for (std::size_t i = 0; i < bins.n; ++i) ++weights_[static_cast<std::size_t>(rng_() % bins.n)];
    }
    for (std::size_t i = 0; i < bins.n; ++i) {
      if (weights_[i] > 0) samples_.push_back(i);
    }
    hist_.resize(256 * k_);
    node_counts_.resize(k_);
    left_.resize(k_);
  }

  DecisionTree build() {
    DecisionTree tree;
    tree.nodes.emplace_back();
    struct Task {
      std::size_t node, begin, end, depth;
    };
    std::vector<Task> stack{{0, 0, samples_.size(), 0}};
    while (!stack.empty()) {
      const Task task = stack.back();
      stack.pop_back();

      std::fill(node_counts_.begin(), node_counts_.end(), 0.0);
      for (std::size_t s = task.begin; s < task.end; ++s) {
        node_counts_[labels_[samples_[s]]] += weights_[samples_[s]];
      }
      const double total = std::accumulate(node_counts_.begin(), node_counts_.end(), 0.0);
      const auto majority =
          static_cast<std::size_t>(std::max_element(node_counts_.begin(), node_counts_.end()) - node_counts_.begin());
      tree.nodes[task.node].label = static_cast<std::uint32_t>(majority);

      const bool pure = node_counts_[majority] == total;
      const bool depth_limited = params_.max_depth && task.depth >= *params_.max_depth;
      if (pure || depth_limited || total < static_cast<double>(params_.min_samples_split)) continue;

      const auto split = find_split(task.begin, task.end);
      if (!split) continue;

      const auto [feature, bin] = *split;
      const auto mid_it = std::partition(samples_.begin() + static_cast<std::ptrdiff_t>(task.begin),
                                         samples_.begin() + static_cast<std::ptrdiff_t>(task.end),
                                         [&](std::size_t i) { return bins_.code(feature, i) <= bin; });
      const auto mid = static_cast<std::size_t>(mid_it - samples_.begin());

      const auto left = tree.nodes.size();
      tree.nodes.emplace_back();
      tree.nodes.emplace_back();
      auto& node = tree.nodes[task.node];
      node.feature = static_cast<std::int32_t>(feature);
      node.threshold = bins_.cuts[feature][bin];
      node.left = static_cast<std::int32_t>(left);
      node.right = static_cast<std::int32_t>(left + 1);
      stack.push_back({left + 1, mid, task.end, task.depth + 1});
      stack.push_back({left, task.begin, mid, task.depth + 1});
    }
    return tree;
  }

 private:
  struct Candidate {
    double score;
    std::size_t bin;
  };

  // Highest weighted Gini "purity" sum_c L_c^2/W_L + sum_c R_c^2/W_R over the
  // split points between non-empty bins of one feature.
  std::optional<Candidate> evaluate(std::size_t f, std::size_t begin, std::size_t end) {
    const auto nb = bins_.n_bins(f);
    if (nb < 2) return std::nullopt;
    group_bins_.clear();
    group_counts_.clear();

    const auto count = end - begin;
    if (count * 4 < nb) {
      sorted_.clear();
      for (std::size_t s = begin; s < end; ++s) sorted_.emplace_back(bins_.code(f, samples_[s]), samples_[s]);
      std::sort(sorted_.begin(), sorted_.end());
      for (std::size_t i = 0; i < sorted_.size(); ++i) {
        if (i == 0 || sorted_[i].first != sorted_[i - 1].first) {
          group_bins_.push_back(sorted_[i].first);
          group_counts_.resize(group_counts_.size() + k_, 0.0);
        }
        group_counts_[group_counts_.size() - k_ + labels_[sorted_[i].second]] += weights_[sorted_[i].second];
      }
    } else {
      std::fill(hist_.begin(), hist_.begin() + static_cast<std::ptrdiff_t>(nb * k_), 0.0);
      for (std::size_t s = begin; s < end; ++s) {
        const auto i = samples_[s];
        hist_[bins_.code(f, i) * k_ + labels_[i]] += weights_[i];
      }
      for (std::size_t b = 0; b < nb; ++b) {
        const auto* h = &hist_[b * k_];
        if (std::all_of(h, h + k_, [](double v) { return v == 0.0; })) continue;
        group_bins_.push_back(b);
        group_counts_.insert(group_counts_.end(), h, h + k_);
      }
    }
    if (group_bins_.size() < 2) return std::nullopt;

    const double total = std::accumulate(node_counts_.begin(), node_counts_.end(), 0.0);
    std::fill(left_.begin(), left_.end(), 0.0);
    double left_total = 0.0;
    Candidate best{-std::numeric_limits<double>::infinity(), 0};
    for (std::size_t g = 0; g + 1 < group_bins_.size(); ++g) {
      for (std::size_t c = 0; c < k_; ++c) {
        left_[c] += group_counts_[g * k_ + c];
        left_total += group_counts_[g * k_ + c];
      }
      const double right_total = total - left_total;
      double left_sq = 0.0;
      double right_sq = 0.0;
      for (std::size_t c = 0; c < k_; ++c) {
        left_sq += left_[c] * left_[c];
        const double r = node_counts_[c] - left_[c];
        right_sq += r * r;
      }
      const double score = left_sq / left_total + right_sq / right_total;
      if (score > best.score) best = {score, group_bins_[g]};
    }
    return best;
  }

  std::optional<std::pair<std::size_t, std::size_t>> find_split(std::size_t begin, std::size_t end) {
    const auto d = features_.size();
    std::optional<std::pair<std::size_t, std::size_t>> best;
    double best_score = -std::numeric_limits<double>::infinity();
    std::size_t evaluated = 0;
    // Draw features without replacement until mtry non-constant ones were seen.
    for (std::size_t pos = 0; pos < d && evaluated < mtry_; ++pos) {
      const auto j = pos + static_cast<std::size_t>(rng_() % (d - pos));
      std::swap(features_[pos], features_[j]);
      const auto f = features_[pos];
      const auto candidate = evaluate(f, begin, end);
      if (!candidate) continue;
      ++evaluated;
      if (candidate->score > best_score) {
        best_score = candidate->score;
        best = std::make_pair(f, candidate->bin);
      }
    }
    return best;
  }

  const BinnedFeatures& bins_;
  std::span<const std::size_t> labels_;
  std::size_t k_;
  const ForestParams& params_;
  std::size_t mtry_;
  std::mt19937_64 rng_;
  std::vector<std::size_t> features_;
  std::vector<std::uint32_t> weights_;
  std::vector<std::size_t> samples_;
  std::vector<double> hist_;
  std::vector<double> node_counts_;
  std::vector<double> left_;
  std::vector<std::size_t> group_bins_;
  std::vector<double> group_counts_;
  std::vector<std::pair<std::uint8_t, std::size_t>> sorted_;
};

void check_training_input(const Matrix& x, std::span<const std::size_t> labels, std::size_t n_classes) {
  if (x.rows() == 0) throw DataError("empty training set");
  if (labels.size() != x.rows()) throw DataError("label count does not match feature rows");
  if (x.cols() == 0) throw DataError("training set has no features");
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

}  // namespace

TrainedModel train_random_forest(const Matrix& features, std::span<const std::size_t> labels,
                                 const std::vector<std::string>& class_set, const ForestParams& params) {
  params.validate();
  check_training_input(features, labels, class_set.size());
  const auto start = std::chrono::steady_clock::now();

  const auto bins = bin_features(features, params.max_bins);
  std::vector<DecisionTree> trees(params.n_trees);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (auto t = next.fetch_add(1); t < params.n_trees; t = next.fetch_add(1)) {
      TreeBuilder builder(bins, labels, class_set.size(), params, RandomForest::tree_seed(params.seed, t));
      trees[t] = builder.build();
    }
  };
  auto n_threads = params.n_threads != 0 ? params.n_threads : std::max(1u, std::thread::hardware_concurrency());
  n_threads = std::min(n_threads, params.n_trees);
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t i = 0; i < n_threads; ++i) pool.emplace_back(worker);
  }

  TrainedModel out;
  out.model = std::make_shared<RandomForest>(class_set, features.cols(), params, std::move(trees));
  out.meta.seed = params.seed;
  out.meta.rows = features.rows();
  out.meta.features = features.cols();
  out.meta.train_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

TrainedModel train_random_forest(const dataset::LabeledDataset& train, const ForestParams& params) {
  const auto labels = train.label_indices();
  return train_random_forest(train.features, labels, train.class_set, params);
}

}  // namespace iotriage::detect
