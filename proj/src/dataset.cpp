#include "iotriage/dataset.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <bit>
#include <charconv>
#include <cmath>
#include <random>
#include <set>
#include <unordered_set>

#include "iotriage/error.hpp"
#include "iotriage/util.hpp"

namespace iotriage::dataset {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

std::string_view to_string(ColumnKind kind) noexcept {
  switch (kind) {
    case ColumnKind::categorical: return "categorical";
    case ColumnKind::numeric: return "numeric";
    case ColumnKind::text: return "text";
  }
  return "?";
}

namespace {

ColumnKind kind_from_string(std::string_view s) {
  if (s == "categorical") return ColumnKind::categorical;
  if (s == "numeric") return ColumnKind::numeric;
  if (s == "text") return ColumnKind::text;
  throw ConfigError("unknown column kind '" + std::string(s) + "'");
}

std::string_view trim_view(std::string_view s) noexcept {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

std::optional<double> finite_number(std::string_view cell) noexcept {
  if (is_missing(cell)) return std::nullopt;
  auto value = parse_number(cell);
  if (!value || !std::isfinite(*value)) return std::nullopt;
  return value;
}

double median_of(std::vector<double> values) {
  if (values.empty()) return 0.0;
  const auto mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid), values.end());
  const double upper = values[mid];
  if (values.size() % 2 == 1) return upper;
  const double lower = *std::max_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid));
  return (lower + upper) / 2.0;
}

std::string format_exact(double value) {
  std::array<char, 32> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  return std::string(buf.data(), ptr);
}

}  // namespace

bool is_missing(std::string_view cell) noexcept {
  cell = trim_view(cell);
  if (cell.empty()) return true;
  if (cell.size() > 4) return false;
  std::array<char, 4> lower{};
  for (std::size_t i = 0; i < cell.size(); ++i) {
    lower[i] = static_cast<char>(std::tolower(static_cast<unsigned char>(cell[i])));
  }
  const std::string_view l(lower.data(), cell.size());
  return l == "nan" || l == "na" || l == "n/a" || l == "null" || l == "none";
}

std::optional<double> parse_number(std::string_view cell) noexcept {
  cell = trim_view(cell);
  if (cell.empty()) return std::nullopt;
  if (cell.front() == '+') cell.remove_prefix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
  if (ec != std::errc() || ptr != cell.data() + cell.size()) return std::nullopt;
  return value;
}

std::optional<std::size_t> RawTable::column_index(std::string_view name) const {
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (columns[i].name == name) return i;
  }
  return std::nullopt;
}

RawTable parse_csv_table(std::string_view text, std::string_view source_id, const LoadOptions& options) {
  auto records = parse_csv(text);
  if (records.empty()) throw DataError("no header row");

  RawTable table;
  table.source_id = std::string(source_id);
  std::set<std::string, std::less<>> seen;
  for (auto& name : records.front()) {
    auto trimmed = trim(name);
    if (!seen.insert(trimmed).second) throw DataError("duplicate column name '" + trimmed + "'");
    table.columns.push_back({std::move(trimmed), ColumnKind::categorical});
  }
  const auto width = table.columns.size();
  table.rows.reserve(records.size() - 1);
  for (std::size_t r = 1; r < records.size(); ++r) {
    if (records[r].size() != width) {
      throw DataError("row " + std::to_string(r) + ": expected " + std::to_string(width) + " cells, found " +
                      std::to_string(records[r].size()));
    }
    table.rows.push_back(std::move(records[r]));
  }

  for (std::size_t c = 0; c < width; ++c) {
    auto& column = table.columns[c];
    if (auto it = options.kind_overrides.find(column.name); it != options.kind_overrides.end()) {
      column.kind = it->second;
      continue;
    }
    bool any_value = false;
    bool all_numeric = true;
    for (const auto& row : table.rows) {
      if (is_missing(row[c])) continue;
      any_value = true;
      if (!parse_number(row[c])) {
        all_numeric = false;
        break;
      }
    }
    column.kind = (any_value && all_numeric) ? ColumnKind::numeric : ColumnKind::categorical;
  }
  return table;
}

RawTable load_csv(const std::filesystem::path& path, std::string_view source_id, const LoadOptions& options) {
  if (!std::filesystem::exists(path)) throw DataError("missing file: " + path.string());
  const auto text = read_text_file(path);
  if (trim(text).empty()) throw DataError("no header row: " + path.string() + " is empty");
  return parse_csv_table(text, source_id, options);
}

void shuffle_indices(std::vector<std::size_t>& indices, std::uint64_t seed) {
  std::mt19937_64 rng(splitmix64(seed));
  for (std::size_t i = indices.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng() % i);
    std::swap(indices[i - 1], indices[j]);
  }
}

RawTable stratified_subsample(const RawTable& table, std::string_view label_column, std::size_t max_rows,
                              std::uint64_t seed) {
  const auto label_col = table.column_index(label_column);
  if (!label_col) throw DataError("label column '" + std::string(label_column) + "' not found");
  if (table.rows.size() <= max_rows) return table;

  std::map<std::string, std::vector<std::size_t>> by_class;
  for (std::size_t r = 0; r < table.rows.size(); ++r) by_class[table.rows[r][*label_col]].push_back(r);

  const double fraction = static_cast<double>(max_rows) / static_cast<double>(table.rows.size());
  std::vector<std::size_t> keep;
  std::uint64_t class_seed = seed;
  for (auto& [label, rows] : by_class) {
    class_seed = splitmix64(class_seed);
    auto take = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(rows.size())));
    take = std::clamp<std::size_t>(take, std::min<std::size_t>(2, rows.size()), rows.size());
    shuffle_indices(rows, class_seed);
    keep.insert(keep.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(take));
  }
  std::sort(keep.begin(), keep.end());

  RawTable out;
  out.columns = table.columns;
  out.source_id = table.source_id;
  out.rows.reserve(keep.size());
  for (auto r : keep) out.rows.push_back(table.rows[r]);
  return out;
}

// ---------------------------------------------------------------------------

const std::vector<std::string>& edge_iiotset_drop_columns() {
  static const std::vector<std::string> columns = {
      "frame.time",           "ip.src_host",        "ip.dst_host",
      "arp.src.proto_ipv4",   "arp.dst.proto_ipv4", "icmp.transmit_timestamp",
      "http.file_data",       "http.request.full_uri", "http.request.uri.query",
      "tcp.options",          "tcp.payload",        "tcp.srcport",
      "udp.port",             "mqtt.msg",           "Attack_label",
  };
  return columns;
}

PreprocessConfig PreprocessConfig::for_source(std::string_view source_id) {
  PreprocessConfig config;
  if (source_id == source_ids::kEdgeIIoTset) {
    config.label_column = "Attack_type";
    config.drop_columns = edge_iiotset_drop_columns();
  } else {
    config.label_column = "label";
  }
  return config;
}

void PreprocessConfig::validate() const {
  if (onehot_max_cardinality < 2) throw ConfigError("onehot_max_cardinality must be >= 2");
  if (label_column.empty()) throw ConfigError("label_column must be set");
}

json PreprocessConfig::to_json() const {
  return json{{"label_column", label_column},
              {"drop_columns", drop_columns},
              {"drop_constant_columns", drop_constant_columns},
              {"onehot_max_cardinality", onehot_max_cardinality},
              {"dedupe", dedupe},
              {"standardize", standardize},
              {"normalize_labels", normalize_labels}};
}

PreprocessConfig PreprocessConfig::from_json(const json& j) {
  PreprocessConfig c;
  c.label_column = j.value("label_column", c.label_column);
  c.drop_columns = j.value("drop_columns", c.drop_columns);
  c.drop_constant_columns = j.value("drop_constant_columns", c.drop_constant_columns);
  c.onehot_max_cardinality = j.value("onehot_max_cardinality", c.onehot_max_cardinality);
  c.dedupe = j.value("dedupe", c.dedupe);
  c.standardize = j.value("standardize", c.standardize);
  c.normalize_labels = j.value("normalize_labels", c.normalize_labels);
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------

FeaturePipeline FeaturePipeline::fit(const std::vector<Column>& columns,
                                     const std::vector<std::vector<std::string>>& rows,
                                     std::span<const std::size_t> row_indices, const PreprocessConfig& config) {
  FeaturePipeline p;
  p.standardize_ = config.standardize;
  std::size_t offset = 0;
  for (std::size_t c = 0; c < columns.size(); ++c) {
    ColumnEncoder enc;
    enc.column = columns[c];
    enc.offset = offset;
    if (columns[c].kind == ColumnKind::numeric) {
      std::vector<double> values;
      values.reserve(row_indices.size());
      for (auto r : row_indices) {
        if (auto v = finite_number(rows[r][c])) values.push_back(*v);
      }
      enc.encoding = Encoding::numeric;
      enc.numeric_fill = median_of(std::move(values));
      enc.width = 1;
      p.feature_names_.push_back(columns[c].name);
    } else {
      std::map<std::string, std::size_t> counts;
      for (auto r : row_indices) {
        if (!is_missing(rows[r][c])) ++counts[rows[r][c]];
      }
      std::size_t best = 0;
      for (const auto& [value, n] : counts) {
        enc.categories.push_back(value);
        if (n > best) {  // ties keep the lexicographically smallest value
          best = n;
          enc.category_fill = value;
        }
      }
      if (enc.categories.size() <= config.onehot_max_cardinality) {
        enc.encoding = Encoding::onehot;
        enc.width = enc.categories.size();
        for (const auto& value : enc.categories) p.feature_names_.push_back(columns[c].name + "=" + value);
      } else {
        enc.encoding = Encoding::ordinal;
        enc.width = 1;
        p.feature_names_.push_back(columns[c].name);
      }
    }
    offset += enc.width;
    p.encoders_.push_back(std::move(enc));
  }

  const auto width = offset;
  p.means_.assign(width, 0.0);
  p.stddevs_.assign(width, 1.0);
  if (config.standardize && !row_indices.empty()) {
    std::vector<double> encoded(width);
    std::vector<double> sum(width, 0.0);
    for (auto r : row_indices) {
      p.encode_row(rows[r], encoded);
      for (std::size_t f = 0; f < width; ++f) sum[f] += encoded[f];
    }
    const auto n = static_cast<double>(row_indices.size());
    for (std::size_t f = 0; f < width; ++f) p.means_[f] = sum[f] / n;
    std::vector<double> sq(width, 0.0);
    for (auto r : row_indices) {
      p.encode_row(rows[r], encoded);
      for (std::size_t f = 0; f < width; ++f) {
        const double d = encoded[f] - p.means_[f];
        sq[f] += d * d;
      }
    }
    for (std::size_t f = 0; f < width; ++f) {
      const double sd = std::sqrt(sq[f] / n);
      p.stddevs_[f] = sd > 0.0 ? sd : 1.0;
    }
  }
  return p;
}

void FeaturePipeline::encode_row(const std::vector<std::string>& row, std::span<double> out) const {
  for (std::size_t c = 0; c < encoders_.size(); ++c) {
    const auto& enc = encoders_[c];
    const auto& cell = row[c];
    switch (enc.encoding) {
      case Encoding::numeric: {
        const auto v = finite_number(cell);
        out[enc.offset] = v ? *v : enc.numeric_fill;
        break;
      }
      case Encoding::onehot: {
        const auto& value = is_missing(cell) ? enc.category_fill : cell;
        for (std::size_t k = 0; k < enc.width; ++k) out[enc.offset + k] = 0.0;
        const auto it = std::lower_bound(enc.categories.begin(), enc.categories.end(), value);
        if (it != enc.categories.end() && *it == value) {
          out[enc.offset + static_cast<std::size_t>(it - enc.categories.begin())] = 1.0;
        }
        break;
      }
      case Encoding::ordinal: {
        const auto& value = is_missing(cell) ? enc.category_fill : cell;
        const auto it = std::lower_bound(enc.categories.begin(), enc.categories.end(), value);
        const bool seen = it != enc.categories.end() && *it == value;
        out[enc.offset] = static_cast<double>(seen ? static_cast<std::size_t>(it - enc.categories.begin())
                                                   : enc.categories.size());
        break;
      }
    }
  }
}

Matrix FeaturePipeline::transform(const std::vector<std::vector<std::string>>& rows,
                                  std::span<const std::size_t> row_indices) const {
  Matrix out(row_indices.size(), feature_names_.size());
  for (std::size_t i = 0; i < row_indices.size(); ++i) {
    auto dst = out.row(i);
    encode_row(rows[row_indices[i]], dst);
    if (standardize_) {
      for (std::size_t f = 0; f < dst.size(); ++f) dst[f] = (dst[f] - means_[f]) / stddevs_[f];
    }
  }
  return out;
}

std::string FeaturePipeline::imputed_key(const std::vector<std::string>& row) const {
  std::string key;
  for (std::size_t c = 0; c < encoders_.size(); ++c) {
    const auto& enc = encoders_[c];
    if (enc.encoding == Encoding::numeric) {
      const auto v = finite_number(row[c]);
      const double value = (v ? *v : enc.numeric_fill) + 0.0;  // +0.0 folds -0 into 0
      key += format_exact(value);
    } else {
      key += is_missing(row[c]) ? enc.category_fill : row[c];
    }
    key.push_back('\x1f');
  }
  return key;
}

json FeaturePipeline::to_json() const {
  json encoders = json::array();
  for (const auto& e : encoders_) {
    encoders.push_back({{"column", e.column.name},
                        {"kind", to_string(e.column.kind)},
                        {"encoding", e.encoding == Encoding::numeric  ? "numeric"
                                     : e.encoding == Encoding::onehot ? "onehot"
                                                                      : "ordinal"},
                        {"numeric_fill", e.numeric_fill},
                        {"category_fill", e.category_fill},
                        {"categories", e.categories}});
  }
  return json{{"standardize", standardize_},
              {"encoders", encoders},
              {"feature_names", feature_names_},
              {"means", means_},
              {"stddevs", stddevs_}};
}

FeaturePipeline FeaturePipeline::from_json(const json& j) {
  FeaturePipeline p;
  p.standardize_ = j.at("standardize").get<bool>();
  std::size_t offset = 0;
  for (const auto& e : j.at("encoders")) {
    ColumnEncoder enc;
    enc.column = {e.at("column").get<std::string>(), kind_from_string(e.at("kind").get<std::string>())};
    const auto encoding = e.at("encoding").get<std::string>();
    enc.encoding = encoding == "numeric" ? Encoding::numeric
                   : encoding == "onehot" ? Encoding::onehot
                                          : Encoding::ordinal;
    enc.numeric_fill = e.at("numeric_fill").get<double>();
    enc.category_fill = e.at("category_fill").get<std::string>();
    enc.categories = e.at("categories").get<std::vector<std::string>>();
    enc.offset = offset;
    enc.width = enc.encoding == Encoding::onehot ? enc.categories.size() : 1;
    offset += enc.width;
    p.encoders_.push_back(std::move(enc));
  }
  p.feature_names_ = j.at("feature_names").get<std::vector<std::string>>();
  p.means_ = j.at("means").get<std::vector<double>>();
  p.stddevs_ = j.at("stddevs").get<std::vector<double>>();
  if (p.feature_names_.size() != offset || p.means_.size() != offset || p.stddevs_.size() != offset) {
    throw ParseError("feature pipeline width mismatch");
  }
  return p;
}

// ---------------------------------------------------------------------------

std::vector<std::size_t> LabeledDataset::label_indices() const {
  std::vector<std::size_t> out;
  out.reserve(labels.size());
  for (const auto& label : labels) {
    const auto it = std::lower_bound(class_set.begin(), class_set.end(), label);
    out.push_back(static_cast<std::size_t>(it - class_set.begin()));
  }
  return out;
}

std::map<std::string, std::size_t> LabeledDataset::class_counts() const {
  std::map<std::string, std::size_t> counts;
  for (const auto& label : labels) ++counts[label];
  return counts;
}

RawTable LabeledDataset::to_table() const {
  RawTable table;
  table.source_id = source_id;
  for (const auto& name : feature_names()) table.columns.push_back({name, ColumnKind::numeric});
  table.columns.push_back({config.label_column, ColumnKind::categorical});
  table.rows.reserve(size());
  for (std::size_t r = 0; r < size(); ++r) {
    std::vector<std::string> row;
    row.reserve(table.columns.size());
    for (double v : features.row(r)) row.push_back(format_exact(v));
    row.push_back(labels[r]);
    table.rows.push_back(std::move(row));
  }
  return table;
}

LabeledDataset preprocess(const RawTable& table, const PreprocessConfig& config) {
  config.validate();
  const auto label_col = table.column_index(config.label_column);
  if (!label_col) throw DataError("label column '" + config.label_column + "' not found");

  const std::set<std::string, std::less<>> dropped(config.drop_columns.begin(), config.drop_columns.end());
  std::vector<std::size_t> feature_cols;
  for (std::size_t c = 0; c < table.columns.size(); ++c) {
    if (c != *label_col && !dropped.contains(table.columns[c].name)) feature_cols.push_back(c);
  }
  if (feature_cols.empty()) throw DataError("no feature columns remain after dropping");

  // Label cleaning.
  const bool known_source = table.source_id == source_ids::kEdgeIIoTset ||
                            table.source_id == source_ids::kCICIoT2023;
  std::vector<std::size_t> rows;
  std::vector<std::string> labels;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& cell = table.rows[r][*label_col];
    if (is_missing(cell)) continue;
    std::string label = trim(cell);
    if (config.normalize_labels && known_source) {
      auto native = LabelMap::shipped().normalize_raw(label, table.source_id);
      if (!native) continue;
      label = std::move(*native);
    }
    rows.push_back(r);
    labels.push_back(std::move(label));
  }

  // Whole-column checks on the surviving rows.
  std::vector<std::size_t> kept_cols;
  for (auto c : feature_cols) {
    std::set<std::string> distinct;
    bool any = false;
    for (auto r : rows) {
      const auto& cell = table.rows[r][c];
      if (is_missing(cell)) continue;
      if (table.columns[c].kind == ColumnKind::numeric) {
        const auto v = finite_number(cell);
        if (!v) continue;
        distinct.insert(format_exact(*v + 0.0));
      } else {
        distinct.insert(cell);
      }
      any = true;
      if (distinct.size() > 1) break;
    }
    if (!any) throw DataError("feature column '" + table.columns[c].name + "' is entirely missing");
    if (config.drop_constant_columns && distinct.size() <= 1) continue;
    kept_cols.push_back(c);
  }
  if (kept_cols.empty()) throw DataError("every feature column is constant");

  auto store = std::make_shared<RawStore>();
  for (auto c : kept_cols) store->columns.push_back(table.columns[c]);
  store->rows.reserve(rows.size());
  for (auto r : rows) {
    std::vector<std::string> cells;
    cells.reserve(kept_cols.size());
    for (auto c : kept_cols) cells.push_back(table.rows[r][c]);
    store->rows.push_back(std::move(cells));
  }

  std::vector<std::size_t> all(store->rows.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;

  std::vector<std::size_t> selected;
  std::vector<std::string> selected_labels;
  if (config.dedupe) {
    const auto imputer = FeaturePipeline::fit(store->columns, store->rows, all, config);
    std::unordered_set<std::string> seen;
    for (auto i : all) {
      auto key = imputer.imputed_key(store->rows[i]);
      key += labels[i];
      if (seen.insert(std::move(key)).second) {
        selected.push_back(i);
        selected_labels.push_back(labels[i]);
      }
    }
  } else {
    selected = all;
    selected_labels = labels;
  }

  LabeledDataset ds;
  ds.source_id = table.source_id;
  ds.config = config;
  ds.labels = std::move(selected_labels);
  ds.class_set = ds.labels;
  std::sort(ds.class_set.begin(), ds.class_set.end());
  ds.class_set.erase(std::unique(ds.class_set.begin(), ds.class_set.end()), ds.class_set.end());
  if (ds.class_set.size() < 2) {
    throw DataError("single-class table: preprocessing needs at least 2 distinct labels");
  }
  ds.pipeline = FeaturePipeline::fit(store->columns, store->rows, selected, config);
  ds.features = ds.pipeline.transform(store->rows, selected);
  ds.raw = std::move(store);
  ds.raw_rows = std::move(selected);
  return ds;
}

SplitPair split(const LabeledDataset& ds, double ratio, std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio < 1.0)) throw ConfigError("split ratio must be in (0, 1)");
  std::map<std::string, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < ds.labels.size(); ++i) by_class[ds.labels[i]].push_back(i);

  SplitPair pair;
  pair.ratio = ratio;
  pair.seed = seed;
  std::uint64_t class_seed = seed;
  for (auto& [label, rows] : by_class) {
    if (rows.size() < 2) {
      throw DataError("class '" + label + "' has " + std::to_string(rows.size()) +
                      " row(s); stratified split needs at least 2");
    }
    class_seed = splitmix64(class_seed);
    shuffle_indices(rows, class_seed);
    auto n_train = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(rows.size())));
    n_train = std::clamp<std::size_t>(n_train, 1, rows.size() - 1);
    pair.train_indices.insert(pair.train_indices.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(n_train));
    pair.test_indices.insert(pair.test_indices.end(), rows.begin() + static_cast<std::ptrdiff_t>(n_train), rows.end());
  }
  std::sort(pair.train_indices.begin(), pair.train_indices.end());
  std::sort(pair.test_indices.begin(), pair.test_indices.end());

  auto raw_of = [&](const std::vector<std::size_t>& idx) {
    std::vector<std::size_t> out;
    out.reserve(idx.size());
    for (auto i : idx) out.push_back(ds.raw_rows[i]);
    return out;
  };
  const auto train_raw = raw_of(pair.train_indices);
  const auto test_raw = raw_of(pair.test_indices);
  const auto pipeline = FeaturePipeline::fit(ds.raw->columns, ds.raw->rows, train_raw, ds.config);

  auto make = [&](const std::vector<std::size_t>& idx, const std::vector<std::size_t>& raw_idx) {
    LabeledDataset part;
    part.source_id = ds.source_id;
    part.config = ds.config;
    part.class_set = ds.class_set;
    part.pipeline = pipeline;
    part.raw = ds.raw;
    part.raw_rows = raw_idx;
    part.features = pipeline.transform(ds.raw->rows, raw_idx);
    part.labels.reserve(idx.size());
    for (auto i : idx) part.labels.push_back(ds.labels[i]);
    return part;
  };
  pair.train = make(pair.train_indices, train_raw);
  pair.test = make(pair.test_indices, test_raw);
  return pair;
}

ordered_json sample_scenario_record(const LabeledDataset& ds, std::string_view native_label,
                                    std::uint64_t seed) {
  std::vector<std::size_t> matches;
  for (std::size_t i = 0; i < ds.labels.size(); ++i) {
    if (ds.labels[i] == native_label) matches.push_back(i);
  }
  if (matches.empty()) throw DataError("label '" + std::string(native_label) + "' not present in dataset");
  std::mt19937_64 rng(splitmix64(seed ^ fnv1a64(native_label)));
  const auto pick = matches[static_cast<std::size_t>(rng() % matches.size())];

  const auto& row = ds.raw->rows[ds.raw_rows[pick]];
  ordered_json record = ordered_json::object();
  for (std::size_t c = 0; c < ds.raw->columns.size(); ++c) {
    const auto& column = ds.raw->columns[c];
    const auto cell = trim(row[c]);
    if (is_missing(cell)) {
      record[column.name] = nullptr;
      continue;
    }
    if (column.kind == ColumnKind::numeric) {
      std::int64_t as_int = 0;
      const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), as_int);
      if (ec == std::errc() && ptr == cell.data() + cell.size()) {
        record[column.name] = as_int;
        continue;
      }
      if (const auto v = finite_number(cell)) {
        record[column.name] = *v;
        continue;
      }
    }
    record[column.name] = cell;
  }
  return record;
}

std::string sample_scenario(const LabeledDataset& ds, std::string_view native_label, std::uint64_t seed) {
  return sample_scenario_record(ds, native_label, seed).dump(2);
}

}  // namespace iotriage::dataset
