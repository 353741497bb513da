#include "iotriage/rag.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <mutex>
#include <numeric>
#include <set>
#include <thread>

#include "iotriage/error.hpp"
#include "iotriage/resources.hpp"
#include "iotriage/util.hpp"

namespace iotriage::rag {

using json = nlohmann::json;

namespace {

constexpr int kIndexFormatVersion = 1;

void normalize(EmbeddingVector& v) {
  double sq = 0.0;
  for (double x : v.values) sq += x * x;
  const double norm = std::sqrt(sq);
  if (norm == 0.0) throw DataError("cannot embed text without letters or digits");
  for (double& x : v.values) x /= norm;
  v.norm = 1.0;
}

bool blank(std::string_view text) {
  return std::all_of(text.begin(), text.end(), [](unsigned char c) { return std::isspace(c); });
}

}  // namespace

double dot(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.values.size() != b.values.size()) throw DataError("embedding dimensions differ");
  return std::inner_product(a.values.begin(), a.values.end(), b.values.begin(), 0.0);
}

// --- DeviceSpec -------------------------------------------------------------

void DeviceSpec::validate() const {
  if (name.empty()) throw DataError("device entry without a name");
  const std::pair<const char*, const std::string*> fields[] = {
      {"cpu", &cpu}, {"memory", &memory}, {"os", &os}, {"network_interface", &network_interface}};
  for (const auto& [field, value] : fields) {
    if (blank(*value)) throw DataError("device '" + name + "': field " + field + " is empty");
  }
}

std::string DeviceSpec::to_text() const {
  return "Device: " + name + "\nCPU: " + cpu + "\nMemory: " + memory + "\nOS: " + os +
         "\nNetwork interface: " + network_interface;
}

KnowledgeEntry DeviceSpec::to_entry() const { return {name, "device", to_text(), "device knowledge base", {}}; }

json DeviceSpec::to_json() const {
  return {{"name", name}, {"cpu", cpu}, {"memory", memory}, {"os", os}, {"network_interface", network_interface}};
}

// --- embedders --------------------------------------------------------------

HashingEmbedder::HashingEmbedder(std::size_t dimension) : dimension_(dimension) {
  if (dimension == 0) throw ConfigError("embedding dimension must be >= 1");
}

EmbeddingVector HashingEmbedder::embed(std::string_view text) const {
  if (blank(text)) throw DataError("cannot embed empty text");
  std::string clean(text.size(), ' ');
  std::transform(text.begin(), text.end(), clean.begin(), [](unsigned char c) {
    return std::isalnum(c) ? static_cast<char>(std::tolower(c)) : ' ';
  });

  EmbeddingVector v{std::vector<double>(dimension_, 0.0), 0.0};
  auto add = [&](char tag, std::string_view feature) {
    std::string key(1, tag);
    key += '\x1f';
    key += feature;
    const auto h = fnv1a64(key);
    v.values[h % dimension_] += (h >> 63) != 0 ? -1.0 : 1.0;
  };
  std::size_t pos = 0;
  while (pos < clean.size()) {
    while (pos < clean.size() && clean[pos] == ' ') ++pos;
    const auto end = clean.find(' ', pos);
    const auto stop = end == std::string::npos ? clean.size() : end;
    if (stop > pos) {
      const std::string_view word(clean.data() + pos, stop - pos);
      add('w', word);
      const std::string padded = " " + std::string(word) + " ";
      for (std::size_t i = 0; i + 3 <= padded.size(); ++i) add('c', std::string_view(padded).substr(i, 3));
    }
    pos = stop;
  }
  normalize(v);
  return v;
}

RemoteEmbedder::RemoteEmbedder(llm::EndpointConfig endpoint, std::size_t dimension,
                               std::shared_ptr<llm::Transport> transport, std::shared_ptr<const Embedder> fallback,
                               llm::EnvLookup env)
    : endpoint_(std::move(endpoint)),
      dimension_(dimension),
      transport_(std::move(transport)),
      fallback_(std::move(fallback)),
      env_(std::move(env)) {
  if (dimension_ == 0) throw ConfigError("embedding dimension must be >= 1");
  if (fallback_ && fallback_->dimension() != dimension_) {
    throw ConfigError("fallback embedder dimension differs from the remote embedder");
  }
}

std::size_t RemoteEmbedder::cache_size() const {
  std::shared_lock lock(cache_mu_);
  return cache_.size();
}

EmbeddingVector RemoteEmbedder::fetch(std::string_view text) const {
  std::optional<std::string> key;
  if (!endpoint_.credential_env.empty()) {
    key = env_(endpoint_.credential_env);
    if (!key) throw ConfigError("embedder: environment variable " + endpoint_.credential_env + " is not set");
  }
  llm::HttpRequest req;
  const auto base = endpoint_.base_url.empty() ? std::string("https://api.openai.com/v1") : endpoint_.base_url;
  req.url = (base.back() == '/' ? base.substr(0, base.size() - 1) : base) + "/embeddings";
  req.timeout_seconds = endpoint_.timeout_seconds;
  if (key) req.headers.emplace_back("Authorization", "Bearer " + *key);
  req.body = json{{"model", endpoint_.model}, {"input", std::string(text)}}.dump();

  const llm::RetryPolicy retry;
  std::string last_error;
  for (std::size_t attempt = 0; attempt <= endpoint_.max_retries; ++attempt) {
    if (attempt > 0) std::this_thread::sleep_for(retry.delay(attempt));
    llm::HttpResponse resp;
    try {
      resp = transport_->post(req);
    } catch (const NetworkError& e) {
      last_error = e.what();
      continue;
    }
    if (resp.status >= 200 && resp.status < 300) {
      try {
        EmbeddingVector v{json::parse(resp.body).at("data").at(0).at("embedding").get<std::vector<double>>(), 0.0};
        if (v.values.size() != dimension_) {
          throw DataError("embedder returned " + std::to_string(v.values.size()) + " dimensions, expected " +
                          std::to_string(dimension_));
        }
        normalize(v);
        return v;
      } catch (const json::exception& e) {
        throw ParseError(std::string("unexpected embedding response: ") + e.what());
      }
    }
    last_error = "HTTP " + std::to_string(resp.status);
    if (!llm::is_transient_status(resp.status)) break;
  }
  throw NetworkError("embedding endpoint " + endpoint_.id + " failed: " + last_error);
}

EmbeddingVector RemoteEmbedder::embed(std::string_view text) const {
  if (blank(text)) throw DataError("cannot embed empty text");
  const auto hash = sha256_hex(text);
  {
    std::shared_lock lock(cache_mu_);
    if (const auto it = cache_.find(hash); it != cache_.end()) return it->second;
  }
  EmbeddingVector v;
  try {
    v = fetch(text);
  } catch (const NetworkError&) {
    if (!fallback_) throw;
    return fallback_->embed(text);
  }
  std::unique_lock lock(cache_mu_);
  return cache_.emplace(hash, std::move(v)).first->second;
}

// --- index ------------------------------------------------------------------

std::vector<std::string> split_sentences(std::string_view text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    const bool end_mark = c == '.' || c == '!' || c == '?';
    if (end_mark && (i + 1 == text.size() || std::isspace(static_cast<unsigned char>(text[i + 1])))) {
      auto s = trim(text.substr(start, i + 1 - start));
      if (!s.empty()) out.push_back(std::move(s));
      start = i + 1;
    }
  }
  auto rest = trim(text.substr(std::min(start, text.size())));
  if (!rest.empty()) out.push_back(std::move(rest));
  return out;
}

VectorIndex VectorIndex::build(std::vector<KnowledgeEntry> entries, std::shared_ptr<const Embedder> embedder) {
  if (!embedder) throw ConfigError("index build requires an embedder");
  if (entries.empty()) throw DataError("cannot build an index from an empty knowledge base");
  std::set<std::pair<std::string, std::string>> seen;
  for (const auto& e : entries) {
    if (e.key.empty()) throw DataError("knowledge entry with an empty key");
    if (blank(e.text)) throw DataError("knowledge entry '" + e.key + "': text is empty");
    if (!seen.emplace(e.kind, e.key).second) {
      throw DataError("duplicate knowledge entry key '" + e.key + "' for kind " + e.kind);
    }
  }

  VectorIndex index;
  index.embedder_ = std::move(embedder);
  index.dimension_ = index.embedder_->dimension();
  index.entries_ = std::move(entries);
  for (std::size_t i = 0; i < index.entries_.size(); ++i) {
    const auto& e = index.entries_[i];
    std::vector<std::string> texts{e.text, e.key};
    texts.insert(texts.end(), e.aliases.begin(), e.aliases.end());
    std::set<std::string> unique;
    for (std::size_t t = 0; t < texts.size(); ++t) {
      if (blank(texts[t]) || !unique.insert(texts[t]).second) continue;
      index.passages_.push_back({i, texts[t], index.embedder_->embed(texts[t]), t == 0});
    }
  }
  return index;
}

const EmbeddingVector& VectorIndex::text_vector(std::size_t entry) const {
  for (const auto& p : passages_) {
    if (p.entry == entry && p.is_full_text) return p.vector;
  }
  throw DataError("no entry " + std::to_string(entry) + " in index");
}

std::vector<SearchHit> VectorIndex::query(std::string_view text, std::size_t k) const {
  return query(embedder_->embed(text), k);
}

std::vector<SearchHit> VectorIndex::query(const EmbeddingVector& vector, std::size_t k) const {
  if (entries_.empty()) throw DataError("query on an empty index");
  if (k < 1 || k > entries_.size()) {
    throw DataError("k = " + std::to_string(k) + " is outside [1, " + std::to_string(entries_.size()) + "]");
  }
  std::vector<double> best(entries_.size(), -std::numeric_limits<double>::infinity());
  std::vector<const Passage*> best_passage(entries_.size(), nullptr);
  for (const auto& p : passages_) {
    const double s = dot(vector, p.vector);
    if (s > best[p.entry]) {
      best[p.entry] = s;
      best_passage[p.entry] = &p;
    }
  }
  std::vector<std::size_t> order(entries_.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (best[a] != best[b]) return best[a] > best[b];
    return entries_[a].key < entries_[b].key;
  });
  std::vector<SearchHit> hits;
  for (std::size_t i = 0; i < k; ++i) {
    const auto e = order[i];
    hits.push_back({entries_[e], best[e], best_passage[e]->text});
  }
  return hits;
}

json VectorIndex::to_json() const {
  json entries = json::array();
  for (const auto& e : entries_) {
    entries.push_back(
        {{"key", e.key}, {"kind", e.kind}, {"text", e.text}, {"source", e.source}, {"aliases", e.aliases}});
  }
  json passages = json::array();
  for (const auto& p : passages_) {
    passages.push_back({{"entry", p.entry}, {"text", p.text}, {"full_text", p.is_full_text}, {"vector", p.vector.values}});
  }
  return {{"format", "iotriage-index"},
          {"format_version", kIndexFormatVersion},
          {"embedder", embedder_->id()},
          {"dimension", dimension_},
          {"entries", std::move(entries)},
          {"passages", std::move(passages)}};
}

VectorIndex VectorIndex::from_json(const json& j, std::shared_ptr<const Embedder> embedder) {
  try {
    if (j.value("format", "") != "iotriage-index") throw ParseError("not an iotriage index file");
    if (j.at("format_version").get<int>() != kIndexFormatVersion) throw ParseError("unsupported index format_version");
    if (j.at("embedder").get<std::string>() != embedder->id()) {
      throw ConfigError("index was built with embedder " + j.at("embedder").get<std::string>() + ", not " +
                        embedder->id());
    }
    VectorIndex index;
    index.embedder_ = std::move(embedder);
    index.dimension_ = j.at("dimension").get<std::size_t>();
    if (index.dimension_ != index.embedder_->dimension()) throw ParseError("index dimension mismatch");
    for (const auto& e : j.at("entries")) {
      index.entries_.push_back({e.at("key").get<std::string>(), e.at("kind").get<std::string>(),
                                e.at("text").get<std::string>(), e.value("source", ""),
                                e.value("aliases", std::vector<std::string>{})});
    }
    for (const auto& p : j.at("passages")) {
      Passage passage{p.at("entry").get<std::size_t>(), p.at("text").get<std::string>(),
                      {p.at("vector").get<std::vector<double>>(), 1.0}, p.value("full_text", false)};
      if (passage.entry >= index.entries_.size() || passage.vector.values.size() != index.dimension_) {
        throw ParseError("index passage references out-of-range data");
      }
      index.passages_.push_back(std::move(passage));
    }
    if (index.entries_.empty()) throw ParseError("index file has no entries");
    return index;
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed index file: ") + e.what());
  }
}

// --- knowledge bases --------------------------------------------------------

std::vector<KnowledgeEntry> parse_attack_kb(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("attack knowledge base is not valid JSON: ") + e.what());
  }
  if (!doc.is_array()) throw DataError("attack knowledge base must be a JSON array");
  std::vector<KnowledgeEntry> out;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const auto& e = doc[i];
    const auto key = e.is_object() && e.contains("key") && e["key"].is_string() ? e["key"].get<std::string>() : "";
    const auto where = key.empty() ? "entry #" + std::to_string(i) : "entry '" + key + "'";
    if (key.empty()) throw DataError("attack knowledge base " + where + ": missing key");
    auto text_field = [&](const char* name, bool required) {
      if (!e.contains(name)) {
        if (required) throw DataError("attack knowledge base " + where + ": missing " + name);
        return std::string();
      }
      if (!e[name].is_string()) throw DataError("attack knowledge base " + where + ": " + name + " must be a string");
      auto v = e[name].get<std::string>();
      if (required && blank(v)) throw DataError("attack knowledge base " + where + ": " + name + " is empty");
      return v;
    };
    KnowledgeEntry entry{key, e.value("kind", std::string("attack")), text_field("text", true),
                         text_field("source", false), {}};
    if (e.contains("aliases")) {
      if (!e["aliases"].is_array()) throw DataError("attack knowledge base " + where + ": aliases must be an array");
      for (const auto& a : e["aliases"]) {
        if (!a.is_string()) throw DataError("attack knowledge base " + where + ": aliases must be strings");
        entry.aliases.push_back(a.get<std::string>());
      }
    }
    if (entry.kind != "attack") throw DataError("attack knowledge base " + where + ": kind must be 'attack'");
    out.push_back(std::move(entry));
  }
  return out;
}

std::vector<DeviceSpec> parse_device_kb(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("device knowledge base is not valid JSON: ") + e.what());
  }
  if (!doc.is_array()) throw DataError("device knowledge base must be a JSON array");
  std::vector<DeviceSpec> out;
  std::set<std::string> names;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const auto& e = doc[i];
    auto field = [&](const char* name) {
      return e.is_object() && e.contains(name) && e[name].is_string() ? e[name].get<std::string>() : std::string();
    };
    DeviceSpec d{field("name"), field("cpu"), field("memory"), field("os"), field("network_interface")};
    if (d.name.empty()) throw DataError("device knowledge base entry #" + std::to_string(i) + ": missing name");
    d.validate();
    if (!names.insert(d.name).second) throw DataError("duplicate device '" + d.name + "'");
    out.push_back(std::move(d));
  }
  return out;
}

std::vector<KnowledgeEntry> shipped_attack_kb() { return parse_attack_kb(resource(resource_names::kAttackKb)); }

std::vector<DeviceSpec> shipped_device_kb() { return parse_device_kb(resource(resource_names::kDeviceKb)); }

// --- retrieval --------------------------------------------------------------

json RetrievedContext::provenance() const {
  return {{"attack_key", attack.key},
          {"attack_score", attack_score},
          {"attack_passage", attack_passage},
          {"device", device.name},
          {"device_score", device_score}};
}

namespace {

std::vector<KnowledgeEntry> device_entries(const std::vector<DeviceSpec>& devices) {
  std::vector<KnowledgeEntry> out;
  for (const auto& d : devices) {
    d.validate();
    out.push_back(d.to_entry());
  }
  return out;
}

}  // namespace

Retriever::Retriever(std::vector<KnowledgeEntry> attacks, std::vector<DeviceSpec> devices,
                     std::shared_ptr<const Embedder> embedder, double similarity_floor)
    : attacks_(VectorIndex::build(std::move(attacks), embedder)),
      devices_(VectorIndex::build(device_entries(devices), embedder)),
      floor_(similarity_floor) {
  for (auto& d : devices) device_specs_.emplace(d.name, std::move(d));
}

RetrievedContext Retriever::retrieve(std::string_view attack_label, std::string_view device_name) const {
  const auto attack = attacks_.query(attack_label, 1).front();
  if (attack.score < floor_) {
    throw DataError("no confident match for attack '" + std::string(attack_label) + "' (best '" + attack.entry.key +
                    "' at " + format_fixed(attack.score, 4) + " < " + format_fixed(floor_, 2) + ")");
  }
  const auto device = devices_.query(device_name, 1).front();
  if (device.score < floor_) {
    throw DataError("no confident match for device '" + std::string(device_name) + "' (best '" + device.entry.key +
                    "' at " + format_fixed(device.score, 4) + ")");
  }
  return {attack.entry, attack.score, attack.passage, device_specs_.at(device.entry.key), device.score};
}

}  // namespace iotriage::rag
