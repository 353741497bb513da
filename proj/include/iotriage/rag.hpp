#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "iotriage/llm_gateway.hpp"

namespace iotriage::rag {

inline constexpr std::size_t kDefaultDimension = 384;
inline constexpr double kDefaultSimilarityFloor = 0.15;

struct KnowledgeEntry {
  std::string key;
  std::string kind;  // "attack" or "device"
  std::string text;
  std::string source;
  /// Other names the entry is known by; each is indexed next to the key.
  std::vector<std::string> aliases;

  friend bool operator==(const KnowledgeEntry&, const KnowledgeEntry&) = default;
};

struct DeviceSpec {
  std::string name;
  std::string cpu;
  std::string memory;
  std::string os;
  std::string network_interface;

  /// Throws DataError naming the device and the empty field.
  void validate() const;
  /// "Device: ...\nCPU: ...\nMemory: ...\nOS: ...\nNetwork interface: ..."
  [[nodiscard]] std::string to_text() const;
  [[nodiscard]] KnowledgeEntry to_entry() const;
  [[nodiscard]] nlohmann::json to_json() const;

  friend bool operator==(const DeviceSpec&, const DeviceSpec&) = default;
};

/// Unit-norm embedding; norm is the L2 norm of values (1 for every embedder here).
struct EmbeddingVector {
  std::vector<double> values;
  double norm = 0.0;
};

[[nodiscard]] double dot(const EmbeddingVector& a, const EmbeddingVector& b);

class Embedder {
 public:
  virtual ~Embedder() = default;
  /// Throws DataError on empty text.
  [[nodiscard]] virtual EmbeddingVector embed(std::string_view text) const = 0;
  [[nodiscard]] virtual std::size_t dimension() const = 0;
  /// Identifies the vector space; persisted indices are only reusable with a matching id.
  [[nodiscard]] virtual std::string id() const = 0;
};

/// Feature hashing of word unigrams and character trigrams: FNV-1a picks the
/// bucket and the top hash bit the sign, so unrelated texts score near 0
/// instead of sharing a positive bias. Term frequencies, L2-normalized. Text is lowercased and every
/// non-alphanumeric character acts as a separator.
class HashingEmbedder final : public Embedder {
 public:
  explicit HashingEmbedder(std::size_t dimension = kDefaultDimension);

  [[nodiscard]] EmbeddingVector embed(std::string_view text) const override;
  [[nodiscard]] std::size_t dimension() const override { return dimension_; }
  [[nodiscard]] std::string id() const override { return "hashing-v2-d" + std::to_string(dimension_); }

 private:
  std::size_t dimension_;
};

/// OpenAI-compatible /embeddings endpoint (e.g. a server hosting a sentence
/// transformer). Results are cached by text hash. When a fallback is given it
/// is used after the remote call fails; the vector spaces then differ.
class RemoteEmbedder final : public Embedder {
 public:
  RemoteEmbedder(llm::EndpointConfig endpoint, std::size_t dimension, std::shared_ptr<llm::Transport> transport,
                 std::shared_ptr<const Embedder> fallback = nullptr, llm::EnvLookup env = llm::process_env);

  [[nodiscard]] EmbeddingVector embed(std::string_view text) const override;
  [[nodiscard]] std::size_t dimension() const override { return dimension_; }
  [[nodiscard]] std::string id() const override { return "remote-" + endpoint_.model; }
  [[nodiscard]] std::size_t cache_size() const;

 private:
  [[nodiscard]] EmbeddingVector fetch(std::string_view text) const;

  llm::EndpointConfig endpoint_;
  std::size_t dimension_;
  std::shared_ptr<llm::Transport> transport_;
  std::shared_ptr<const Embedder> fallback_;
  llm::EnvLookup env_;
  mutable std::shared_mutex cache_mu_;
  mutable std::map<std::string, EmbeddingVector> cache_;
};

/// Splits on sentence-final punctuation followed by whitespace.
[[nodiscard]] std::vector<std::string> split_sentences(std::string_view text);

struct SearchHit {
  KnowledgeEntry entry;
  double score = 0.0;
  std::string passage;  // the indexed text that produced the score
};

/// Exact flat index. Each entry is indexed under its full text, its key and
/// its aliases; an entry scores the best cosine over those passages.
/// Immutable after build.
class VectorIndex {
 public:
  /// Throws DataError on an empty list, an empty text or a duplicate key within a kind.
  static VectorIndex build(std::vector<KnowledgeEntry> entries, std::shared_ptr<const Embedder> embedder);

  /// Top-k entries by cosine, descending; ties by key. Throws DataError when k is outside [1, size].
  [[nodiscard]] std::vector<SearchHit> query(std::string_view text, std::size_t k) const;
  [[nodiscard]] std::vector<SearchHit> query(const EmbeddingVector& vector, std::size_t k) const;

  [[nodiscard]] std::size_t size() const noexcept { return entries_.size(); }
  [[nodiscard]] std::size_t dimension() const noexcept { return dimension_; }
  [[nodiscard]] const std::vector<KnowledgeEntry>& entries() const noexcept { return entries_; }
  /// Vector of an entry's full text.
  [[nodiscard]] const EmbeddingVector& text_vector(std::size_t entry) const;
  [[nodiscard]] const Embedder& embedder() const noexcept { return *embedder_; }

  [[nodiscard]] nlohmann::json to_json() const;
  /// Refuses files built by a different embedder or format version.
  static VectorIndex from_json(const nlohmann::json& j, std::shared_ptr<const Embedder> embedder);

 private:
  struct Passage {
    std::size_t entry;
    std::string text;
    EmbeddingVector vector;
    bool is_full_text = false;
  };

  std::shared_ptr<const Embedder> embedder_;
  std::size_t dimension_ = 0;
  std::vector<KnowledgeEntry> entries_;
  std::vector<Passage> passages_;
};

/// Attack KB: JSON array of {key, kind, text, source[, aliases]}. Errors name the entry key.
[[nodiscard]] std::vector<KnowledgeEntry> parse_attack_kb(std::string_view json_text);
/// Device KB: JSON array of {name, cpu, memory, os, network_interface}.
[[nodiscard]] std::vector<DeviceSpec> parse_device_kb(std::string_view json_text);
[[nodiscard]] std::vector<KnowledgeEntry> shipped_attack_kb();
[[nodiscard]] std::vector<DeviceSpec> shipped_device_kb();

struct RetrievedContext {
  KnowledgeEntry attack;
  double attack_score = 0.0;
  std::string attack_passage;
  DeviceSpec device;
  double device_score = 0.0;

  [[nodiscard]] nlohmann::json provenance() const;
};

/// Attack and device indices sharing one embedder.
class Retriever {
 public:
  Retriever(std::vector<KnowledgeEntry> attacks, std::vector<DeviceSpec> devices,
            std::shared_ptr<const Embedder> embedder, double similarity_floor = kDefaultSimilarityFloor);

  /// Top-1 from each index. Throws DataError ("no confident match") when a
  /// top-1 similarity is below the floor.
  [[nodiscard]] RetrievedContext retrieve(std::string_view attack_label, std::string_view device_name) const;

  [[nodiscard]] const VectorIndex& attacks() const noexcept { return attacks_; }
  [[nodiscard]] const VectorIndex& devices() const noexcept { return devices_; }
  [[nodiscard]] double similarity_floor() const noexcept { return floor_; }

 private:
  VectorIndex attacks_;
  VectorIndex devices_;
  std::map<std::string, DeviceSpec> device_specs_;
  double floor_;
};

}  // namespace iotriage::rag
