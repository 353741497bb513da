#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace iotriage::dataset {

namespace source_ids {
inline constexpr std::string_view kEdgeIIoTset = "edge-iiotset";
inline constexpr std::string_view kCICIoT2023 = "ciciot2023";
inline constexpr std::string_view kCustom = "custom";
}  // namespace source_ids

enum class AttackCategory { ddos, reconnaissance, spoofing, injection, malware, benign };

/// The 13 attack types shared by both datasets, plus Normal.
enum class CanonicalAttack {
  tcp_syn_flood,
  udp_flood,
  http_flood,
  icmp_flood,
  port_scanning,
  vulnerability_scanning,
  os_fingerprinting,
  mitm,
  xss,
  sql_injection,
  uploading,
  backdoor,
  password_cracking,
  normal,
};

inline constexpr std::array kAllCanonicalAttacks = {
    CanonicalAttack::tcp_syn_flood,     CanonicalAttack::udp_flood,
    CanonicalAttack::http_flood,        CanonicalAttack::icmp_flood,
    CanonicalAttack::port_scanning,     CanonicalAttack::vulnerability_scanning,
    CanonicalAttack::os_fingerprinting, CanonicalAttack::mitm,
    CanonicalAttack::xss,               CanonicalAttack::sql_injection,
    CanonicalAttack::uploading,         CanonicalAttack::backdoor,
    CanonicalAttack::password_cracking, CanonicalAttack::normal,
};

[[nodiscard]] std::string_view to_string(CanonicalAttack attack) noexcept;
[[nodiscard]] std::string_view to_string(AttackCategory category) noexcept;
[[nodiscard]] AttackCategory category_of(CanonicalAttack attack) noexcept;
[[nodiscard]] constexpr bool is_attack(CanonicalAttack attack) noexcept {
  return attack != CanonicalAttack::normal;
}
/// Exact display-name lookup ("TCP SYN Flood" -> tcp_syn_flood).
[[nodiscard]] std::optional<CanonicalAttack> canonical_from_name(std::string_view name) noexcept;

/// Native-label to canonical-attack mapping per dataset, plus aliases that
/// normalize the raw strings found in dataset exports to native labels.
class LabelMap {
 public:
  /// The versioned mapping compiled into the library.
  static const LabelMap& shipped();

  /// mapping_json: {source_id: {native_label: canonical_name}}
  /// aliases_json: {source_id: {raw_label: native_label}} (may be empty)
  static LabelMap from_json(std::string_view mapping_json, std::string_view aliases_json = "{}");

  /// Throws DataError naming the label when it is not a known native class of source_id.
  [[nodiscard]] CanonicalAttack harmonize(std::string_view native, std::string_view source_id) const;

  /// Maps a raw dataset label ("DDoS_TCP") to its native label ("TCP SYN Flood").
  /// Native labels pass through unchanged; labels outside the framework yield nullopt.
  [[nodiscard]] std::optional<std::string> normalize_raw(std::string_view raw,
                                                         std::string_view source_id) const;

  [[nodiscard]] std::vector<std::string> sources() const;
  /// All native labels of a source, in file order (benign class included).
  [[nodiscard]] std::vector<std::string> native_labels(std::string_view source_id) const;
  /// Native labels that harmonize to an attack (benign class excluded).
  [[nodiscard]] std::vector<std::string> attack_labels(std::string_view source_id) const;

  /// The mapping in its file shape.
  [[nodiscard]] std::string to_json() const;

 private:
  struct Source {
    std::string id;
    std::vector<std::pair<std::string, CanonicalAttack>> natives;
    std::map<std::string, std::string, std::less<>> aliases;
  };
  [[nodiscard]] const Source* find(std::string_view source_id) const;

  std::vector<Source> sources_;
};

/// harmonize against the shipped map. "custom" sources accept canonical names.
[[nodiscard]] CanonicalAttack harmonize_label(std::string_view native, std::string_view source_id);

/// Harmonize against any source, trying canonical names first. Used when the
/// dataset of a label is unknown (e.g. knowledge-base keys).
[[nodiscard]] std::optional<CanonicalAttack> harmonize_any(std::string_view label);

}  // namespace iotriage::dataset
