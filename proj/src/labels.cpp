#include "iotriage/labels.hpp"

#include <nlohmann/json.hpp>

#include "iotriage/error.hpp"
#include "iotriage/resources.hpp"

namespace iotriage::dataset {

using ordered_json = nlohmann::ordered_json;

namespace {

struct CanonicalInfo {
  CanonicalAttack attack;
  std::string_view name;
  AttackCategory category;
};

constexpr std::array<CanonicalInfo, 14> kCanonicalTable = {{
    {CanonicalAttack::tcp_syn_flood, "TCP SYN Flood", AttackCategory::ddos},
    {CanonicalAttack::udp_flood, "UDP Flood", AttackCategory::ddos},
    {CanonicalAttack::http_flood, "HTTP Flood", AttackCategory::ddos},
    {CanonicalAttack::icmp_flood, "ICMP Flood", AttackCategory::ddos},
    {CanonicalAttack::port_scanning, "Port Scanning", AttackCategory::reconnaissance},
    {CanonicalAttack::vulnerability_scanning, "Vulnerability Scanning", AttackCategory::reconnaissance},
    {CanonicalAttack::os_fingerprinting, "OS Fingerprinting", AttackCategory::reconnaissance},
    {CanonicalAttack::mitm, "MITM", AttackCategory::spoofing},
    {CanonicalAttack::xss, "XSS", AttackCategory::injection},
    {CanonicalAttack::sql_injection, "SQL Injection", AttackCategory::injection},
    {CanonicalAttack::uploading, "Uploading", AttackCategory::injection},
    {CanonicalAttack::backdoor, "Backdoor", AttackCategory::malware},
    {CanonicalAttack::password_cracking, "Password Cracking", AttackCategory::malware},
    {CanonicalAttack::normal, "Normal", AttackCategory::benign},
}};

const CanonicalInfo& info(CanonicalAttack attack) noexcept {
  return kCanonicalTable[static_cast<std::size_t>(attack)];
}

}  // namespace

std::string_view to_string(CanonicalAttack attack) noexcept { return info(attack).name; }

AttackCategory category_of(CanonicalAttack attack) noexcept { return info(attack).category; }

std::string_view to_string(AttackCategory category) noexcept {
  switch (category) {
    case AttackCategory::ddos: return "DDoS";
    case AttackCategory::reconnaissance: return "Reconnaissance";
    case AttackCategory::spoofing: return "Spoofing";
    case AttackCategory::injection: return "Injection";
    case AttackCategory::malware: return "Malware";
    case AttackCategory::benign: return "Benign";
  }
  return "?";
}

std::optional<CanonicalAttack> canonical_from_name(std::string_view name) noexcept {
  for (const auto& entry : kCanonicalTable) {
    if (entry.name == name) return entry.attack;
  }
  return std::nullopt;
}

const LabelMap& LabelMap::shipped() {
  static const LabelMap map = from_json(resource(resource_names::kLabelMapping),
                                        resource(resource_names::kRawLabelAliases));
  return map;
}

LabelMap LabelMap::from_json(std::string_view mapping_json, std::string_view aliases_json) {
  LabelMap map;
  ordered_json mapping;
  ordered_json aliases;
  try {
    mapping = ordered_json::parse(mapping_json);
    aliases = ordered_json::parse(aliases_json);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("label mapping is not valid JSON: ") + e.what());
  }
  if (!mapping.is_object()) throw ConfigError("label mapping must be a JSON object");

  for (const auto& [source_id, labels] : mapping.items()) {
    if (!labels.is_object()) throw ConfigError("label mapping for '" + source_id + "' must be an object");
    Source source;
    source.id = source_id;
    for (const auto& [native, canonical] : labels.items()) {
      if (!canonical.is_string()) throw ConfigError("canonical name for '" + native + "' must be a string");
      const auto attack = canonical_from_name(canonical.get<std::string>());
      if (!attack) {
        throw ConfigError("label '" + native + "' maps to unknown canonical attack '" +
                          canonical.get<std::string>() + "'");
      }
      source.natives.emplace_back(native, *attack);
    }
    if (aliases.contains(source_id)) {
      for (const auto& [raw, native] : aliases.at(source_id).items()) {
        source.aliases.emplace(raw, native.get<std::string>());
      }
    }
    map.sources_.push_back(std::move(source));
  }
  return map;
}

const LabelMap::Source* LabelMap::find(std::string_view source_id) const {
  for (const auto& source : sources_) {
    if (source.id == source_id) return &source;
  }
  return nullptr;
}

CanonicalAttack LabelMap::harmonize(std::string_view native, std::string_view source_id) const {
  const auto* source = find(source_id);
  if (source == nullptr) {
    throw DataError("unknown dataset source '" + std::string(source_id) + "' for label '" +
                    std::string(native) + "'");
  }
  for (const auto& [name, attack] : source->natives) {
    if (name == native) return attack;
  }
  throw DataError("unknown label '" + std::string(native) + "' for dataset " + std::string(source_id));
}

std::optional<std::string> LabelMap::normalize_raw(std::string_view raw, std::string_view source_id) const {
  const auto* source = find(source_id);
  if (source == nullptr) return std::string(raw);
  for (const auto& [name, attack] : source->natives) {
    if (name == raw) return name;
  }
  if (const auto it = source->aliases.find(raw); it != source->aliases.end()) return it->second;
  return std::nullopt;
}

std::vector<std::string> LabelMap::sources() const {
  std::vector<std::string> out;
  for (const auto& source : sources_) out.push_back(source.id);
  return out;
}

std::vector<std::string> LabelMap::native_labels(std::string_view source_id) const {
  std::vector<std::string> out;
  if (const auto* source = find(source_id)) {
    for (const auto& [name, attack] : source->natives) out.push_back(name);
  }
  return out;
}

std::vector<std::string> LabelMap::attack_labels(std::string_view source_id) const {
  std::vector<std::string> out;
  if (const auto* source = find(source_id)) {
    for (const auto& [name, attack] : source->natives) {
      if (is_attack(attack)) out.push_back(name);
    }
  }
  return out;
}

std::string LabelMap::to_json() const {
  ordered_json out = ordered_json::object();
  for (const auto& source : sources_) {
    ordered_json labels = ordered_json::object();
    for (const auto& [name, attack] : source.natives) labels[name] = std::string(to_string(attack));
    out[source.id] = std::move(labels);
  }
  return out.dump(2) + "\n";
}

CanonicalAttack harmonize_label(std::string_view native, std::string_view source_id) {
  if (source_id == source_ids::kCustom) {
    if (auto attack = canonical_from_name(native)) return *attack;
    throw DataError("unknown label '" + std::string(native) + "' for dataset custom");
  }
  return LabelMap::shipped().harmonize(native, source_id);
}

std::optional<CanonicalAttack> harmonize_any(std::string_view label) {
  if (auto attack = canonical_from_name(label)) return attack;
  const auto& map = LabelMap::shipped();
  for (const auto& source : map.sources()) {
    try {
      return map.harmonize(label, source);
    } catch (const DataError&) {
    }
  }
  return std::nullopt;
}

}  // namespace iotriage::dataset
