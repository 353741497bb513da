#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "iotriage/labels.hpp"
#include "iotriage/rag.hpp"

namespace iotriage::promptkit {

/// Replaces {{name}} placeholders. Throws ConfigError on a placeholder
/// without a value or an unterminated placeholder.
[[nodiscard]] std::string render_template(std::string_view text, const std::map<std::string, std::string>& values);
/// Placeholder names in order of first appearance.
[[nodiscard]] std::vector<std::string> placeholders(std::string_view text);

struct PromptTemplates {
  std::string scenario;
  std::string evaluation;
  std::string version = "v1";

  /// Throws ConfigError when a template lacks or adds placeholders.
  void validate() const;
  static PromptTemplates shipped();
};

/// "### Heading" sections of a rendered prompt, in order.
[[nodiscard]] std::vector<std::pair<std::string, std::string>> sections(std::string_view rendered);

inline const std::vector<std::string> kScenarioSections = {"Role", "Attack Class", "Network Traffic Features",
                                                            "Retrieved Context", "Output Requirements"};

struct AttackClass {
  std::string source_id;
  std::string native;
  std::string canonical;

  /// "Password Cracking", or "DNS Spoofing (MITM)" when the names differ.
  [[nodiscard]] std::string display() const;
};

/// Testbed wording used in the role preamble.
[[nodiscard]] std::string environment_for(std::string_view source_id);

struct ScenarioPrompt {
  AttackClass attack;
  std::string role_preamble;
  std::string features_json;
  std::string attack_description;
  rag::DeviceSpec device;
  std::string output_requirements;
  std::string rendered;

  [[nodiscard]] nlohmann::json provenance() const;
};

/// Throws DataError on invalid or non-object features_json, empty inputs or an
/// incomplete device spec.
[[nodiscard]] ScenarioPrompt build_scenario_prompt(const AttackClass& attack, std::string_view features_json,
                                                   std::string_view attack_description, const rag::DeviceSpec& device,
                                                   const PromptTemplates& templates = PromptTemplates::shipped());

struct ScenarioSpec {
  std::string id;  // "<source>__<native-label-slug>", stable across runs
  AttackClass attack;
};

/// One scenario per native attack label of each source, in mapping order.
[[nodiscard]] std::vector<ScenarioSpec> enumerate_scenarios(const std::vector<std::string>& source_ids,
                                                            const dataset::LabelMap& map = dataset::LabelMap::shipped());

struct ModelResponse {
  std::string model_id;
  std::string text;
};

/// Which evaluated model was shown as Response A / B.
struct Assignment {
  std::string scenario_id;
  std::string model_a;
  std::string model_b;
  std::uint64_t seed = 0;

  [[nodiscard]] nlohmann::json to_json() const;
  static Assignment from_json(const nlohmann::json& j);
  friend bool operator==(const Assignment&, const Assignment&) = default;
};

/// True when the seeded coin flip puts the second response first.
[[nodiscard]] bool swap_for_seed(std::uint64_t seed) noexcept;

struct EvaluationPrompt {
  std::string scenario_id;
  std::string response_a;
  std::string response_b;
  Assignment assignment;
  std::string rubric_text;
  std::string rendered;

  [[nodiscard]] nlohmann::json provenance() const;
};

/// Replaces every case-insensitive occurrence of each name with "[model]".
/// Throws ConfigError for names shorter than three characters.
[[nodiscard]] std::string redact(std::string_view text, const std::vector<std::string>& names);
/// Case-insensitive substring scan.
[[nodiscard]] bool mentions_any(std::string_view text, const std::vector<std::string>& names);

/// Orders the two responses by a coin flip on seed and redacts the model ids
/// plus extra_names from the render. Throws ConfigError on identical model ids.
[[nodiscard]] EvaluationPrompt build_evaluation_prompt(const std::string& scenario_id, const ScenarioPrompt& scenario,
                                                       const ModelResponse& x, const ModelResponse& y,
                                                       std::uint64_t seed,
                                                       const std::vector<std::string>& extra_names = {},
                                                       const PromptTemplates& templates = PromptTemplates::shipped());

}  // namespace iotriage::promptkit
