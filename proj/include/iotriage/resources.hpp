#pragma once

#include <map>
#include <string>
#include <string_view>

namespace iotriage {

/// Files shipped under resources/, compiled into the library.
const std::map<std::string_view, std::string_view>& embedded_resources();

/// Looks up an embedded resource by relative path, e.g. "kb/attacks.v1.json".
/// Throws ConfigError when absent.
[[nodiscard]] std::string_view resource(std::string_view name);

namespace resource_names {
inline constexpr std::string_view kLabelMapping = "label_mapping.v1.json";
inline constexpr std::string_view kRawLabelAliases = "raw_label_aliases.v1.json";
inline constexpr std::string_view kAttackKb = "kb/attacks.v1.json";
inline constexpr std::string_view kDeviceKb = "kb/devices.v1.json";
inline constexpr std::string_view kScenarioTemplate = "templates/scenario_prompt.v1.txt";
inline constexpr std::string_view kEvaluationTemplate = "templates/evaluation_prompt.v1.txt";
}  // namespace resource_names

}  // namespace iotriage
