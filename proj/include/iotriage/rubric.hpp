#pragma once

#include <array>
#include <string>
#include <string_view>

namespace iotriage {

/// One scoring metric of the response rubric. Each criterion is worth one point.
struct RubricMetric {
  std::string_view key;   // score-block field name
  std::string_view name;  // display name
  int max_points;
  std::array<std::string_view, 3> criteria;  // first max_points entries are used
};

inline constexpr std::array<RubricMetric, 4> kRubric = {{
    {"attack_analysis",
     "Attack Analysis and Threat Understanding",
     3,
     {"Accurately identifies and describes the attack from the given traffic data.",
      "Detects the key abnormal network or system features.",
      "Explains the role of those features and the potential impact of the attack."}},
    {"mitigation",
     "Mitigation Quality and Practicality",
     3,
     {"Suggests relevant, applicable mitigations aligned with established cybersecurity practices.",
      "Considers the hardware and software limitations of the mitigation device.",
      "Fits the specific attack scenario."}},
    {"technical_depth",
     "Technical Depth and Security Awareness",
     2,
     {"Shows understanding of exploitation mechanics, threat models and relevant protocols.",
      "Is technically accurate about vulnerabilities and controls and follows cybersecurity standards.",
      ""}},
    {"clarity",
     "Clarity, Structure, and Justification",
     2,
     {"Reasoning is well structured and supported by sound logic.",
      "Free from hallucinations or unsupported claims.",
      ""}},
}};

inline constexpr int kRubricMaxTotal = 10;

/// Metric list with point scales and criteria, as embedded in the evaluation prompt.
[[nodiscard]] std::string render_rubric_text();

}  // namespace iotriage
