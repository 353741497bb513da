#include "iotriage/promptkit.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include "iotriage/error.hpp"
#include "iotriage/resources.hpp"
#include "iotriage/rubric.hpp"
#include "iotriage/util.hpp"

namespace iotriage {

std::string render_rubric_text() {
  std::string out;
  int n = 1;
  for (const auto& m : kRubric) {
    out += std::to_string(n++) + ". " + std::string(m.name) + " (" + std::to_string(m.max_points) + " points)\n";
    for (int c = 0; c < m.max_points; ++c) out += "   - " + std::string(m.criteria[static_cast<std::size_t>(c)]) + "\n";
  }
  out += "Each criterion is worth one point, for a total of " + std::to_string(kRubricMaxTotal) + " points.";
  return out;
}

}  // namespace iotriage

namespace iotriage::promptkit {

using json = nlohmann::json;

namespace {

struct Token {
  bool placeholder;
  std::string text;
};

std::vector<Token> tokenize(std::string_view text) {
  std::vector<Token> out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const auto open = text.find("{{", pos);
    if (open == std::string_view::npos) {
      out.push_back({false, std::string(text.substr(pos))});
      break;
    }
    if (open > pos) out.push_back({false, std::string(text.substr(pos, open - pos))});
    const auto close = text.find("}}", open + 2);
    if (close == std::string_view::npos) throw ConfigError("template has an unterminated placeholder");
    const auto name = trim(text.substr(open + 2, close - open - 2));
    if (name.empty()) throw ConfigError("template has an empty placeholder");
    out.push_back({true, name});
    pos = close + 2;
  }
  return out;
}

}  // namespace

std::string render_template(std::string_view text, const std::map<std::string, std::string>& values) {
  std::string out;
  for (const auto& t : tokenize(text)) {
    if (!t.placeholder) {
      out += t.text;
      continue;
    }
    const auto it = values.find(t.text);
    if (it == values.end()) throw ConfigError("no value for template placeholder {{" + t.text + "}}");
    out += it->second;
  }
  return out;
}

std::vector<std::string> placeholders(std::string_view text) {
  std::vector<std::string> out;
  for (const auto& t : tokenize(text)) {
    if (t.placeholder && std::find(out.begin(), out.end(), t.text) == out.end()) out.push_back(t.text);
  }
  return out;
}

namespace {

const std::set<std::string> kScenarioPlaceholders = {"environment", "attack_class", "features_json",
                                                     "attack_description", "device_spec"};
const std::set<std::string> kEvaluationPlaceholders = {"scenario", "response_a", "response_b", "rubric"};

void check_placeholders(std::string_view name, std::string_view text, const std::set<std::string>& expected) {
  const auto found = placeholders(text);
  const std::set<std::string> got(found.begin(), found.end());
  if (got != expected) {
    std::string list;
    for (const auto& p : expected) list += (list.empty() ? "" : ", ") + p;
    throw ConfigError(std::string(name) + " template must use exactly these placeholders: " + list);
  }
}

}  // namespace

void PromptTemplates::validate() const {
  check_placeholders("scenario", scenario, kScenarioPlaceholders);
  check_placeholders("evaluation", evaluation, kEvaluationPlaceholders);
}

PromptTemplates PromptTemplates::shipped() {
  PromptTemplates t{std::string(resource(resource_names::kScenarioTemplate)),
                    std::string(resource(resource_names::kEvaluationTemplate)), "v1"};
  return t;
}

std::vector<std::pair<std::string, std::string>> sections(std::string_view rendered) {
  std::vector<std::pair<std::string, std::string>> out;
  std::size_t pos = 0;
  while (pos <= rendered.size()) {
    auto eol = rendered.find('\n', pos);
    if (eol == std::string_view::npos) eol = rendered.size();
    const auto line = rendered.substr(pos, eol - pos);
    if (line.rfind("### ", 0) == 0) {
      out.emplace_back(std::string(line.substr(4)), std::string());
    } else if (!out.empty()) {
      out.back().second += std::string(line) + "\n";
    }
    pos = eol + 1;
  }
  for (auto& s : out) s.second = trim(s.second);
  return out;
}

std::string AttackClass::display() const {
  if (canonical.empty() || canonical == native) return native;
  return native + " (" + canonical + ")";
}

std::string environment_for(std::string_view source_id) {
  if (source_id == dataset::source_ids::kEdgeIIoTset) return "Edge-IIoTset edge computing testbed";
  if (source_id == dataset::source_ids::kCICIoT2023) return "CICIoT2023 smart home and office testbed";
  return "IoT/IIoT deployment";
}

json ScenarioPrompt::provenance() const {
  return {{"attack", {{"source_id", attack.source_id}, {"native", attack.native}, {"canonical", attack.canonical}}},
          {"features", json::parse(features_json)},
          {"attack_description", attack_description},
          {"device", device.to_json()},
          {"prompt_sha256", sha256_hex(rendered)}};
}

ScenarioPrompt build_scenario_prompt(const AttackClass& attack, std::string_view features_json,
                                     std::string_view attack_description, const rag::DeviceSpec& device,
                                     const PromptTemplates& templates) {
  if (trim(attack.native).empty()) throw DataError("scenario prompt: attack class is empty");
  if (trim(attack_description).empty()) throw DataError("scenario prompt: attack description is empty");
  device.validate();
  const auto features = trim(features_json);
  try {
    if (!json::parse(features).is_object()) throw DataError("scenario prompt: features must be a JSON object");
  } catch (const json::parse_error& e) {
    throw DataError(std::string("scenario prompt: features are not valid JSON: ") + e.what());
  }

  ScenarioPrompt p;
  p.attack = attack;
  p.features_json = features;
  p.attack_description = trim(attack_description);
  p.device = device;
  p.rendered = render_template(templates.scenario, {{"environment", environment_for(attack.source_id)},
                                                    {"attack_class", attack.display()},
                                                    {"features_json", p.features_json},
                                                    {"attack_description", p.attack_description},
                                                    {"device_spec", device.to_text()}});
  for (const auto& [heading, body] : sections(p.rendered)) {
    if (heading == "Role") p.role_preamble = body;
    if (heading == "Output Requirements") p.output_requirements = body;
  }
  return p;
}

std::vector<ScenarioSpec> enumerate_scenarios(const std::vector<std::string>& source_ids,
                                              const dataset::LabelMap& map) {
  std::vector<ScenarioSpec> out;
  std::set<std::string> seen;
  for (const auto& source : source_ids) {
    const auto labels = map.attack_labels(source);
    if (labels.empty()) throw ConfigError("no attack labels for dataset '" + source + "'");
    for (const auto& native : labels) {
      ScenarioSpec s;
      s.id = slugify(source) + "__" + slugify(native);
      s.attack = {source, native, std::string(dataset::to_string(map.harmonize(native, source)))};
      if (seen.insert(s.id).second) out.push_back(std::move(s));
    }
  }
  return out;
}

json Assignment::to_json() const {
  return {{"scenario_id", scenario_id}, {"A", model_a}, {"B", model_b}, {"seed", seed}};
}

Assignment Assignment::from_json(const json& j) {
  try {
    return {j.at("scenario_id").get<std::string>(), j.at("A").get<std::string>(), j.at("B").get<std::string>(),
            j.value("seed", std::uint64_t{0})};
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed assignment record: ") + e.what());
  }
}

bool swap_for_seed(std::uint64_t seed) noexcept { return (splitmix64(seed) & 1U) != 0; }

json EvaluationPrompt::provenance() const {
  return {{"scenario_id", scenario_id},
          {"assignment", assignment.to_json()},
          {"response_a_sha256", sha256_hex(response_a)},
          {"response_b_sha256", sha256_hex(response_b)},
          {"prompt_sha256", sha256_hex(rendered)}};
}

namespace {

constexpr std::string_view kRedaction = "[model]";

std::size_t find_ci(std::string_view haystack, std::string_view needle, std::size_t from) {
  const auto it = std::search(haystack.begin() + static_cast<std::ptrdiff_t>(from), haystack.end(), needle.begin(),
                              needle.end(), [](char a, char b) {
                                return std::tolower(static_cast<unsigned char>(a)) ==
                                       std::tolower(static_cast<unsigned char>(b));
                              });
  return it == haystack.end() ? std::string_view::npos : static_cast<std::size_t>(it - haystack.begin());
}

}  // namespace

bool mentions_any(std::string_view text, const std::vector<std::string>& names) {
  return std::any_of(names.begin(), names.end(),
                     [&](const std::string& n) { return !n.empty() && find_ci(text, n, 0) != std::string_view::npos; });
}

std::string redact(std::string_view text, const std::vector<std::string>& names) {
  std::string out(text);
  for (const auto& name : names) {
    if (name.size() < 3) throw ConfigError("model name '" + name + "' is too short to redact reliably");
    if (find_ci(kRedaction, name, 0) != std::string_view::npos) {
      throw ConfigError("model name '" + name + "' collides with the redaction marker");
    }
    std::string next;
    std::size_t pos = 0;
    for (auto hit = find_ci(out, name, 0); hit != std::string_view::npos; hit = find_ci(out, name, pos)) {
      next.append(out, pos, hit - pos);
      next += kRedaction;
      pos = hit + name.size();
    }
    next.append(out, pos, std::string::npos);
    out = std::move(next);
  }
  return out;
}

EvaluationPrompt build_evaluation_prompt(const std::string& scenario_id, const ScenarioPrompt& scenario,
                                         const ModelResponse& x, const ModelResponse& y, std::uint64_t seed,
                                         const std::vector<std::string>& extra_names,
                                         const PromptTemplates& templates) {
  if (x.model_id == y.model_id) throw ConfigError("evaluation prompt needs two distinct models, got " + x.model_id);
  if (trim(x.text).empty() || trim(y.text).empty()) throw DataError("evaluation prompt: empty response");
  const bool swap = swap_for_seed(seed);
  const auto& a = swap ? y : x;
  const auto& b = swap ? x : y;

  std::vector<std::string> names{x.model_id, y.model_id};
  names.insert(names.end(), extra_names.begin(), extra_names.end());
  // Longest first so a name containing another is redacted whole.
  std::sort(names.begin(), names.end(), [](const auto& l, const auto& r) { return l.size() > r.size(); });
  names.erase(std::remove_if(names.begin(), names.end(), [](const auto& n) { return n.empty(); }), names.end());

  EvaluationPrompt p;
  p.scenario_id = scenario_id;
  p.assignment = {scenario_id, a.model_id, b.model_id, seed};
  p.rubric_text = render_rubric_text();
  p.response_a = redact(trim(a.text), names);
  p.response_b = redact(trim(b.text), names);
  p.rendered = redact(render_template(templates.evaluation, {{"scenario", scenario.rendered},
                                                             {"response_a", p.response_a},
                                                             {"response_b", p.response_b},
                                                             {"rubric", p.rubric_text}}),
                      names);
  if (mentions_any(p.rendered, names)) {
    throw Error(ErrorKind::internal, "evaluation prompt still names an evaluated model after redaction");
  }
  return p;
}

}  // namespace iotriage::promptkit
