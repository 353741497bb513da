#include "iotriage/judging.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <regex>
#include <set>

#include "iotriage/dataset.hpp"
#include "iotriage/error.hpp"
#include "iotriage/rubric.hpp"
#include "iotriage/util.hpp"

namespace iotriage::judging {

using json = nlohmann::json;

namespace {

constexpr double kEps = 1e-9;

std::optional<double>& metric_ref(RubricScore& s, std::size_t i) {
  switch (i) {
    case 0: return s.attack_analysis;
    case 1: return s.mitigation;
    case 2: return s.technical_depth;
    default: return s.clarity;
  }
}

const std::optional<double>& metric_ref(const RubricScore& s, std::size_t i) {
  return metric_ref(const_cast<RubricScore&>(s), i);
}

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> opt_number(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  const auto& v = j.at(key);
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) {
    if (auto d = dataset::parse_number(trim(v.get<std::string>()))) return d;
  }
  throw ParseError(std::string("score field ") + key + " is not a number");
}

}  // namespace

// --- RubricScore ------------------------------------------------------------

bool RubricScore::has_all_metrics() const noexcept {
  return attack_analysis && mitigation && technical_depth && clarity;
}

bool RubricScore::has_any_metric() const noexcept {
  return attack_analysis || mitigation || technical_depth || clarity;
}

double RubricScore::total() const {
  if (has_all_metrics()) return *attack_analysis + *mitigation + *technical_depth + *clarity;
  if (stated_total) return *stated_total;
  throw DataError("score has neither all four metrics nor a total");
}

RubricScore RubricScore::from_metrics(double m1, double m2, double m3, double m4) {
  return {m1, m2, m3, m4, m1 + m2 + m3 + m4};
}

json RubricScore::to_json() const {
  json j;
  for (std::size_t i = 0; i < kRubric.size(); ++i) j[std::string(kRubric[i].key)] = opt(metric_ref(*this, i));
  j["total"] = opt(stated_total);
  return j;
}

RubricScore RubricScore::from_json(const json& j) {
  RubricScore s;
  for (std::size_t i = 0; i < kRubric.size(); ++i) {
    metric_ref(s, i) = opt_number(j, std::string(kRubric[i].key).c_str());
  }
  s.stated_total = opt_number(j, "total");
  return s;
}

std::string_view to_string(Preference p) noexcept {
  switch (p) {
    case Preference::a: return "A";
    case Preference::b: return "B";
    case Preference::tie: return "tie";
  }
  return "tie";
}

namespace {

std::optional<Preference> preference_from_string(std::string_view s) {
  const auto v = to_lower(trim(s));
  if (v == "a" || v == "response a" || v == "response_a") return Preference::a;
  if (v == "b" || v == "response b" || v == "response_b") return Preference::b;
  if (v == "tie" || v == "none" || v == "equal") return Preference::tie;
  return std::nullopt;
}

}  // namespace

json JudgeVerdict::to_json() const {
  return {{"judge_id", judge_id},
          {"scenario_id", scenario_id},
          {"score_a", score_a.to_json()},
          {"score_b", score_b.to_json()},
          {"preferred", preferred ? json(to_string(*preferred)) : json(nullptr)},
          {"preferred_inferred", preferred_inferred},
          {"justification", justification},
          {"parse_path", path == ParsePath::score_block ? "score_block" : "prose"},
          {"raw", raw}};
}

JudgeVerdict JudgeVerdict::from_json(const json& j) {
  try {
    JudgeVerdict v;
    v.judge_id = j.value("judge_id", "");
    v.scenario_id = j.value("scenario_id", "");
    v.score_a = RubricScore::from_json(j.at("score_a"));
    v.score_b = RubricScore::from_json(j.at("score_b"));
    if (j.contains("preferred") && j.at("preferred").is_string()) {
      v.preferred = preference_from_string(j.at("preferred").get<std::string>());
    }
    v.preferred_inferred = j.value("preferred_inferred", false);
    v.justification = j.value("justification", "");
    v.path = j.value("parse_path", "score_block") == "prose" ? ParsePath::prose : ParsePath::score_block;
    v.raw = j.value("raw", "");
    return v;
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed verdict record: ") + e.what());
  }
}

std::string render_score_block(const RubricScore& a, const RubricScore& b, Preference preferred) {
  auto side = [](const RubricScore& s) {
    nlohmann::ordered_json j;
    for (std::size_t i = 0; i < kRubric.size(); ++i) j[std::string(kRubric[i].key)] = opt(metric_ref(s, i));
    j["total"] = s.has_all_metrics() || s.stated_total ? json(s.total()) : json(nullptr);
    return j;
  };
  nlohmann::ordered_json block;
  block["response_a"] = side(a);
  block["response_b"] = side(b);
  block["preferred"] = to_string(preferred);
  return "BEGIN_SCORES\n" + block.dump() + "\nEND_SCORES";
}

// --- parsing ----------------------------------------------------------------

namespace {

std::string excerpt(std::string_view raw) {
  constexpr std::size_t kMax = 2000;
  if (raw.size() <= kMax) return std::string(raw);
  return std::string(raw.substr(0, kMax)) + "...";
}

[[noreturn]] void fail(std::string_view why, std::string_view raw) {
  throw ParseError("unparseable judge verdict (" + std::string(why) + "); raw text follows:\n" + excerpt(raw));
}

std::optional<JudgeVerdict> parse_block(std::string_view raw, std::string& error) {
  const auto begin = raw.rfind("BEGIN_SCORES");
  if (begin == std::string_view::npos) return std::nullopt;
  const auto end = raw.find("END_SCORES", begin + 12);
  if (end == std::string_view::npos) {
    error = "score block without END_SCORES";
    return std::nullopt;
  }
  try {
    const auto j = json::parse(raw.substr(begin + 12, end - begin - 12));
    JudgeVerdict v;
    for (const auto* side : {"response_a", "response_b"}) {
      auto s = RubricScore::from_json(j.at(side));
      if (!s.has_all_metrics()) throw ParseError(std::string(side) + " lacks a metric score");
      (std::string_view(side) == "response_a" ? v.score_a : v.score_b) = s;
    }
    if (j.contains("preferred") && j.at("preferred").is_string()) {
      v.preferred = preference_from_string(j.at("preferred").get<std::string>());
    }
    v.path = ParsePath::score_block;
    v.justification = trim(raw.substr(0, begin));
    return v;
  } catch (const json::exception& e) {
    error = std::string("score block is not valid JSON: ") + e.what();
  } catch (const Error& e) {
    error = e.what();
  }
  return std::nullopt;
}

const std::regex& heading_re() {
  static const std::regex re(R"(^[\s#*_>|\-]*response\s*([ab])\b)", std::regex::icase);
  return re;
}

const std::regex& mention_re() {
  static const std::regex re(R"(response\s*([ab])\b)", std::regex::icase);
  return re;
}

const std::regex& total_re() {
  static const std::regex re(R"((\d+(?:\.\d+)?)\s*(?:/\s*10(?![\d.])|out\s+of\s+10\b))", std::regex::icase);
  return re;
}

const std::vector<std::regex>& metric_res() {
  static const std::vector<std::regex> res = [] {
    const char* phrases[] = {"attack\\s+analysis", "mitigation", "technical\\s+depth", "clarity"};
    std::vector<std::regex> out;
    for (const auto* p : phrases) out.emplace_back(p, std::regex::icase);
    return out;
  }();
  return res;
}

const std::regex& fraction_re() {
  static const std::regex re(R"((\d+(?:\.\d+)?)\s*(?:/|out\s+of)\s*(\d+(?:\.\d+)?))", std::regex::icase);
  return re;
}

struct SideParse {
  RubricScore score;
  std::optional<double> keyword_total;
  std::optional<double> last_total;
};

std::optional<Preference> find_preference(const std::string& text) {
  static const std::vector<std::pair<std::regex, int>> patterns = {
      {std::regex(R"(response\s*([ab])\s+(?:is|was|remains)\s+(?:clearly\s+|slightly\s+|overall\s+)?(?:the\s+)?(?:better|superior|stronger|preferred|more\s+effective))",
                  std::regex::icase),
       1},
      {std::regex(R"(response\s*([ab])\s+(?:clearly\s+|slightly\s+)?outperforms)", std::regex::icase), 1},
      {std::regex(R"((?:prefer(?:red)?|winner|better\s+response)\s*(?:is|:)?\s*(?:\*\*)?\s*(?:response\s*)?([ab])\b)",
                  std::regex::icase),
       1},
      {std::regex(R"(\b(tie)\b|\bequally\s+(?:good|strong)\b)", std::regex::icase), 0},
  };
  std::optional<Preference> found;
  std::ptrdiff_t best_pos = -1;
  for (const auto& [re, group] : patterns) {
    for (auto it = std::sregex_iterator(text.begin(), text.end(), re); it != std::sregex_iterator(); ++it) {
      const auto pos = it->position(0);
      if (pos < best_pos) continue;
      best_pos = pos;
      if (group == 0) {
        found = Preference::tie;
      } else {
        found = std::tolower(static_cast<unsigned char>((*it)[1].str()[0])) == 'a' ? Preference::a : Preference::b;
      }
    }
  }
  return found;
}

JudgeVerdict parse_prose(std::string_view raw_view) {
  const std::string raw(raw_view);
  std::vector<std::string> lines;
  {
    std::size_t pos = 0;
    while (pos <= raw.size()) {
      auto eol = raw.find('\n', pos);
      if (eol == std::string::npos) eol = raw.size();
      lines.push_back(raw.substr(pos, eol - pos));
      pos = eol + 1;
    }
  }
  const bool has_headings = std::any_of(lines.begin(), lines.end(), [](const std::string& l) {
    std::smatch m;
    return std::regex_search(l, m, heading_re());
  });

  SideParse sides[2];
  int owner = -1;
  for (const auto& line : lines) {
    std::smatch m;
    int line_owner = owner;
    if (has_headings) {
      if (std::regex_search(line, m, heading_re())) {
        owner = std::tolower(static_cast<unsigned char>(m[1].str()[0])) == 'a' ? 0 : 1;
        line_owner = owner;
      }
    }

    // Totals on this line; without headings, the closest preceding mention owns each one.
    std::vector<std::pair<std::ptrdiff_t, int>> mentions;
    for (auto it = std::sregex_iterator(line.begin(), line.end(), mention_re()); it != std::sregex_iterator(); ++it) {
      mentions.emplace_back(it->position(0), std::tolower(static_cast<unsigned char>((*it)[1].str()[0])) == 'a' ? 0 : 1);
    }
    std::vector<std::pair<double, bool>> totals;
    std::vector<std::ptrdiff_t> total_pos;
    for (auto it = std::sregex_iterator(line.begin(), line.end(), total_re()); it != std::sregex_iterator(); ++it) {
      const auto pos = it->position(0);
      const auto before = to_lower(line.substr(static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, pos - 60)),
                                               static_cast<std::size_t>(std::min<std::ptrdiff_t>(pos, 60))));
      totals.emplace_back(std::stod((*it)[1].str()), before.find("total") != std::string::npos ||
                                                         before.find("overall") != std::string::npos ||
                                                         before.find("score") != std::string::npos);
      total_pos.push_back(pos);
    }
    // A table row carries both columns even when a header line set the owner.
    const bool two_column = mentions.empty() && (line_owner < 0 || line.find('|') != std::string::npos);
    if (totals.size() == 2 && two_column) {
      // Table row "Total | 9.5/10 | 8/10".
      for (int s = 0; s < 2; ++s) {
        sides[s].last_total = totals[static_cast<std::size_t>(s)].first;
        if (!sides[s].keyword_total) sides[s].keyword_total = totals[static_cast<std::size_t>(s)].first;
      }
    } else {
      for (std::size_t t = 0; t < totals.size(); ++t) {
        int who = line_owner;
        if (!has_headings || who < 0) {
          for (const auto& [pos, side] : mentions) {
            if (pos < total_pos[t]) who = side;
          }
          if (!has_headings && who >= 0) owner = who;
        }
        if (who < 0) continue;
        sides[who].last_total = totals[t].first;
        if (totals[t].second && !sides[who].keyword_total) sides[who].keyword_total = totals[t].first;
      }
    }
    if (!has_headings && !mentions.empty()) owner = mentions.back().second;

    // Metric lines: "<metric>: x/max", or two fractions for a two-column table.
    for (std::size_t k = 0; k < kRubric.size(); ++k) {
      std::smatch mm;
      if (!std::regex_search(line, mm, metric_res()[k])) continue;
      const auto rest = line.substr(static_cast<std::size_t>(mm.position(0) + mm.length(0)));
      std::vector<double> values;
      for (auto it = std::sregex_iterator(rest.begin(), rest.end(), fraction_re()); it != std::sregex_iterator();
           ++it) {
        if (std::abs(std::stod((*it)[2].str()) - kRubric[k].max_points) < kEps) values.push_back(std::stod((*it)[1].str()));
      }
      if (values.size() == 2 && two_column) {
        for (int s = 0; s < 2; ++s) {
          auto& slot = metric_ref(sides[s].score, k);
          if (!slot) slot = values[static_cast<std::size_t>(s)];
        }
      } else if (!values.empty() && owner >= 0) {
        auto& slot = metric_ref(sides[owner].score, k);
        if (!slot) slot = values.front();
      }
    }
  }

  JudgeVerdict v;
  v.path = ParsePath::prose;
  for (int s = 0; s < 2; ++s) {
    auto& score = sides[s].score;
    score.stated_total = sides[s].keyword_total ? sides[s].keyword_total : sides[s].last_total;
    if (!score.stated_total && !score.has_all_metrics()) {
      fail(std::string("no total or metric scores for Response ") + (s == 0 ? "A" : "B"), raw_view);
    }
  }
  v.score_a = sides[0].score;
  v.score_b = sides[1].score;
  v.preferred = find_preference(raw);
  if (!v.preferred) {
    const double a = v.score_a.total();
    const double b = v.score_b.total();
    v.preferred = std::abs(a - b) < kEps ? Preference::tie : (a > b ? Preference::a : Preference::b);
    v.preferred_inferred = true;
  }
  v.justification = trim(raw_view);
  return v;
}

}  // namespace

JudgeVerdict parse_verdict(std::string_view raw) {
  std::string block_error;
  auto v = parse_block(raw, block_error);
  if (!v) {
    try {
      v = parse_prose(raw);
    } catch (const ParseError&) {
      if (!block_error.empty()) fail(block_error, raw);
      throw;
    }
  }
  if (!v->preferred) {
    const double a = v->score_a.total();
    const double b = v->score_b.total();
    v->preferred = std::abs(a - b) < kEps ? Preference::tie : (a > b ? Preference::a : Preference::b);
    v->preferred_inferred = true;
  }
  v->raw = std::string(raw);
  return *v;
}

// --- validation -------------------------------------------------------------

namespace {

bool on_half_grid(double v) { return std::abs(v * 2.0 - std::round(v * 2.0)) < kEps; }

}  // namespace

std::vector<Violation> validate(const RubricScore& score, std::string_view label) {
  std::vector<Violation> out;
  const std::string prefix(label);
  for (std::size_t i = 0; i < kRubric.size(); ++i) {
    const auto& value = metric_ref(score, i);
    const auto field = prefix + "." + std::string(kRubric[i].key);
    if (!value) continue;
    if (!std::isfinite(*value) || *value < -kEps || *value > kRubric[i].max_points + kEps) {
      out.push_back({field, format_fixed(*value, 2) + " is outside [0, " + std::to_string(kRubric[i].max_points) + "]"});
    } else if (!on_half_grid(*value)) {
      out.push_back({field, format_fixed(*value, 3) + " is not a multiple of 0.5"});
    }
  }
  if (score.has_any_metric() && !score.has_all_metrics()) {
    out.push_back({prefix, "some metric scores are missing"});
  }
  if (score.stated_total) {
    const double t = *score.stated_total;
    if (!std::isfinite(t) || t < -kEps || t > kRubricMaxTotal + kEps) {
      out.push_back({prefix + ".total", format_fixed(t, 2) + " is outside [0, 10]"});
    } else if (!on_half_grid(t)) {
      out.push_back({prefix + ".total", format_fixed(t, 3) + " is not a multiple of 0.5"});
    }
    if (score.has_all_metrics()) {
      const double sum = *score.attack_analysis + *score.mitigation + *score.technical_depth + *score.clarity;
      if (std::abs(sum - t) > kEps) {
        out.push_back({prefix + ".total", "stated total " + format_fixed(t, 2) + " differs from the metric sum " +
                                              format_fixed(sum, 2)});
      }
    }
  } else if (!score.has_all_metrics()) {
    out.push_back({prefix, "no total"});
  }
  return out;
}

std::vector<Violation> validate(const JudgeVerdict& verdict) {
  auto out = validate(verdict.score_a, "A");
  auto b = validate(verdict.score_b, "B");
  out.insert(out.end(), b.begin(), b.end());
  if (!out.empty() || !verdict.preferred) return out;
  const double ta = verdict.score_a.total();
  const double tb = verdict.score_b.total();
  if (std::abs(ta - tb) > kEps) {
    const auto higher = ta > tb ? Preference::a : Preference::b;
    if (*verdict.preferred != higher) {
      out.push_back({"preferred", "preferred " + std::string(to_string(*verdict.preferred)) + " but totals are A " +
                                      format_fixed(ta, 1) + ", B " + format_fixed(tb, 1)});
    }
  }
  return out;
}

// --- de-anonymization -------------------------------------------------------

void AssignmentStore::put(const promptkit::Assignment& assignment) {
  by_scenario_[assignment.scenario_id] = assignment;
}

const promptkit::Assignment& AssignmentStore::get(const std::string& scenario_id) const {
  const auto it = by_scenario_.find(scenario_id);
  if (it == by_scenario_.end()) throw DataError("no A/B assignment recorded for scenario " + scenario_id);
  return it->second;
}

bool AssignmentStore::contains(const std::string& scenario_id) const { return by_scenario_.count(scenario_id) != 0; }

json AssignmentStore::to_json() const {
  json out = json::array();
  for (const auto& [id, a] : by_scenario_) out.push_back(a.to_json());
  return out;
}

AssignmentStore AssignmentStore::from_json(const json& j) {
  if (!j.is_array()) throw ParseError("assignment store must be a JSON array");
  AssignmentStore store;
  for (const auto& a : j) store.put(promptkit::Assignment::from_json(a));
  return store;
}

std::vector<ModelScore> deanonymize(const JudgeVerdict& verdict, const promptkit::Assignment& assignment,
                                    const std::string& dataset) {
  if (!verdict.scenario_id.empty() && verdict.scenario_id != assignment.scenario_id) {
    throw DataError("assignment for scenario " + assignment.scenario_id + " does not match verdict scenario " +
                    verdict.scenario_id);
  }
  return {{dataset, assignment.scenario_id, verdict.judge_id, assignment.model_a, verdict.score_a},
          {dataset, assignment.scenario_id, verdict.judge_id, assignment.model_b, verdict.score_b}};
}

std::vector<ModelScore> deanonymize(const JudgeVerdict& verdict, const AssignmentStore& store,
                                    const std::string& dataset) {
  return deanonymize(verdict, store.get(verdict.scenario_id), dataset);
}

JudgeVerdict anonymize(const std::vector<ModelScore>& scores, const promptkit::Assignment& assignment) {
  JudgeVerdict v;
  v.scenario_id = assignment.scenario_id;
  bool seen_a = false;
  bool seen_b = false;
  for (const auto& s : scores) {
    if (s.scenario_id != assignment.scenario_id) continue;
    v.judge_id = s.judge_id;
    if (s.model_id == assignment.model_a) {
      v.score_a = s.score;
      seen_a = true;
    } else if (s.model_id == assignment.model_b) {
      v.score_b = s.score;
      seen_b = true;
    }
  }
  if (!seen_a || !seen_b) throw DataError("scores for both assigned models are required to anonymize");
  return v;
}

// --- human scores -----------------------------------------------------------

std::string dataset_of_scenario(std::string_view scenario_id) {
  const auto sep = scenario_id.find("__");
  return std::string(sep == std::string_view::npos ? scenario_id : scenario_id.substr(0, sep));
}

HumanScores parse_human_scores(std::string_view csv_text) {
  const auto rows = parse_csv(csv_text);
  if (rows.empty()) throw ParseError("human score CSV is empty");
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < rows[0].size(); ++i) col[to_lower(trim(rows[0][i]))] = i;
  for (const auto* required : {"scenario_id", "model_id", "m1", "m2", "m3", "m4"}) {
    if (!col.count(required)) throw ParseError(std::string("human score CSV lacks column ") + required);
  }
  const bool has_dataset = col.count("dataset") != 0;

  HumanScores out;
  std::set<std::pair<std::string, std::string>> seen;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    const auto where = "human score CSV row " + std::to_string(r + 1);
    if (row.size() != rows[0].size()) {
      throw ParseError(where + ": expected " + std::to_string(rows[0].size()) + " cells, found " +
                       std::to_string(row.size()));
    }
    ModelScore s;
    s.scenario_id = trim(row[col["scenario_id"]]);
    s.model_id = trim(row[col["model_id"]]);
    if (s.scenario_id.empty() || s.model_id.empty()) throw ParseError(where + ": empty scenario_id or model_id");
    s.dataset = has_dataset ? trim(row[col["dataset"]]) : dataset_of_scenario(s.scenario_id);
    s.judge_id = std::string(kHumanJudge);
    double m[4];
    for (int k = 0; k < 4; ++k) {
      const auto name = "m" + std::to_string(k + 1);
      const auto value = dataset::parse_number(trim(row[col[name]]));
      if (!value) throw ParseError(where + ": " + name + " '" + row[col[name]] + "' is not a number");
      m[k] = *value;
    }
    s.score = RubricScore::from_metrics(m[0], m[1], m[2], m[3]);
    if (!seen.emplace(s.scenario_id, s.model_id).second) {
      throw DataError(where + ": duplicate scores for scenario " + s.scenario_id + " and model " + s.model_id +
                      "; deduplicate the file");
    }
    for (auto& v : validate(s.score, "row " + std::to_string(r + 1))) out.violations.push_back(std::move(v));
    out.scores.push_back(std::move(s));
  }
  return out;
}

HumanScores ingest_human_scores(const std::filesystem::path& path) { return parse_human_scores(read_text_file(path)); }

// --- aggregation ------------------------------------------------------------

namespace {

double sorted_mean(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

}  // namespace

std::vector<std::string> AggregateReport::judges() const {
  std::set<std::string> out;
  for (const auto& r : per_judge) {
    if (r.judge != kHumanJudge) out.insert(r.judge);
  }
  return {out.begin(), out.end()};
}

AggregateReport aggregate(const std::vector<ModelScore>& scores, const std::vector<MissingCell>& missing) {
  if (scores.empty()) throw DataError("aggregate: no scores to aggregate");
  using Key = std::tuple<std::string, std::string, std::string>;  // dataset, model, judge
  std::map<Key, std::vector<double>> totals;
  std::map<Key, std::size_t> missing_count;
  std::map<std::string, std::set<std::string>> models_by_dataset;
  for (const auto& s : scores) {
    totals[{s.dataset, s.model_id, s.judge_id}].push_back(s.score.total());
    models_by_dataset[s.dataset].insert(s.model_id);
  }
  for (const auto& m : missing) {
    if (!m.model_id.empty()) {
      ++missing_count[{m.dataset, m.model_id, m.judge_id}];
      totals[{m.dataset, m.model_id, m.judge_id}];
      models_by_dataset[m.dataset].insert(m.model_id);
    } else {
      for (const auto& model : models_by_dataset[m.dataset]) {
        ++missing_count[{m.dataset, model, m.judge_id}];
        totals[{m.dataset, model, m.judge_id}];
      }
    }
  }

  AggregateReport report;
  report.missing_cells = missing.size();
  std::map<std::pair<std::string, std::string>, OverallRow> overall;
  std::map<std::pair<std::string, std::string>, std::vector<double>> judge_means;
  for (const auto& [key, values] : totals) {
    const auto& [dataset, model, judge] = key;
    AggregateRow row{dataset, model, judge, 0.0, values.size(), missing_count[key]};
    auto& o = overall[{dataset, model}];
    o.dataset = dataset;
    o.model = model;
    if (!values.empty()) {
      row.mean = sorted_mean(values);
      if (judge == kHumanJudge) {
        o.human_mean = row.mean;
        o.n_human = values.size();
      } else {
        judge_means[{dataset, model}].push_back(row.mean);
      }
    }
    report.per_judge.push_back(std::move(row));
  }
  for (auto& [key, o] : overall) {
    if (const auto it = judge_means.find(key); it != judge_means.end()) {
      o.judge_mean = sorted_mean(it->second);
      o.n_judges = it->second.size();
    }
    report.overall.push_back(o);
  }
  return report;
}

json AggregateReport::to_json() const {
  json rows = json::array();
  for (const auto& r : per_judge) {
    rows.push_back({{"dataset", r.dataset},
                    {"model", r.model},
                    {"judge", r.judge},
                    {"mean", r.mean},
                    {"n_cells", r.n_cells},
                    {"n_missing", r.n_missing}});
  }
  json over = json::array();
  for (const auto& o : overall) {
    over.push_back({{"dataset", o.dataset},
                    {"model", o.model},
                    {"judge_mean", opt(o.judge_mean)},
                    {"n_judges", o.n_judges},
                    {"human_mean", opt(o.human_mean)},
                    {"n_human", o.n_human}});
  }
  return {{"per_judge", std::move(rows)}, {"overall", std::move(over)}, {"missing_cells", missing_cells}};
}

AggregateReport AggregateReport::from_json(const json& j) {
  try {
    AggregateReport r;
    for (const auto& row : j.at("per_judge")) {
      r.per_judge.push_back({row.at("dataset").get<std::string>(), row.at("model").get<std::string>(),
                             row.at("judge").get<std::string>(), row.at("mean").get<double>(),
                             row.at("n_cells").get<std::size_t>(), row.value("n_missing", std::size_t{0})});
    }
    for (const auto& o : j.at("overall")) {
      OverallRow row;
      row.dataset = o.at("dataset").get<std::string>();
      row.model = o.at("model").get<std::string>();
      row.judge_mean = opt_number(o, "judge_mean");
      row.n_judges = o.value("n_judges", std::size_t{0});
      row.human_mean = opt_number(o, "human_mean");
      row.n_human = o.value("n_human", std::size_t{0});
      r.overall.push_back(std::move(row));
    }
    r.missing_cells = j.value("missing_cells", std::size_t{0});
    return r;
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed aggregate report: ") + e.what());
  }
}

// --- export -----------------------------------------------------------------

std::string export_csv(const AggregateReport& report) {
  std::string out = "dataset,model,judge,mean,n_cells\n";
  for (const auto& r : report.per_judge) {
    if (r.judge == kHumanJudge || r.n_cells == 0) continue;
    out += csv_escape(r.dataset) + "," + csv_escape(r.model) + "," + csv_escape(r.judge) + "," +
           format_fixed(r.mean, 4) + "," + std::to_string(r.n_cells) + "\n";
  }
  for (const auto& o : report.overall) {
    if (o.judge_mean) {
      out += csv_escape(o.dataset) + "," + csv_escape(o.model) + "," + std::string(kEnsembleJudge) + "," +
             format_fixed(*o.judge_mean, 4) + "," + std::to_string(o.n_judges) + "\n";
    }
    if (o.human_mean) {
      out += csv_escape(o.dataset) + "," + csv_escape(o.model) + "," + std::string(kHumanJudge) + "," +
             format_fixed(*o.human_mean, 4) + "," + std::to_string(o.n_human) + "\n";
    }
  }
  return out;
}

std::string export_json(const AggregateReport& report) { return report.to_json().dump(2) + "\n"; }

namespace {

std::string xml_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::string export_svg(const AggregateReport& report) {
  // Series = (dataset, model); groups = judges, then ensemble and human.
  std::vector<std::pair<std::string, std::string>> series;
  for (const auto& o : report.overall) series.emplace_back(o.dataset, o.model);
  std::map<std::tuple<std::string, std::string, std::string>, double> value;
  for (const auto& r : report.per_judge) {
    if (r.n_cells > 0) value[{r.judge, r.dataset, r.model}] = r.mean;
  }
  for (const auto& o : report.overall) {
    if (o.judge_mean) value[{std::string(kEnsembleJudge), o.dataset, o.model}] = *o.judge_mean;
  }
  const auto judges = report.judges();

  constexpr int kBar = 14;
  constexpr int kGap = 24;
  constexpr int kPlotHeight = 200;
  constexpr int kTop = 30;
  constexpr int kLeft = 40;
  const int group_width = static_cast<int>(series.size()) * kBar + kGap;
  const int n_groups = static_cast<int>(judges.size()) + 2;
  const int width = kLeft + n_groups * group_width + 20;
  const int legend_y = kTop + kPlotHeight + 60;
  const int height = legend_y + static_cast<int>(series.size()) * 16 + 10;
  static const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"};

  std::string out = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(width) + "\" height=\"" +
                    std::to_string(height) + "\" font-family=\"sans-serif\" font-size=\"10\">\n";
  out += "<text x=\"" + std::to_string(kLeft) + "\" y=\"16\" font-size=\"12\">Mean total score (0-10)</text>\n";
  for (int t = 0; t <= 10; t += 2) {
    const int y = kTop + kPlotHeight - t * kPlotHeight / 10;
    out += "<line x1=\"" + std::to_string(kLeft) + "\" x2=\"" + std::to_string(width - 20) + "\" y1=\"" +
           std::to_string(y) + "\" y2=\"" + std::to_string(y) + "\" stroke=\"#ddd\"/>\n";
    out += "<text x=\"" + std::to_string(kLeft - 6) + "\" y=\"" + std::to_string(y + 3) +
           "\" text-anchor=\"end\">" + std::to_string(t) + "</text>\n";
  }

  auto group = [&](const std::string& cls, const std::string& judge, int index) {
    const int x0 = kLeft + index * group_width + kGap / 2;
    std::string g = "<g class=\"" + cls + "\" data-judge=\"" + xml_escape(judge) + "\">\n";
    for (std::size_t s = 0; s < series.size(); ++s) {
      double v = 0.0;
      if (judge == kHumanJudge) {
        const auto& o = report.overall[s];
        if (!o.human_mean) continue;
        v = *o.human_mean;
      } else {
        const auto it = value.find({judge, series[s].first, series[s].second});
        if (it == value.end()) continue;
        v = it->second;
      }
      const double h = v / kRubricMaxTotal * kPlotHeight;
      g += "<rect x=\"" + std::to_string(x0 + static_cast<int>(s) * kBar) + "\" y=\"" +
           format_fixed(kTop + kPlotHeight - h, 2) + "\" width=\"" + std::to_string(kBar - 2) + "\" height=\"" +
           format_fixed(h, 2) + "\" fill=\"" + kPalette[s % 6] + "\"><title>" + xml_escape(series[s].first) + " / " +
           xml_escape(series[s].second) + ": " + format_fixed(v, 2) + "</title></rect>\n";
    }
    g += "<text x=\"" + std::to_string(x0) + "\" y=\"" + std::to_string(kTop + kPlotHeight + 14) +
         "\" transform=\"rotate(30 " + std::to_string(x0) + " " + std::to_string(kTop + kPlotHeight + 14) + ")\">" +
         xml_escape(judge) + "</text>\n</g>\n";
    return g;
  };
  int index = 0;
  for (const auto& j : judges) out += group("bar-group", j, index++);
  out += group("overall-group", std::string(kEnsembleJudge), index++);
  out += group("overall-group", std::string(kHumanJudge), index++);

  for (std::size_t s = 0; s < series.size(); ++s) {
    const int y = legend_y + static_cast<int>(s) * 16;
    out += "<rect x=\"" + std::to_string(kLeft) + "\" y=\"" + std::to_string(y - 9) + "\" width=\"10\" height=\"10\" fill=\"" +
           kPalette[s % 6] + "\"/>\n<text x=\"" + std::to_string(kLeft + 14) + "\" y=\"" + std::to_string(y) + "\">" +
           xml_escape(series[s].first) + " / " + xml_escape(series[s].second) + "</text>\n";
  }
  out += "</svg>\n";
  return out;
}

}  // namespace iotriage::judging
