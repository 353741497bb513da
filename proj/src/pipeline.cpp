#include "iotriage/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <mutex>
#include <set>

#include "iotriage/error.hpp"
#include "iotriage/metrics.hpp"
#include "iotriage/promptkit.hpp"
#include "iotriage/rag.hpp"
#include "iotriage/resources.hpp"
#include "iotriage/util.hpp"

namespace iotriage::pipeline {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  if (path.is_relative() && !base.empty()) path = base / path;
  return path.lexically_normal();
}

std::optional<fs::path> optional_path(const json& j, const char* key, const fs::path& base) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return resolve(base, j.at(key).get<std::string>());
}

json path_or_null(const std::optional<fs::path>& p) { return p ? json(p->string()) : json(nullptr); }

void require_file(const std::optional<fs::path>& p, const std::string& what) {
  if (p && !fs::is_regular_file(*p)) throw ConfigError(what + " not found: " + p->string());
}

const std::set<std::string> kModelKinds = {"rf", "knn", "gnb", "logreg"};

}  // namespace

json DatasetSpec::to_json() const {
  return {{"source_id", source_id},
          {"path", path.string()},
          {"max_rows", max_rows},
          {"preprocess", preprocess.to_json()}};
}

json EmbedderSpec::to_json() const {
  return {{"kind", kind},
          {"dimension", dimension},
          {"endpoint", endpoint ? endpoint->to_json() : json(nullptr)},
          {"similarity_floor", similarity_floor}};
}

void RunConfig::validate() const {
  if (!seed) throw ConfigError("config: seed is required");
  if (!(split_ratio > 0.0 && split_ratio < 1.0)) throw ConfigError("config: split_ratio must be in (0, 1)");
  std::set<std::string> sources;
  for (const auto& d : datasets) {
    if (d.source_id.empty()) throw ConfigError("config: dataset without source_id");
    if (!sources.insert(d.source_id).second) throw ConfigError("config: dataset " + d.source_id + " listed twice");
    require_file(d.path, "dataset file for " + d.source_id);
    d.preprocess.validate();
  }
  for (const auto& m : models) {
    if (!kModelKinds.count(m)) throw ConfigError("config: unknown model kind '" + m + "'");
  }
  forest.validate();
  if (knn_k == 0) throw ConfigError("config: knn_k must be >= 1");
  require_file(attack_kb, "attack KB");
  require_file(device_kb, "device KB");
  require_file(scenario_template, "scenario template");
  require_file(evaluation_template, "evaluation template");
  require_file(human_scores, "human score file");
  if (embedder.kind != "hashing" && embedder.kind != "remote") {
    throw ConfigError("config: embedder kind must be 'hashing' or 'remote'");
  }
  if (embedder.kind == "remote" && !embedder.endpoint) throw ConfigError("config: remote embedder needs an endpoint");
  if (embedder.dimension == 0) throw ConfigError("config: embedder dimension must be >= 1");
  std::set<std::string> ids;
  for (const auto* group : {&evaluated, &judges}) {
    for (const auto& e : *group) {
      e.validate();
      if (!ids.insert(e.id).second) throw ConfigError("config: endpoint id '" + e.id + "' is used twice");
    }
  }
  if (parallel_scenarios == 0) throw ConfigError("config: parallel_scenarios must be >= 1");
}

std::uint64_t RunConfig::run_seed() const {
  if (!seed) throw ConfigError("config: seed is required");
  return *seed;
}

fs::path RunConfig::fixtures() const { return fixture_dir ? *fixture_dir : out_dir / "fixtures"; }

std::vector<std::string> RunConfig::sources_for_scenarios() const {
  if (!scenario_sources.empty()) return scenario_sources;
  std::vector<std::string> out;
  for (const auto& d : datasets) out.push_back(d.source_id);
  return out;
}

json RunConfig::to_json() const {
  json ds = json::array();
  for (const auto& d : datasets) ds.push_back(d.to_json());
  json ev = json::array();
  for (const auto& e : evaluated) ev.push_back(e.to_json());
  json jd = json::array();
  for (const auto& e : judges) jd.push_back(e.to_json());
  return {{"seed", seed ? json(*seed) : json(nullptr)},
          {"datasets", ds},
          {"split_ratio", split_ratio},
          {"models", models},
          {"forest", forest.to_json()},
          {"knn_k", knn_k},
          {"logreg", logreg.to_json()},
          {"kb", {{"attacks", path_or_null(attack_kb)}, {"devices", path_or_null(device_kb)}}},
          {"embedder", embedder.to_json()},
          {"device", device},
          {"endpoints", {{"evaluated", ev}, {"judges", jd}}},
          {"templates", {{"scenario", path_or_null(scenario_template)}, {"evaluation", path_or_null(evaluation_template)}}},
          {"redact_names", redact_names},
          {"scenario_sources", scenario_sources},
          {"human_scores", path_or_null(human_scores)},
          {"out_dir", out_dir.string()},
          {"mode", llm::to_string(mode)},
          {"fixture_dir", path_or_null(fixture_dir)},
          {"max_requests_per_second", max_requests_per_second},
          {"parallel_scenarios", parallel_scenarios}};
}

RunConfig RunConfig::from_json(const json& j, const fs::path& base_dir) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  RunConfig c;
  try {
    if (j.contains("seed") && !j.at("seed").is_null()) c.seed = j.at("seed").get<std::uint64_t>();
    c.split_ratio = j.value("split_ratio", c.split_ratio);
    for (const auto& d : j.value("datasets", json::array())) {
      DatasetSpec spec;
      spec.source_id = d.at("source_id").get<std::string>();
      spec.path = resolve(base_dir, d.at("path").get<std::string>());
      spec.max_rows = d.value("max_rows", std::size_t{0});
      auto pre = dataset::PreprocessConfig::for_source(spec.source_id).to_json();
      if (d.contains("preprocess")) pre.update(d.at("preprocess"));
      spec.preprocess = dataset::PreprocessConfig::from_json(pre);
      c.datasets.push_back(std::move(spec));
    }
    c.models = j.value("models", c.models);
    if (j.contains("forest")) c.forest = detect::ForestParams::from_json(j.at("forest"));
    c.knn_k = j.value("knn_k", c.knn_k);
    if (j.contains("logreg")) c.logreg = detect::LogRegParams::from_json(j.at("logreg"));
    if (j.contains("kb")) {
      c.attack_kb = optional_path(j.at("kb"), "attacks", base_dir);
      c.device_kb = optional_path(j.at("kb"), "devices", base_dir);
    }
    if (j.contains("embedder")) {
      const auto& e = j.at("embedder");
      c.embedder.kind = e.value("kind", c.embedder.kind);
      c.embedder.dimension = e.value("dimension", c.embedder.dimension);
      c.embedder.similarity_floor = e.value("similarity_floor", c.embedder.similarity_floor);
      if (e.contains("endpoint") && !e.at("endpoint").is_null()) {
        c.embedder.endpoint = llm::EndpointConfig::from_json(e.at("endpoint"));
      }
    }
    c.device = j.value("device", c.device);
    if (j.contains("endpoints")) {
      for (const auto& e : j.at("endpoints").value("evaluated", json::array())) {
        c.evaluated.push_back(llm::EndpointConfig::from_json(e));
      }
      for (const auto& e : j.at("endpoints").value("judges", json::array())) {
        c.judges.push_back(llm::EndpointConfig::from_json(e));
      }
    }
    if (j.contains("templates")) {
      c.scenario_template = optional_path(j.at("templates"), "scenario", base_dir);
      c.evaluation_template = optional_path(j.at("templates"), "evaluation", base_dir);
    }
    c.redact_names = j.value("redact_names", c.redact_names);
    c.scenario_sources = j.value("scenario_sources", c.scenario_sources);
    c.human_scores = optional_path(j, "human_scores", base_dir);
    if (j.contains("out_dir")) c.out_dir = resolve(base_dir, j.at("out_dir").get<std::string>());
    c.mode = llm::mode_from_string(j.value("mode", std::string("replay")));
    c.fixture_dir = optional_path(j, "fixture_dir", base_dir);
    c.max_requests_per_second = j.value("max_requests_per_second", c.max_requests_per_second);
    c.parallel_scenarios = j.value("parallel_scenarios", c.parallel_scenarios);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return c;
}

RunConfig RunConfig::load(const fs::path& path) {
  if (!fs::is_regular_file(path)) throw ConfigError("config file not found: " + path.string());
  json j;
  try {
    j = json::parse(read_text_file(path));
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return from_json(j, path.parent_path());
}

namespace {

std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::shared_ptr<const rag::Embedder> make_embedder(const EmbedderSpec& spec, std::shared_ptr<llm::Transport> transport,
                                                   llm::EnvLookup env) {
  if (spec.kind == "remote") {
    if (!transport) transport = std::make_shared<llm::HttpTransport>();
    return std::make_shared<rag::RemoteEmbedder>(*spec.endpoint, spec.dimension, std::move(transport), nullptr,
                                                 std::move(env));
  }
  return std::make_shared<rag::HashingEmbedder>(spec.dimension);
}

std::vector<rag::KnowledgeEntry> attack_entries(const RunConfig& c) {
  return c.attack_kb ? rag::parse_attack_kb(read_text_file(*c.attack_kb)) : rag::shipped_attack_kb();
}

std::vector<rag::DeviceSpec> device_specs(const RunConfig& c) {
  return c.device_kb ? rag::parse_device_kb(read_text_file(*c.device_kb)) : rag::shipped_device_kb();
}

promptkit::PromptTemplates templates_for(const RunConfig& c) {
  auto t = promptkit::PromptTemplates::shipped();
  if (c.scenario_template) {
    t.scenario = read_text_file(*c.scenario_template);
    t.version = "custom";
  }
  if (c.evaluation_template) {
    t.evaluation = read_text_file(*c.evaluation_template);
    t.version = "custom";
  }
  t.validate();
  return t;
}

dataset::LabeledDataset load_dataset(const DatasetSpec& spec, std::uint64_t seed) {
  auto raw = dataset::load_csv(spec.path, spec.source_id);
  if (spec.max_rows > 0) raw = dataset::stratified_subsample(raw, spec.preprocess.label_column, spec.max_rows, seed);
  return dataset::preprocess(raw, spec.preprocess);
}

}  // namespace

void write_manifest(const RunConfig& config, const std::string& command) {
  json resources = json::object();
  for (const auto& [name, content] : embedded_resources()) resources[std::string(name)] = sha256_hex(content);
  const json manifest = {{"tool", "iotriage"},
                         {"version", kVersion},
                         {"command", command},
                         {"created", utc_now()},
                         {"seed", config.run_seed()},
                         {"mode", llm::to_string(config.mode)},
                         {"replay_hint", "rerun with --mode replay and fixture_dir " + config.fixtures().string()},
                         {"resources_sha256", resources},
                         {"config", config.to_json()}};
  write_text_file(RunLayout{config.out_dir}.manifest(), manifest.dump(2) + "\n");
}

// --- detect -----------------------------------------------------------------

DetectResult cmd_detect(const RunConfig& config) {
  config.validate();
  if (config.datasets.empty()) throw ConfigError("detect: no datasets configured");
  const RunLayout layout{config.out_dir};
  const auto seed = config.run_seed();
  write_manifest(config, "detect");

  DetectResult result;
  for (const auto& spec : config.datasets) {
    const auto data = load_dataset(spec, seed);
    const auto sp = dataset::split(data, config.split_ratio, seed);
    std::vector<detect::TrainedModel> models;
    for (const auto& kind : config.models) {
      if (kind == "rf") {
        auto params = config.forest;
        params.seed = seed;
        models.push_back(detect::train_random_forest(sp.train, params));
      } else if (kind == "knn") {
        models.push_back(detect::train_knn(sp.train, config.knn_k));
      } else if (kind == "gnb") {
        models.push_back(detect::train_gaussian_nb(sp.train));
      } else {
        models.push_back(detect::train_logreg(sp.train, config.logreg));
      }
      detect::save_model(models.back(), layout.models() / spec.source_id / (kind + ".json"));
    }
    auto bench = detect::benchmark(models, sp);
    const auto dir = layout.reports() / "detect" / spec.source_id;
    write_text_file(dir / "benchmark.md", detect::render_benchmark(bench.rows, metrics::ReportFormat::markdown));
    write_text_file(dir / "benchmark.csv", detect::render_benchmark(bench.rows, metrics::ReportFormat::csv));
    write_text_file(dir / "benchmark.json", detect::render_benchmark(bench.rows, metrics::ReportFormat::json));
    for (std::size_t i = 0; i < bench.rows.size(); ++i) {
      const auto& name = bench.rows[i].model;
      write_text_file(dir / (name + "_report.md"),
                      metrics::render_report(bench.reports[i], metrics::ReportFormat::markdown));
      write_text_file(dir / (name + "_report.csv"), metrics::render_report(bench.reports[i], metrics::ReportFormat::csv));
    }
    json split_info = {{"train_rows", sp.train.size()},
                       {"test_rows", sp.test.size()},
                       {"features", sp.train.feature_names().size()},
                       {"train_class_counts", sp.train.class_counts()},
                       {"test_class_counts", sp.test.class_counts()}};
    write_text_file(dir / "split.json", split_info.dump(2) + "\n");
    result.by_source.emplace(spec.source_id, std::move(bench));
  }
  return result;
}

// --- kb ---------------------------------------------------------------------

KbResult cmd_kb(const RunConfig& config) {
  config.validate();
  const RunLayout layout{config.out_dir};
  const auto embedder = make_embedder(config.embedder, nullptr, llm::process_env);
  const auto attacks = rag::VectorIndex::build(attack_entries(config), embedder);
  std::vector<rag::KnowledgeEntry> device_entries;
  for (const auto& d : device_specs(config)) device_entries.push_back(d.to_entry());
  const auto devices = rag::VectorIndex::build(std::move(device_entries), embedder);

  KbResult r;
  r.attack_entries = attacks.size();
  r.device_entries = devices.size();
  r.attack_index = layout.kb() / "attacks.index.json";
  r.device_index = layout.kb() / "devices.index.json";
  write_text_file(r.attack_index, attacks.to_json().dump() + "\n");
  write_text_file(r.device_index, devices.to_json().dump() + "\n");
  write_manifest(config, "kb");
  return r;
}

std::string dump_labels() { return dataset::LabelMap::shipped().to_json(); }

// --- triage -----------------------------------------------------------------

std::vector<promptkit::ScenarioSpec> select_scenarios(const std::vector<promptkit::ScenarioSpec>& all,
                                                      const std::string& filter) {
  if (trim(filter).empty()) return all;
  const auto f = to_lower(trim(filter));
  std::vector<promptkit::ScenarioSpec> out;
  for (const auto& s : all) {
    if (to_lower(s.id) == f || to_lower(s.attack.native) == f) out.push_back(s);
  }
  if (out.empty()) {
    for (const auto& s : all) {
      if (to_lower(s.attack.canonical) == f) out.push_back(s);
    }
  }
  return out;
}

std::uint64_t scenario_seed(std::uint64_t run_seed, const std::string& scenario_id) {
  return splitmix64(run_seed ^ fnv1a64(scenario_id));
}

namespace {

struct ScenarioWork {
  std::string id;
  promptkit::ScenarioPrompt prompt;
  std::uint64_t seed = 0;
};

std::vector<std::string> redaction_names(const RunConfig& config) {
  std::vector<std::string> names;
  // Endpoint ids and model names shorter than three characters cannot be
  // redacted without mangling ordinary words; explicit names must qualify.
  for (const auto& e : config.evaluated) {
    for (const auto& n : {e.id, e.model}) {
      if (n.size() >= 3) names.push_back(n);
    }
  }
  names.insert(names.end(), config.redact_names.begin(), config.redact_names.end());
  std::sort(names.begin(), names.end());
  names.erase(std::unique(names.begin(), names.end()), names.end());
  return names;
}

std::string join_violations(const std::vector<judging::Violation>& violations) {
  std::string out;
  for (const auto& v : violations) out += (out.empty() ? "" : "; ") + v.field + ": " + v.message;
  return out;
}

judging::AssignmentStore load_assignments(const fs::path& path) {
  if (!fs::is_regular_file(path)) return {};
  try {
    return judging::AssignmentStore::from_json(json::parse(read_text_file(path)));
  } catch (const json::parse_error& e) {
    throw ParseError("assignment file " + path.string() + " is not valid JSON: " + e.what());
  }
}

void write_reports(const fs::path& dir, const judging::AggregateReport& report) {
  write_text_file(dir / "aggregate.json", judging::export_json(report));
  write_text_file(dir / "aggregate.csv", judging::export_csv(report));
  write_text_file(dir / "aggregate.svg", judging::export_svg(report));
}

TriageResult run_stage(const RunConfig& config, const TriageOptions& options, const std::vector<ScenarioWork>& work) {
  if (config.evaluated.size() != 2) {
    throw ConfigError("triage compares exactly two evaluated endpoints, got " + std::to_string(config.evaluated.size()));
  }
  if (config.judges.empty()) throw ConfigError("triage needs at least one judge endpoint");
  const RunLayout layout{config.out_dir};
  const auto templates = templates_for(config);
  const auto names = redaction_names(config);

  llm::GatewayOptions gopts;
  gopts.fixture_dir = config.fixtures();
  gopts.max_requests_per_second = config.max_requests_per_second;
  gopts.sleeper = options.sleeper;
  gopts.env = options.env;
  auto transport = options.transport ? options.transport : std::make_shared<llm::HttpTransport>();
  llm::Gateway gateway(gopts, transport);

  std::map<std::string, const ScenarioWork*> by_id;
  std::vector<llm::MatrixScenario> scenarios;
  for (const auto& w : work) {
    by_id[w.id] = &w;
    scenarios.push_back({w.id, w.prompt.rendered});
  }

  auto store = load_assignments(layout.assignments());
  std::mutex store_mu;
  const auto builder = [&](const llm::MatrixScenario& scenario, const std::vector<llm::CompletionRecord>& evaluated) {
    const auto& w = *by_id.at(scenario.id);
    const promptkit::ModelResponse x{config.evaluated[0].id, evaluated[0].response};
    const promptkit::ModelResponse y{config.evaluated[1].id, evaluated[1].response};
    const auto ep = promptkit::build_evaluation_prompt(w.id, w.prompt, x, y, w.seed, names, templates);
    const auto dir = layout.prompts() / w.id;
    write_text_file(dir / "evaluation.txt", ep.rendered);
    write_text_file(dir / "evaluation.provenance.json", ep.provenance().dump(2) + "\n");
    std::lock_guard lock(store_mu);
    store.put(ep.assignment);
    return ep.rendered;
  };

  llm::MatrixOptions mopts;
  mopts.mode = config.mode;
  mopts.completions_dir = layout.completions();
  mopts.parallel_scenarios = config.parallel_scenarios;

  TriageResult result;
  for (const auto& w : work) result.scenario_ids.push_back(w.id);
  result.bundle = llm::run_matrix(gateway, scenarios, config.evaluated, config.judges, builder, mopts);
  result.network_calls = gateway.network_calls();
  write_text_file(layout.assignments(), store.to_json().dump(2) + "\n");
  write_text_file(layout.reports() / "matrix.json", result.bundle.to_json().dump(2) + "\n");

  std::vector<judging::ModelScore> scores;
  for (const auto& cell : result.bundle.cells) {
    if (cell.ok() && !cell.resumed) ++result.new_completions;
    if (cell.role != "judge") continue;
    const auto ds = judging::dataset_of_scenario(cell.scenario_id);
    const auto verdict_path = layout.verdicts() / cell.scenario_id / (slugify(cell.endpoint_id) + ".json");
    if (!cell.ok()) {
      result.missing.push_back({ds, cell.scenario_id, cell.endpoint_id, "", cell.error});
      continue;
    }
    try {
      auto v = judging::parse_verdict(cell.record->response);
      v.judge_id = cell.endpoint_id;
      v.scenario_id = cell.scenario_id;
      const auto violations = judging::validate(v);
      json out = v.to_json();
      out["violations"] = json::array();
      for (const auto& viol : violations) out["violations"].push_back({{"field", viol.field}, {"message", viol.message}});
      write_text_file(verdict_path, out.dump(2) + "\n");
      if (!violations.empty()) {
        result.missing.push_back({ds, cell.scenario_id, cell.endpoint_id, "", join_violations(violations)});
      } else {
        auto s = judging::deanonymize(v, store, ds);
        scores.insert(scores.end(), s.begin(), s.end());
      }
      result.verdicts.push_back(std::move(v));
    } catch (const ParseError& e) {
      write_text_file(verdict_path, json({{"judge_id", cell.endpoint_id},
                                          {"scenario_id", cell.scenario_id},
                                          {"error", e.what()}})
                                            .dump(2) +
                                        "\n");
      result.missing.push_back({ds, cell.scenario_id, cell.endpoint_id, "", e.what()});
    }
  }

  if (config.human_scores) {
    const std::set<std::string> in_run(result.scenario_ids.begin(), result.scenario_ids.end());
    for (auto& s : judging::ingest_human_scores(*config.human_scores).scores) {
      if (!in_run.count(s.scenario_id)) continue;
      const auto violations = judging::validate(s.score, "human");
      if (violations.empty()) {
        scores.push_back(std::move(s));
      } else {
        result.missing.push_back({s.dataset, s.scenario_id, s.judge_id, s.model_id, join_violations(violations)});
      }
    }
  }

  json missing = json::array();
  for (const auto& m : result.missing) {
    missing.push_back({{"dataset", m.dataset},
                       {"scenario_id", m.scenario_id},
                       {"judge_id", m.judge_id},
                       {"model_id", m.model_id},
                       {"reason", m.reason}});
  }
  write_text_file(layout.reports() / "missing.json", missing.dump(2) + "\n");
  if (!scores.empty()) {
    result.report = judging::aggregate(scores, result.missing);
    write_reports(layout.reports(), *result.report);
  }
  return result;
}

}  // namespace

TriageResult cmd_triage(const RunConfig& config, const TriageOptions& options) {
  config.validate();
  const RunLayout layout{config.out_dir};
  const auto seed = config.run_seed();
  const auto specs = select_scenarios(promptkit::enumerate_scenarios(config.sources_for_scenarios()),
                                      options.scenario_filter);
  if (specs.empty()) throw ConfigError("no scenario matches '" + options.scenario_filter + "'");
  write_manifest(config, "triage");

  std::map<std::string, dataset::LabeledDataset> datasets;
  for (const auto& s : specs) {
    if (datasets.count(s.attack.source_id)) continue;
    const auto it = std::find_if(config.datasets.begin(), config.datasets.end(),
                                 [&](const DatasetSpec& d) { return d.source_id == s.attack.source_id; });
    if (it == config.datasets.end()) {
      throw ConfigError("no dataset configured for scenario source " + s.attack.source_id);
    }
    datasets.emplace(s.attack.source_id, load_dataset(*it, seed));
  }

  const rag::Retriever retriever(attack_entries(config), device_specs(config),
                                 make_embedder(config.embedder, options.transport, options.env),
                                 config.embedder.similarity_floor);
  const auto templates = templates_for(config);
  std::vector<ScenarioWork> work;
  for (const auto& s : specs) {
    ScenarioWork w;
    w.id = s.id;
    w.seed = scenario_seed(seed, s.id);
    const auto features = dataset::sample_scenario(datasets.at(s.attack.source_id), s.attack.native, w.seed);
    const auto context = retriever.retrieve(s.attack.native, config.device);
    w.prompt = promptkit::build_scenario_prompt(s.attack, features, context.attack.text, context.device, templates);
    const auto dir = layout.prompts() / s.id;
    write_text_file(dir / "scenario.txt", w.prompt.rendered);
    json provenance = w.prompt.provenance();
    provenance["scenario_id"] = s.id;
    provenance["seed"] = w.seed;
    provenance["retrieval"] = context.provenance();
    write_text_file(dir / "scenario.provenance.json", provenance.dump(2) + "\n");
    work.push_back(std::move(w));
  }
  return run_stage(config, options, work);
}

TriageResult cmd_judge(const RunConfig& config, const TriageOptions& options) {
  config.validate();
  const RunLayout layout{config.out_dir};
  if (!fs::is_directory(layout.prompts())) {
    throw ConfigError("no scenario prompts under " + layout.prompts().string() + "; run triage first");
  }
  std::vector<promptkit::ScenarioSpec> known;
  for (const auto& entry : fs::directory_iterator(layout.prompts())) {
    if (!fs::is_regular_file(entry.path() / "scenario.txt")) continue;
    promptkit::ScenarioSpec s;
    s.id = entry.path().filename().string();
    const auto prov = entry.path() / "scenario.provenance.json";
    if (fs::is_regular_file(prov)) {
      try {
        const auto a = json::parse(read_text_file(prov)).at("attack");
        s.attack = {a.at("source_id").get<std::string>(), a.at("native").get<std::string>(),
                    a.at("canonical").get<std::string>()};
      } catch (const json::exception& e) {
        throw ParseError("malformed provenance " + prov.string() + ": " + e.what());
      }
    }
    known.push_back(std::move(s));
  }
  std::sort(known.begin(), known.end(), [](const auto& l, const auto& r) { return l.id < r.id; });
  const auto specs = select_scenarios(known, options.scenario_filter);
  if (specs.empty()) throw ConfigError("no stored scenario matches '" + options.scenario_filter + "'");
  write_manifest(config, "judge");

  std::vector<ScenarioWork> work;
  for (const auto& s : specs) {
    ScenarioWork w;
    w.id = s.id;
    w.seed = scenario_seed(config.run_seed(), s.id);
    w.prompt.attack = s.attack;
    w.prompt.rendered = read_text_file(layout.prompts() / s.id / "scenario.txt");
    work.push_back(std::move(w));
  }
  return run_stage(config, options, work);
}

void cmd_report(const fs::path& run_dir, const std::optional<fs::path>& out_dir) {
  const auto source = RunLayout{run_dir}.reports() / "aggregate.json";
  if (!fs::is_regular_file(source)) throw ConfigError("no aggregate report at " + source.string());
  json j;
  try {
    j = json::parse(read_text_file(source));
  } catch (const json::parse_error& e) {
    throw ParseError("aggregate report " + source.string() + " is not valid JSON: " + e.what());
  }
  write_reports(out_dir ? *out_dir : source.parent_path(), judging::AggregateReport::from_json(j));
}

}  // namespace iotriage::pipeline
