#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>

#include <nlohmann/json.hpp>

#include "iotriage/error.hpp"
#include "iotriage/pipeline.hpp"
#include "iotriage/util.hpp"
#include "synthetic.hpp"

namespace iotriage::pipeline {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// Synthetic datasets, the scripted endpoints and a config tying them together.
struct Workspace {
  fs::path root;
  json config;

  explicit Workspace(const std::string& tag) : root(testing::fresh_dir(tag)) {
    write_text_file(root / "edge.csv", testing::synthetic_edge_csv(25, 3));
    write_text_file(root / "cic.csv", testing::synthetic_cic_csv(25, 4));
    json evaluated = json::array({testing::endpoint("alpha", std::string(testing::kStrongModel)).to_json(),
                                  testing::endpoint("beta", std::string(testing::kWeakModel)).to_json()});
    json judges = json::array({testing::endpoint("judge-one", "judge-one").to_json(),
                               testing::endpoint("judge-two", "judge-two").to_json(),
                               testing::endpoint("judge-prose", "judge-prose").to_json()});
    config = {{"seed", 7},
              {"datasets",
               {{{"source_id", "edge-iiotset"}, {"path", "edge.csv"}},
                {{"source_id", "ciciot2023"}, {"path", "cic.csv"}}}},
              {"models", {"rf", "gnb"}},
              {"forest", {{"n_trees", 10}}},
              {"endpoints", {{"evaluated", evaluated}, {"judges", judges}}},
              {"out_dir", "run"},
              {"fixture_dir", "fixtures"},
              {"mode", "record"},
              {"parallel_scenarios", 2}};
  }

  [[nodiscard]] RunConfig load() const { return RunConfig::from_json(config, root); }

  fs::path write_config(const std::string& name = "config.json") const {
    write_text_file(root / name, config.dump(2));
    return root / name;
  }
};

TriageOptions scripted(std::shared_ptr<llm::Transport> transport, const std::string& filter = "Port Scanning") {
  TriageOptions o;
  o.transport = std::move(transport);
  o.scenario_filter = filter;
  o.sleeper = [](std::chrono::milliseconds) {};
  return o;
}

TEST(Config, ValidationErrors) {
  Workspace w("cfg");
  EXPECT_NO_THROW(w.load().validate());
  auto c = w.config;
  c.erase("seed");
  EXPECT_THROW(RunConfig::from_json(c, w.root).validate(), ConfigError);
  c = w.config;
  c["datasets"][0]["path"] = "nope.csv";
  EXPECT_THROW(RunConfig::from_json(c, w.root).validate(), ConfigError);
  c = w.config;
  c["models"] = {"svm"};
  EXPECT_THROW(RunConfig::from_json(c, w.root).validate(), ConfigError);
  c = w.config;
  c["split_ratio"] = 1.0;
  EXPECT_THROW(RunConfig::from_json(c, w.root).validate(), ConfigError);
  c = w.config;
  c["endpoints"]["judges"][0]["id"] = "alpha";
  EXPECT_THROW(RunConfig::from_json(c, w.root).validate(), ConfigError);
  c = w.config;
  c["endpoints"]["judges"][0]["api_key"] = "sk-should-not-be-here";
  EXPECT_THROW((void)RunConfig::from_json(c, w.root), ConfigError);
  c = w.config;
  c["mode"] = "sometimes";
  EXPECT_THROW((void)RunConfig::from_json(c, w.root), ConfigError);
  EXPECT_THROW((void)RunConfig::load(w.root / "missing.json"), ConfigError);
  write_text_file(w.root / "broken.json", "{ not json");
  EXPECT_THROW((void)RunConfig::load(w.root / "broken.json"), ConfigError);
}

TEST(Config, PathsResolveAgainstTheConfigDirectory) {
  Workspace w("paths");
  const auto c = RunConfig::load(w.write_config());
  EXPECT_EQ(c.datasets[0].path, w.root / "edge.csv");
  EXPECT_EQ(c.out_dir, w.root / "run");
  EXPECT_EQ(c.fixtures(), w.root / "fixtures");
  EXPECT_EQ(c.datasets[0].preprocess.label_column, "Attack_type");
  const auto again = RunConfig::from_json(c.to_json());
  EXPECT_EQ(again.to_json(), c.to_json());
}

TEST(Detect, WritesReportsAndModels) {
  Workspace w("detect");
  const auto c = w.load();
  const auto r = cmd_detect(c);
  ASSERT_EQ(r.by_source.size(), 2u);
  for (const auto* source : {"edge-iiotset", "ciciot2023"}) {
    const auto dir = c.out_dir / "reports" / "detect" / source;
    for (const auto* f : {"benchmark.md", "benchmark.csv", "benchmark.json", "split.json", "rf_report.md",
                          "gnb_report.csv"}) {
      EXPECT_TRUE(fs::exists(dir / f)) << dir / f;
    }
    const auto model = detect::load_model(c.out_dir / "models" / source / "rf.json");
    EXPECT_EQ(model.kind(), "rf");
    EXPECT_EQ(r.by_source.at(source).rows.size(), 2u);
  }
  const auto manifest = json::parse(read_text_file(c.out_dir / "manifest.json"));
  EXPECT_EQ(manifest.at("seed"), 7);
  EXPECT_EQ(manifest.at("command"), "detect");
  EXPECT_TRUE(manifest.at("resources_sha256").contains("kb/attacks.v1.json"));

  // The same seed reproduces the benchmark metrics.
  const auto again = cmd_detect(c);
  EXPECT_EQ(again.by_source.at("edge-iiotset").rows[0].macro_f1, r.by_source.at("edge-iiotset").rows[0].macro_f1);
}

TEST(Kb, WritesBothIndices) {
  Workspace w("kb");
  const auto r = cmd_kb(w.load());
  EXPECT_EQ(r.attack_entries, 13u);
  EXPECT_GE(r.device_entries, 1u);
  EXPECT_TRUE(fs::exists(r.attack_index));
  EXPECT_TRUE(fs::exists(r.device_index));
}

TEST(SelectScenarios, NativeLabelsFirst) {
  const auto all = promptkit::enumerate_scenarios({"edge-iiotset", "ciciot2023"});
  EXPECT_EQ(select_scenarios(all, "").size(), 28u);
  EXPECT_EQ(select_scenarios(all, "Password Cracking").size(), 1u);
  EXPECT_EQ(select_scenarios(all, "port scanning").size(), 2u);
  // "MITM" is a native Edge label, so the CIC spoofing classes stay out.
  EXPECT_EQ(select_scenarios(all, "MITM").size(), 1u);
  // Without a native match the canonical name selects.
  const auto cic = promptkit::enumerate_scenarios({"ciciot2023"});
  const auto brute = select_scenarios(cic, "Password Cracking");
  ASSERT_EQ(brute.size(), 1u);
  EXPECT_EQ(brute[0].attack.native, "Dictionary Brute Force");
  EXPECT_EQ(select_scenarios(all, all[3].id).size(), 1u);
  EXPECT_TRUE(select_scenarios(all, "Ransomware").empty());
}

TEST(Triage, RecordThenReplayOffline) {
  Workspace w("triage");
  const auto recording = testing::scripted_llm();
  const auto first = cmd_triage(w.load(), scripted(recording));
  ASSERT_EQ(first.scenario_ids.size(), 2u);
  EXPECT_EQ(first.bundle.missing(), 0u);
  EXPECT_EQ(first.missing.size(), 0u) << first.missing.front().reason;
  EXPECT_EQ(first.network_calls, 2u * (2 + 3));
  ASSERT_TRUE(first.report);

  // A fresh run directory, replaying from the fixtures only.
  auto replay_cfg = w.config;
  replay_cfg["mode"] = "replay";
  replay_cfg["out_dir"] = "replayed";
  const auto c = RunConfig::from_json(replay_cfg, w.root);
  auto offline = std::make_shared<llm::CountingTransport>();
  const auto replay = cmd_triage(c, scripted(offline));
  EXPECT_EQ(offline->calls(), 0u);
  EXPECT_EQ(replay.network_calls, 0u);
  EXPECT_EQ(replay.bundle.missing(), 0u);
  ASSERT_TRUE(replay.report);
  EXPECT_EQ(*replay.report, *first.report);

  // Two models on two datasets, with the hand-computed ensemble means.
  const auto& overall = replay.report->overall;
  ASSERT_EQ(overall.size(), 4u);
  for (const auto& o : overall) {
    EXPECT_EQ(o.n_judges, 3u);
    const double expected = o.model == "alpha" ? (9.5 + 10 + 9.5) / 3 : (8 + 7.5 + 7.5) / 3;
    EXPECT_NEAR(*o.judge_mean, expected, 1e-12) << o.dataset << " " << o.model;
  }

  const RunLayout layout{c.out_dir};
  for (const auto& id : replay.scenario_ids) {
    for (const auto* f : {"scenario.txt", "scenario.provenance.json", "evaluation.txt", "evaluation.provenance.json"}) {
      EXPECT_TRUE(fs::exists(layout.prompts() / id / f)) << id << "/" << f;
    }
    const auto evaluation = read_text_file(layout.prompts() / id / "evaluation.txt");
    EXPECT_EQ(evaluation.find(std::string(testing::kStrongModel)), std::string::npos);
    EXPECT_EQ(evaluation.find(std::string(testing::kWeakModel)), std::string::npos);
    EXPECT_TRUE(fs::exists(layout.verdicts() / id / "judge-prose.json"));
  }
  for (const auto* f : {"aggregate.json", "aggregate.csv", "aggregate.svg", "missing.json", "matrix.json"}) {
    EXPECT_TRUE(fs::exists(layout.reports() / f)) << f;
  }
  const auto csv = parse_csv(read_text_file(layout.reports() / "aggregate.csv"));
  EXPECT_EQ(csv[0], (std::vector<std::string>{"dataset", "model", "judge", "mean", "n_cells"}));
  EXPECT_EQ(csv.size(), 1u + 4u * 3u + 4u);
}

TEST(Triage, RerunResumesEveryCell) {
  Workspace w("resume");
  const auto c = w.load();
  auto transport = testing::scripted_llm();
  const auto first = cmd_triage(c, scripted(transport));
  EXPECT_EQ(first.new_completions, 10u);
  const auto calls = transport->calls();
  const auto again = cmd_triage(c, scripted(transport));
  EXPECT_EQ(again.new_completions, 0u);
  EXPECT_EQ(transport->calls(), calls);
  EXPECT_EQ(*again.report, *first.report);
}

TEST(Triage, SingleScenarioFilter) {
  Workspace w("filter");
  const auto r = cmd_triage(w.load(), scripted(testing::scripted_llm(), "Password Cracking"));
  ASSERT_EQ(r.scenario_ids.size(), 1u);
  EXPECT_EQ(r.scenario_ids[0], "edge-iiotset__password-cracking");
  EXPECT_THROW((void)cmd_triage(w.load(), scripted(testing::scripted_llm(), "Ransomware")), ConfigError);
}

TEST(Triage, HumanScoresJoinTheReport) {
  Workspace w("human");
  write_text_file(w.root / "human.csv",
                  "scenario_id,model_id,m1,m2,m3,m4\n"
                  "edge-iiotset__port-scanning,alpha,3,3,2,2\n"
                  "edge-iiotset__port-scanning,beta,2,2,1.5,1.5\n"
                  "edge-iiotset__xss,beta,1,1,1,1\n");
  w.config["human_scores"] = "human.csv";
  const auto r = cmd_triage(w.load(), scripted(testing::scripted_llm()));
  ASSERT_TRUE(r.report);
  for (const auto& o : r.report->overall) {
    if (o.dataset != "edge-iiotset") {
      EXPECT_FALSE(o.human_mean);
      continue;
    }
    ASSERT_TRUE(o.human_mean);
    EXPECT_EQ(*o.human_mean, o.model == "alpha" ? 10.0 : 7.0);
    EXPECT_EQ(o.n_human, 1u);
  }
}

TEST(Triage, BrokenJudgeBecomesMissingCells) {
  Workspace w("broken");
  auto inner = testing::scripted_llm();
  auto transport = std::make_shared<llm::FakeTransport>([inner](const llm::HttpRequest& req) {
    if (json::parse(req.body).at("model") == "judge-two") {
      return llm::HttpResponse{200, json{{"choices", {{{"message", {{"content", "no opinion"}}}}}}}.dump()};
    }
    return inner->post(req);
  });
  const auto r = cmd_triage(w.load(), scripted(transport));
  EXPECT_EQ(r.missing.size(), 2u);
  ASSERT_TRUE(r.report);
  for (const auto& o : r.report->overall) EXPECT_EQ(o.n_judges, 2u);
  const auto missing = json::parse(read_text_file(w.load().out_dir / "reports" / "missing.json"));
  EXPECT_EQ(missing.size(), 2u);
  EXPECT_EQ(missing[0].at("judge_id"), "judge-two");
}

TEST(Triage, NeedsTwoEvaluatedEndpoints) {
  Workspace w("two");
  w.config["endpoints"]["evaluated"].erase(1);
  EXPECT_THROW((void)cmd_triage(w.load(), scripted(testing::scripted_llm())), ConfigError);
}

TEST(Judge, RejudgesStoredPrompts) {
  Workspace w("judge");
  auto transport = testing::scripted_llm();
  const auto first = cmd_triage(w.load(), scripted(transport));
  fs::remove_all(w.load().out_dir / "reports");
  const auto again = cmd_judge(w.load(), scripted(transport, ""));
  EXPECT_EQ(again.scenario_ids.size(), 2u);
  EXPECT_EQ(again.new_completions, 0u);
  ASSERT_TRUE(again.report);
  EXPECT_EQ(*again.report, *first.report);
}

TEST(Report, ReExportIsByteIdentical) {
  Workspace w("report");
  const auto c = w.load();
  (void)cmd_triage(c, scripted(testing::scripted_llm()));
  const auto reports = c.out_dir / "reports";
  const auto csv = read_text_file(reports / "aggregate.csv");
  const auto svg = read_text_file(reports / "aggregate.svg");
  const auto js = read_text_file(reports / "aggregate.json");
  cmd_report(c.out_dir);
  EXPECT_EQ(read_text_file(reports / "aggregate.csv"), csv);
  EXPECT_EQ(read_text_file(reports / "aggregate.svg"), svg);
  EXPECT_EQ(read_text_file(reports / "aggregate.json"), js);
  cmd_report(c.out_dir, w.root / "exported");
  EXPECT_EQ(read_text_file(w.root / "exported" / "aggregate.csv"), csv);
  EXPECT_THROW(cmd_report(w.root / "nowhere"), ConfigError);
}

TEST(ScenarioSeed, StableAndDistinct) {
  EXPECT_EQ(scenario_seed(7, "a"), splitmix64(7 ^ fnv1a64("a")));
  EXPECT_NE(scenario_seed(7, "a"), scenario_seed(7, "b"));
  EXPECT_NE(scenario_seed(7, "a"), scenario_seed(8, "a"));
}

// --- command line -----------------------------------------------------------

int run_cli(const std::string& args, const fs::path& log) {
  const auto cmd = std::string(IOTRIAGE_CLI) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST(Cli, ExitCodes) {
  Workspace w("cli");
  const auto log = w.root / "cli.log";
  EXPECT_EQ(run_cli("--version", log), 0);
  EXPECT_NE(read_text_file(log).find(std::string(kVersion)), std::string::npos);
  EXPECT_EQ(run_cli("", log), 2);
  EXPECT_EQ(run_cli("detect --bogus", log), 2);
  EXPECT_EQ(run_cli("detect", log), 2);
  EXPECT_EQ(run_cli("--config " + (w.root / "absent.json").string() + " detect", log), 2);
  EXPECT_EQ(run_cli("--mode sideways kb", log), 2);

  auto bad = w.config;
  bad["datasets"][0]["path"] = "missing.csv";
  write_text_file(w.root / "bad.json", bad.dump());
  EXPECT_EQ(run_cli("--config " + (w.root / "bad.json").string() + " --mode record detect", log), 2);
  EXPECT_NE(read_text_file(log).find("missing.csv"), std::string::npos);

  write_text_file(w.root / "garbage.csv", "only_one_column\nx\n");
  auto data_error = w.config;
  data_error["datasets"] = {{{"source_id", "custom"}, {"path", "garbage.csv"}}};
  write_text_file(w.root / "data_error.json", data_error.dump());
  EXPECT_EQ(run_cli("--config " + (w.root / "data_error.json").string() + " detect", log), 3);

  EXPECT_EQ(run_cli("kb --dump-labels", log), 0);
  EXPECT_NE(read_text_file(log).find("Password Cracking"), std::string::npos);
  const auto cfg = w.write_config();
  EXPECT_EQ(run_cli("--config " + cfg.string() + " kb", log), 0);
  EXPECT_EQ(run_cli("--config " + cfg.string() + " --seed 11 detect", log), 0);
  EXPECT_EQ(json::parse(read_text_file(w.root / "run" / "manifest.json")).at("seed"), 11);
}

TEST(Cli, ReplayTriageAndReport) {
  Workspace w("cli-replay");
  (void)cmd_triage(w.load(), scripted(testing::scripted_llm()));
  const auto cfg = w.write_config();
  const auto log = w.root / "cli.log";
  const auto out = w.root / "cli-run";
  EXPECT_EQ(run_cli("--config " + cfg.string() + " --mode replay --out " + out.string() +
                        " triage --scenario 'Port Scanning'",
                    log),
            0)
      << read_text_file(log);
  EXPECT_NE(read_text_file(log).find("network calls: 0"), std::string::npos) << read_text_file(log);
  EXPECT_TRUE(fs::exists(out / "reports" / "aggregate.csv"));
  EXPECT_EQ(read_text_file(out / "reports" / "aggregate.csv"),
            read_text_file(w.load().out_dir / "reports" / "aggregate.csv"));
  EXPECT_EQ(run_cli("--out " + out.string() + " report --to " + (w.root / "again").string(), log), 0);
  EXPECT_EQ(read_text_file(w.root / "again" / "aggregate.csv"), read_text_file(out / "reports" / "aggregate.csv"));
  EXPECT_EQ(run_cli("--out " + (w.root / "empty").string() + " report", log), 2);
}

}  // namespace
}  // namespace iotriage::pipeline
