// Command-line front end: detect, kb, triage, judge and report subcommands.

#include <cstdio>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "iotriage/error.hpp"
#include "iotriage/llm_gateway.hpp"
#include "iotriage/pipeline.hpp"
#include "iotriage/util.hpp"

namespace {

namespace pl = iotriage::pipeline;

struct GlobalFlags {
  std::string config;
  std::string out;
  std::string mode;
  std::optional<std::uint64_t> seed;
};

pl::RunConfig load_config(const GlobalFlags& flags) {
  if (flags.config.empty()) throw iotriage::ConfigError("--config is required for this subcommand");
  auto config = pl::RunConfig::load(flags.config);
  if (!flags.out.empty()) config.out_dir = flags.out;
  if (!flags.mode.empty()) config.mode = iotriage::llm::mode_from_string(flags.mode);
  if (flags.seed) config.seed = *flags.seed;
  return config;
}

void print_triage(const pl::TriageResult& r, const pl::RunConfig& config) {
  std::cout << "scenarios: " << r.scenario_ids.size() << "\n"
            << "completions: " << r.bundle.completed() << " (" << r.new_completions << " new), missing "
            << r.bundle.missing() << "\n"
            << "verdicts: " << r.verdicts.size() << ", unusable cells " << r.missing.size() << "\n"
            << "network calls: " << r.network_calls << "\n";
  if (r.report) {
    for (const auto& o : r.report->overall) {
      std::cout << o.dataset << " / " << o.model << ": judges "
                << (o.judge_mean ? iotriage::format_fixed(*o.judge_mean, 2) : std::string("-")) << ", human "
                << (o.human_mean ? iotriage::format_fixed(*o.human_mean, 2) : std::string("-")) << "\n";
    }
  }
  std::cout << "run directory: " << config.out_dir.string() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"IoT/IIoT attack detection and LLM-assisted triage"};
  app.set_version_flag("--version", std::string(pl::kVersion));
  app.require_subcommand(1);

  GlobalFlags flags;
  app.add_option("--config", flags.config, "Run configuration (JSON)");
  app.add_option("--out", flags.out, "Run directory, overrides out_dir");
  app.add_option("--mode", flags.mode, "LLM mode: live, record or replay")
      ->check(CLI::IsMember({"live", "record", "replay"}));
  app.add_option("--seed", flags.seed, "Run seed, overrides the config");

  auto* detect = app.add_subcommand("detect", "Train and benchmark the detection models");
  auto* kb = app.add_subcommand("kb", "Validate the knowledge bases and write their indices");
  bool dump_labels = false;
  kb->add_flag("--dump-labels", dump_labels, "Print the label mapping and exit");
  std::string scenario;
  auto* triage = app.add_subcommand("triage", "Prompts, completions, verdicts and the aggregate report");
  triage->add_option("--scenario", scenario, "Scenario id, native label or canonical attack name");
  auto* judge = app.add_subcommand("judge", "Re-judge from the stored prompts and completions");
  judge->add_option("--scenario", scenario, "Scenario id, native label or canonical attack name");
  std::string report_to;
  auto* report = app.add_subcommand("report", "Re-export the aggregate report of a run directory");
  report->add_option("--to", report_to, "Write the exports here instead of the run directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : iotriage::exit_code_for(iotriage::ErrorKind::config);
  }

  try {
    if (detect->parsed()) {
      const auto config = load_config(flags);
      const auto result = pl::cmd_detect(config);
      for (const auto& [source, bench] : result.by_source) {
        std::cout << "## " << source << "\n"
                  << iotriage::detect::render_benchmark(bench.rows, iotriage::metrics::ReportFormat::markdown);
      }
    } else if (kb->parsed()) {
      if (dump_labels) {
        std::cout << pl::dump_labels();
        return 0;
      }
      const auto r = pl::cmd_kb(load_config(flags));
      std::cout << "attack entries: " << r.attack_entries << " -> " << r.attack_index.string() << "\n"
                << "device entries: " << r.device_entries << " -> " << r.device_index.string() << "\n";
    } else if (triage->parsed() || judge->parsed()) {
      const auto config = load_config(flags);
      pl::TriageOptions options;
      options.scenario_filter = scenario;
      const auto r = triage->parsed() ? pl::cmd_triage(config, options) : pl::cmd_judge(config, options);
      print_triage(r, config);
    } else if (report->parsed()) {
      std::filesystem::path run_dir = flags.out;
      if (run_dir.empty()) run_dir = load_config(flags).out_dir;
      pl::cmd_report(run_dir, report_to.empty() ? std::nullopt : std::optional<std::filesystem::path>(report_to));
      std::cout << "re-exported " << (report_to.empty() ? (run_dir / "reports").string() : report_to) << "\n";
    }
  } catch (const iotriage::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return iotriage::exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return iotriage::exit_code_for(iotriage::ErrorKind::internal);
  }
  return 0;
}
