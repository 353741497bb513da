#include "synthetic.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <random>
#include <unistd.h>
#include <vector>

#include <nlohmann/json.hpp>

#include "iotriage/judging.hpp"
#include "iotriage/util.hpp"

namespace iotriage::testing {

namespace {

struct Schema {
  std::vector<std::string> numeric;
  std::vector<std::string> binary;
  std::string categorical;
  std::vector<std::string> categories;
  std::vector<std::string> raw_labels;
  std::string label_column;
};

// Class means are fixed per (class, feature) so every seed draws from the
// same distributions; the seed only changes the samples.
double class_mean(std::size_t cls, std::size_t feature) {
  return static_cast<double>(splitmix64(cls * 1000 + feature + 17) % 1000) / 100.0;
}

std::string generate(const Schema& s, std::size_t rows_per_class, std::uint64_t seed, double noise,
                     bool edge_extras) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, noise);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  std::vector<std::string> lines;
  for (std::size_t c = 0; c < s.raw_labels.size(); ++c) {
    for (std::size_t r = 0; r < rows_per_class; ++r) {
      std::vector<std::string> cells;
      if (edge_extras) {
        cells.push_back("2021 11 " + std::to_string(10 + r % 18) + " 10:" + std::to_string(10 + r % 50) + ":00");
        cells.push_back("192.168.0." + std::to_string(rng() % 250));
        cells.push_back("192.168.0." + std::to_string(rng() % 250));
      }
      for (std::size_t f = 0; f < s.numeric.size(); ++f) {
        cells.push_back(format_fixed(std::max(0.0, class_mean(c, f) + gauss(rng)), 4));
      }
      for (std::size_t f = 0; f < s.binary.size(); ++f) {
        const double p = class_mean(c, 100 + f) / 10.0;
        cells.push_back(unit(rng) < p ? "1" : "0");
      }
      const auto preferred = splitmix64(c + 7) % s.categories.size();
      cells.push_back(unit(rng) < 0.8 ? s.categories[preferred] : s.categories[rng() % s.categories.size()]);
      if (edge_extras) cells.push_back(c == 0 ? "0" : "1");
      cells.push_back(s.raw_labels[c]);
      std::string line;
      for (const auto& cell : cells) line += (line.empty() ? "" : ",") + csv_escape(cell);
      lines.push_back(std::move(line));
    }
  }
  for (std::size_t i = lines.size(); i > 1; --i) std::swap(lines[i - 1], lines[rng() % i]);

  std::string header;
  if (edge_extras) header = "frame.time,ip.src_host,ip.dst_host";
  for (const auto& n : s.numeric) header += (header.empty() ? "" : ",") + n;
  for (const auto& n : s.binary) header += "," + n;
  header += "," + s.categorical;
  if (edge_extras) header += ",Attack_label";
  header += "," + s.label_column + "\n";
  std::string out = header;
  for (const auto& l : lines) out += l + "\n";
  return out;
}

}  // namespace

std::string synthetic_edge_csv(std::size_t rows_per_class, std::uint64_t seed, double noise) {
  const Schema s{{"arp.opcode", "icmp.checksum", "icmp.seq_le", "tcp.ack", "tcp.ack_raw", "tcp.flags", "tcp.len",
                  "tcp.dstport", "udp.time_delta", "http.content_length", "dns.qry.name.len", "mqtt.msgtype"},
                 {"tcp.connection.syn", "tcp.connection.rst", "tcp.connection.fin"},
                 "http.request.method",
                 {"0", "GET", "POST", "PUT"},
                 {"Normal", "Backdoor", "DDoS_HTTP", "DDoS_ICMP", "DDoS_TCP", "DDoS_UDP", "Fingerprinting", "MITM",
                  "Password", "Port_Scanning", "SQL_injection", "Uploading", "Vulnerability_scanner", "XSS"},
                 "Attack_type"};
  return generate(s, rows_per_class, seed, noise, true);
}

std::string synthetic_cic_csv(std::size_t rows_per_class, std::uint64_t seed, double noise) {
  const Schema s{{"flow_duration", "Header_Length", "Rate", "Srate", "rst_count", "urg_count", "Tot sum", "Min",
                  "Max", "AVG", "Tot size", "IAT", "Number", "Variance"},
                 {"syn_flag_number", "ack_flag_number", "HTTP", "HTTPS", "DNS", "TCP", "UDP", "ICMP"},
                 "Protocol Type",
                 {"6", "17", "1"},
                 {"BenignTraffic", "Backdoor_Malware", "DDoS-HTTP_Flood", "DDoS-ICMP_Flood", "DDoS-SYN_Flood",
                  "DDoS-TCP_Flood", "DDoS-UDP_Flood", "DNS_Spoofing", "DictionaryBruteForce", "MITM-ArpSpoofing",
                  "Recon-OSScan", "Recon-PortScan", "SqlInjection", "Uploading_Attack", "VulnerabilityScan", "XSS"},
                 "label"};
  return generate(s, rows_per_class, seed, noise, false);
}

std::filesystem::path fresh_dir(std::string_view tag) {
  static std::atomic<int> counter{0};
  const auto dir = std::filesystem::temp_directory_path() /
                   ("iotriage-" + std::string(tag) + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

ScriptedScores scripted_scores(std::string_view judge_model) {
  if (judge_model == "judge-two") return {{3, 3, 2, 2}, {2.5, 2, 1.5, 1.5}};
  if (judge_model == "judge-prose") return {{3, 2.5, 2, 2}, {2, 2.5, 1.5, 1.5}};
  return {{3, 3, 2, 1.5}, {2.5, 2.5, 1.5, 1.5}};
}

namespace {

judging::RubricScore to_score(const double (&m)[4]) { return judging::RubricScore::from_metrics(m[0], m[1], m[2], m[3]); }

std::string prose_verdict(const judging::RubricScore& a, const judging::RubricScore& b) {
  auto side = [](const char* label, const judging::RubricScore& s) {
    return std::string("**Response ") + label + "**\n" +
           "- Attack Analysis and Threat Understanding: " + format_fixed(*s.attack_analysis, 1) + "/3\n" +
           "- Mitigation Quality and Practicality: " + format_fixed(*s.mitigation, 1) + "/3\n" +
           "- Technical Depth and Security Awareness: " + format_fixed(*s.technical_depth, 1) + "/2\n" +
           "- Clarity, Structure, and Justification: " + format_fixed(*s.clarity, 1) + "/2\n" +
           "Total: " + format_fixed(s.total(), 1) + " out of 10\n\n";
  };
  const char* better = a.total() > b.total() ? "A" : "B";
  return side("A", a) + side("B", b) + "Response " + better + " is better overall.\n";
}

}  // namespace

std::shared_ptr<llm::FakeTransport> scripted_llm() {
  return std::make_shared<llm::FakeTransport>([](const llm::HttpRequest& request) {
    const auto body = nlohmann::json::parse(request.body);
    const auto model = body.at("model").get<std::string>();
    const auto prompt = body.at("messages").at(0).at("content").get<std::string>();
    std::string text;
    if (model == kStrongModel || model == kWeakModel) {
      const bool strong = model == kStrongModel;
      text = "1. Attack Behavior Analysis\nAs " + model +
             ", I see repeated requests in the traffic features.\nQuality tier: " + (strong ? "high" : "medium") +
             "\n\n2. Mitigation Suggestions\nRate-limit logins on the device and enable MFA.\n";
    } else {
      const auto high = prompt.find("Quality tier: high");
      const auto medium = prompt.find("Quality tier: medium");
      if (high == std::string::npos || medium == std::string::npos) return llm::HttpResponse{400, "missing responses"};
      const auto scores = scripted_scores(model);
      const bool strong_is_a = high < medium;
      const auto a = to_score(strong_is_a ? scores.strong_metrics : scores.weak_metrics);
      const auto b = to_score(strong_is_a ? scores.weak_metrics : scores.strong_metrics);
      if (model == "judge-prose") {
        text = prose_verdict(a, b);
      } else {
        const auto pref = a.total() > b.total() ? judging::Preference::a : judging::Preference::b;
        text = "Both responses identify the attack.\n" + judging::render_score_block(a, b, pref) + "\n";
      }
    }
    const nlohmann::json response = {{"choices", {{{"message", {{"role", "assistant"}, {"content", text}}}}}}};
    return llm::HttpResponse{200, response.dump()};
  });
}

llm::EndpointConfig endpoint(std::string id, std::string model) {
  llm::EndpointConfig e;
  e.id = std::move(id);
  e.provider = "openai";
  e.base_url = "http://llm.test.invalid/v1";
  e.model = std::move(model);
  e.max_retries = 0;
  return e;
}

}  // namespace iotriage::testing
