#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace iotriage::llm {

enum class Mode { live, record, replay };

[[nodiscard]] std::string_view to_string(Mode mode) noexcept;
[[nodiscard]] Mode mode_from_string(std::string_view name);

/// One chat-completion endpoint. provider is "openai" (any OpenAI-compatible
/// server), "anthropic" or "gemini".
struct EndpointConfig {
  std::string id;
  std::string provider = "openai";
  std::string base_url;
  std::string model;
  std::string credential_env;  // name of the environment variable; empty = no auth
  double timeout_seconds = 120.0;
  std::size_t max_retries = 4;
  std::size_t max_concurrent = 2;
  double temperature = 0.0;
  std::size_t max_tokens = 4096;

  void validate() const;
  [[nodiscard]] nlohmann::json to_json() const;
  static EndpointConfig from_json(const nlohmann::json& j);
};

// --- transport --------------------------------------------------------------

struct HttpRequest {
  std::string url;
  std::vector<std::pair<std::string, std::string>> headers;
  std::string body;
  double timeout_seconds = 120.0;
};

struct HttpResponse {
  int status = 0;
  std::string body;
};

/// Sends one POST. Throws NetworkError when no HTTP response was obtained.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual HttpResponse post(const HttpRequest& request) = 0;
};

/// cpp-httplib client, http and https.
class HttpTransport final : public Transport {
 public:
  HttpResponse post(const HttpRequest& request) override;
};

/// Scripted transport for tests: the handler produces each response.
class FakeTransport final : public Transport {
 public:
  using Handler = std::function<HttpResponse(const HttpRequest&)>;
  explicit FakeTransport(Handler handler) : handler_(std::move(handler)) {}

  HttpResponse post(const HttpRequest& request) override;
  [[nodiscard]] std::size_t calls() const;
  [[nodiscard]] std::vector<HttpRequest> requests() const;

 private:
  Handler handler_;
  mutable std::mutex mu_;
  std::vector<HttpRequest> requests_;
};

/// Counts calls through to an inner transport; with no inner transport any
/// call fails. Used to prove that replay runs stay offline.
class CountingTransport final : public Transport {
 public:
  explicit CountingTransport(std::shared_ptr<Transport> inner = nullptr) : inner_(std::move(inner)) {}

  HttpResponse post(const HttpRequest& request) override;
  [[nodiscard]] std::size_t calls() const noexcept { return calls_; }

 private:
  std::shared_ptr<Transport> inner_;
  std::atomic<std::size_t> calls_{0};
};

// --- provider adapters --------------------------------------------------------

[[nodiscard]] HttpRequest build_chat_request(const EndpointConfig& endpoint, std::string_view prompt,
                                             const std::optional<std::string>& api_key);
/// Extracts the completion text; throws ParseError on an unexpected body.
[[nodiscard]] std::string parse_chat_response(const EndpointConfig& endpoint, std::string_view body);

// --- records and fixtures ---------------------------------------------------

/// sha256 hex of model + "\n" + prompt.
[[nodiscard]] std::string prompt_hash(std::string_view model, std::string_view prompt);

struct CompletionRecord {
  std::string prompt_hash;
  std::string endpoint_id;
  std::string model;
  std::string response;
  double latency_seconds = 0.0;
  std::string timestamp;  // UTC, ISO 8601
  Mode mode = Mode::live;

  [[nodiscard]] nlohmann::json to_json() const;
  static CompletionRecord from_json(const nlohmann::json& j);
};

/// One <prompt_hash>.json file per record. Records are never overwritten.
class FixtureStore {
 public:
  explicit FixtureStore(std::filesystem::path dir) : dir_(std::move(dir)) {}

  [[nodiscard]] std::optional<CompletionRecord> find(const std::string& hash) const;
  /// Returns false when a record with that hash already exists.
  bool put(const CompletionRecord& record);
  [[nodiscard]] const std::filesystem::path& dir() const noexcept { return dir_; }

 private:
  std::filesystem::path dir_;
  mutable std::shared_mutex mu_;
};

// --- gateway ----------------------------------------------------------------

struct RetryPolicy {
  std::chrono::milliseconds initial_delay{500};
  double multiplier = 2.0;
  std::chrono::milliseconds max_delay{30000};

  /// Delay before retry number attempt (1-based).
  [[nodiscard]] std::chrono::milliseconds delay(std::size_t attempt) const;
};

using Sleeper = std::function<void(std::chrono::milliseconds)>;
using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;

[[nodiscard]] std::optional<std::string> process_env(const std::string& name);

struct GatewayOptions {
  std::optional<std::filesystem::path> fixture_dir;
  RetryPolicy retry;
  double max_requests_per_second = 0.0;  // 0 = unlimited
  Sleeper sleeper;                       // default: std::this_thread::sleep_for
  EnvLookup env = process_env;
};

/// True for failures worth retrying: no response, 408, 429 and 5xx.
[[nodiscard]] bool is_transient_status(int status) noexcept;

class Gateway {
 public:
  Gateway(GatewayOptions options, std::shared_ptr<Transport> transport);

  /// live: one completion with retries. record: reuse the stored record for the
  /// prompt hash, else live then persist. replay: stored record or DataError
  /// naming the hash, never the network.
  CompletionRecord complete(const EndpointConfig& endpoint, std::string_view prompt, Mode mode);

  [[nodiscard]] std::size_t network_calls() const noexcept { return network_calls_; }

 private:
  std::string call_with_retries(const EndpointConfig& endpoint, std::string_view prompt);
  void throttle();
  class Slot;
  std::shared_ptr<Slot> slot_for(const EndpointConfig& endpoint);

  GatewayOptions options_;
  std::shared_ptr<Transport> transport_;
  std::optional<FixtureStore> fixtures_;
  std::atomic<std::size_t> network_calls_{0};
  std::mutex slots_mu_;
  std::map<std::string, std::shared_ptr<Slot>> slots_;
  std::mutex rate_mu_;
  std::chrono::steady_clock::time_point next_request_{};
};

// --- evaluation matrix ------------------------------------------------------

struct MatrixScenario {
  std::string id;
  std::string prompt;  // scenario prompt sent to the evaluated models
};

struct MatrixCell {
  std::string scenario_id;
  std::string role;  // "evaluated" or "judge"
  std::string endpoint_id;
  std::optional<CompletionRecord> record;
  std::string error;  // set when record is empty
  bool resumed = false;

  [[nodiscard]] bool ok() const noexcept { return record.has_value(); }
};

struct MatrixBundle {
  std::vector<MatrixCell> cells;  // scenario order, evaluated before judges

  [[nodiscard]] std::size_t missing() const;
  [[nodiscard]] std::size_t completed() const { return cells.size() - missing(); }
  [[nodiscard]] nlohmann::json to_json() const;
};

/// Builds the judge prompt of a scenario from the evaluated responses, in
/// the order of the evaluated endpoints.
using EvaluationPromptBuilder =
    std::function<std::string(const MatrixScenario&, const std::vector<CompletionRecord>& evaluated)>;

struct MatrixOptions {
  Mode mode = Mode::replay;
  /// completions/<scenario>/<endpoint>.json; existing files are reused.
  std::optional<std::filesystem::path> completions_dir;
  std::size_t parallel_scenarios = 4;
};

/// For each scenario: one completion per evaluated endpoint, then one judge
/// completion per judge endpoint. Failures become missing cells; a ConfigError
/// aborts the run.
[[nodiscard]] MatrixBundle run_matrix(Gateway& gateway, const std::vector<MatrixScenario>& scenarios,
                                      const std::vector<EndpointConfig>& evaluated,
                                      const std::vector<EndpointConfig>& judges,
                                      const EvaluationPromptBuilder& build_evaluation, const MatrixOptions& options);

}  // namespace iotriage::llm
