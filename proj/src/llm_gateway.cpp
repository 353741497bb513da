#include "iotriage/llm_gateway.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <regex>
#include <semaphore>
#include <thread>

#include <httplib.h>

#include "iotriage/error.hpp"
#include "iotriage/util.hpp"

namespace iotriage::llm {

using json = nlohmann::json;

std::string_view to_string(Mode mode) noexcept {
  switch (mode) {
    case Mode::live: return "live";
    case Mode::record: return "record";
    case Mode::replay: return "replay";
  }
  return "live";
}

Mode mode_from_string(std::string_view name) {
  if (name == "live") return Mode::live;
  if (name == "record") return Mode::record;
  if (name == "replay") return Mode::replay;
  throw ConfigError("unknown mode '" + std::string(name) + "' (expected live, record or replay)");
}

void EndpointConfig::validate() const {
  if (id.empty()) throw ConfigError("endpoint: id is required");
  if (provider != "openai" && provider != "anthropic" && provider != "gemini") {
    throw ConfigError("endpoint " + id + ": unknown provider '" + provider + "'");
  }
  if (model.empty()) throw ConfigError("endpoint " + id + ": model is required");
  if (max_concurrent == 0) throw ConfigError("endpoint " + id + ": max_concurrent must be >= 1");
  if (!(timeout_seconds > 0.0)) throw ConfigError("endpoint " + id + ": timeout_seconds must be > 0");
}

json EndpointConfig::to_json() const {
  return {{"id", id},
          {"provider", provider},
          {"base_url", base_url},
          {"model", model},
          {"credential_env", credential_env},
          {"timeout_seconds", timeout_seconds},
          {"max_retries", max_retries},
          {"max_concurrent", max_concurrent},
          {"temperature", temperature},
          {"max_tokens", max_tokens}};
}

EndpointConfig EndpointConfig::from_json(const json& j) {
  EndpointConfig e;
  try {
    e.id = j.at("id").get<std::string>();
    e.provider = j.value("provider", e.provider);
    e.base_url = j.value("base_url", e.base_url);
    e.model = j.at("model").get<std::string>();
    e.credential_env = j.value("credential_env", e.credential_env);
    e.timeout_seconds = j.value("timeout_seconds", e.timeout_seconds);
    e.max_retries = j.value("max_retries", e.max_retries);
    e.max_concurrent = j.value("max_concurrent", e.max_concurrent);
    e.temperature = j.value("temperature", e.temperature);
    e.max_tokens = j.value("max_tokens", e.max_tokens);
  } catch (const json::exception& ex) {
    throw ConfigError(std::string("endpoint config: ") + ex.what());
  }
  if (j.contains("api_key")) {
    throw ConfigError("endpoint " + e.id + ": credentials belong in an environment variable (credential_env)");
  }
  e.validate();
  return e;
}

// --- transports -------------------------------------------------------------

HttpResponse HttpTransport::post(const HttpRequest& request) {
  static const std::regex url_re(R"(^(https?://[^/]+)(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(request.url, m, url_re)) throw ConfigError("malformed endpoint URL '" + request.url + "'");
  httplib::Client client(m[1].str());
  const auto secs = static_cast<time_t>(request.timeout_seconds);
  const auto usecs = static_cast<time_t>((request.timeout_seconds - static_cast<double>(secs)) * 1e6);
  client.set_connection_timeout(std::min<time_t>(secs, 30), usecs);
  client.set_read_timeout(secs, usecs);
  client.set_write_timeout(secs, usecs);
  httplib::Headers headers;
  for (const auto& [k, v] : request.headers) headers.emplace(k, v);
  const auto path = m[2].matched ? m[2].str() : std::string("/");
  auto result = client.Post(path, headers, request.body, "application/json");
  if (!result) throw NetworkError("request to " + m[1].str() + " failed: " + httplib::to_string(result.error()));
  return {result->status, result->body};
}

HttpResponse FakeTransport::post(const HttpRequest& request) {
  {
    std::lock_guard lock(mu_);
    requests_.push_back(request);
  }
  return handler_(request);
}

std::size_t FakeTransport::calls() const {
  std::lock_guard lock(mu_);
  return requests_.size();
}

std::vector<HttpRequest> FakeTransport::requests() const {
  std::lock_guard lock(mu_);
  return requests_;
}

HttpResponse CountingTransport::post(const HttpRequest& request) {
  ++calls_;
  if (!inner_) throw NetworkError("network access is disabled for this transport");
  return inner_->post(request);
}

// --- adapters ---------------------------------------------------------------

namespace {

std::string default_base_url(const std::string& provider) {
  if (provider == "anthropic") return "https://api.anthropic.com/v1";
  if (provider == "gemini") return "https://generativelanguage.googleapis.com/v1beta";
  return "https://api.openai.com/v1";
}

std::string strip_slash(std::string s) {
  while (!s.empty() && s.back() == '/') s.pop_back();
  return s;
}

}  // namespace

HttpRequest build_chat_request(const EndpointConfig& endpoint, std::string_view prompt,
                               const std::optional<std::string>& api_key) {
  HttpRequest req;
  req.timeout_seconds = endpoint.timeout_seconds;
  const auto base = strip_slash(endpoint.base_url.empty() ? default_base_url(endpoint.provider) : endpoint.base_url);
  const json message = {{"role", "user"}, {"content", std::string(prompt)}};
  if (endpoint.provider == "anthropic") {
    req.url = base + "/messages";
    if (api_key) req.headers.emplace_back("x-api-key", *api_key);
    req.headers.emplace_back("anthropic-version", "2023-06-01");
    req.body = json{{"model", endpoint.model},
                    {"max_tokens", endpoint.max_tokens},
                    {"temperature", endpoint.temperature},
                    {"messages", json::array({message})}}
                   .dump();
  } else if (endpoint.provider == "gemini") {
    req.url = base + "/models/" + endpoint.model + ":generateContent";
    if (api_key) req.headers.emplace_back("x-goog-api-key", *api_key);
    req.body = json{{"contents", json::array({{{"role", "user"}, {"parts", json::array({{{"text", prompt}}})}}})},
                    {"generationConfig",
                     {{"temperature", endpoint.temperature}, {"maxOutputTokens", endpoint.max_tokens}}}}
                   .dump();
  } else {
    req.url = base + "/chat/completions";
    if (api_key) req.headers.emplace_back("Authorization", "Bearer " + *api_key);
    req.body = json{{"model", endpoint.model},
                    {"temperature", endpoint.temperature},
                    {"max_tokens", endpoint.max_tokens},
                    {"messages", json::array({message})}}
                   .dump();
  }
  return req;
}

std::string parse_chat_response(const EndpointConfig& endpoint, std::string_view body) {
  try {
    const auto j = json::parse(body);
    std::string text;
    if (endpoint.provider == "anthropic") {
      for (const auto& block : j.at("content")) {
        if (block.value("type", "") == "text") text += block.at("text").get<std::string>();
      }
    } else if (endpoint.provider == "gemini") {
      for (const auto& part : j.at("candidates").at(0).at("content").at("parts")) {
        text += part.value("text", "");
      }
    } else {
      text = j.at("choices").at(0).at("message").at("content").get<std::string>();
    }
    if (text.empty()) throw ParseError("endpoint " + endpoint.id + " returned an empty completion");
    return text;
  } catch (const json::exception& e) {
    throw ParseError("endpoint " + endpoint.id + " returned an unexpected body: " + e.what());
  }
}

// --- records ----------------------------------------------------------------

std::string prompt_hash(std::string_view model, std::string_view prompt) {
  std::string data(model);
  data += '\n';
  data += prompt;
  return sha256_hex(data);
}

json CompletionRecord::to_json() const {
  return {{"prompt_hash", prompt_hash},
          {"endpoint_id", endpoint_id},
          {"model", model},
          {"response", response},
          {"latency_seconds", latency_seconds},
          {"timestamp", timestamp},
          {"mode", to_string(mode)}};
}

CompletionRecord CompletionRecord::from_json(const json& j) {
  try {
    CompletionRecord r;
    r.prompt_hash = j.at("prompt_hash").get<std::string>();
    r.endpoint_id = j.value("endpoint_id", "");
    r.model = j.value("model", "");
    r.response = j.at("response").get<std::string>();
    r.latency_seconds = j.value("latency_seconds", 0.0);
    r.timestamp = j.value("timestamp", "");
    r.mode = mode_from_string(j.value("mode", "live"));
    return r;
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed completion record: ") + e.what());
  }
}

std::optional<CompletionRecord> FixtureStore::find(const std::string& hash) const {
  std::shared_lock lock(mu_);
  const auto path = dir_ / (hash + ".json");
  if (!std::filesystem::exists(path)) return std::nullopt;
  try {
    return CompletionRecord::from_json(json::parse(read_text_file(path)));
  } catch (const json::parse_error& e) {
    throw ParseError("fixture " + path.string() + " is not valid JSON: " + e.what());
  }
}

bool FixtureStore::put(const CompletionRecord& record) {
  std::unique_lock lock(mu_);
  const auto path = dir_ / (record.prompt_hash + ".json");
  if (std::filesystem::exists(path)) return false;
  write_text_file(path, record.to_json().dump(2) + "\n");
  return true;
}

// --- gateway ----------------------------------------------------------------

std::chrono::milliseconds RetryPolicy::delay(std::size_t attempt) const {
  const double ms = static_cast<double>(initial_delay.count()) *
                    std::pow(multiplier, static_cast<double>(attempt > 0 ? attempt - 1 : 0));
  return std::chrono::milliseconds(
      static_cast<std::int64_t>(std::min(ms, static_cast<double>(max_delay.count()))));
}

std::optional<std::string> process_env(const std::string& name) {
  const char* value = std::getenv(name.c_str());
  if (value == nullptr || *value == '\0') return std::nullopt;
  return std::string(value);
}

bool is_transient_status(int status) noexcept { return status == 408 || status == 429 || status >= 500; }

class Gateway::Slot {
 public:
  explicit Slot(std::size_t n) : sem_(static_cast<std::ptrdiff_t>(std::min<std::size_t>(n, 1024))) {}
  void acquire() { sem_.acquire(); }
  void release() { sem_.release(); }

 private:
  std::counting_semaphore<1024> sem_;
};

namespace {

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

Gateway::Gateway(GatewayOptions options, std::shared_ptr<Transport> transport)
    : options_(std::move(options)), transport_(std::move(transport)) {
  if (!options_.sleeper) options_.sleeper = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
  if (!options_.env) options_.env = process_env;
  if (options_.fixture_dir) fixtures_.emplace(*options_.fixture_dir);
}

std::shared_ptr<Gateway::Slot> Gateway::slot_for(const EndpointConfig& endpoint) {
  std::lock_guard lock(slots_mu_);
  auto& slot = slots_[endpoint.id];
  if (!slot) slot = std::make_shared<Slot>(endpoint.max_concurrent);
  return slot;
}

void Gateway::throttle() {
  if (options_.max_requests_per_second <= 0.0) return;
  std::chrono::steady_clock::duration wait{};
  {
    std::lock_guard lock(rate_mu_);
    const auto now = std::chrono::steady_clock::now();
    const auto interval = std::chrono::duration_cast<std::chrono::steady_clock::duration>(
        std::chrono::duration<double>(1.0 / options_.max_requests_per_second));
    const auto start = std::max(now, next_request_);
    next_request_ = start + interval;
    wait = start - now;
  }
  if (wait > std::chrono::steady_clock::duration::zero()) {
    options_.sleeper(std::chrono::duration_cast<std::chrono::milliseconds>(wait));
  }
}

std::string Gateway::call_with_retries(const EndpointConfig& endpoint, std::string_view prompt) {
  std::optional<std::string> key;
  if (!endpoint.credential_env.empty()) {
    key = options_.env(endpoint.credential_env);
    if (!key) {
      throw ConfigError("endpoint " + endpoint.id + ": environment variable " + endpoint.credential_env +
                        " is not set");
    }
  }
  if (!transport_) throw ConfigError("endpoint " + endpoint.id + ": no transport configured");
  const auto request = build_chat_request(endpoint, prompt, key);
  const auto slot = slot_for(endpoint);

  std::string last_error;
  for (std::size_t attempt = 0; attempt <= endpoint.max_retries; ++attempt) {
    if (attempt > 0) options_.sleeper(options_.retry.delay(attempt));
    throttle();
    slot->acquire();
    HttpResponse response;
    bool got_response = false;
    try {
      ++network_calls_;
      response = transport_->post(request);
      got_response = true;
    } catch (const NetworkError& e) {
      last_error = e.what();
    } catch (...) {
      slot->release();
      throw;
    }
    slot->release();
    if (!got_response) continue;
    if (response.status >= 200 && response.status < 300) return parse_chat_response(endpoint, response.body);
    last_error = "HTTP " + std::to_string(response.status);
    if (!is_transient_status(response.status)) {
      throw NetworkError("endpoint " + endpoint.id + " rejected the request: " + last_error + " " +
                         response.body.substr(0, 200));
    }
  }
  throw NetworkError("endpoint " + endpoint.id + ": retries exhausted after " +
                     std::to_string(endpoint.max_retries + 1) + " attempts (" + last_error + ")");
}

CompletionRecord Gateway::complete(const EndpointConfig& endpoint, std::string_view prompt, Mode mode) {
  const auto hash = prompt_hash(endpoint.model, prompt);
  if (mode != Mode::live) {
    if (!fixtures_) throw ConfigError(std::string(to_string(mode)) + " mode requires a fixture directory");
    if (auto stored = fixtures_->find(hash)) return *stored;
    if (mode == Mode::replay) {
      throw DataError("replay miss: no fixture for prompt hash " + hash + " (endpoint " + endpoint.id + ")");
    }
  }
  const auto start = std::chrono::steady_clock::now();
  CompletionRecord record;
  record.prompt_hash = hash;
  record.endpoint_id = endpoint.id;
  record.model = endpoint.model;
  record.response = call_with_retries(endpoint, prompt);
  record.latency_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  record.timestamp = utc_timestamp();
  record.mode = Mode::live;
  if (mode == Mode::record) fixtures_->put(record);
  return record;
}

// --- matrix -----------------------------------------------------------------

std::size_t MatrixBundle::missing() const {
  return static_cast<std::size_t>(std::count_if(cells.begin(), cells.end(), [](const auto& c) { return !c.ok(); }));
}

json MatrixBundle::to_json() const {
  json out = json::array();
  for (const auto& c : cells) {
    json j{{"scenario_id", c.scenario_id}, {"role", c.role}, {"endpoint_id", c.endpoint_id}, {"ok", c.ok()}};
    if (c.ok()) {
      j["prompt_hash"] = c.record->prompt_hash;
    } else {
      j["error"] = c.error;
    }
    out.push_back(std::move(j));
  }
  return out;
}

namespace {

std::filesystem::path cell_path(const std::filesystem::path& dir, const std::string& scenario,
                                const std::string& endpoint) {
  return dir / slugify(scenario) / (slugify(endpoint) + ".json");
}

MatrixCell run_cell(Gateway& gateway, const MatrixScenario& scenario, const EndpointConfig& endpoint,
                    const std::string& role, const std::string& prompt, const MatrixOptions& options) {
  MatrixCell cell{scenario.id, role, endpoint.id, std::nullopt, {}, false};
  std::optional<std::filesystem::path> path;
  if (options.completions_dir) {
    path = cell_path(*options.completions_dir, scenario.id, endpoint.id);
    if (std::filesystem::exists(*path)) {
      try {
        const auto j = json::parse(read_text_file(*path));
        auto record = CompletionRecord::from_json(j.at("record"));
        if (record.prompt_hash == prompt_hash(endpoint.model, prompt)) {
          cell.record = std::move(record);
          cell.resumed = true;
          return cell;
        }
      } catch (const std::exception&) {
        // Unreadable or stale cell: recompute it below.
      }
    }
  }
  try {
    cell.record = gateway.complete(endpoint, prompt, options.mode);
  } catch (const ConfigError&) {
    throw;  // a missing credential or fixture dir affects every cell
  } catch (const Error& e) {
    cell.error = e.what();
    return cell;
  }
  if (path) {
    const json j{{"scenario_id", scenario.id}, {"role", role}, {"endpoint_id", endpoint.id},
                 {"record", cell.record->to_json()}};
    write_text_file(*path, j.dump(2) + "\n");
  }
  return cell;
}

}  // namespace

MatrixBundle run_matrix(Gateway& gateway, const std::vector<MatrixScenario>& scenarios,
                        const std::vector<EndpointConfig>& evaluated, const std::vector<EndpointConfig>& judges,
                        const EvaluationPromptBuilder& build_evaluation, const MatrixOptions& options) {
  std::vector<std::vector<MatrixCell>> per_scenario(scenarios.size());
  std::atomic<std::size_t> next{0};
  std::mutex error_mu;
  std::exception_ptr fatal;

  auto worker = [&] {
    for (auto s = next.fetch_add(1); s < scenarios.size(); s = next.fetch_add(1)) {
      try {
        const auto& scenario = scenarios[s];
        auto& cells = per_scenario[s];
        std::vector<CompletionRecord> responses;
        for (const auto& endpoint : evaluated) {
          cells.push_back(run_cell(gateway, scenario, endpoint, "evaluated", scenario.prompt, options));
          if (cells.back().ok()) responses.push_back(*cells.back().record);
        }
        if (responses.size() != evaluated.size()) {
          for (const auto& judge : judges) {
            cells.push_back({scenario.id, "judge", judge.id, std::nullopt, "evaluated response missing", false});
          }
          continue;
        }
        const auto evaluation_prompt = build_evaluation(scenario, responses);
        for (const auto& judge : judges) {
          cells.push_back(run_cell(gateway, scenario, judge, "judge", evaluation_prompt, options));
        }
      } catch (...) {
        std::lock_guard lock(error_mu);
        if (!fatal) fatal = std::current_exception();
      }
    }
  };

  const auto n_threads = std::clamp<std::size_t>(options.parallel_scenarios, 1, std::max<std::size_t>(scenarios.size(), 1));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t i = 0; i < n_threads; ++i) pool.emplace_back(worker);
  }
  if (fatal) std::rethrow_exception(fatal);

  MatrixBundle bundle;
  for (auto& cells : per_scenario) {
    for (auto& c : cells) bundle.cells.push_back(std::move(c));
  }
  return bundle;
}

}  // namespace iotriage::llm
