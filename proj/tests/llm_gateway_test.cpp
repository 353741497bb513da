#include <gtest/gtest.h>

#include <nlohmann/json.hpp>

#include "iotriage/error.hpp"
#include "iotriage/llm_gateway.hpp"
#include "iotriage/util.hpp"
#include "synthetic.hpp"

namespace iotriage::llm {
namespace {

using nlohmann::json;

HttpResponse openai_reply(const std::string& text) {
  return {200, json{{"choices", {{{"message", {{"role", "assistant"}, {"content", text}}}}}}}.dump()};
}

EndpointConfig ep(const std::string& provider) {
  EndpointConfig e;
  e.id = provider + "-ep";
  e.provider = provider;
  e.model = "m1";
  return e;
}

struct Sleeps {
  std::vector<std::chrono::milliseconds> calls;
  Sleeper sleeper() {
    return [this](std::chrono::milliseconds d) { calls.push_back(d); };
  }
};

TEST(Adapters, OpenAiShape) {
  auto e = ep("openai");
  e.base_url = "http://host:8000/v1/";
  const auto req = build_chat_request(e, "hi", std::string("sk-x"));
  EXPECT_EQ(req.url, "http://host:8000/v1/chat/completions");
  EXPECT_EQ(req.headers.at(0), (std::pair<std::string, std::string>{"Authorization", "Bearer sk-x"}));
  const auto body = json::parse(req.body);
  EXPECT_EQ(body.at("model"), "m1");
  EXPECT_EQ(body.at("messages").at(0).at("content"), "hi");
  EXPECT_EQ(body.at("temperature"), 0.0);
  EXPECT_EQ(parse_chat_response(e, openai_reply("ok").body), "ok");
  EXPECT_TRUE(build_chat_request(e, "hi", std::nullopt).headers.empty());
}

TEST(Adapters, AnthropicShape) {
  const auto e = ep("anthropic");
  const auto req = build_chat_request(e, "hi", std::string("k"));
  EXPECT_EQ(req.url, "https://api.anthropic.com/v1/messages");
  EXPECT_EQ(json::parse(req.body).at("max_tokens"), 4096);
  bool has_key = false;
  for (const auto& [k, v] : req.headers) has_key |= k == "x-api-key" && v == "k";
  EXPECT_TRUE(has_key);
  const json reply = {{"content", {{{"type", "text"}, {"text", "a"}}, {{"type", "text"}, {"text", "b"}}}}};
  EXPECT_EQ(parse_chat_response(e, reply.dump()), "ab");
}

TEST(Adapters, GeminiShape) {
  const auto e = ep("gemini");
  const auto req = build_chat_request(e, "hi", std::string("g"));
  EXPECT_EQ(req.url, "https://generativelanguage.googleapis.com/v1beta/models/m1:generateContent");
  EXPECT_EQ(json::parse(req.body).at("contents").at(0).at("parts").at(0).at("text"), "hi");
  const json reply = {{"candidates", {{{"content", {{"parts", {{{"text", "yes"}}}}}}}}}};
  EXPECT_EQ(parse_chat_response(e, reply.dump()), "yes");
}

TEST(Adapters, UnexpectedBodiesAreParseErrors) {
  EXPECT_THROW((void)parse_chat_response(ep("openai"), "{}"), ParseError);
  EXPECT_THROW((void)parse_chat_response(ep("openai"), "not json"), ParseError);
  EXPECT_THROW((void)parse_chat_response(ep("openai"), openai_reply("").body), ParseError);
}

TEST(Endpoint, ValidationAndCredentialsPolicy) {
  EXPECT_NO_THROW(ep("openai").validate());
  auto bad = ep("cohere");
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = ep("openai");
  bad.model.clear();
  EXPECT_THROW(bad.validate(), ConfigError);
  EXPECT_THROW((void)EndpointConfig::from_json({{"id", "x"}, {"model", "m"}, {"api_key", "secret"}}), ConfigError);
  const auto back = EndpointConfig::from_json(ep("gemini").to_json());
  EXPECT_EQ(back.to_json(), ep("gemini").to_json());
  EXPECT_EQ(mode_from_string("record"), Mode::record);
  EXPECT_THROW((void)mode_from_string("offline"), ConfigError);
}

TEST(Gateway, RetriesTransientFailuresWithBackoff) {
  int n = 0;
  auto t = std::make_shared<FakeTransport>([&](const HttpRequest&) -> HttpResponse {
    ++n;
    if (n == 1) throw NetworkError("connection reset");
    if (n == 2) return {429, "slow down"};
    if (n == 3) return {503, ""};
    return openai_reply("done");
  });
  Sleeps sleeps;
  GatewayOptions o;
  o.sleeper = sleeps.sleeper();
  Gateway g(o, t);
  auto e = ep("openai");
  e.max_retries = 4;
  EXPECT_EQ(g.complete(e, "p", Mode::live).response, "done");
  EXPECT_EQ(g.network_calls(), 4u);
  EXPECT_EQ(sleeps.calls, (std::vector<std::chrono::milliseconds>{std::chrono::milliseconds(500),
                                                                   std::chrono::milliseconds(1000),
                                                                   std::chrono::milliseconds(2000)}));
}

TEST(Gateway, PermanentFailureIsNotRetried) {
  auto t = std::make_shared<FakeTransport>([](const HttpRequest&) { return HttpResponse{401, "bad key"}; });
  Sleeps sleeps;
  GatewayOptions o;
  o.sleeper = sleeps.sleeper();
  Gateway g(o, t);
  EXPECT_THROW((void)g.complete(ep("openai"), "p", Mode::live), NetworkError);
  EXPECT_EQ(t->calls(), 1u);
  EXPECT_TRUE(sleeps.calls.empty());
}

TEST(Gateway, RetriesAreBounded) {
  auto t = std::make_shared<FakeTransport>([](const HttpRequest&) { return HttpResponse{500, ""}; });
  Sleeps sleeps;
  GatewayOptions o;
  o.sleeper = sleeps.sleeper();
  Gateway g(o, t);
  auto e = ep("openai");
  e.max_retries = 2;
  EXPECT_THROW((void)g.complete(e, "p", Mode::live), NetworkError);
  EXPECT_EQ(t->calls(), 3u);
}

TEST(Gateway, BackoffIsCapped) {
  const RetryPolicy p;
  EXPECT_EQ(p.delay(1).count(), 500);
  EXPECT_EQ(p.delay(3).count(), 2000);
  EXPECT_EQ(p.delay(20).count(), 30000);
  EXPECT_TRUE(is_transient_status(408));
  EXPECT_TRUE(is_transient_status(502));
  EXPECT_FALSE(is_transient_status(400));
}

TEST(Gateway, CredentialComesFromTheEnvironment) {
  auto t = std::make_shared<FakeTransport>([](const HttpRequest&) { return openai_reply("x"); });
  auto e = ep("openai");
  e.credential_env = "IOTRIAGE_TEST_KEY";
  GatewayOptions missing;
  missing.env = [](const std::string&) { return std::nullopt; };
  Gateway g1(missing, t);
  EXPECT_THROW((void)g1.complete(e, "p", Mode::live), ConfigError);
  EXPECT_EQ(t->calls(), 0u);

  GatewayOptions present;
  present.env = [](const std::string& name) -> std::optional<std::string> {
    return name == "IOTRIAGE_TEST_KEY" ? std::optional<std::string>("sk-env") : std::nullopt;
  };
  Gateway g2(present, t);
  (void)g2.complete(e, "p", Mode::live);
  EXPECT_EQ(t->requests().at(0).headers.at(0).second, "Bearer sk-env");
}

TEST(Gateway, RecordThenReplayIsOffline) {
  const auto dir = testing::fresh_dir("fixtures");
  auto live = std::make_shared<FakeTransport>([](const HttpRequest&) { return openai_reply("recorded answer"); });
  GatewayOptions o;
  o.fixture_dir = dir;
  Gateway rec(o, live);
  const auto first = rec.complete(ep("openai"), "prompt", Mode::record);
  EXPECT_EQ(first.prompt_hash, prompt_hash("m1", "prompt"));
  EXPECT_TRUE(std::filesystem::exists(dir / (first.prompt_hash + ".json")));
  // A second record call reuses the fixture.
  (void)rec.complete(ep("openai"), "prompt", Mode::record);
  EXPECT_EQ(live->calls(), 1u);

  auto offline = std::make_shared<CountingTransport>();
  Gateway rep(o, offline);
  const auto again = rep.complete(ep("openai"), "prompt", Mode::replay);
  EXPECT_EQ(again.response, "recorded answer");
  EXPECT_EQ(offline->calls(), 0u);
  EXPECT_EQ(rep.network_calls(), 0u);

  try {
    (void)rep.complete(ep("openai"), "another prompt", Mode::replay);
    FAIL() << "expected a replay miss";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find(prompt_hash("m1", "another prompt")), std::string::npos);
  }
  EXPECT_EQ(offline->calls(), 0u);
}

TEST(Gateway, ReplayWithoutFixturesIsAConfigError) {
  Gateway g({}, std::make_shared<CountingTransport>());
  EXPECT_THROW((void)g.complete(ep("openai"), "p", Mode::replay), ConfigError);
}

TEST(Fixtures, NeverOverwritten) {
  FixtureStore store(testing::fresh_dir("store"));
  CompletionRecord r;
  r.prompt_hash = "abc";
  r.response = "first";
  EXPECT_TRUE(store.put(r));
  r.response = "second";
  EXPECT_FALSE(store.put(r));
  EXPECT_EQ(store.find("abc")->response, "first");
  EXPECT_FALSE(store.find("zzz").has_value());
  const auto back = CompletionRecord::from_json(r.to_json());
  EXPECT_EQ(back.to_json(), r.to_json());
}

TEST(Gateway, PromptHashIsSha256OfModelAndPrompt) {
  EXPECT_EQ(prompt_hash("m", "p"), sha256_hex("m\np"));
  EXPECT_NE(prompt_hash("m", "p"), prompt_hash("n", "p"));
}

class MatrixRun : public ::testing::Test {
 protected:
  std::vector<MatrixScenario> scenarios_ = {{"s1", "scenario one"}, {"s2", "scenario two"}, {"s3", "scenario three"}};
  std::vector<EndpointConfig> evaluated_ = {testing::endpoint("e1", "model-one"), testing::endpoint("e2", "model-two")};
  std::vector<EndpointConfig> judges_ = {testing::endpoint("j1", "judge-one")};
  EvaluationPromptBuilder builder_ = [](const MatrixScenario& s, const std::vector<CompletionRecord>& r) {
    return "judge " + s.id + ": " + r.at(0).response + " | " + r.at(1).response;
  };
  std::shared_ptr<FakeTransport> echo_ = std::make_shared<FakeTransport>([](const HttpRequest& req) {
    const auto body = json::parse(req.body);
    return openai_reply(body.at("model").get<std::string>() + " says " +
                        body.at("messages").at(0).at("content").get<std::string>());
  });
};

TEST_F(MatrixRun, FillsEveryCellInOrder) {
  Gateway g({}, echo_);
  MatrixOptions o;
  o.mode = Mode::live;
  o.parallel_scenarios = 3;
  const auto bundle = run_matrix(g, scenarios_, evaluated_, judges_, builder_, o);
  ASSERT_EQ(bundle.cells.size(), 9u);
  EXPECT_EQ(bundle.missing(), 0u);
  EXPECT_EQ(bundle.cells[0].scenario_id, "s1");
  EXPECT_EQ(bundle.cells[1].endpoint_id, "e2");
  EXPECT_EQ(bundle.cells[2].role, "judge");
  EXPECT_EQ(bundle.cells[2].record->response,
            "judge-one says judge s1: model-one says scenario one | model-two says scenario one");
}

TEST_F(MatrixRun, ResumesFromTheCompletionsDirectory) {
  const auto dir = testing::fresh_dir("matrix");
  MatrixOptions o;
  o.mode = Mode::live;
  o.completions_dir = dir;
  Gateway first({}, echo_);
  (void)run_matrix(first, scenarios_, evaluated_, judges_, builder_, o);
  EXPECT_EQ(echo_->calls(), 9u);

  auto offline = std::make_shared<CountingTransport>();
  Gateway second({}, offline);
  const auto again = run_matrix(second, scenarios_, evaluated_, judges_, builder_, o);
  EXPECT_EQ(offline->calls(), 0u);
  EXPECT_EQ(again.missing(), 0u);
  for (const auto& c : again.cells) EXPECT_TRUE(c.resumed);

  // Changing one scenario prompt invalidates only that scenario's cells.
  scenarios_[1].prompt = "scenario two, revised";
  Gateway third({}, echo_);
  const auto partial = run_matrix(third, scenarios_, evaluated_, judges_, builder_, o);
  EXPECT_EQ(echo_->calls(), 12u);
  EXPECT_EQ(partial.missing(), 0u);
}

TEST_F(MatrixRun, FailedEvaluatedCellSkipsItsJudges) {
  auto flaky = std::make_shared<FakeTransport>([&](const HttpRequest& req) {
    const auto body = json::parse(req.body);
    if (body.at("model") == "model-two" &&
        body.at("messages").at(0).at("content").get<std::string>() == "scenario two") {
      return HttpResponse{400, "refused"};
    }
    return openai_reply("fine");
  });
  Gateway g({}, flaky);
  MatrixOptions o;
  o.mode = Mode::live;
  o.parallel_scenarios = 1;
  const auto bundle = run_matrix(g, scenarios_, evaluated_, judges_, builder_, o);
  EXPECT_EQ(bundle.missing(), 2u);
  EXPECT_EQ(bundle.cells[5].error, "evaluated response missing");
  EXPECT_NE(bundle.cells[4].error.find("HTTP 400"), std::string::npos);
  const auto j = bundle.to_json();
  EXPECT_FALSE(j.at(4).at("ok").get<bool>());
}

TEST_F(MatrixRun, MissingCredentialAbortsTheRun) {
  evaluated_[0].credential_env = "IOTRIAGE_TEST_NEVER_SET";
  GatewayOptions go;
  go.env = [](const std::string&) { return std::nullopt; };
  Gateway g(go, echo_);
  MatrixOptions o;
  o.mode = Mode::live;
  EXPECT_THROW((void)run_matrix(g, scenarios_, evaluated_, judges_, builder_, o), ConfigError);
}

}  // namespace
}  // namespace iotriage::llm
