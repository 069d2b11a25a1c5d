#include <doctest.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "ras/llm_gateway.hpp"
#include "ras/prompts.hpp"

using namespace ras;

namespace {

// Local chat endpoint that records request bodies and replies per a
// caller-supplied status sequence.
class EchoServer {
public:
  explicit EchoServer(std::vector<int> statuses = {200})
      : statuses_(std::move(statuses)) {
    server_.Post("/v1/chat", [this](const httplib::Request &req,
                                    httplib::Response &res) {
      const std::size_t n = calls_++;
      bodies_.push_back(req.body);
      auth_ = req.get_header_value("Authorization");
      const int status = statuses_[std::min(n, statuses_.size() - 1)];
      res.status = status;
      if (status == 200) {
        const auto body = nlohmann::json::parse(req.body);
        const std::string echo = body["messages"][0]["content"].get<std::string>();
        res.set_content(
            nlohmann::json{{"choices", {{{"message", {{"content", "ok: " + echo.substr(0, 10)}}}}}}}
                .dump(),
            "application/json");
      } else {
        res.set_content("{}", "application/json");
      }
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~EchoServer() {
    server_.stop();
    thread_.join();
  }

  std::string url() const {
    return "http://127.0.0.1:" + std::to_string(port_) + "/v1/chat";
  }
  std::size_t calls() const { return calls_; }
  const std::vector<std::string> &bodies() const { return bodies_; }
  const std::string &auth() const { return auth_; }

private:
  httplib::Server server_;
  std::vector<int> statuses_;
  std::vector<std::string> bodies_;
  std::string auth_;
  std::atomic<std::size_t> calls_{0};
  int port_ = 0;
  std::thread thread_;
};

RemoteConfig remote_config(const std::string &url) {
  RemoteConfig c;
  c.endpoint = url;
  c.model = "test-model";
  c.api_key = "secret";
  c.initial_backoff_ms = 1;
  c.timeout_seconds = 5;
  return c;
}

IterationRecord record(std::string q, TripleList triples) {
  IterationRecord r;
  r.subquery = std::move(q);
  r.triples = std::move(triples);
  return r;
}

} // namespace

TEST_SUITE("llm_gateway") {

TEST_CASE("scripted backend pops in order") {
  ScriptedBackend b({"a", "b"});
  PromptBundle p{"", "", "Q", ""};
  CHECK(b.complete(p, 10) == "a");
  CHECK(b.complete(p, 10) == "b");
  CHECK_THROWS_AS(b.complete(p, 10), ScriptExhausted);
  CHECK(b.received().size() == 3);

  ScriptedBackend empty;
  CHECK_THROWS_AS(empty.complete(p, 1), ScriptExhausted);
}

TEST_CASE("script files") {
  const auto lines = ScriptedBackend::parse_script(
      "[NO_RETRIEVAL]\n\n\"multi\\nline\"\n{\"text\": \"from object\"}\nParis\r\n");
  CHECK(lines == std::vector<std::string>{"[NO_RETRIEVAL]", "multi\nline",
                                          "from object", "Paris"});
  const auto path = std::filesystem::temp_directory_path() / "ras_script.txt";
  std::ofstream(path) << "one\ntwo\n";
  auto b = ScriptedBackend::from_file(path);
  CHECK(b.remaining() == 2);
}

TEST_CASE("prompt bundle rendering") {
  PromptBundle p{"INST", "ctx\n", "Question: Q", ""};
  CHECK(p.render() == "INST\n\nctx\nQuestion: Q");
  p.exemplars = "EX";
  CHECK(p.render() == "INST\n\nEX\n\nctx\nQuestion: Q");
  const auto msgs = to_messages(p);
  REQUIRE(msgs.size() == 2);
  CHECK(msgs[0].role == "system");
  CHECK(msgs[0].content == "INST");
  CHECK(msgs[1].content == "EX\n\nctx\nQuestion: Q");
}

TEST_CASE("plan prompt") {
  const auto empty = render_plan_prompt({}, "Q");
  CHECK(empty.instruction == prompts::kPlanInstruction);
  CHECK(empty.context.empty());
  CHECK(empty.question == "Question: Q");
  CHECK(empty.instruction.find("[NO_RETRIEVAL]") != std::string::npos);

  const std::vector<IterationRecord> one{record("q0", {{"A", "r", "B"}})};
  const auto p = render_plan_prompt(one, "Q");
  CHECK(p.context == "[SUBQ] q0\nRetrieved Graph Information: (S> A| P> r| O> B)\n");
  CHECK_THROWS_AS(render_plan_prompt({}, ""), InvalidArgument);
}

TEST_CASE("answer prompt") {
  const auto direct = render_answer_prompt({}, "Q", false);
  CHECK(direct.instruction == prompts::kAnswerInstruction);
  CHECK(direct.context.empty());

  const std::vector<IterationRecord> two{record("q0", {{"A", "r", "B"}}),
                                         record("q1", {{"B", "s", "C"}})};
  const auto p = render_answer_prompt(two, "Q", false);
  CHECK(p.context.find("[SUBQ] q0") < p.context.find("[SUBQ] q1"));

  const auto long_form = render_answer_prompt({}, "Q", true);
  CHECK(long_form.instruction.find("[Long Form]") != std::string::npos);
  CHECK(long_form.instruction.starts_with(prompts::kAnswerInstruction));

  AnswerPromptOptions arc;
  arc.task = Task::ArcChallenge;
  arc.exemplars = "Example: ...";
  const auto a = render_answer_prompt({}, "Q", arc);
  CHECK(a.instruction.ends_with("\nWhich is true? Output A, B, C, or D."));
  CHECK(a.exemplars == "Example: ...");
}

TEST_CASE("tasks and generation limits") {
  CHECK(max_new_tokens_for(Task::ShortForm) == 100);
  CHECK(max_new_tokens_for(Task::PubHealth) == 50);
  CHECK(max_new_tokens_for(Task::ArcChallenge) == 50);
  CHECK(max_new_tokens_for(Task::Asqa) == 300);
  CHECK(max_new_tokens_for(Task::Eli5) == 300);
  CHECK(parse_task("eli5") == Task::Eli5);
  CHECK_FALSE(parse_task("nope").has_value());
  CHECK(is_long_form(Task::Asqa));
  CHECK_FALSE(is_long_form(Task::PubHealth));
}

TEST_CASE("extraction prompt") {
  const auto plain = render_extraction_prompt("Paris is in France.", "");
  CHECK(plain.instruction == default_extraction_instruction());
  CHECK(plain.question == "Text: Paris is in France.\nTriples:");
  const auto slot = render_extraction_prompt("X", "Before {passage} after");
  CHECK(slot.question == "Before X after");
  CHECK(slot.instruction.empty());
}

TEST_CASE("remote request shape") {
  RemoteBackend b(remote_config("http://127.0.0.1:9/x"));
  const auto body = nlohmann::json::parse(
      b.request_body({"INST", "ctx\n", "Question: Q", ""}, 100));
  CHECK(body["model"] == "test-model");
  CHECK(body["max_tokens"] == 100);
  CHECK(body["temperature"] == 0.0);
  CHECK(body["messages"][0]["role"] == "system");
  CHECK(body["messages"][0]["content"] == "INST");
  CHECK(body["messages"][1]["content"] == "ctx\nQuestion: Q");
}

TEST_CASE("response text extraction") {
  CHECK(RemoteBackend::extract_text(
            R"({"choices": [{"message": {"content": "hi"}}]})") == "hi");
  CHECK(RemoteBackend::extract_text(R"({"choices": [{"text": "t"}]})") == "t");
  CHECK(RemoteBackend::extract_text(R"({"content": [{"text": "c"}]})") == "c");
  CHECK(RemoteBackend::extract_text(R"({"text": "x"})") == "x");
  CHECK_THROWS_AS(RemoteBackend::extract_text("[]"), GatewayError);
  CHECK_THROWS_AS(RemoteBackend::extract_text("{}"), GatewayError);
}

TEST_CASE("remote call carries the instruction verbatim") {
  EchoServer server;
  RemoteBackend b(remote_config(server.url()));
  const auto prompt = render_plan_prompt({}, "Who wrote Hamlet?");
  const std::string reply = b.complete(prompt, 100);
  CHECK(reply.starts_with("ok: "));
  REQUIRE(server.bodies().size() == 1);
  CHECK(server.bodies()[0].find(nlohmann::json(std::string(prompts::kPlanInstruction))
                                    .dump()) != std::string::npos);
  CHECK(server.auth() == "Bearer secret");
}

TEST_CASE("remote retries then succeeds") {
  EchoServer server({503, 429, 200});
  RemoteBackend b(remote_config(server.url()));
  CHECK_NOTHROW(b.complete({"I", "", "Q", ""}, 10));
  CHECK(server.calls() == 3);
}

TEST_CASE("remote gives up with an attempt count") {
  EchoServer server({500});
  RemoteBackend b(remote_config(server.url()));
  try {
    b.complete({"I", "", "Q", ""}, 10);
    FAIL("expected GatewayError");
  } catch (const GatewayError &e) {
    CHECK(e.retryable());
    CHECK(e.attempts() == 3);
  }
  CHECK(server.calls() == 3);
}

TEST_CASE("client errors are not retried") {
  EchoServer server({400});
  RemoteBackend b(remote_config(server.url()));
  try {
    b.complete({"I", "", "Q", ""}, 10);
    FAIL("expected GatewayError");
  } catch (const GatewayError &e) {
    CHECK_FALSE(e.retryable());
    CHECK(e.attempts() == 1);
  }
}

TEST_CASE("transport failure is retryable") {
  // Nothing listens on the discard port on loopback.
  RemoteConfig c = remote_config("http://127.0.0.1:9/v1/chat");
  c.max_attempts = 2;
  RemoteBackend b(c);
  try {
    b.complete({"I", "", "Q", ""}, 10);
    FAIL("expected GatewayError");
  } catch (const GatewayError &e) {
    CHECK(e.retryable());
    CHECK(e.attempts() == 2);
  }
}

TEST_CASE("remote requires an explicit generation limit") {
  RemoteBackend b(remote_config("http://127.0.0.1:9/x"));
  CHECK_THROWS_AS(b.complete({"I", "", "Q", ""}, 0), InvalidArgument);
  CHECK_THROWS_AS(RemoteBackend(RemoteConfig{}), InvalidArgument);
}

}
