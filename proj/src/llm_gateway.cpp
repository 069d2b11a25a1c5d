#include "ras/llm_gateway.hpp"

#include <chrono>
#include <fstream>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "ras/http.hpp"
#include "ras/prompts.hpp"
#include "text_util.hpp"

namespace ras {

namespace {

constexpr std::string_view kExtractionInstruction =
    "Extract the factual knowledge in the text as triples in the format "
    "(S> subject| P> predicate| O> object), separated by \", \".\n"
    "Rules:\n"
    "- Extract as many meaningful relationships as the text supports.\n"
    "- Keep entity names exactly as written, including their casing.\n"
    "- Never use pronouns as subjects or objects; name the entity.\n"
    "- Use a short, explicit predicate for every relation.\n"
    "- Output only the triples.";

bool retryable_status(int status) { return status == 429 || status >= 500; }

} // namespace

std::string PromptBundle::user_content() const {
  std::string out;
  if (!exemplars.empty()) {
    out += exemplars;
    out += "\n\n";
  }
  out += context;
  out += question;
  return out;
}

std::string PromptBundle::render() const {
  if (instruction.empty())
    return user_content();
  return instruction + "\n\n" + user_content();
}

std::vector<ChatMessage> to_messages(const PromptBundle &prompt) {
  std::vector<ChatMessage> out;
  if (!prompt.instruction.empty())
    out.push_back({"system", prompt.instruction});
  out.push_back({"user", prompt.user_content()});
  return out;
}

ScriptedBackend::ScriptedBackend(std::vector<std::string> responses)
    : queue_(std::make_move_iterator(responses.begin()),
             std::make_move_iterator(responses.end())) {}

std::vector<std::string> ScriptedBackend::parse_script(std::string_view content) {
  std::vector<std::string> out;
  for (std::string_view line : detail::split_lines(content)) {
    if (!line.empty() && line.back() == '\r')
      line.remove_suffix(1);
    if (detail::trim(line).empty())
      continue;
    const auto parsed = nlohmann::json::parse(line, nullptr, false);
    if (parsed.is_string()) {
      out.push_back(parsed.get<std::string>());
    } else if (parsed.is_object() && parsed.contains("text") &&
               parsed["text"].is_string()) {
      out.push_back(parsed["text"].get<std::string>());
    } else {
      out.emplace_back(line);
    }
  }
  return out;
}

ScriptedBackend ScriptedBackend::from_file(const std::filesystem::path &path) {
  return ScriptedBackend(parse_script(read_text_file(path)));
}

std::string ScriptedBackend::complete(const PromptBundle &prompt, std::size_t) {
  std::lock_guard lock(mu_);
  received_.push_back(prompt);
  if (queue_.empty())
    throw ScriptExhausted("scripted backend has no responses left (call " +
                          std::to_string(received_.size()) + ")");
  std::string out = std::move(queue_.front());
  queue_.pop_front();
  return out;
}

void ScriptedBackend::push(std::string response) {
  std::lock_guard lock(mu_);
  queue_.push_back(std::move(response));
}

std::size_t ScriptedBackend::remaining() const {
  std::lock_guard lock(mu_);
  return queue_.size();
}

std::vector<PromptBundle> ScriptedBackend::received() const {
  std::lock_guard lock(mu_);
  return received_;
}

RemoteBackend::RemoteBackend(RemoteConfig config) : config_(std::move(config)) {
  if (config_.endpoint.empty())
    throw InvalidArgument("remote backend requires an endpoint");
  if (config_.max_attempts == 0)
    throw InvalidArgument("remote backend requires at least one attempt");
}

std::string RemoteBackend::request_body(const PromptBundle &prompt,
                                        std::size_t max_new_tokens) const {
  nlohmann::json body;
  body["model"] = config_.model;
  body["max_tokens"] = max_new_tokens;
  body["temperature"] = config_.temperature;
  auto &messages = body["messages"] = nlohmann::json::array();
  for (const auto &m : to_messages(prompt))
    messages.push_back({{"role", m.role}, {"content", m.content}});
  return body.dump();
}

std::string RemoteBackend::extract_text(std::string_view response_body) {
  const auto reply = nlohmann::json::parse(response_body, nullptr, false);
  if (reply.is_discarded() || !reply.is_object())
    throw GatewayError("response is not a JSON object", false, 1);
  if (auto it = reply.find("choices"); it != reply.end() && it->is_array() &&
                                       !it->empty()) {
    const auto &choice = it->front();
    if (choice.contains("message") && choice["message"].contains("content") &&
        choice["message"]["content"].is_string())
      return choice["message"]["content"].get<std::string>();
    if (choice.contains("text") && choice["text"].is_string())
      return choice["text"].get<std::string>();
  }
  if (auto it = reply.find("content"); it != reply.end()) {
    if (it->is_string())
      return it->get<std::string>();
    if (it->is_array() && !it->empty() && it->front().contains("text"))
      return it->front()["text"].get<std::string>();
  }
  if (auto it = reply.find("text"); it != reply.end() && it->is_string())
    return it->get<std::string>();
  throw GatewayError("response carries no generated text", false, 1);
}

std::string RemoteBackend::complete(const PromptBundle &prompt,
                                    std::size_t max_new_tokens) {
  if (max_new_tokens == 0)
    throw InvalidArgument("max_new_tokens must be set for remote calls");
  const std::string body = request_body(prompt, max_new_tokens);
  http::Headers headers;
  if (!config_.api_key.empty())
    headers.emplace_back("Authorization", "Bearer " + config_.api_key);

  std::string last_error;
  int backoff = config_.initial_backoff_ms;
  for (std::size_t attempt = 1; attempt <= config_.max_attempts; ++attempt) {
    const auto res =
        http::post_json(config_.endpoint, body, headers, config_.timeout_seconds);
    if (res.error.empty() && res.status == 200) {
      try {
        return extract_text(res.body);
      } catch (const GatewayError &e) {
        throw GatewayError(e.what(), false, attempt);
      }
    }
    last_error = res.error.empty() ? "HTTP " + std::to_string(res.status)
                                   : res.error;
    if (res.error.empty() && !retryable_status(res.status))
      throw GatewayError("remote backend failed: " + last_error, false, attempt);
    if (attempt < config_.max_attempts) {
      std::this_thread::sleep_for(std::chrono::milliseconds(backoff));
      backoff *= 2;
    }
  }
  throw GatewayError("remote backend failed after " +
                         std::to_string(config_.max_attempts) +
                         " attempts: " + last_error,
                     true, config_.max_attempts);
}

std::optional<Task> parse_task(std::string_view name) {
  if (name == "short" || name == "short_form" || name == "popqa" ||
      name == "triviaqa" || name == "2wqa")
    return Task::ShortForm;
  if (name == "arc" || name == "arc_c" || name == "arc_challenge")
    return Task::ArcChallenge;
  if (name == "pubhealth")
    return Task::PubHealth;
  if (name == "asqa")
    return Task::Asqa;
  if (name == "eli5")
    return Task::Eli5;
  return std::nullopt;
}

const char *to_string(Task task) noexcept {
  switch (task) {
  case Task::ShortForm:
    return "short_form";
  case Task::ArcChallenge:
    return "arc_challenge";
  case Task::PubHealth:
    return "pubhealth";
  case Task::Asqa:
    return "asqa";
  case Task::Eli5:
    return "eli5";
  }
  return "?";
}

bool is_long_form(Task task) noexcept {
  return task == Task::Asqa || task == Task::Eli5;
}

std::size_t max_new_tokens_for(Task task) noexcept {
  switch (task) {
  case Task::ShortForm:
    return 100;
  case Task::ArcChallenge:
  case Task::PubHealth:
    return 50;
  case Task::Asqa:
  case Task::Eli5:
    return 300;
  }
  return 100;
}

std::string_view task_instruction(Task task) noexcept {
  switch (task) {
  case Task::ShortForm:
    return {};
  case Task::ArcChallenge:
    return prompts::kArcChallengeInstruction;
  case Task::PubHealth:
    return prompts::kPubHealthInstruction;
  case Task::Asqa:
    return prompts::kAsqaInstruction;
  case Task::Eli5:
    return prompts::kEli5Instruction;
  }
  return {};
}

PromptBundle render_plan_prompt(std::span<const IterationRecord> history,
                                std::string_view question,
                                const PlanPromptOptions &options) {
  if (question.empty())
    throw InvalidArgument("question must be non-empty");
  return {std::string(prompts::kPlanInstruction),
          history_block(history, question, options.history_budget),
          question_line(question), options.exemplars};
}

PromptBundle render_answer_prompt(std::span<const IterationRecord> history,
                                  std::string_view question,
                                  const AnswerPromptOptions &options) {
  if (question.empty())
    throw InvalidArgument("question must be non-empty");
  std::string instruction(prompts::kAnswerInstruction);
  if (auto row = task_instruction(options.task); !row.empty()) {
    instruction += '\n';
    instruction += row;
  }
  return {std::move(instruction),
          history_block(history, question, options.history_budget),
          question_line(question), options.exemplars};
}

PromptBundle render_answer_prompt(std::span<const IterationRecord> history,
                                  std::string_view question, bool long_form) {
  AnswerPromptOptions options;
  options.task = long_form ? Task::Eli5 : Task::ShortForm;
  return render_answer_prompt(history, question, options);
}

std::string_view default_extraction_instruction() noexcept {
  return kExtractionInstruction;
}

PromptBundle render_extraction_prompt(std::string_view passage,
                                      std::string_view template_text) {
  PromptBundle out;
  constexpr std::string_view kSlot = "{passage}";
  if (const auto pos = template_text.find(kSlot); pos != std::string_view::npos) {
    out.question = std::string(template_text.substr(0, pos)) +
                   std::string(passage) +
                   std::string(template_text.substr(pos + kSlot.size()));
    return out;
  }
  out.instruction = std::string(kExtractionInstruction);
  out.exemplars = std::string(template_text);
  out.question = "Text: " + std::string(passage) + "\nTriples:";
  return out;
}

std::string read_text_file(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

} // namespace ras
