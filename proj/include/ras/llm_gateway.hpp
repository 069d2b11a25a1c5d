#pragma once

#include <cstddef>
#include <deque>
#include <filesystem>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ras/error.hpp"
#include "ras/planner.hpp"

namespace ras {

/// The four argument slots of a model call.
struct PromptBundle {
  std::string instruction;
  std::string context; // history block, may be empty
  std::string question;
  std::string exemplars; // few-shot block, may be empty

  /// Everything after the instruction: exemplars, blank line, context,
  /// question.
  std::string user_content() const;
  /// instruction + "\n\n" + user_content(), or just user_content() when the
  /// instruction is empty.
  std::string render() const;

  bool operator==(const PromptBundle &) const = default;
};

struct ChatMessage {
  std::string role;
  std::string content;
};

/// System message carries the instruction, user message the rest.
std::vector<ChatMessage> to_messages(const PromptBundle &prompt);

class GatewayError : public Error {
public:
  GatewayError(const std::string &what, bool retryable, std::size_t attempts)
      : Error(what), retryable_(retryable), attempts_(attempts) {}
  bool retryable() const noexcept { return retryable_; }
  std::size_t attempts() const noexcept { return attempts_; }

private:
  bool retryable_;
  std::size_t attempts_;
};

class ScriptExhausted : public Error {
public:
  using Error::Error;
};

class Backend {
public:
  virtual ~Backend() = default;
  virtual std::string complete(const PromptBundle &prompt,
                               std::size_t max_new_tokens) = 0;
  virtual std::string_view kind() const = 0;
};

/// Pops canned responses strictly in order. Every prompt it receives is
/// recorded for inspection.
class ScriptedBackend final : public Backend {
public:
  ScriptedBackend() = default;
  explicit ScriptedBackend(std::vector<std::string> responses);

  /// One response per non-blank line. A line holding a JSON string or an
  /// object with a "text" field is decoded; any other line is taken
  /// verbatim.
  static ScriptedBackend from_file(const std::filesystem::path &path);
  static std::vector<std::string> parse_script(std::string_view content);

  std::string complete(const PromptBundle &prompt,
                       std::size_t max_new_tokens) override;
  std::string_view kind() const override { return "scripted"; }

  void push(std::string response);
  std::size_t remaining() const;
  std::vector<PromptBundle> received() const;

private:
  mutable std::mutex mu_;
  std::deque<std::string> queue_;
  std::vector<PromptBundle> received_;
};

struct RemoteConfig {
  std::string endpoint; // absolute URL of the chat completions route
  std::string api_key;
  std::string model;
  double temperature = 0.0;
  std::size_t max_attempts = 3;
  int initial_backoff_ms = 500;
  int timeout_seconds = 120;
};

/// Chat-completions style client:
///   request  {model, messages: [{role, content}], max_tokens, temperature}
///   response choices[0].message.content (or content[0].text, or text)
/// Transport failures, 429 and 5xx are retried with exponential backoff.
class RemoteBackend final : public Backend {
public:
  explicit RemoteBackend(RemoteConfig config);
  std::string complete(const PromptBundle &prompt,
                       std::size_t max_new_tokens) override;
  std::string_view kind() const override { return "remote"; }

  std::string request_body(const PromptBundle &prompt,
                           std::size_t max_new_tokens) const;
  static std::string extract_text(std::string_view response_body);

private:
  RemoteConfig config_;
};

enum class Task { ShortForm, ArcChallenge, PubHealth, Asqa, Eli5 };

std::optional<Task> parse_task(std::string_view name);
const char *to_string(Task task) noexcept;
bool is_long_form(Task task) noexcept;
/// Per-task generation limits: 100 short-form, 50 closed-set, 300 long-form.
std::size_t max_new_tokens_for(Task task) noexcept;
/// Empty for short-form QA, which uses the bare question.
std::string_view task_instruction(Task task) noexcept;

struct PlanPromptOptions {
  std::size_t history_budget = kDefaultHistoryBudget;
  std::string exemplars;
};

struct AnswerPromptOptions {
  Task task = Task::ShortForm;
  std::size_t history_budget = kDefaultHistoryBudget;
  std::string exemplars;
};

PromptBundle render_plan_prompt(std::span<const IterationRecord> history,
                                std::string_view question,
                                const PlanPromptOptions &options = {});

PromptBundle render_answer_prompt(std::span<const IterationRecord> history,
                                  std::string_view question,
                                  const AnswerPromptOptions &options = {});

/// long_form selects the ELI5 long-form row when no task is given.
PromptBundle render_answer_prompt(std::span<const IterationRecord> history,
                                  std::string_view question, bool long_form);

/// Default zero-shot instruction for text-to-triples extraction.
std::string_view default_extraction_instruction() noexcept;

/// If `template_text` contains "{passage}", it is substituted and the result
/// becomes the question slot. Otherwise the template is used as exemplars
/// ahead of the default instruction.
PromptBundle render_extraction_prompt(std::string_view passage,
                                      std::string_view template_text = {});

std::string read_text_file(const std::filesystem::path &path);

} // namespace ras
