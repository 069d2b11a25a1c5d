#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ras/error.hpp"
#include "ras/retrieval.hpp"
#include "ras/triple_codec.hpp"

namespace ras {

inline constexpr std::string_view kLabelSubq = "[SUBQ]";
inline constexpr std::string_view kLabelSufficient = "[SUFFICIENT]";
inline constexpr std::string_view kLabelNoRetrieval = "[NO_RETRIEVAL]";

inline constexpr std::size_t kDefaultHistoryBudget = 2500;

struct Plan {
  enum class Kind { NoRetrieval, SubQ, Sufficient };

  Kind kind = Kind::Sufficient;
  std::string subquery; // non-empty iff kind == SubQ

  static Plan no_retrieval() { return {Kind::NoRetrieval, {}}; }
  static Plan sufficient() { return {Kind::Sufficient, {}}; }
  static Plan subq(std::string text);

  /// "[NO_RETRIEVAL]", "[SUFFICIENT]" or "[SUBQ] <subquery>".
  std::string label() const;

  bool operator==(const Plan &) const = default;
};

class PlanError : public Error {
public:
  enum class Reason { Unparseable, EmptySubquery, InvalidTransition };
  PlanError(Reason reason, const std::string &what)
      : Error(what), reason_(reason) {}
  Reason reason() const noexcept { return reason_; }

private:
  Reason reason_;
};

const char *to_string(PlanError::Reason reason) noexcept;

/// Finds the earliest label token in `text`. A [SUBQ] payload is the rest of
/// that line, trimmed. [NO_RETRIEVAL] is only valid on the first iteration.
Plan parse_plan(std::string_view text, bool first_iteration);

struct IterationRecord {
  std::string subquery;
  RankedDocs retrieved;
  std::vector<std::string> passages;
  TripleList triples;
  std::optional<Plan> plan_after;
};

/// The history lines only:
///   [SUBQ] q_0
///   Retrieved Graph Information: g_0
///   ...
/// Oldest records are dropped until the block plus the question line fits in
/// `token_budget` whitespace tokens.
std::string history_block(std::span<const IterationRecord> records,
                          std::string_view question,
                          std::size_t token_budget = kDefaultHistoryBudget);

/// history_block followed by the final "Question: <question>" line.
std::string assemble_history(std::span<const IterationRecord> records,
                             std::string_view question,
                             std::size_t token_budget = kDefaultHistoryBudget);

std::string question_line(std::string_view question);

} // namespace ras
