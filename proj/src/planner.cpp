#include "ras/planner.hpp"

#include <deque>

#include "text_util.hpp"

namespace ras {

Plan Plan::subq(std::string text) {
  if (detail::trim(text).empty())
    throw PlanError(PlanError::Reason::EmptySubquery, "empty subquery");
  return {Kind::SubQ, std::string(detail::trim(text))};
}

std::string Plan::label() const {
  switch (kind) {
  case Kind::NoRetrieval:
    return std::string(kLabelNoRetrieval);
  case Kind::Sufficient:
    return std::string(kLabelSufficient);
  case Kind::SubQ:
    return std::string(kLabelSubq) + " " + subquery;
  }
  return {};
}

const char *to_string(PlanError::Reason reason) noexcept {
  switch (reason) {
  case PlanError::Reason::Unparseable:
    return "unparseable_plan";
  case PlanError::Reason::EmptySubquery:
    return "empty_subquery";
  case PlanError::Reason::InvalidTransition:
    return "invalid_transition";
  }
  return "?";
}

Plan parse_plan(std::string_view text, bool first_iteration) {
  struct Hit {
    std::size_t pos;
    Plan::Kind kind;
    std::size_t len;
  };
  std::optional<Hit> best;
  for (auto [label, kind] :
       {std::pair{kLabelSubq, Plan::Kind::SubQ},
        std::pair{kLabelSufficient, Plan::Kind::Sufficient},
        std::pair{kLabelNoRetrieval, Plan::Kind::NoRetrieval}}) {
    const auto pos = text.find(label);
    if (pos != std::string_view::npos && (!best || pos < best->pos))
      best = Hit{pos, kind, label.size()};
  }
  if (!best)
    throw PlanError(PlanError::Reason::Unparseable,
                    "no plan label in model output");

  switch (best->kind) {
  case Plan::Kind::NoRetrieval:
    if (!first_iteration)
      throw PlanError(PlanError::Reason::InvalidTransition,
                      "[NO_RETRIEVAL] after retrieval has started");
    return Plan::no_retrieval();
  case Plan::Kind::Sufficient:
    return Plan::sufficient();
  case Plan::Kind::SubQ: {
    std::string_view rest = text.substr(best->pos + best->len);
    rest = rest.substr(0, rest.find('\n'));
    rest = detail::trim(rest);
    if (rest.empty())
      throw PlanError(PlanError::Reason::EmptySubquery,
                      "[SUBQ] without a subquery on the same line");
    return Plan{Plan::Kind::SubQ, std::string(rest)};
  }
  }
  throw PlanError(PlanError::Reason::Unparseable, "unknown plan label");
}

std::string question_line(std::string_view question) {
  return "Question: " + std::string(question);
}

std::string history_block(std::span<const IterationRecord> records,
                          std::string_view question, std::size_t token_budget) {
  struct Entry {
    std::string text;
    std::size_t tokens;
  };
  std::deque<Entry> entries;
  std::size_t total = detail::count_whitespace_tokens(question_line(question));
  for (const auto &r : records) {
    std::string text = std::string(kLabelSubq) + " " + r.subquery +
                       "\nRetrieved Graph Information: " +
                       serialize_triples(r.triples);
    const std::size_t tokens = detail::count_whitespace_tokens(text);
    total += tokens;
    entries.push_back({std::move(text), tokens});
  }
  while (!entries.empty() && total > token_budget) {
    total -= entries.front().tokens;
    entries.pop_front();
  }
  std::string out;
  for (const auto &e : entries) {
    out += e.text;
    out += '\n';
  }
  return out;
}

std::string assemble_history(std::span<const IterationRecord> records,
                             std::string_view question, std::size_t token_budget) {
  return history_block(records, question, token_budget) + question_line(question);
}

} // namespace ras
