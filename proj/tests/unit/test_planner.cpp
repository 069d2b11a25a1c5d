#include <doctest.h>

#include "ras/planner.hpp"

using namespace ras;

namespace {

IterationRecord record(std::string q, TripleList triples) {
  IterationRecord r;
  r.subquery = std::move(q);
  r.triples = std::move(triples);
  return r;
}

PlanError::Reason reason_of(std::string_view text, bool first) {
  try {
    parse_plan(text, first);
  } catch (const PlanError &e) {
    return e.reason();
  }
  FAIL("expected PlanError");
  return PlanError::Reason::Unparseable;
}

} // namespace

TEST_SUITE("planner") {

TEST_CASE("labels") {
  CHECK(parse_plan("[NO_RETRIEVAL]", true) == Plan::no_retrieval());
  CHECK(parse_plan("[SUFFICIENT]", false) == Plan::sufficient());
  CHECK(parse_plan("[SUBQ] Who directed the film Tinker Tailor Soldier Spy?", false) ==
        Plan::subq("Who directed the film Tinker Tailor Soldier Spy?"));
}

TEST_CASE("first label wins and prose is tolerated") {
  CHECK(parse_plan("I think [SUFFICIENT] rather than [SUBQ] x", false) ==
        Plan::sufficient());
  CHECK(parse_plan("Plan: [SUBQ]   Where is X?  \n[SUFFICIENT]", false) ==
        Plan::subq("Where is X?"));
}

TEST_CASE("errors") {
  CHECK(reason_of("I do not know", false) == PlanError::Reason::Unparseable);
  CHECK(reason_of("", true) == PlanError::Reason::Unparseable);
  CHECK(reason_of("[SUBQ]   \nnext line", false) == PlanError::Reason::EmptySubquery);
  CHECK(reason_of("[NO_RETRIEVAL]", false) == PlanError::Reason::InvalidTransition);
  CHECK(std::string(to_string(PlanError::Reason::Unparseable)) == "unparseable_plan");
  CHECK_THROWS_AS(Plan::subq("  "), PlanError);
}

TEST_CASE("label emission inverts parsing") {
  for (const Plan &p : {Plan::no_retrieval(), Plan::sufficient(),
                        Plan::subq("What is a Tesla coil used for?")})
    CHECK(parse_plan(p.label(), true) == p);
}

TEST_CASE("history assembly") {
  CHECK(assemble_history({}, "Q") == "Question: Q");

  const std::vector<IterationRecord> one{record("q0", {{"A", "r", "B"}})};
  CHECK(assemble_history(one, "Q") ==
        "[SUBQ] q0\nRetrieved Graph Information: (S> A| P> r| O> B)\nQuestion: Q");

  const std::vector<IterationRecord> two{record("q0", {{"A", "r", "B"}}),
                                         record("q1", {})};
  CHECK(assemble_history(two, "Q") ==
        "[SUBQ] q0\nRetrieved Graph Information: (S> A| P> r| O> B)\n"
        "[SUBQ] q1\nRetrieved Graph Information: \nQuestion: Q");
}

TEST_CASE("budget drops the oldest records first") {
  const std::vector<IterationRecord> recs{
      record("first question here", {{"A", "r", "B"}}),
      record("second", {{"C", "s", "D"}})};
  // Question line: 2 tokens. Record 1: 2 + 3 + 6 = 11 tokens, record 0: 13.
  const std::string all = assemble_history(recs, "Q?", 1000);
  CHECK(all.find("first question here") != std::string::npos);

  const std::string trimmed = assemble_history(recs, "Q?", 13);
  CHECK(trimmed.find("first question here") == std::string::npos);
  CHECK(trimmed.find("[SUBQ] second") == 0);
  CHECK(trimmed.ends_with("Question: Q?"));

  const std::string none = assemble_history(recs, "Q?", 3);
  CHECK(none == "Question: Q?");
  CHECK(assemble_history(recs, "Q?", 0) == "Question: Q?");
}

}
