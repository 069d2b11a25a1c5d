#include <doctest.h>

#include <functional>
#include <sstream>

#include "ras/dataset_builder.hpp"

using namespace ras;
using namespace ras::dataset;

namespace {

class LambdaBackend final : public Backend {
public:
  explicit LambdaBackend(std::function<std::string(const PromptBundle &)> fn)
      : fn_(std::move(fn)) {}
  std::string complete(const PromptBundle &p, std::size_t) override { return fn_(p); }
  std::string_view kind() const override { return "lambda"; }

private:
  std::function<std::string(const PromptBundle &)> fn_;
};

// One triple per document, derived from its topic.
class TopicExtractor final : public TripleExtractor {
public:
  TripleList extract(const Document &doc) override {
    return {{doc.title, "described in", "doc " + doc.id}};
  }
};

// Sub-query generator that names the document topic.
std::string subquery_reply(const PromptBundle &p) {
  const auto &text = p.question;
  const auto open = text.find("Current Document (") + 18;
  return "What about " + text.substr(open, text.find(')', open) - open) + "?\nextra";
}

SourceEntry entry(std::string q, std::size_t docs, std::string answer = "gold") {
  SourceEntry e{std::move(q), {}, std::move(answer)};
  for (std::size_t i = 0; i < docs; ++i)
    e.docs.push_back({"T" + std::to_string(i), "body " + std::to_string(i)});
  return e;
}

} // namespace

TEST_SUITE("dataset_builder") {

TEST_CASE("filter replies") {
  CHECK(parse_filter_reply("1,3", 3).kept == std::vector<std::size_t>{0, 2});
  CHECK(parse_filter_reply("1,2", 2).kept == std::vector<std::size_t>{0, 1});
  const auto out = parse_filter_reply("5", 3);
  CHECK(out.kept.empty());
  CHECK(out.out_of_range == std::vector<std::size_t>{5});
  CHECK_FALSE(out.needs_review);
  CHECK(parse_filter_reply("Output: 2, 1, 2", 3).kept == std::vector<std::size_t>{0, 1});
  CHECK(parse_filter_reply("Sure.\nOutput: 3", 3).kept == std::vector<std::size_t>{2});
  CHECK(parse_filter_reply("none of them", 3).needs_review);
  CHECK(parse_filter_reply("", 3).needs_review);
}

TEST_CASE("filter prompt") {
  const std::vector<SourceDoc> docs{{"A", "First doc."}, {"B", "Second doc."}};
  const auto p = render_filter_prompt("Who?", docs);
  CHECK(p.find("Question: Who?\nSupporting docs: \n1. First doc.\n2. Second doc.\n\n"
               "Output only the helpful document numbers separated by commas:") !=
        std::string::npos);
  CHECK(p.find("[question]") == std::string::npos);
  CHECK(p.starts_with("Identify which documents are HELPFUL"));

  LambdaBackend model([](const PromptBundle &) { return "2"; });
  CHECK(filter_supporting_docs("Who?", docs, model).kept == std::vector<std::size_t>{1});
  CHECK_THROWS_AS(filter_supporting_docs("Who?", {}, model), InvalidArgument);
}

TEST_CASE("sub-query prompt and reply") {
  const SourceDoc doc{"Ewan MacColl", "James Henry Miller was a folk singer."};
  const auto none = render_subquery_prompt("Q?", doc, {});
  CHECK(none.find("Previously generated sub-queries") == std::string::npos);
  CHECK(none.find("Main Question: Q?\n\nCurrent Document (Ewan MacColl):\n"
                  "James Henry Miller was a folk singer.\n\n\nWrite ONE") !=
        std::string::npos);
  const std::vector<std::string> prev{"q1"};
  const auto with = render_subquery_prompt("Q?", doc, prev);
  CHECK(with.find("Previously generated sub-queries:\n- q1\n\n\nWrite ONE") !=
        std::string::npos);

  LambdaBackend model([](const PromptBundle &) { return "\n  Who is X?  \nextra"; });
  CHECK(generate_subquery("Q?", doc, {}, model) == "Who is X?");
  LambdaBackend blank([](const PromptBundle &) { return " \n "; });
  CHECK_THROWS_WITH_AS(generate_subquery("Q?", doc, {}, blank),
                       doctest::Contains("Q?"), Error);
}

TEST_CASE("labeling with a wrong direct answer") {
  LambdaBackend base([](const PromptBundle &) { return "no idea"; });
  LambdaBackend gen(subquery_reply);
  TopicExtractor ext;
  const Gateways gw{&base, &gen, &ext, nullptr};

  const auto out = label_samples(entry("Main?", 3), gw);
  REQUIRE(out.planner.size() == 3);
  CHECK(out.planner[0].label == "[SUBQ] What about T1?");
  CHECK(out.planner[1].label == "[SUBQ] What about T2?");
  CHECK(out.planner[2].label == "[SUFFICIENT]");
  REQUIRE(out.answers.size() == 1);
  CHECK(out.answers[0].output == "gold");
  CHECK(out.answers[0].input == out.planner[2].input);
  CHECK(out.planner[0].input ==
        "[SUBQ] What about T0?\nRetrieved Graph Information: "
        "(S> T0| P> described in| O> doc 0)\nQuestion: Main?");
  for (const auto &s : out.planner)
    CHECK(s.input.ends_with("\nQuestion: Main?"));

  const auto single = label_samples(entry("Main?", 1), gw);
  REQUIRE(single.planner.size() == 1);
  CHECK(single.planner[0].label == "[SUFFICIENT]");
  CHECK(single.answers.size() == 1);
}

TEST_CASE("labeling with a correct direct answer") {
  LambdaBackend base([](const PromptBundle &) { return "It is the Gold."; });
  LambdaBackend gen(subquery_reply);
  TopicExtractor ext;
  const Gateways gw{&base, &gen, &ext, nullptr};
  const auto out = label_samples(entry("Main?", 3), gw);
  REQUIRE(out.planner.size() == 1);
  CHECK(out.planner[0].label == "[NO_RETRIEVAL]");
  CHECK(out.planner[0].input == "Question: Main?");
  REQUIRE(out.answers.size() == 1);
  CHECK(out.answers[0].input == "Main?");
  CHECK(out.direct);
}

TEST_CASE("build keeps order and drops filtered-out entries") {
  LambdaBackend base([](const PromptBundle &p) {
    return p.question.find("direct") != std::string::npos ? "gold" : "nope";
  });
  LambdaBackend gen(subquery_reply);
  LambdaBackend filter([](const PromptBundle &p) {
    if (p.question.find("Question: drop") != std::string::npos)
      return std::string("9");
    if (p.question.find("Question: vague") != std::string::npos)
      return std::string("no helpful docs");
    return std::string("1, 2");
  });
  TopicExtractor ext;
  std::vector<SourceEntry> entries;
  for (int i = 0; i < 12; ++i)
    entries.push_back(entry("q" + std::to_string(i), 2));
  entries.push_back(entry("direct one", 2));
  entries.push_back(entry("drop me", 2));
  entries.push_back(entry("vague", 2));

  for (std::size_t workers : {1u, 4u}) {
    BuildOptions opts;
    opts.workers = workers;
    const auto r = build_dataset(entries, Gateways{&base, &gen, &ext, &filter}, opts);
    CHECK(r.entries_in == 15);
    CHECK(r.entries_used == 13);
    CHECK(r.direct == 1);
    // 12 retrieval entries with 2 docs each, plus one direct sample.
    CHECK(r.planner.size() == 24 + 1);
    CHECK(r.answers.size() == 13);
    CHECK(r.planner.front().input.ends_with("Question: q0"));
    CHECK(r.answers[12].input == "direct one");
    std::size_t review = 0, range = 0;
    for (const auto &issue : r.issues) {
      review += issue.kind == "needs_review" && issue.entry == 14;
      range += issue.kind == "index_out_of_range" && issue.entry == 13;
    }
    CHECK(review == 1);
    CHECK(range == 1);
    CHECK(r.issues.size() == 3);
  }
}

TEST_CASE("gateway failures skip the entry") {
  LambdaBackend base([](const PromptBundle &) -> std::string {
    throw GatewayError("down", true, 3);
  });
  LambdaBackend gen(subquery_reply);
  TopicExtractor ext;
  const std::vector<SourceEntry> entries{entry("a", 2)};
  const auto r = build_dataset(entries, Gateways{&base, &gen, &ext, nullptr});
  CHECK(r.entries_used == 0);
  REQUIRE(r.issues.size() == 1);
  CHECK(r.issues[0].kind == "failed");
}

TEST_CASE("source and sample files") {
  std::istringstream in(
      R"({"question": "Q", "docs": [{"topic": "T", "text": "x"}], "answer": "A"})"
      "\n");
  const auto entries = read_source(in);
  REQUIRE(entries.size() == 1);
  CHECK(entries[0].docs[0].topic == "T");
  std::istringstream bad(R"({"question": "Q", "answer": "A"})");
  CHECK_THROWS_AS(read_source(bad), FormatError);

  std::ostringstream out;
  const std::vector<PlannerSample> ps{{"in", "[SUFFICIENT]"}};
  write_planner(out, ps);
  CHECK(out.str() == "{\"input\":\"in\",\"label\":\"[SUFFICIENT]\"}\n");
}

TEST_CASE("statistics") {
  std::istringstream empty_p(""), empty_a("");
  const auto zero = compute_stats(empty_p, empty_a);
  CHECK(zero.planning.queries == 0);
  CHECK(zero.subq == 0);
  CHECK(zero.failed_records == 0);

  std::ostringstream p;
  for (int i = 0; i < 4; ++i)
    p << nlohmann::json{{"input", "[SUBQ] q\nRetrieved Graph Information: "
                                  "(S> A| P> r| O> B), (S> B| P> s| O> C)\nQuestion: Q"},
                        {"label", "[SUBQ] next question here"}}
             .dump()
      << "\n";
  for (int i = 0; i < 5; ++i)
    p << nlohmann::json{{"input", "Question: Q"}, {"label", "[SUFFICIENT]"}}.dump()
      << "\n";
  p << nlohmann::json{{"input", "Question: Q"}, {"label", "[NO_RETRIEVAL]"}}.dump()
    << "\n";
  p << "not json\n" << R"({"input": "x", "label": "[MAYBE]"})" << "\n";
  std::istringstream pin(p.str());
  std::istringstream ain(R"({"input": "Q", "output": "A B"})"
                         "\n"
                         R"({"input": "Q", "output": ""})"
                         "\n");
  const auto s = compute_stats(pin, ain);
  CHECK(s.planning.queries == 10);
  CHECK(s.subq == 4);
  CHECK(s.sufficient == 5);
  CHECK(s.no_retrieval == 1);
  CHECK(s.failed_records == 3);
  CHECK(s.subq_tokens.mean == doctest::Approx(3.0));
  CHECK(s.planning.nodes.max == 3);
  CHECK(s.planning.edges.max == 2);
  CHECK(s.planning.subqueries.mean == doctest::Approx(0.4));
  CHECK(s.answering.queries == 1);
  CHECK(s.answering.output_tokens.mean == 2);
  const auto j = s.to_json();
  CHECK(j["Planning Data"]["# [SUBQ]"] == 4);
  CHECK(j["Planning Data"].contains("# Input Tokens"));
}

TEST_CASE("summaries") {
  const auto s = summarize({4, 1, 3, 2});
  CHECK(s.min == 1);
  CHECK(s.max == 4);
  CHECK(s.mean == 2.5);
  CHECK(s.median == 2.5);
  CHECK(summarize({}).max == 0);
}

}
