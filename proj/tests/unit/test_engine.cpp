#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "ras/engine.hpp"

using namespace ras;

namespace {

struct Fixture {
  CorpusStore corpus;
  SidecarExtractor extractor;
  HashEmbedder embedder{16};
  std::optional<Bm25Index> bm25;
  std::optional<Bm25Retriever> retriever;

  Fixture() {
    const char *cities[] = {"Paris", "Rome", "Berlin", "Madrid", "Vienna"};
    const char *countries[] = {"France", "Italy", "Germany", "Spain", "Austria"};
    for (int i = 0; i < 5; ++i) {
      const std::string id = "d" + std::to_string(i);
      corpus.add({id, cities[i],
                  std::string(cities[i]) + " is the capital of " + countries[i]});
      extractor.add(id, {{cities[i], "capital of", countries[i]},
                         {countries[i], "has capital", cities[i]}});
    }
    bm25 = Bm25Index::build(corpus);
    retriever.emplace(*bm25);
  }

  EngineDeps deps(Backend &model) {
    EngineDeps d;
    d.model = &model;
    d.extractor = &extractor;
    d.embedder = &embedder;
    d.retriever = &*retriever;
    d.corpus = &corpus;
    return d;
  }
};

SessionConfig config(std::size_t top_k = 2) {
  SessionConfig c;
  c.top_k = top_k;
  c.max_new_tokens = 100;
  return c;
}

bool has_event(const SessionTrace &t, std::string_view kind) {
  for (const auto &e : t.events)
    if (e.kind == kind)
      return true;
  return false;
}

} // namespace

TEST_SUITE("engine") {

TEST_CASE("no retrieval answers directly") {
  Fixture f;
  ScriptedBackend model({"[NO_RETRIEVAL]", "Paris"});
  Engine engine(f.deps(model), config());
  const auto r = engine.run_question("What is the capital of France?");
  CHECK(r.trace.status == TraceStatus::Ok);
  CHECK(r.trace.answer == "Paris");
  CHECK(r.trace.iterations.empty());
  CHECK(r.trace.plan_calls == 1);
  const auto prompts = model.received();
  REQUIRE(prompts.size() == 2);
  CHECK(prompts[1].context.empty());
  CHECK(prompts[1].question == "Question: What is the capital of France?");
}

TEST_CASE("one sub-query then sufficient") {
  Fixture f;
  ScriptedBackend model({"[SUBQ] capital of France", "[SUFFICIENT]", "Paris"});
  Engine engine(f.deps(model), config());
  const auto r = engine.run_question("What is the capital of France?");
  REQUIRE(r.trace.iterations.size() == 1);
  // The first retrieval always uses the main question.
  CHECK(r.trace.iterations[0].subquery == "What is the capital of France?");
  CHECK(r.trace.iterations[0].retrieved.entries.size() == 2);
  CHECK(r.trace.iterations[0].plan_after == Plan::sufficient());
  CHECK(r.trace.answer == "Paris");
  const auto prompts = model.received();
  CHECK(prompts[2].context.find("Retrieved Graph Information: (S> ") !=
        std::string::npos);
}

TEST_CASE("iteration cap forces an answer") {
  Fixture f;
  ScriptedBackend model;
  for (int i = 0; i < 5; ++i)
    model.push("[SUBQ] capital of Italy " + std::to_string(i));
  model.push("Rome");
  Engine engine(f.deps(model), config());
  const auto r = engine.run_question("Which city is the capital of Italy?");
  CHECK(r.trace.status == TraceStatus::Ok);
  CHECK(r.trace.iterations.size() == 5);
  CHECK(r.trace.plan_calls == 5);
  CHECK(r.trace.answer == "Rome");
  CHECK(has_event(r.trace, "iteration_cap"));
  CHECK(model.remaining() == 0);
  CHECK(r.trace.iterations[1].subquery == "capital of Italy 1");
}

TEST_CASE("sub-queries flow into the next retrieval") {
  Fixture f;
  ScriptedBackend model({"[SUBQ]", "[SUBQ] Berlin Germany", "[SUFFICIENT]", "Berlin"});
  Engine engine(f.deps(model), config(1));
  const auto r = engine.run_question("capital of Spain");
  REQUIRE(r.trace.iterations.size() == 2);
  CHECK(r.trace.iterations[0].retrieved.entries[0].id == "d3");
  CHECK(r.trace.iterations[1].subquery == "Berlin Germany");
  CHECK(r.trace.iterations[1].retrieved.entries[0].id == "d2");
  CHECK(r.trace.graph_stats.size() == 2);
  CHECK(r.trace.final_graph_stats.nodes == 4);
}

TEST_CASE("unparseable plans degrade to answering") {
  Fixture f;
  ScriptedBackend model({"[SUBQ] x", "hmm, not sure", "Madrid"});
  Engine engine(f.deps(model), config());
  const auto r = engine.run_question("capital of Spain");
  CHECK(r.trace.status == TraceStatus::Ok);
  CHECK(r.trace.iterations.size() == 1);
  CHECK(has_event(r.trace, "degraded_plan"));
  CHECK(r.trace.answer == "Madrid");
}

TEST_CASE("fail policy marks the trace failed") {
  Fixture f;
  ScriptedBackend model({"[SUBQ] x", "[NO_RETRIEVAL]"});
  SessionConfig c = config();
  c.on_plan_failure = PlanFailurePolicy::Fail;
  Engine engine(f.deps(model), c);
  const auto r = engine.run_question("capital of Spain");
  CHECK(r.trace.status == TraceStatus::Failed);
  CHECK(r.trace.iterations.size() == 1);
  CHECK(r.trace.answer.empty());
}

TEST_CASE("initial sufficient still retrieves once") {
  Fixture f;
  ScriptedBackend model({"[SUFFICIENT]", "[SUFFICIENT]", "Vienna"});
  Engine engine(f.deps(model), config());
  const auto r = engine.run_question("capital of Austria");
  CHECK(r.trace.iterations.size() == 1);
  CHECK(has_event(r.trace, "initial_sufficient"));
}

TEST_CASE("gateway failure keeps partial iterations") {
  Fixture f;
  ScriptedBackend model({"[SUBQ] a", "[SUBQ] b"});
  Engine engine(f.deps(model), config());
  const auto r = engine.run_question("capital of Austria");
  CHECK(r.trace.status == TraceStatus::Failed);
  CHECK(r.trace.iterations.size() == 2);
  CHECK(r.trace.error.find("no responses left") != std::string::npos);
}

TEST_CASE("empty answers fail the session") {
  Fixture f;
  ScriptedBackend model({"[NO_RETRIEVAL]", "   "});
  Engine engine(f.deps(model), config());
  CHECK(engine.run_question("Q").trace.status == TraceStatus::Failed);
}

TEST_CASE("initial context replaces the first retrieval") {
  Fixture f;
  ScriptedBackend model({"[SUBQ]", "[SUFFICIENT]", "A"});
  Engine engine(f.deps(model), config());
  const std::vector<Document> web{{"d4", "Vienna", "Vienna is in Austria"}};
  const auto r = engine.run_question("Q", web);
  REQUIRE(r.trace.iterations.size() == 1);
  CHECK(r.trace.iterations[0].retrieved.entries.size() == 1);
  CHECK(r.trace.iterations[0].triples.front().subject == "Vienna");
}

TEST_CASE("static runs") {
  Fixture f;
  std::vector<std::vector<Document>> sets;
  for (int i = 0; i < 5; ++i)
    sets.push_back({f.corpus.at(static_cast<std::size_t>(i))});

  ScriptedBackend model({"A long answer."});
  Engine engine(f.deps(model), config());
  const auto r = engine.run_static("Describe European capitals.", sets);
  CHECK(r.trace.iterations.size() == 5);
  CHECK(r.trace.plan_calls == 0);
  CHECK(r.trace.answer == "A long answer.");

  ScriptedBackend one_model({"short"});
  Engine one(f.deps(one_model), config());
  CHECK(one.run_static("Q", std::span(sets).first(1)).trace.iterations.size() == 1);

  CHECK_THROWS_AS(engine.run_static("Q", {}), InvalidArgument);
  sets.push_back({f.corpus.at(0)});
  CHECK_THROWS_AS(engine.run_static("Q", sets), InvalidArgument);
}

TEST_CASE("replay is byte-identical") {
  auto run = [] {
    Fixture f;
    ScriptedBackend model({"[SUBQ] a", "[SUBQ] Rome Italy", "[SUFFICIENT]", "Rome"});
    Engine engine(f.deps(model), config());
    return serialize_trace(engine.run_question("capital of Italy").trace);
  };
  const auto first = run();
  CHECK(first == run());
  CHECK(first.find('\n') == std::string::npos);
  const auto j = nlohmann::json::parse(first);
  CHECK(j["iterations"].size() == 2);
  CHECK(j["config"]["max_iterations"] == 5);
  CHECK_FALSE(j.contains("timings_ms"));
}

TEST_CASE("config invariants") {
  Fixture f;
  ScriptedBackend model;
  SessionConfig c = config();
  c.max_iterations = 0;
  CHECK_THROWS_AS(Engine(f.deps(model), c), InvalidArgument);
  c = config();
  c.top_k = 0;
  CHECK_THROWS_AS(Engine(f.deps(model), c), InvalidArgument);
  CHECK(SessionConfig{}.max_iterations == 5);
  CHECK(SessionConfig{}.top_k == 5);
}

TEST_CASE("graph token export") {
  Fixture f;
  ScriptedBackend model({"[SUBQ]", "[SUFFICIENT]", "Paris"});
  EncoderParams p;
  p.dimension = 16;
  MessagePassingEncoder enc(p);
  auto deps = f.deps(model);
  deps.encoder = &enc;
  const auto r = Engine(deps, config()).run_question("capital of France");
  REQUIRE(r.token.has_value());
  CHECK(r.token->vector.size() == 16);
}

TEST_CASE("sidecar files and context sets") {
  const auto dir = std::filesystem::temp_directory_path();
  std::ofstream(dir / "ras_passages.jsonl")
      << R"({"id": "p1", "title": "T", "text": "x"})" << "\n"
      << R"({"id": "p2", "title": "T", "text": "y"})" << "\n";
  std::ofstream(dir / "ras_triples.txt") << "(S> A| P> r| O> B)\n\n";
  auto side = SidecarExtractor::from_files(dir / "ras_passages.jsonl",
                                           dir / "ras_triples.txt");
  CHECK(side.extract({"p1", "", ""}).size() == 1);
  CHECK(side.extract({"p2", "", ""}).empty());
  CHECK(side.extract({"zz", "", ""}).empty());
  CHECK(side.misses() == 1);

  std::ofstream(dir / "ras_sets.jsonl")
      << R"({"set": 1, "id": "b", "text": "second"})" << "\n"
      << R"({"set": 0, "id": "a", "text": "first"})" << "\n"
      << R"({"set": 1, "id": "c", "text": "third"})" << "\n";
  const auto sets = read_context_sets(dir / "ras_sets.jsonl");
  REQUIRE(sets.size() == 2);
  CHECK(sets[0][0].id == "a");
  CHECK(sets[1].size() == 2);
}

}
