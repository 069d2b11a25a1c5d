#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>

#include "ras/embedding.hpp"
#include "ras/knowledge_graph.hpp"

using namespace ras;

namespace {

class FailingEmbedder final : public EmbeddingProvider {
public:
  std::size_t dimension() const override { return 4; }
  std::vector<Vector> embed(std::span<const std::string> texts) override {
    for (const auto &t : texts)
      if (t == "poison")
        throw EmbeddingError("cannot embed", t);
    return std::vector<Vector>(texts.size(), Vector(4, 0.5f));
  }
};

std::set<std::string> node_set(const QuestionGraph &g) {
  return {g.union_nodes().begin(), g.union_nodes().end()};
}

std::set<EdgeKey> edge_set(const QuestionGraph &g) {
  return {g.union_edges().begin(), g.union_edges().end()};
}

} // namespace

TEST_SUITE("knowledge_graph") {

TEST_CASE("build_subgraph counts") {
  HashEmbedder embed(16);
  auto g = build_subgraph({{"A", "r", "B"}}, embed, 0);
  CHECK(g.nodes.size() == 2);
  CHECK(g.edges.size() == 1);
  CHECK(g.dimension == 16);

  auto empty = build_subgraph({}, embed, 0);
  CHECK(empty.nodes.empty());
  CHECK(empty.edges.empty());

  auto loop = build_subgraph({{"A", "r", "A"}}, embed, 0);
  CHECK(loop.nodes.size() == 1);
  REQUIRE(loop.edges.size() == 1);
  CHECK(loop.edges[0].source == loop.edges[0].target);
}

TEST_CASE("embeddings come from entity and predicate text") {
  HashEmbedder embed(16);
  auto g = build_subgraph({{"Paris", "capital of", "France"}}, embed, 0);
  for (const auto &n : g.nodes)
    CHECK(n.embedding == embed.embed_one(n.text));
  CHECK(g.edges[0].embedding == embed.embed_one("capital of"));
  CHECK_NOTHROW(validate(g));
}

TEST_CASE("duplicate triples stay in the subgraph") {
  HashEmbedder embed(8);
  auto g = build_subgraph({{"A", "r", "B"}, {"A", "r", "B"}}, embed, 0);
  CHECK(g.nodes.size() == 2);
  CHECK(g.edges.size() == 2);
}

TEST_CASE("embedding failures carry the text") {
  FailingEmbedder embed;
  try {
    build_subgraph({{"A", "r", "poison"}}, embed, 0);
    FAIL("expected EmbeddingError");
  } catch (const EmbeddingError &e) {
    CHECK(e.text() == "poison");
  }
}

TEST_CASE("validate rejects dangling edges and mixed dimensions") {
  SubGraph g;
  g.dimension = 2;
  g.nodes.push_back({"A", {1, 0}});
  g.edges.push_back({"A", "r", "B", {0, 1}});
  CHECK_THROWS_AS(validate(g), InvalidArgument);
  g.nodes.push_back({"B", {1, 0, 0}});
  CHECK_THROWS(validate(g));
}

TEST_CASE("merge and stats") {
  HashEmbedder embed(8);
  QuestionGraph q;
  CHECK(q.stats() == GraphStats{0, 0, 0});

  q.merge(build_subgraph({{"A", "r", "B"}}, embed, 0));
  CHECK(q.stats() == GraphStats{2, 1, 1});

  q.merge(build_subgraph({{"C", "s", "D"}}, embed, 1));
  CHECK(q.stats() == GraphStats{4, 2, 2});

  q.merge(build_subgraph({{"A", "r", "B"}}, embed, 2));
  CHECK(q.stats() == GraphStats{4, 2, 3});
}

TEST_CASE("union of overlapping node sets") {
  HashEmbedder embed(8);
  QuestionGraph q;
  q.merge(build_subgraph({{"A", "r", "B"}}, embed, 0));
  q.merge(build_subgraph({{"B", "s", "C"}}, embed, 1));
  CHECK(node_set(q) == std::set<std::string>{"A", "B", "C"});
  CHECK(q.has_node("C"));
  CHECK(q.has_edge({"B", "s", "C"}));
  for (const auto &e : q.union_edges()) {
    CHECK(q.has_node(e.source));
    CHECK(q.has_node(e.target));
  }
}

TEST_CASE("merge rejects iteration and dimension mismatches") {
  HashEmbedder embed8(8), embed4(4);
  QuestionGraph q;
  CHECK_THROWS_AS(q.merge(build_subgraph({{"A", "r", "B"}}, embed8, 1)),
                  InvalidArgument);
  q.merge(build_subgraph({{"A", "r", "B"}}, embed8, 0));
  CHECK_THROWS(q.merge(build_subgraph({{"A", "r", "C"}}, embed4, 1)));
}

TEST_CASE("union views commute") {
  HashEmbedder embed(8);
  const TripleList t1{{"A", "r", "B"}, {"B", "s", "C"}};
  const TripleList t2{{"C", "t", "D"}, {"A", "r", "B"}};
  QuestionGraph x, y;
  x.merge(build_subgraph(t1, embed, 0));
  x.merge(build_subgraph(t2, embed, 1));
  y.merge(build_subgraph(t2, embed, 0));
  y.merge(build_subgraph(t1, embed, 1));
  CHECK(node_set(x) == node_set(y));
  CHECK(edge_set(x) == edge_set(y));
}

TEST_CASE("boundaries cover each iteration's new elements") {
  HashEmbedder embed(8);
  QuestionGraph q;
  q.merge(build_subgraph({{"A", "r", "B"}}, embed, 0));
  q.merge(build_subgraph({{"A", "r", "B"}, {"B", "s", "C"}}, embed, 1));
  const auto &b = q.boundaries();
  REQUIRE(b.size() == 2);
  CHECK(b[0].node_begin == 0);
  CHECK(b[0].node_end == 2);
  CHECK(b[1].node_begin == 2);
  CHECK(b[1].node_end == 3);
  CHECK(b[1].edge_begin == 1);
  CHECK(b[1].edge_end == 2);

  const auto j = q.to_json();
  CHECK(j["nodes"].size() == 3);
  CHECK(j["edges"].size() == 2);
  CHECK(j["edges"][1]["source"] == 1);
  CHECK(j["edges"][1]["target"] == 2);
  CHECK(j["subgraphs"][1]["nodes"] == nlohmann::json::array({2, 3}));
}

TEST_CASE("embedding export sizes") {
  HashEmbedder embed(4);
  QuestionGraph q;
  q.merge(build_subgraph({{"A", "r", "B"}}, embed, 0));
  q.merge(build_subgraph({{"B", "s", "C"}, {"B", "s", "C"}}, embed, 1));
  const auto stem = std::filesystem::temp_directory_path() / "ras_kg_export";
  q.write_embeddings(stem);
  auto f32 = stem;
  f32 += ".f32";
  // (2 nodes + 1 edge) + (2 nodes + 2 edges) rows of 4 floats
  CHECK(std::filesystem::file_size(f32) == 7 * 4 * sizeof(float));
  auto hdr = stem;
  hdr += ".hdr";
  CHECK(std::filesystem::exists(hdr));
}

}
