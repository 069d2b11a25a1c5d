#pragma once

#include <compare>
#include <cstddef>
#include <filesystem>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "ras/embedding.hpp"
#include "ras/triple_codec.hpp"

namespace ras {

struct GraphNode {
  std::string text;
  Vector embedding;
};

struct GraphEdge {
  std::string source;
  std::string predicate;
  std::string target;
  Vector embedding;
};

/// One iteration's graph. Every edge endpoint names a node; all embeddings
/// share `dimension`.
struct SubGraph {
  std::vector<GraphNode> nodes;
  std::vector<GraphEdge> edges;
  std::size_t iteration = 0;
  std::size_t dimension = 0;
};

struct EdgeKey {
  std::string source;
  std::string predicate;
  std::string target;

  auto operator<=>(const EdgeKey &) const = default;
};

struct GraphStats {
  std::size_t nodes = 0;
  std::size_t edges = 0;
  std::size_t subgraphs = 0;

  bool operator==(const GraphStats &) const = default;
};

/// Nodes are unique by entity text, edges one per triple (duplicates kept).
/// Node and edge embeddings come from the entity and predicate text.
SubGraph build_subgraph(const TripleList &triples, EmbeddingProvider &embed,
                        std::size_t iteration);

/// Throws InvalidArgument when an edge endpoint is missing or a dimension
/// disagrees.
void validate(const SubGraph &sub);

/// Evolving question graph: ordered subgraphs plus union views. Union views
/// keep first-seen order so that each subgraph's new elements form one
/// contiguous index range.
class QuestionGraph {
public:
  struct Boundary {
    std::size_t iteration;
    std::size_t node_begin, node_end;
    std::size_t edge_begin, edge_end;
  };

  /// Requires sub.iteration == subgraphs().size().
  void merge(SubGraph sub);

  GraphStats stats() const noexcept;

  const std::vector<SubGraph> &subgraphs() const noexcept { return subgraphs_; }
  const std::vector<std::string> &union_nodes() const noexcept { return nodes_; }
  const std::vector<EdgeKey> &union_edges() const noexcept { return edges_; }
  const std::vector<Boundary> &boundaries() const noexcept { return bounds_; }

  bool has_node(const std::string &text) const {
    return node_index_.count(text) != 0;
  }
  bool has_edge(const EdgeKey &key) const { return edge_set_.count(key) != 0; }

  /// {"nodes": [text], "edges": [{source, predicate, target}] (node indices),
  ///  "subgraphs": [{iteration, nodes: [b, e), edges: [b, e)}]}
  nlohmann::json to_json() const;

  /// Writes `<stem>.f32` (row-major float32: per subgraph its node rows then
  /// its edge rows) and `<stem>.hdr` (dimension and counts).
  void write_embeddings(const std::filesystem::path &stem) const;

private:
  std::vector<SubGraph> subgraphs_;
  std::vector<std::string> nodes_;
  std::unordered_map<std::string, std::size_t> node_index_;
  std::vector<EdgeKey> edges_;
  std::set<EdgeKey> edge_set_;
  std::vector<Boundary> bounds_;
};

} // namespace ras
