#include "ras/knowledge_graph.hpp"

#include <fstream>
#include <unordered_set>

#include "ras/error.hpp"

namespace ras {

SubGraph build_subgraph(const TripleList &triples, EmbeddingProvider &embed,
                        std::size_t iteration) {
  SubGraph sub;
  sub.iteration = iteration;
  sub.dimension = embed.dimension();

  std::vector<std::string> entities;
  std::unordered_set<std::string> seen;
  for (const Triple &t : triples) {
    for (const std::string *e : {&t.subject, &t.object})
      if (seen.insert(*e).second)
        entities.push_back(*e);
  }
  std::vector<std::string> predicates;
  predicates.reserve(triples.size());
  for (const Triple &t : triples)
    predicates.push_back(t.predicate);

  auto embed_all = [&](const std::vector<std::string> &texts) {
    if (texts.empty())
      return std::vector<Vector>{};
    auto rows = embed.embed(texts);
    if (rows.size() != texts.size())
      throw EmbeddingError("provider returned " + std::to_string(rows.size()) +
                               " vectors for " + std::to_string(texts.size()) +
                               " texts",
                           texts.front());
    for (std::size_t i = 0; i < rows.size(); ++i)
      if (rows[i].size() != sub.dimension)
        throw EmbeddingError("embedding has dimension " +
                                 std::to_string(rows[i].size()) + ", expected " +
                                 std::to_string(sub.dimension),
                             texts[i]);
    return rows;
  };

  auto node_vecs = embed_all(entities);
  auto edge_vecs = embed_all(predicates);

  sub.nodes.reserve(entities.size());
  for (std::size_t i = 0; i < entities.size(); ++i)
    sub.nodes.push_back({std::move(entities[i]), std::move(node_vecs[i])});
  sub.edges.reserve(triples.size());
  for (std::size_t i = 0; i < triples.size(); ++i)
    sub.edges.push_back({triples[i].subject, triples[i].predicate,
                         triples[i].object, std::move(edge_vecs[i])});
  return sub;
}

void validate(const SubGraph &sub) {
  std::unordered_set<std::string> names;
  for (const auto &n : sub.nodes) {
    if (n.embedding.size() != sub.dimension)
      throw DimensionMismatch("node '" + n.text + "' embedding has dimension " +
                              std::to_string(n.embedding.size()) +
                              ", expected " + std::to_string(sub.dimension));
    names.insert(n.text);
  }
  for (const auto &e : sub.edges) {
    if (e.embedding.size() != sub.dimension)
      throw DimensionMismatch("edge '" + e.predicate +
                              "' embedding has dimension " +
                              std::to_string(e.embedding.size()) +
                              ", expected " + std::to_string(sub.dimension));
    if (!names.count(e.source) || !names.count(e.target))
      throw InvalidArgument("edge '" + e.source + " -" + e.predicate + "-> " +
                            e.target + "' has an endpoint outside the node set");
  }
}

void QuestionGraph::merge(SubGraph sub) {
  if (sub.iteration != subgraphs_.size())
    throw InvalidArgument("subgraph iteration " + std::to_string(sub.iteration) +
                          " does not follow " +
                          std::to_string(subgraphs_.size()) + " merged subgraphs");
  if (!subgraphs_.empty() && sub.dimension != subgraphs_.front().dimension &&
      !(sub.nodes.empty() && sub.edges.empty()))
    throw DimensionMismatch("subgraph dimension " + std::to_string(sub.dimension) +
                            " differs from graph dimension " +
                            std::to_string(subgraphs_.front().dimension));
  validate(sub);

  Boundary b{sub.iteration, nodes_.size(), 0, edges_.size(), 0};
  for (const auto &n : sub.nodes) {
    if (node_index_.emplace(n.text, nodes_.size()).second)
      nodes_.push_back(n.text);
  }
  for (const auto &e : sub.edges) {
    EdgeKey key{e.source, e.predicate, e.target};
    if (edge_set_.insert(key).second)
      edges_.push_back(std::move(key));
  }
  b.node_end = nodes_.size();
  b.edge_end = edges_.size();
  bounds_.push_back(b);
  subgraphs_.push_back(std::move(sub));
}

GraphStats QuestionGraph::stats() const noexcept {
  return {nodes_.size(), edges_.size(), subgraphs_.size()};
}

nlohmann::json QuestionGraph::to_json() const {
  nlohmann::json doc;
  doc["nodes"] = nodes_;
  auto &edges = doc["edges"] = nlohmann::json::array();
  for (const auto &e : edges_)
    edges.push_back({{"source", node_index_.at(e.source)},
                     {"predicate", e.predicate},
                     {"target", node_index_.at(e.target)}});
  auto &subs = doc["subgraphs"] = nlohmann::json::array();
  for (const auto &b : bounds_)
    subs.push_back({{"iteration", b.iteration},
                    {"nodes", {b.node_begin, b.node_end}},
                    {"edges", {b.edge_begin, b.edge_end}}});
  return doc;
}

void QuestionGraph::write_embeddings(const std::filesystem::path &stem) const {
  auto data_path = stem;
  data_path += ".f32";
  auto header_path = stem;
  header_path += ".hdr";

  std::ofstream data(data_path, std::ios::binary);
  std::ofstream header(header_path);
  if (!data || !header)
    throw Error("cannot write embeddings to " + stem.string());

  const std::size_t dim = subgraphs_.empty() ? 0 : subgraphs_.front().dimension;
  header << "dimension " << dim << "\n";
  header << "subgraphs " << subgraphs_.size() << "\n";
  for (const auto &sub : subgraphs_) {
    header << "iteration " << sub.iteration << " nodes " << sub.nodes.size()
           << " edges " << sub.edges.size() << "\n";
    for (const auto &n : sub.nodes)
      data.write(reinterpret_cast<const char *>(n.embedding.data()),
                 static_cast<std::streamsize>(n.embedding.size() * sizeof(float)));
    for (const auto &e : sub.edges)
      data.write(reinterpret_cast<const char *>(e.embedding.data()),
                 static_cast<std::streamsize>(e.embedding.size() * sizeof(float)));
  }
}

} // namespace ras
