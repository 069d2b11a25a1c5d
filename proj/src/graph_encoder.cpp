#include "ras/graph_encoder.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "ras/error.hpp"

namespace ras {

namespace {

constexpr double kNormEpsilon = 1e-12;

void normalize(std::vector<double> &v) {
  double sq = 0.0;
  for (double x : v)
    sq += x * x;
  const double norm = std::max(std::sqrt(sq), kNormEpsilon);
  for (double &x : v)
    x /= norm;
}

double dot(const std::vector<double> &a, const std::vector<double> &b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    acc += a[i] * b[i];
  return acc;
}

void write_floats(std::ofstream &out, const std::vector<float> &v) {
  out.write(reinterpret_cast<const char *>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(float)));
}

std::vector<float> read_floats(std::ifstream &in, std::size_t n,
                               const std::filesystem::path &path) {
  std::vector<float> v(n);
  in.read(reinterpret_cast<char *>(v.data()),
          static_cast<std::streamsize>(n * sizeof(float)));
  if (static_cast<std::size_t>(in.gcount()) != n * sizeof(float))
    throw FormatError("truncated weight data in " + path.string());
  return v;
}

std::string read_header(std::ifstream &in, const std::filesystem::path &path) {
  if (!in)
    throw Error("cannot open " + path.string());
  std::string header;
  std::getline(in, header);
  return header;
}

} // namespace

AffineMap AffineMap::identity(std::size_t dim) {
  AffineMap m{dim, dim, std::vector<float>(dim * dim, 0.0f),
              std::vector<float>(dim, 0.0f)};
  for (std::size_t i = 0; i < dim; ++i)
    m.weight[i * dim + i] = 1.0f;
  return m;
}

Vector AffineMap::apply(std::span<const float> x) const {
  if (x.size() != in)
    throw DimensionMismatch("affine map expects width " + std::to_string(in) +
                            ", got " + std::to_string(x.size()));
  if (weight.size() != in * out || bias.size() != out)
    throw DimensionMismatch("affine map storage does not match its shape");
  Vector y(out);
  for (std::size_t r = 0; r < out; ++r) {
    double acc = bias[r];
    for (std::size_t c = 0; c < in; ++c)
      acc += static_cast<double>(weight[r * in + c]) * x[c];
    y[r] = static_cast<float>(acc);
  }
  return y;
}

double EncoderParams::attention_scale() const {
  return 1.0 / std::sqrt(static_cast<double>(dimension));
}

void EncoderParams::check() const {
  if (dimension == 0)
    throw InvalidArgument("encoder dimension must be >= 1");
  if (!layer_weights.empty() && layer_weights.size() != layers)
    throw InvalidArgument("encoder has " + std::to_string(layers) +
                          " layers but " + std::to_string(layer_weights.size()) +
                          " weight maps");
  for (const auto &w : layer_weights)
    if (w.in != dimension || w.out != dimension ||
        w.weight.size() != dimension * dimension || w.bias.size() != dimension)
      throw DimensionMismatch("layer weight shape must be D x D");
}

Vector encode_subgraph(const SubGraph &sub, const EncoderParams &params) {
  params.check();
  const std::size_t dim = params.dimension;
  if (sub.nodes.empty() && sub.edges.empty())
    return Vector(dim, 0.0f);
  if (sub.dimension != dim)
    throw DimensionMismatch("subgraph dimension " + std::to_string(sub.dimension) +
                            " differs from encoder dimension " +
                            std::to_string(dim));
  validate(sub);

  // Fixed accumulation order: nodes by text, edges by (target, source,
  // predicate, embedding).
  std::vector<const GraphNode *> nodes;
  nodes.reserve(sub.nodes.size());
  for (const auto &n : sub.nodes)
    nodes.push_back(&n);
  std::sort(nodes.begin(), nodes.end(),
            [](auto *a, auto *b) { return a->text < b->text; });
  std::map<std::string_view, std::size_t> index;
  for (std::size_t i = 0; i < nodes.size(); ++i)
    if (!index.emplace(nodes[i]->text, i).second)
      throw InvalidArgument("duplicate node '" + nodes[i]->text + "'");

  struct Incoming {
    std::size_t source;
    const GraphEdge *edge;
  };
  std::vector<std::vector<Incoming>> incoming(nodes.size());
  for (const auto &e : sub.edges)
    incoming[index.at(e.target)].push_back({index.at(e.source), &e});
  for (auto &list : incoming)
    std::sort(list.begin(), list.end(), [](const Incoming &a, const Incoming &b) {
      if (a.source != b.source)
        return a.source < b.source;
      if (a.edge->predicate != b.edge->predicate)
        return a.edge->predicate < b.edge->predicate;
      return a.edge->embedding < b.edge->embedding;
    });

  std::vector<std::vector<double>> h(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i)
    h[i].assign(nodes[i]->embedding.begin(), nodes[i]->embedding.end());

  const double scale = params.attention_scale();
  std::vector<double> logits;
  for (std::size_t layer = 0; layer < params.layers; ++layer) {
    auto next = h;
    for (std::size_t v = 0; v < nodes.size(); ++v) {
      const auto &in = incoming[v];
      if (in.empty())
        continue;
      logits.resize(in.size());
      for (std::size_t k = 0; k < in.size(); ++k)
        logits[k] = dot(h[v], h[in[k].source]) * scale;
      const double peak = *std::max_element(logits.begin(), logits.end());
      double denom = 0.0;
      for (double &z : logits) {
        z = std::exp(z - peak);
        denom += z;
      }
      std::vector<double> message(dim, 0.0);
      for (std::size_t k = 0; k < in.size(); ++k) {
        const double alpha = logits[k] / denom;
        const auto &hu = h[in[k].source];
        const auto &hr = in[k].edge->embedding;
        for (std::size_t d = 0; d < dim; ++d)
          message[d] += alpha * (hu[d] + hr[d]);
      }
      if (!params.layer_weights.empty()) {
        const AffineMap &w = params.layer_weights[layer];
        std::vector<double> mapped(dim);
        for (std::size_t r = 0; r < dim; ++r) {
          double acc = w.bias[r];
          for (std::size_t c = 0; c < dim; ++c)
            acc += static_cast<double>(w.weight[r * dim + c]) * message[c];
          mapped[r] = acc;
        }
        message.swap(mapped);
      }
      auto &out = next[v];
      for (std::size_t d = 0; d < dim; ++d)
        out[d] += message[d];
      normalize(out);
    }
    h.swap(next);
  }

  Vector pooled(dim, 0.0f);
  if (nodes.empty())
    return pooled;
  for (std::size_t d = 0; d < dim; ++d) {
    double acc = 0.0;
    for (const auto &state : h)
      acc += state[d];
    pooled[d] = static_cast<float>(acc / static_cast<double>(nodes.size()));
  }
  return pooled;
}

Vector mean_pool(std::span<const Vector> rows, std::size_t dim) {
  Vector out(dim, 0.0f);
  if (rows.empty())
    return out;
  for (const auto &r : rows)
    if (r.size() != dim)
      throw DimensionMismatch("cannot pool a row of width " +
                              std::to_string(r.size()) + " into width " +
                              std::to_string(dim));
  for (std::size_t d = 0; d < dim; ++d) {
    double acc = 0.0;
    for (const auto &r : rows)
      acc += r[d];
    out[d] = static_cast<float>(acc / static_cast<double>(rows.size()));
  }
  return out;
}

GraphToken GraphEncoder::encode(const QuestionGraph &graph) const {
  std::vector<Vector> rows;
  rows.reserve(graph.subgraphs().size());
  for (const auto &sub : graph.subgraphs())
    rows.push_back(encode_subgraph(sub));
  GraphToken token{mean_pool(rows, dimension())};
  for (float x : token.vector)
    if (!std::isfinite(x))
      throw Error("graph token has a non-finite entry");
  return token;
}

MessagePassingEncoder::MessagePassingEncoder(EncoderParams params)
    : params_(std::move(params)) {
  params_.check();
}

Vector MessagePassingEncoder::encode_subgraph(const SubGraph &sub) const {
  return ras::encode_subgraph(sub, params_);
}

GraphToken encode_question_graph(const QuestionGraph &graph,
                                 const EncoderParams &params) {
  return MessagePassingEncoder(params).encode(graph);
}

Vector project(const GraphToken &token, const AffineMap &projector) {
  return projector.apply(token.vector);
}

EncoderParams load_encoder_params(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  std::istringstream header(read_header(in, path));
  std::string magic, k_layers, k_dim;
  EncoderParams p;
  if (!(header >> magic >> k_layers >> p.layers >> k_dim >> p.dimension) ||
      magic != "ras-encoder" || k_layers != "layers" || k_dim != "dim")
    throw FormatError("bad encoder weight header in " + path.string(), 1);
  for (std::size_t l = 0; l < p.layers; ++l) {
    AffineMap m{p.dimension, p.dimension, {}, {}};
    m.weight = read_floats(in, p.dimension * p.dimension, path);
    m.bias = read_floats(in, p.dimension, path);
    p.layer_weights.push_back(std::move(m));
  }
  p.check();
  return p;
}

void save_encoder_params(const std::filesystem::path &path,
                         const EncoderParams &params) {
  params.check();
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw Error("cannot write " + path.string());
  out << "ras-encoder layers " << params.layers << " dim " << params.dimension
      << "\n";
  for (std::size_t l = 0; l < params.layers; ++l) {
    const AffineMap m = params.layer_weights.empty()
                            ? AffineMap::identity(params.dimension)
                            : params.layer_weights[l];
    write_floats(out, m.weight);
    write_floats(out, m.bias);
  }
}

AffineMap load_projector(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  std::istringstream header(read_header(in, path));
  std::string magic, k_in, k_out;
  AffineMap m;
  if (!(header >> magic >> k_in >> m.in >> k_out >> m.out) ||
      magic != "ras-projector" || k_in != "in" || k_out != "out")
    throw FormatError("bad projector header in " + path.string(), 1);
  m.weight = read_floats(in, m.in * m.out, path);
  m.bias = read_floats(in, m.out, path);
  return m;
}

void save_projector(const std::filesystem::path &path, const AffineMap &map) {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw Error("cannot write " + path.string());
  out << "ras-projector in " << map.in << " out " << map.out << "\n";
  write_floats(out, map.weight);
  write_floats(out, map.bias);
}

void append_graph_token(const std::filesystem::path &path, const Vector &token) {
  std::ofstream out(path, std::ios::binary | std::ios::app);
  if (!out)
    throw Error("cannot append to " + path.string());
  write_floats(out, token);
}

} // namespace ras
