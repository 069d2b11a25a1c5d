#pragma once

// Forward-only structural encoder for question graphs. Each subgraph runs L
// rounds of attention message passing over incoming edges, node states are
// mean-pooled, subgraph vectors are mean-pooled, and an affine projector maps
// the result to the output width.
//
// Per round, for a node v with at least one incoming edge (u, r, v):
//   a_e = softmax_e( <h_v, h_u> / sqrt(D) )
//   m   = W_l * sum_e a_e (h_u + h_r) + b_l
//   h_v = normalize(h_v + m)
// Nodes without incoming edges keep their state.

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "ras/embedding.hpp"
#include "ras/knowledge_graph.hpp"

namespace ras {

/// Row-major affine map y = W x + b with W of shape (out, in).
struct AffineMap {
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<float> weight;
  std::vector<float> bias;

  static AffineMap identity(std::size_t dim);
  Vector apply(std::span<const float> x) const;
};

struct EncoderParams {
  std::size_t layers = 3;
  std::size_t dimension = 0;
  /// Empty means identity maps; otherwise one D->D map per layer.
  std::vector<AffineMap> layer_weights;

  double attention_scale() const;
  void check() const;
};

struct GraphToken {
  Vector vector;
};

class GraphEncoder {
public:
  virtual ~GraphEncoder() = default;
  virtual Vector encode_subgraph(const SubGraph &sub) const = 0;
  virtual std::size_t dimension() const = 0;
  GraphToken encode(const QuestionGraph &graph) const;
};

class MessagePassingEncoder final : public GraphEncoder {
public:
  explicit MessagePassingEncoder(EncoderParams params);
  Vector encode_subgraph(const SubGraph &sub) const override;
  std::size_t dimension() const override { return params_.dimension; }
  const EncoderParams &params() const noexcept { return params_; }

private:
  EncoderParams params_;
};

Vector encode_subgraph(const SubGraph &sub, const EncoderParams &params);

/// Element-wise arithmetic mean; an empty input yields zeros(dim).
Vector mean_pool(std::span<const Vector> rows, std::size_t dim);

GraphToken encode_question_graph(const QuestionGraph &graph,
                                 const EncoderParams &params);

Vector project(const GraphToken &token, const AffineMap &projector);

/// Weight file: one text header line, then raw little-endian float32 data.
///   encoder:   "ras-encoder layers <L> dim <D>\n" then per layer W (D*D), b (D)
///   projector: "ras-projector in <I> out <O>\n" then W (O*I), b (O)
EncoderParams load_encoder_params(const std::filesystem::path &path);
void save_encoder_params(const std::filesystem::path &path,
                         const EncoderParams &params);
AffineMap load_projector(const std::filesystem::path &path);
void save_projector(const std::filesystem::path &path, const AffineMap &map);

/// Appends the token as raw float32 values to a binary sidecar.
void append_graph_token(const std::filesystem::path &path,
                        const Vector &token);

} // namespace ras
