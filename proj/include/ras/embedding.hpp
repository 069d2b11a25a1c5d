#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace ras {

using Vector = std::vector<float>;

/// Source of fixed-dimension text embeddings. Implementations must return
/// exactly one vector of dimension() entries per input text, or throw
/// EmbeddingError naming the text that failed.
class EmbeddingProvider {
public:
  virtual ~EmbeddingProvider() = default;
  virtual std::size_t dimension() const = 0;
  virtual std::vector<Vector> embed(std::span<const std::string> texts) = 0;

  Vector embed_one(const std::string &text);
};

/// Deterministic signed feature hashing over lowercase alphanumeric tokens,
/// L2-normalized. Texts without tokens map to the zero vector.
class HashEmbedder final : public EmbeddingProvider {
public:
  explicit HashEmbedder(std::size_t dimension, std::uint64_t seed = 0);
  std::size_t dimension() const override { return dim_; }
  std::vector<Vector> embed(std::span<const std::string> texts) override;

private:
  std::size_t dim_;
  std::uint64_t seed_;
};

/// Calls a remote endpoint: POST body is a JSON array of strings, response is
/// a JSON array of equal-length float arrays.
class RemoteEmbedder final : public EmbeddingProvider {
public:
  RemoteEmbedder(std::string url, std::size_t dimension,
                 std::string api_key = {}, int timeout_seconds = 60);
  std::size_t dimension() const override { return dim_; }
  std::vector<Vector> embed(std::span<const std::string> texts) override;

private:
  std::string url_;
  std::size_t dim_;
  std::string api_key_;
  int timeout_seconds_;
};

/// In-place L2 normalization; vectors with norm below 1e-12 are left as is.
void l2_normalize(std::span<float> v) noexcept;

double dot(std::span<const float> a, std::span<const float> b) noexcept;

} // namespace ras
