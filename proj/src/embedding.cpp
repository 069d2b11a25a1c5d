#include "ras/embedding.hpp"

#include <cmath>

#include <nlohmann/json.hpp>

#include "ras/error.hpp"
#include "ras/http.hpp"
#include "text_util.hpp"

namespace ras {

Vector EmbeddingProvider::embed_one(const std::string &text) {
  auto rows = embed(std::span<const std::string>(&text, 1));
  if (rows.size() != 1)
    throw EmbeddingError("provider returned " + std::to_string(rows.size()) +
                             " vectors for one text",
                         text);
  return std::move(rows.front());
}

void l2_normalize(std::span<float> v) noexcept {
  double sq = 0.0;
  for (float x : v)
    sq += static_cast<double>(x) * x;
  const double norm = std::sqrt(sq);
  if (norm < 1e-12)
    return;
  for (float &x : v)
    x = static_cast<float>(x / norm);
}

double dot(std::span<const float> a, std::span<const float> b) noexcept {
  double acc = 0.0;
  const std::size_t n = std::min(a.size(), b.size());
  for (std::size_t i = 0; i < n; ++i)
    acc += static_cast<double>(a[i]) * b[i];
  return acc;
}

HashEmbedder::HashEmbedder(std::size_t dimension, std::uint64_t seed)
    : dim_(dimension), seed_(seed) {
  if (dim_ == 0)
    throw InvalidArgument("embedding dimension must be >= 1");
}

std::vector<Vector> HashEmbedder::embed(std::span<const std::string> texts) {
  std::vector<Vector> out;
  out.reserve(texts.size());
  for (const std::string &text : texts) {
    Vector v(dim_, 0.0f);
    for (const std::string &tok : detail::word_tokens(text)) {
      std::uint64_t h = detail::fnv1a(tok) ^ (seed_ * 0x9E3779B97F4A7C15ULL);
      // splitmix64 finalizer
      h ^= h >> 30;
      h *= 0xBF58476D1CE4E5B9ULL;
      h ^= h >> 27;
      h *= 0x94D049BB133111EBULL;
      h ^= h >> 31;
      const float sign = (h >> 63) ? -1.0f : 1.0f;
      v[(h & 0x7FFFFFFFFFFFFFFFULL) % dim_] += sign;
    }
    l2_normalize(v);
    out.push_back(std::move(v));
  }
  return out;
}

RemoteEmbedder::RemoteEmbedder(std::string url, std::size_t dimension,
                               std::string api_key, int timeout_seconds)
    : url_(std::move(url)), dim_(dimension), api_key_(std::move(api_key)),
      timeout_seconds_(timeout_seconds) {
  if (dim_ == 0)
    throw InvalidArgument("embedding dimension must be >= 1");
}

std::vector<Vector> RemoteEmbedder::embed(std::span<const std::string> texts) {
  if (texts.empty())
    return {};
  nlohmann::json request = nlohmann::json::array();
  for (const auto &t : texts)
    request.push_back(t);
  http::Headers headers;
  if (!api_key_.empty())
    headers.emplace_back("Authorization", "Bearer " + api_key_);

  const auto res =
      http::post_json(url_, request.dump(), headers, timeout_seconds_);
  if (!res.error.empty() || res.status != 200)
    throw EmbeddingError("embedding endpoint failed: " +
                             (res.error.empty() ? "HTTP " + std::to_string(res.status)
                                                : res.error),
                         texts.front());

  nlohmann::json reply;
  try {
    reply = nlohmann::json::parse(res.body);
  } catch (const nlohmann::json::exception &e) {
    throw EmbeddingError(std::string("unparseable embedding reply: ") + e.what(),
                         texts.front());
  }
  if (!reply.is_array() || reply.size() != texts.size())
    throw EmbeddingError("embedding reply must be an array with one row per text",
                         texts.front());

  std::vector<Vector> out;
  out.reserve(texts.size());
  for (std::size_t i = 0; i < reply.size(); ++i) {
    const auto &row = reply[i];
    if (!row.is_array() || row.size() != dim_)
      throw EmbeddingError("embedding row has wrong dimension", texts[i]);
    Vector v;
    v.reserve(dim_);
    for (const auto &x : row) {
      if (!x.is_number())
        throw EmbeddingError("embedding row contains a non-number", texts[i]);
      v.push_back(x.get<float>());
    }
    out.push_back(std::move(v));
  }
  return out;
}

} // namespace ras
