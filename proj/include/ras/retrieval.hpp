#pragma once

#include <cstddef>
#include <filesystem>
#include <istream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "ras/embedding.hpp"

namespace ras {

struct Document {
  std::string id;
  std::string title;
  std::string text;

  /// The text that gets embedded and indexed: "title\ntext".
  std::string indexed_text() const { return title + "\n" + text; }
};

/// Documents in ingestion order with unique ids.
class CorpusStore {
public:
  /// Throws InvalidArgument on a duplicate id.
  void add(Document doc);
  const Document *find(std::string_view id) const;
  const Document &at(std::size_t i) const { return docs_.at(i); }
  std::size_t size() const noexcept { return docs_.size(); }
  bool empty() const noexcept { return docs_.empty(); }
  const std::vector<Document> &documents() const noexcept { return docs_; }

private:
  std::vector<Document> docs_;
  std::unordered_map<std::string, std::size_t> by_id_;
};

/// One JSON object per line with string fields id, title and text. Blank
/// lines are skipped. Errors carry the 1-based line number.
CorpusStore ingest_corpus(std::istream &in);
CorpusStore ingest_corpus_file(const std::filesystem::path &path);

struct ScoredDoc {
  std::string id;
  double score = 0.0;

  bool operator==(const ScoredDoc &) const = default;
};

/// Sorted by score descending, ties by ascending doc id.
struct RankedDocs {
  std::vector<ScoredDoc> entries;
  std::size_t k = 0;

  bool operator==(const RankedDocs &) const = default;
};

/// Brute-force inner-product index split into shards assigned round-robin
/// by ingestion order. Rows are unit-normalized.
class DenseIndex {
public:
  struct Shard {
    std::vector<std::string> ids;
    std::vector<float> rows; // ids.size() x dimension, row-major
  };

  static DenseIndex build(const CorpusStore &store, EmbeddingProvider &embed,
                          std::size_t num_shards = 5);

  /// Top-k by inner product of a (normalized) query vector. Shards are
  /// searched independently and merged; the result equals a global
  /// brute-force top-k.
  RankedDocs search(std::span<const float> query, std::size_t k,
                    bool parallel = true) const;

  std::size_t dimension() const noexcept { return dim_; }
  std::size_t num_shards() const noexcept { return shards_.size(); }
  std::size_t size() const noexcept;
  const std::vector<Shard> &shards() const noexcept { return shards_; }

  /// Directory layout: index.meta ("shards S dim D"), and per shard
  /// shard_<i>.ids (one id per line) plus shard_<i>.f32 (text header
  /// "rows R dim D\n" followed by float32 row-major data).
  void save(const std::filesystem::path &dir) const;
  static DenseIndex load(const std::filesystem::path &dir);

private:
  std::size_t dim_ = 0;
  std::vector<Shard> shards_;
};

RankedDocs dense_search(const DenseIndex &index, const std::string &query,
                        EmbeddingProvider &embed, std::size_t k);

/// Okapi BM25 with the non-negative idf ln((N - df + 0.5)/(df + 0.5) + 1).
class Bm25Index {
public:
  struct Posting {
    std::size_t doc;
    std::size_t tf;
  };

  static Bm25Index build(const CorpusStore &store, double k1 = 1.2,
                         double b = 0.75);

  /// Unique query terms; documents without any query term are excluded.
  RankedDocs search(std::string_view query, std::size_t k) const;

  double idf(const std::string &term) const;
  std::size_t doc_freq(const std::string &term) const;
  std::size_t term_freq(const std::string &term, std::size_t doc) const;
  std::size_t doc_length(std::size_t doc) const { return lengths_.at(doc); }
  double average_length() const noexcept { return avg_len_; }
  std::size_t num_docs() const noexcept { return ids_.size(); }
  std::size_t num_terms() const noexcept { return postings_.size(); }
  double k1() const noexcept { return k1_; }
  double b() const noexcept { return b_; }

private:
  double k1_ = 1.2;
  double b_ = 0.75;
  std::vector<std::string> ids_;
  std::vector<std::size_t> lengths_;
  double avg_len_ = 0.0;
  std::unordered_map<std::string, std::vector<Posting>> postings_;
};

/// Lowercased tokens split on non-alphanumeric boundaries.
std::vector<std::string> tokenize(std::string_view text);

/// Sorts by (score desc, id asc) and truncates to k.
void rank_entries(std::vector<ScoredDoc> &entries, std::size_t k);

} // namespace ras
