#include "ras/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <future>
#include <sstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "ras/error.hpp"
#include "text_util.hpp"

namespace ras {

namespace {

bool ranks_before(const ScoredDoc &a, const ScoredDoc &b) {
  if (a.score != b.score)
    return a.score > b.score;
  return a.id < b.id;
}

std::string shard_stem(const std::filesystem::path &dir, std::size_t i) {
  return (dir / ("shard_" + std::to_string(i))).string();
}

} // namespace

std::vector<std::string> tokenize(std::string_view text) {
  return detail::word_tokens(text);
}

void rank_entries(std::vector<ScoredDoc> &entries, std::size_t k) {
  if (entries.size() > k) {
    std::partial_sort(entries.begin(), entries.begin() + static_cast<long>(k),
                      entries.end(), ranks_before);
    entries.resize(k);
  } else {
    std::sort(entries.begin(), entries.end(), ranks_before);
  }
}

void CorpusStore::add(Document doc) {
  if (!by_id_.emplace(doc.id, docs_.size()).second)
    throw InvalidArgument("duplicate document id '" + doc.id + "'");
  docs_.push_back(std::move(doc));
}

const Document *CorpusStore::find(std::string_view id) const {
  auto it = by_id_.find(std::string(id));
  return it == by_id_.end() ? nullptr : &docs_[it->second];
}

CorpusStore ingest_corpus(std::istream &in) {
  CorpusStore store;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty())
      continue;
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception &e) {
      throw FormatError(std::string("malformed corpus record: ") + e.what(),
                        line_no);
    }
    if (!rec.is_object())
      throw FormatError("corpus record must be an object", line_no);
    auto field = [&](const char *name, bool required) -> std::string {
      auto it = rec.find(name);
      if (it == rec.end()) {
        if (required)
          throw FormatError(std::string("missing field '") + name + "'", line_no);
        return {};
      }
      if (!it->is_string())
        throw FormatError(std::string("field '") + name + "' must be a string",
                          line_no);
      return it->get<std::string>();
    };
    Document doc{field("id", true), field("title", false), field("text", true)};
    if (doc.id.empty())
      throw FormatError("empty document id", line_no);
    if (store.find(doc.id))
      throw FormatError("duplicate document id '" + doc.id + "'", line_no);
    store.add(std::move(doc));
  }
  return store;
}

CorpusStore ingest_corpus_file(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in)
    throw Error("cannot open corpus file " + path.string());
  return ingest_corpus(in);
}

DenseIndex DenseIndex::build(const CorpusStore &store, EmbeddingProvider &embed,
                             std::size_t num_shards) {
  if (num_shards == 0)
    throw InvalidArgument("num_shards must be >= 1");
  DenseIndex index;
  index.dim_ = embed.dimension();
  index.shards_.resize(num_shards);

  constexpr std::size_t kBatch = 256;
  std::vector<std::string> texts;
  for (std::size_t begin = 0; begin < store.size(); begin += kBatch) {
    const std::size_t end = std::min(store.size(), begin + kBatch);
    texts.clear();
    for (std::size_t i = begin; i < end; ++i)
      texts.push_back(store.at(i).indexed_text());
    std::vector<Vector> rows;
    try {
      rows = embed.embed(texts);
    } catch (const EmbeddingError &e) {
      throw EmbeddingError(std::string(e.what()) + " (document batch starting at '" +
                               store.at(begin).id + "')",
                           e.text());
    }
    if (rows.size() != texts.size())
      throw EmbeddingError("provider returned the wrong number of vectors",
                           store.at(begin).id);
    for (std::size_t i = begin; i < end; ++i) {
      Vector &row = rows[i - begin];
      if (row.size() != index.dim_)
        throw EmbeddingError("embedding for document '" + store.at(i).id +
                                 "' has dimension " + std::to_string(row.size()),
                             store.at(i).id);
      l2_normalize(row);
      Shard &shard = index.shards_[i % num_shards];
      shard.ids.push_back(store.at(i).id);
      shard.rows.insert(shard.rows.end(), row.begin(), row.end());
    }
  }
  return index;
}

std::size_t DenseIndex::size() const noexcept {
  std::size_t n = 0;
  for (const auto &s : shards_)
    n += s.ids.size();
  return n;
}

RankedDocs DenseIndex::search(std::span<const float> query, std::size_t k,
                              bool parallel) const {
  if (k == 0)
    throw InvalidArgument("k must be >= 1");
  if (query.size() != dim_)
    throw DimensionMismatch("query has dimension " + std::to_string(query.size()) +
                            ", index has " + std::to_string(dim_));

  auto search_shard = [&](const Shard &shard) {
    std::vector<ScoredDoc> hits;
    hits.reserve(shard.ids.size());
    for (std::size_t r = 0; r < shard.ids.size(); ++r) {
      std::span<const float> row(shard.rows.data() + r * dim_, dim_);
      hits.push_back({shard.ids[r], dot(query, row)});
    }
    rank_entries(hits, k);
    return hits;
  };

  std::vector<std::vector<ScoredDoc>> partial(shards_.size());
  if (parallel && shards_.size() > 1 && size() >= 4096) {
    std::vector<std::future<std::vector<ScoredDoc>>> jobs;
    for (const auto &shard : shards_)
      jobs.push_back(std::async(std::launch::async, search_shard, std::cref(shard)));
    for (std::size_t i = 0; i < jobs.size(); ++i)
      partial[i] = jobs[i].get();
  } else {
    for (std::size_t i = 0; i < shards_.size(); ++i)
      partial[i] = search_shard(shards_[i]);
  }

  RankedDocs out;
  out.k = k;
  for (auto &p : partial)
    out.entries.insert(out.entries.end(), std::make_move_iterator(p.begin()),
                       std::make_move_iterator(p.end()));
  rank_entries(out.entries, k);
  return out;
}

void DenseIndex::save(const std::filesystem::path &dir) const {
  std::filesystem::create_directories(dir);
  {
    std::ofstream meta(dir / "index.meta");
    if (!meta)
      throw Error("cannot write index to " + dir.string());
    meta << "shards " << shards_.size() << " dim " << dim_ << "\n";
  }
  for (std::size_t i = 0; i < shards_.size(); ++i) {
    const Shard &shard = shards_[i];
    std::ofstream ids(shard_stem(dir, i) + ".ids");
    for (const auto &id : shard.ids)
      ids << id << "\n";
    std::ofstream data(shard_stem(dir, i) + ".f32", std::ios::binary);
    data << "rows " << shard.ids.size() << " dim " << dim_ << "\n";
    data.write(reinterpret_cast<const char *>(shard.rows.data()),
               static_cast<std::streamsize>(shard.rows.size() * sizeof(float)));
    if (!ids || !data)
      throw Error("failed writing shard " + std::to_string(i));
  }
}

DenseIndex DenseIndex::load(const std::filesystem::path &dir) {
  std::ifstream meta(dir / "index.meta");
  if (!meta)
    throw Error("no dense index at " + dir.string());
  std::string k_shards, k_dim;
  std::size_t num_shards = 0;
  DenseIndex index;
  if (!(meta >> k_shards >> num_shards >> k_dim >> index.dim_) ||
      k_shards != "shards" || k_dim != "dim")
    throw FormatError("bad index.meta in " + dir.string(), 1);
  index.shards_.resize(num_shards);
  std::unordered_set<std::string> seen;
  for (std::size_t i = 0; i < num_shards; ++i) {
    Shard &shard = index.shards_[i];
    std::ifstream ids(shard_stem(dir, i) + ".ids");
    if (!ids)
      throw Error("missing id list for shard " + std::to_string(i));
    std::string id;
    while (std::getline(ids, id)) {
      if (id.empty())
        continue;
      if (!seen.insert(id).second)
        throw FormatError("document '" + id + "' appears in more than one shard");
      shard.ids.push_back(id);
    }
    std::ifstream data(shard_stem(dir, i) + ".f32", std::ios::binary);
    std::string header;
    std::getline(data, header);
    std::istringstream hs(header);
    std::string k_rows, k_d;
    std::size_t rows = 0, d = 0;
    if (!(hs >> k_rows >> rows >> k_d >> d) || k_rows != "rows" || d != index.dim_ ||
        rows != shard.ids.size())
      throw FormatError("bad header for shard " + std::to_string(i), 1);
    shard.rows.resize(rows * d);
    data.read(reinterpret_cast<char *>(shard.rows.data()),
              static_cast<std::streamsize>(shard.rows.size() * sizeof(float)));
    if (static_cast<std::size_t>(data.gcount()) != shard.rows.size() * sizeof(float))
      throw FormatError("truncated data for shard " + std::to_string(i));
  }
  return index;
}

RankedDocs dense_search(const DenseIndex &index, const std::string &query,
                        EmbeddingProvider &embed, std::size_t k) {
  if (k == 0)
    throw InvalidArgument("k must be >= 1");
  if (index.size() == 0)
    return RankedDocs{{}, k};
  Vector q = embed.embed_one(query);
  l2_normalize(q);
  return index.search(q, k);
}

Bm25Index Bm25Index::build(const CorpusStore &store, double k1, double b) {
  Bm25Index index;
  index.k1_ = k1;
  index.b_ = b;
  std::size_t total = 0;
  for (std::size_t d = 0; d < store.size(); ++d) {
    const Document &doc = store.at(d);
    index.ids_.push_back(doc.id);
    const auto tokens = tokenize(doc.indexed_text());
    index.lengths_.push_back(tokens.size());
    total += tokens.size();
    std::unordered_map<std::string, std::size_t> tf;
    for (const auto &t : tokens)
      ++tf[t];
    for (auto &[term, count] : tf)
      index.postings_[term].push_back({d, count});
  }
  index.avg_len_ =
      store.empty() ? 0.0 : static_cast<double>(total) / static_cast<double>(store.size());
  return index;
}

std::size_t Bm25Index::doc_freq(const std::string &term) const {
  auto it = postings_.find(term);
  return it == postings_.end() ? 0 : it->second.size();
}

std::size_t Bm25Index::term_freq(const std::string &term, std::size_t doc) const {
  auto it = postings_.find(term);
  if (it == postings_.end())
    return 0;
  for (const auto &p : it->second)
    if (p.doc == doc)
      return p.tf;
  return 0;
}

double Bm25Index::idf(const std::string &term) const {
  const double n = static_cast<double>(ids_.size());
  const double df = static_cast<double>(doc_freq(term));
  return std::log((n - df + 0.5) / (df + 0.5) + 1.0);
}

RankedDocs Bm25Index::search(std::string_view query, std::size_t k) const {
  if (k == 0)
    throw InvalidArgument("k must be >= 1");
  RankedDocs out;
  out.k = k;
  auto terms = tokenize(query);
  std::sort(terms.begin(), terms.end());
  terms.erase(std::unique(terms.begin(), terms.end()), terms.end());
  if (terms.empty() || ids_.empty())
    return out;

  std::vector<double> scores(ids_.size(), 0.0);
  std::vector<bool> hit(ids_.size(), false);
  for (const auto &term : terms) {
    auto it = postings_.find(term);
    if (it == postings_.end())
      continue;
    const double w = idf(term);
    for (const auto &p : it->second) {
      const double tf = static_cast<double>(p.tf);
      const double len = static_cast<double>(lengths_[p.doc]);
      const double norm = k1_ * (1.0 - b_ + b_ * len / avg_len_);
      scores[p.doc] += w * tf * (k1_ + 1.0) / (tf + norm);
      hit[p.doc] = true;
    }
  }
  for (std::size_t d = 0; d < ids_.size(); ++d)
    if (hit[d] && scores[d] > 0.0)
      out.entries.push_back({ids_[d], scores[d]});
  rank_entries(out.entries, k);
  return out;
}

} // namespace ras
