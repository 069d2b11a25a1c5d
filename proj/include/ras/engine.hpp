#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ras/embedding.hpp"
#include "ras/graph_encoder.hpp"
#include "ras/knowledge_graph.hpp"
#include "ras/llm_gateway.hpp"
#include "ras/planner.hpp"
#include "ras/retrieval.hpp"

namespace ras {

// ---------------------------------------------------------------------------
// Pluggable stages

class Retriever {
public:
  virtual ~Retriever() = default;
  virtual RankedDocs search(const std::string &query, std::size_t k) = 0;
};

class DenseRetriever final : public Retriever {
public:
  DenseRetriever(const DenseIndex &index, EmbeddingProvider &embed)
      : index_(index), embed_(embed) {}
  RankedDocs search(const std::string &query, std::size_t k) override {
    return dense_search(index_, query, embed_, k);
  }

private:
  const DenseIndex &index_;
  EmbeddingProvider &embed_;
};

class Bm25Retriever final : public Retriever {
public:
  explicit Bm25Retriever(const Bm25Index &index) : index_(index) {}
  RankedDocs search(const std::string &query, std::size_t k) override {
    return index_.search(query, k);
  }

private:
  const Bm25Index &index_;
};

/// Text-to-triples stage for one passage.
class TripleExtractor {
public:
  virtual ~TripleExtractor() = default;
  virtual TripleList extract(const Document &doc) = 0;
};

/// Asks a model backend for triples and parses its reply.
class GatewayExtractor final : public TripleExtractor {
public:
  GatewayExtractor(Backend &backend, std::string template_text = {},
                   std::size_t max_new_tokens = 512)
      : backend_(backend), template_(std::move(template_text)),
        max_new_tokens_(max_new_tokens) {}
  TripleList extract(const Document &doc) override;
  const ParseDiagnostics &diagnostics() const noexcept { return diag_; }

private:
  Backend &backend_;
  std::string template_;
  std::size_t max_new_tokens_;
  ParseDiagnostics diag_;
};

/// Precomputed triples keyed by document id. Unknown ids yield no triples
/// and are counted in misses().
class SidecarExtractor final : public TripleExtractor {
public:
  SidecarExtractor() = default;
  explicit SidecarExtractor(std::map<std::string, TripleList> triples)
      : triples_(std::move(triples)) {}

  /// Passages file (corpus records) paired line-for-line with a triples file
  /// holding one serialized TripleList per line.
  static SidecarExtractor from_files(const std::filesystem::path &passages,
                                     const std::filesystem::path &triples);

  TripleList extract(const Document &doc) override;
  std::size_t misses() const noexcept { return misses_; }
  void add(std::string id, TripleList triples) {
    triples_[std::move(id)] = std::move(triples);
  }

private:
  std::map<std::string, TripleList> triples_;
  std::size_t misses_ = 0;
};

// ---------------------------------------------------------------------------
// Configuration and trace

enum class RetrieverKind { Dense, Bm25 };
enum class InferenceMode { Dynamic, Static };
enum class PlanFailurePolicy { Answer, Fail };

struct SessionConfig {
  std::size_t max_iterations = 5;
  std::size_t top_k = 5;
  RetrieverKind retriever = RetrieverKind::Dense;
  InferenceMode mode = InferenceMode::Dynamic;
  /// Generation limit passed to every model call. Unset means 0, which the
  /// remote backend rejects.
  std::optional<std::size_t> max_new_tokens;
  bool long_form = false;
  Task task = Task::ShortForm;
  std::size_t history_budget = kDefaultHistoryBudget;
  PlanFailurePolicy on_plan_failure = PlanFailurePolicy::Answer;
  std::string plan_exemplars;
  std::string answer_exemplars;

  void check() const;
  Task answer_task() const noexcept;
  nlohmann::json to_json() const;
};

enum class TraceStatus { Ok, Failed };

struct TraceEvent {
  std::size_t iteration;
  std::string kind;
  std::string detail;
};

struct StageTimings {
  double plan_ms = 0, retrieve_ms = 0, extract_ms = 0, graph_ms = 0,
         answer_ms = 0;
};

struct SessionTrace {
  std::string question;
  InferenceMode mode = InferenceMode::Dynamic;
  std::optional<Plan> initial_plan;
  std::vector<IterationRecord> iterations;
  std::vector<GraphStats> graph_stats; // union counts after each iteration
  GraphStats final_graph_stats;
  std::string answer;
  TraceStatus status = TraceStatus::Ok;
  std::string error;
  std::vector<TraceEvent> events;
  std::size_t plan_calls = 0;
  StageTimings timings;
  nlohmann::json config;
};

/// One line of JSON. Timings are wall-clock and therefore excluded unless
/// requested, which keeps replayed traces byte-identical.
nlohmann::json trace_to_json(const SessionTrace &trace, bool include_timings = false);
std::string serialize_trace(const SessionTrace &trace, bool include_timings = false);

struct SessionResult {
  SessionTrace trace;
  QuestionGraph graph;
  std::optional<GraphToken> token;
};

struct EngineDeps {
  Backend *model = nullptr;               // planner and answerer
  TripleExtractor *extractor = nullptr;   // text-to-triples
  EmbeddingProvider *embedder = nullptr;  // graph element embeddings
  Retriever *retriever = nullptr;         // optional when never retrieving
  const CorpusStore *corpus = nullptr;    // resolves retrieved ids
  const GraphEncoder *encoder = nullptr;  // optional graph token export
};

class Engine {
public:
  Engine(EngineDeps deps, SessionConfig config);

  /// Dynamic run: initial plan, then retrieve -> structure -> merge -> plan
  /// until [SUFFICIENT] or the iteration cap, then answer. When
  /// `initial_context` is non-empty it replaces retrieval for iteration 0.
  SessionResult run_question(const std::string &question,
                             std::span<const Document> initial_context = {});

  /// Static run: one iteration per context set, no planning, then answer.
  SessionResult run_static(const std::string &question,
                           std::span<const std::vector<Document>> contexts);

  const SessionConfig &config() const noexcept { return config_; }

private:
  struct Session;

  void run_iteration(Session &s, const std::string &subquery,
                     std::span<const Document> fixed_context);
  std::optional<Plan> plan(Session &s, bool first);
  void answer(Session &s);
  void finish(Session &s);

  EngineDeps deps_;
  SessionConfig config_;
};

/// Reads passage sets for static runs: corpus-format records with an extra
/// integer "set" field; sets are returned in ascending set order.
std::vector<std::vector<Document>>
read_context_sets(const std::filesystem::path &path);

} // namespace ras
