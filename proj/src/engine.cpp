#include "ras/engine.hpp"

#include <fstream>

#include "text_util.hpp"

namespace ras {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point since) {
  return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

const char *to_string(RetrieverKind k) {
  return k == RetrieverKind::Dense ? "dense" : "bm25";
}
const char *to_string(InferenceMode m) {
  return m == InferenceMode::Dynamic ? "dynamic" : "static";
}
const char *to_string(PlanFailurePolicy p) {
  return p == PlanFailurePolicy::Answer ? "answer" : "fail";
}

nlohmann::json stats_json(const GraphStats &s) {
  return {{"nodes", s.nodes}, {"edges", s.edges}, {"subgraphs", s.subgraphs}};
}

nlohmann::json triples_json(const TripleList &triples) {
  auto out = nlohmann::json::array();
  for (const auto &t : triples)
    out.push_back({t.subject, t.predicate, t.object});
  return out;
}

} // namespace

// ---------------------------------------------------------------------------

TripleList GatewayExtractor::extract(const Document &doc) {
  const auto prompt = render_extraction_prompt(doc.indexed_text(), template_);
  return parse_triples(backend_.complete(prompt, max_new_tokens_), &diag_);
}

SidecarExtractor SidecarExtractor::from_files(const std::filesystem::path &passages,
                                              const std::filesystem::path &triples) {
  const CorpusStore store = ingest_corpus_file(passages);
  std::ifstream in(triples);
  if (!in)
    throw Error("cannot open triples file " + triples.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line))
    lines.push_back(line);
  // The passages reader skips blank lines, so drop a trailing empty line only.
  while (lines.size() > store.size() && lines.back().empty())
    lines.pop_back();
  if (lines.size() != store.size())
    throw FormatError("triples file has " + std::to_string(lines.size()) +
                      " lines but passages file has " +
                      std::to_string(store.size()) + " records");
  SidecarExtractor out;
  for (std::size_t i = 0; i < store.size(); ++i)
    out.add(store.at(i).id, parse_triples(lines[i]));
  return out;
}

TripleList SidecarExtractor::extract(const Document &doc) {
  auto it = triples_.find(doc.id);
  if (it == triples_.end()) {
    ++misses_;
    return {};
  }
  return it->second;
}

// ---------------------------------------------------------------------------

void SessionConfig::check() const {
  if (max_iterations < 1)
    throw InvalidArgument("max_iterations must be >= 1");
  if (top_k < 1)
    throw InvalidArgument("top_k must be >= 1");
}

Task SessionConfig::answer_task() const noexcept {
  if (long_form && !is_long_form(task))
    return Task::Eli5;
  return task;
}

nlohmann::json SessionConfig::to_json() const {
  nlohmann::json j;
  j["max_iterations"] = max_iterations;
  j["top_k"] = top_k;
  j["retriever"] = to_string(retriever);
  j["mode"] = to_string(mode);
  j["max_new_tokens"] =
      max_new_tokens ? nlohmann::json(*max_new_tokens) : nlohmann::json(nullptr);
  j["long_form"] = long_form;
  j["task"] = ras::to_string(task);
  j["history_budget"] = history_budget;
  j["on_plan_failure"] = to_string(on_plan_failure);
  j["plan_exemplars"] = plan_exemplars;
  j["answer_exemplars"] = answer_exemplars;
  return j;
}

nlohmann::json trace_to_json(const SessionTrace &trace, bool include_timings) {
  nlohmann::json j;
  j["question"] = trace.question;
  j["mode"] = to_string(trace.mode);
  j["status"] = trace.status == TraceStatus::Ok ? "ok" : "failed";
  j["error"] = trace.error;
  j["initial_plan"] = trace.initial_plan ? nlohmann::json(trace.initial_plan->label())
                                         : nlohmann::json(nullptr);
  auto &iters = j["iterations"] = nlohmann::json::array();
  for (std::size_t i = 0; i < trace.iterations.size(); ++i) {
    const auto &rec = trace.iterations[i];
    nlohmann::json r;
    r["index"] = i;
    r["subquery"] = rec.subquery;
    auto &ret = r["retrieved"] = nlohmann::json::array();
    for (const auto &e : rec.retrieved.entries)
      ret.push_back({{"id", e.id}, {"score", e.score}});
    r["k"] = rec.retrieved.k;
    r["passages"] = rec.passages;
    r["triples"] = triples_json(rec.triples);
    r["plan_after"] =
        rec.plan_after ? nlohmann::json(rec.plan_after->label()) : nlohmann::json(nullptr);
    if (i < trace.graph_stats.size())
      r["graph"] = stats_json(trace.graph_stats[i]);
    iters.push_back(std::move(r));
  }
  j["final_graph"] = stats_json(trace.final_graph_stats);
  j["answer"] = trace.answer;
  auto &events = j["events"] = nlohmann::json::array();
  for (const auto &e : trace.events)
    events.push_back(
        {{"iteration", e.iteration}, {"kind", e.kind}, {"detail", e.detail}});
  j["plan_calls"] = trace.plan_calls;
  j["config"] = trace.config;
  if (include_timings)
    j["timings_ms"] = {{"plan", trace.timings.plan_ms},
                       {"retrieve", trace.timings.retrieve_ms},
                       {"extract", trace.timings.extract_ms},
                       {"graph", trace.timings.graph_ms},
                       {"answer", trace.timings.answer_ms}};
  return j;
}

std::string serialize_trace(const SessionTrace &trace, bool include_timings) {
  return trace_to_json(trace, include_timings).dump();
}

// ---------------------------------------------------------------------------

struct Engine::Session {
  SessionTrace trace;
  QuestionGraph graph;
  std::optional<GraphToken> token;
};

Engine::Engine(EngineDeps deps, SessionConfig config)
    : deps_(deps), config_(std::move(config)) {
  config_.check();
  if (!deps_.model)
    throw InvalidArgument("engine requires a model backend");
  if (!deps_.extractor)
    throw InvalidArgument("engine requires a triple extractor");
  if (!deps_.embedder)
    throw InvalidArgument("engine requires an embedding provider");
}

std::optional<Plan> Engine::plan(Session &s, bool first) {
  const auto &question = s.trace.question;
  const auto prompt = render_plan_prompt(
      s.trace.iterations, question, {config_.history_budget, config_.plan_exemplars});
  const auto start = Clock::now();
  ++s.trace.plan_calls;
  const std::string reply =
      deps_.model->complete(prompt, config_.max_new_tokens.value_or(0));
  s.trace.timings.plan_ms += elapsed_ms(start);
  try {
    return parse_plan(reply, first);
  } catch (const PlanError &e) {
    // The first retrieval always uses the main question, so a bare [SUBQ]
    // is complete there.
    if (first && e.reason() == PlanError::Reason::EmptySubquery)
      return Plan{Plan::Kind::SubQ, question};
    if (config_.on_plan_failure == PlanFailurePolicy::Fail)
      throw;
    s.trace.events.push_back(
        {s.trace.iterations.size(), "degraded_plan", to_string(e.reason())});
    return std::nullopt;
  }
}

void Engine::run_iteration(Session &s, const std::string &subquery,
                           std::span<const Document> fixed_context) {
  IterationRecord rec;
  rec.subquery = subquery;

  std::vector<const Document *> docs;
  auto start = Clock::now();
  if (!fixed_context.empty()) {
    rec.retrieved.k = fixed_context.size();
    for (const auto &d : fixed_context) {
      rec.retrieved.entries.push_back({d.id, 0.0});
      docs.push_back(&d);
    }
  } else {
    if (!deps_.retriever || !deps_.corpus)
      throw Error("retrieval requested but no corpus/retriever is configured");
    rec.retrieved = deps_.retriever->search(subquery, config_.top_k);
    for (const auto &e : rec.retrieved.entries) {
      const Document *d = deps_.corpus->find(e.id);
      if (!d)
        throw Error("retrieved id '" + e.id + "' is not in the corpus");
      docs.push_back(d);
    }
  }
  s.trace.timings.retrieve_ms += elapsed_ms(start);

  start = Clock::now();
  for (const Document *d : docs) {
    rec.passages.push_back(d->indexed_text());
    auto triples = deps_.extractor->extract(*d);
    rec.triples.insert(rec.triples.end(), std::make_move_iterator(triples.begin()),
                       std::make_move_iterator(triples.end()));
  }
  s.trace.timings.extract_ms += elapsed_ms(start);

  start = Clock::now();
  s.graph.merge(build_subgraph(rec.triples, *deps_.embedder, s.trace.iterations.size()));
  s.trace.timings.graph_ms += elapsed_ms(start);

  s.trace.iterations.push_back(std::move(rec));
  s.trace.graph_stats.push_back(s.graph.stats());
}

void Engine::answer(Session &s) {
  AnswerPromptOptions options;
  options.task = config_.answer_task();
  options.history_budget = config_.history_budget;
  options.exemplars = config_.answer_exemplars;
  const auto prompt =
      render_answer_prompt(s.trace.iterations, s.trace.question, options);
  const auto start = Clock::now();
  const std::string reply =
      deps_.model->complete(prompt, config_.max_new_tokens.value_or(0));
  s.trace.timings.answer_ms += elapsed_ms(start);
  s.trace.answer = std::string(detail::trim(reply));
  if (s.trace.answer.empty())
    throw Error("model returned an empty answer");
}

void Engine::finish(Session &s) {
  s.trace.final_graph_stats = s.graph.stats();
  if (deps_.encoder && s.trace.status == TraceStatus::Ok) {
    try {
      s.token = deps_.encoder->encode(s.graph);
    } catch (const std::exception &e) {
      s.trace.events.push_back({s.trace.iterations.size(), "graph_token_failed", e.what()});
    }
  }
}

SessionResult Engine::run_question(const std::string &question,
                                   std::span<const Document> initial_context) {
  if (detail::trim(question).empty())
    throw InvalidArgument("question must be non-empty");
  Session s;
  s.trace.question = question;
  s.trace.mode = InferenceMode::Dynamic;
  s.trace.config = config_.to_json();

  try {
    const auto p0 = plan(s, true);
    s.trace.initial_plan = p0;
    if (p0 && p0->kind != Plan::Kind::NoRetrieval) {
      if (p0->kind == Plan::Kind::Sufficient)
        s.trace.events.push_back({0, "initial_sufficient", "retrieving with the main question"});
      std::string subquery = question;
      for (;;) {
        run_iteration(s, subquery,
                      s.trace.iterations.empty() ? initial_context
                                                 : std::span<const Document>{});
        if (s.trace.iterations.size() >= config_.max_iterations) {
          s.trace.events.push_back(
              {s.trace.iterations.size(), "iteration_cap", "forced answering"});
          break;
        }
        const auto next = plan(s, false);
        s.trace.iterations.back().plan_after = next;
        if (!next || next->kind != Plan::Kind::SubQ)
          break;
        subquery = next->subquery;
      }
    }
    answer(s);
  } catch (const std::exception &e) {
    s.trace.status = TraceStatus::Failed;
    s.trace.error = e.what();
  }
  finish(s);
  return {std::move(s.trace), std::move(s.graph), std::move(s.token)};
}

SessionResult Engine::run_static(const std::string &question,
                                 std::span<const std::vector<Document>> contexts) {
  if (detail::trim(question).empty())
    throw InvalidArgument("question must be non-empty");
  if (contexts.empty())
    throw InvalidArgument("static inference requires at least one context set");
  if (contexts.size() > config_.max_iterations)
    throw InvalidArgument("static inference got " + std::to_string(contexts.size()) +
                          " context sets but max_iterations is " +
                          std::to_string(config_.max_iterations));
  Session s;
  s.trace.question = question;
  s.trace.mode = InferenceMode::Static;
  s.trace.config = config_.to_json();
  try {
    for (const auto &set : contexts) {
      if (set.empty())
        throw InvalidArgument("static context set " +
                              std::to_string(s.trace.iterations.size()) + " is empty");
      run_iteration(s, question, set);
    }
    answer(s);
  } catch (const std::exception &e) {
    s.trace.status = TraceStatus::Failed;
    s.trace.error = e.what();
  }
  finish(s);
  return {std::move(s.trace), std::move(s.graph), std::move(s.token)};
}

std::vector<std::vector<Document>>
read_context_sets(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in)
    throw Error("cannot open context file " + path.string());
  std::map<long long, std::vector<Document>> sets;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty())
      continue;
    const auto rec = nlohmann::json::parse(line, nullptr, false);
    if (!rec.is_object() || !rec.contains("id") || !rec["id"].is_string() ||
        !rec.contains("text") || !rec["text"].is_string())
      throw FormatError("context record needs string fields id and text", line_no);
    long long set = 0;
    if (rec.contains("set")) {
      if (!rec["set"].is_number_integer())
        throw FormatError("field 'set' must be an integer", line_no);
      set = rec["set"].get<long long>();
    }
    sets[set].push_back({rec["id"].get<std::string>(),
                         rec.value("title", std::string()),
                         rec["text"].get<std::string>()});
  }
  std::vector<std::vector<Document>> out;
  for (auto &[_, docs] : sets)
    out.push_back(std::move(docs));
  return out;
}

} // namespace ras
