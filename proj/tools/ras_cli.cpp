#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "ras/config.hpp"
#include "ras/dataset_builder.hpp"
#include "ras/engine.hpp"
#include "ras/evaluation.hpp"
#include "ras/graph_encoder.hpp"
#include "ras/retrieval.hpp"

namespace fs = std::filesystem;
using namespace ras;

namespace {

struct Runtime {
  CliConfig cfg;
  std::unique_ptr<Backend> model;
  std::unique_ptr<Backend> extractor_model;
  std::unique_ptr<EmbeddingProvider> embedder;
  std::optional<CorpusStore> corpus;
  std::optional<DenseIndex> dense;
  std::optional<Bm25Index> bm25;
  std::unique_ptr<Retriever> retriever;
  std::unique_ptr<TripleExtractor> extractor;
  std::optional<MessagePassingEncoder> encoder;
};

std::string read_optional(const std::string &path) {
  return path.empty() ? std::string() : read_text_file(path);
}

std::unique_ptr<Backend> make_backend(const CliConfig &cfg, const std::string &script,
                                      const char *field) {
  if (cfg.backend == BackendKind::Scripted) {
    if (script.empty())
      throw ConfigError("resolved config", field,
                        "required for the scripted backend");
    return std::make_unique<ScriptedBackend>(
        ScriptedBackend::parse_script(read_text_file(script)));
  }
  if (cfg.remote.endpoint.empty())
    throw ConfigError("resolved config", "endpoint",
                      "required for the remote backend (set RAS_ENDPOINT)");
  return std::make_unique<RemoteBackend>(cfg.remote);
}

std::unique_ptr<EmbeddingProvider> make_embedder(const CliConfig &cfg) {
  if (cfg.embedder == EmbedderKind::Remote) {
    if (cfg.embed_endpoint.empty())
      throw ConfigError("resolved config", "embed_endpoint",
                        "required for the remote embedder");
    return std::make_unique<RemoteEmbedder>(cfg.embed_endpoint, cfg.embed_dim,
                                            cfg.remote.api_key,
                                            cfg.remote.timeout_seconds);
  }
  return std::make_unique<HashEmbedder>(cfg.embed_dim, cfg.seed);
}

void load_corpus(Runtime &rt) {
  if (rt.cfg.corpus.empty())
    throw ConfigError("resolved config", "corpus", "required by this command");
  rt.corpus = ingest_corpus_file(rt.cfg.corpus);
}

void make_retriever(Runtime &rt) {
  load_corpus(rt);
  if (rt.cfg.session.retriever == RetrieverKind::Bm25) {
    rt.bm25 = Bm25Index::build(*rt.corpus);
    rt.retriever = std::make_unique<Bm25Retriever>(*rt.bm25);
    return;
  }
  if (!rt.cfg.index_dir.empty() && fs::exists(fs::path(rt.cfg.index_dir) / "index.meta")) {
    rt.dense = DenseIndex::load(rt.cfg.index_dir);
    if (rt.dense->dimension() != rt.embedder->dimension())
      throw ConfigError("resolved config", "embed_dim",
                        "index dimension " + std::to_string(rt.dense->dimension()) +
                            " differs from the embedder");
  } else {
    rt.dense = DenseIndex::build(*rt.corpus, *rt.embedder, rt.cfg.shards);
  }
  rt.retriever = std::make_unique<DenseRetriever>(*rt.dense, *rt.embedder);
}

void make_extractor(Runtime &rt) {
  if (!rt.cfg.triples.empty()) {
    if (rt.cfg.corpus.empty())
      throw ConfigError("resolved config", "corpus",
                        "required to pair the triples file");
    rt.extractor = std::make_unique<SidecarExtractor>(
        SidecarExtractor::from_files(rt.cfg.corpus, rt.cfg.triples));
    return;
  }
  Backend *backend = rt.model.get();
  if (!rt.cfg.extractor_script.empty() || !backend) {
    rt.extractor_model =
        make_backend(rt.cfg, rt.cfg.extractor_script, "extractor_script");
    backend = rt.extractor_model.get();
  }
  rt.extractor = std::make_unique<GatewayExtractor>(
      *backend, read_optional(rt.cfg.extract_template));
}

void finalize_session(CliConfig &cfg) {
  if (!cfg.session.max_new_tokens)
    cfg.session.max_new_tokens = max_new_tokens_for(cfg.session.task);
  cfg.session.plan_exemplars = read_optional(cfg.plan_exemplars_file);
  cfg.session.answer_exemplars = read_optional(cfg.answer_exemplars_file);
}

// ---------------------------------------------------------------------------

struct AskArgs {
  std::string question;
  std::string contexts;
  std::string out;
  std::string graph_out;
  std::string token_out;
  bool timings = false;
};

int cmd_ask(CliConfig cfg, const AskArgs &args) {
  if (args.question.empty())
    throw ConfigError("flags", "question", "required");
  Runtime rt;
  finalize_session(cfg);
  rt.cfg = cfg;
  rt.model = make_backend(rt.cfg, rt.cfg.script, "script");
  rt.embedder = make_embedder(rt.cfg);
  if (!rt.cfg.corpus.empty())
    make_retriever(rt);
  make_extractor(rt);
  if (!rt.cfg.encoder_params.empty())
    rt.encoder.emplace(load_encoder_params(rt.cfg.encoder_params));
  else if (!args.token_out.empty())
    rt.encoder.emplace(EncoderParams{3, rt.embedder->dimension(), {}});

  EngineDeps deps;
  deps.model = rt.model.get();
  deps.extractor = rt.extractor.get();
  deps.embedder = rt.embedder.get();
  deps.retriever = rt.retriever.get();
  deps.corpus = rt.corpus ? &*rt.corpus : nullptr;
  deps.encoder = rt.encoder ? &*rt.encoder : nullptr;
  Engine engine(deps, rt.cfg.session);

  SessionResult result;
  if (rt.cfg.session.mode == InferenceMode::Static) {
    if (args.contexts.empty())
      throw ConfigError("flags", "contexts", "required in static mode");
    const auto sets = read_context_sets(args.contexts);
    result = engine.run_static(args.question, sets);
  } else {
    result = engine.run_question(args.question);
  }
  result.trace.config = rt.cfg.snapshot();

  if (!args.out.empty()) {
    std::ofstream out(args.out, std::ios::app);
    if (!out)
      throw Error("cannot write " + args.out);
    out << serialize_trace(result.trace, args.timings) << '\n';
  }
  if (!args.graph_out.empty()) {
    std::ofstream out(args.graph_out + ".json");
    out << result.graph.to_json().dump() << '\n';
    result.graph.write_embeddings(args.graph_out);
  }
  if (!args.token_out.empty() && result.token)
    append_graph_token(args.token_out, result.token->vector);

  if (result.trace.status != TraceStatus::Ok) {
    std::cerr << "error: " << result.trace.error << '\n';
    return 1;
  }
  std::cout << result.trace.answer << '\n';
  return 0;
}

int cmd_index_build(const CliConfig &cfg) {
  if (cfg.index_dir.empty())
    throw ConfigError("resolved config", "index_dir", "required by index build");
  Runtime rt;
  rt.cfg = cfg;
  rt.embedder = make_embedder(cfg);
  load_corpus(rt);
  const auto index = DenseIndex::build(*rt.corpus, *rt.embedder, cfg.shards);
  index.save(cfg.index_dir);
  std::cout << "indexed " << index.size() << " documents into "
            << index.num_shards() << " shards (dim " << index.dimension()
            << ")\n";
  return 0;
}

struct EvalArgs {
  std::string predictions, references, metric = "golden_match", out;
};

int cmd_eval(const CliConfig &cfg, const EvalArgs &args) {
  const auto metric = eval::parse_metric(args.metric);
  if (!metric)
    throw ConfigError("flags", "metric", "unknown metric '" + args.metric + "'");
  if (args.predictions.empty() || args.references.empty())
    throw ConfigError("flags", "predictions",
                      "--predictions and --references are required");
  const auto report =
      eval::run_eval(args.predictions, args.references, *metric, cfg.workers);
  if (!args.out.empty()) {
    std::ofstream out(args.out);
    if (!out)
      throw Error("cannot write " + args.out);
    out << report.to_json().dump(2) << '\n';
  }
  if (!report.available) {
    std::cout << eval::to_string(*metric) << ": unavailable\n";
    return 1;
  }
  std::cout << eval::to_string(*metric) << ": " << report.aggregate
            << " (N=" << report.evaluated()
            << ", failed=" << report.failed_ids.size() << ")\n";
  return 0;
}

struct DatasetArgs {
  std::string input, planner_out, answers_out, stats_out;
  bool filter = false;
};

void write_stats(const dataset::DatasetStats &stats, const std::string &path) {
  const auto j = stats.to_json();
  if (!path.empty()) {
    std::ofstream out(path);
    out << j.dump(2) << '\n';
  }
  std::cout << j.dump(2) << '\n';
}

int cmd_dataset_build(const CliConfig &cfg, const DatasetArgs &args) {
  if (args.input.empty() || args.planner_out.empty() || args.answers_out.empty())
    throw ConfigError("flags", "input",
                      "--input, --planner-out and --answers-out are required");
  const auto entries = dataset::read_source_file(args.input);
  auto model = make_backend(cfg, cfg.script, "script");
  std::unique_ptr<Backend> extractor_model;
  Backend *extractor_backend = model.get();
  if (!cfg.extractor_script.empty()) {
    extractor_model = make_backend(cfg, cfg.extractor_script, "extractor_script");
    extractor_backend = extractor_model.get();
  }
  GatewayExtractor extractor(*extractor_backend, read_optional(cfg.extract_template));

  dataset::Gateways gw;
  gw.base = model.get();
  gw.generator = model.get();
  gw.extractor = &extractor;
  gw.filter = args.filter ? model.get() : nullptr;
  dataset::BuildOptions options;
  options.workers = cfg.workers;
  options.history_budget = cfg.session.history_budget;

  const auto result = dataset::build_dataset(entries, gw, options);
  {
    std::ofstream p(args.planner_out), a(args.answers_out);
    if (!p || !a)
      throw Error("cannot write dataset outputs");
    dataset::write_planner(p, result.planner);
    dataset::write_answers(a, result.answers);
  }
  for (const auto &issue : result.issues)
    std::cerr << "entry " << issue.entry << ": " << issue.kind << ": "
              << issue.detail << '\n';
  std::cout << "entries " << result.entries_used << "/" << result.entries_in
            << ", planner samples " << result.planner.size()
            << ", answer samples " << result.answers.size() << '\n';
  if (!args.stats_out.empty())
    write_stats(dataset::compute_stats(fs::path(args.planner_out),
                                       fs::path(args.answers_out)),
                args.stats_out);
  return 0;
}

int cmd_dataset_stats(const DatasetArgs &args) {
  if (args.planner_out.empty() || args.answers_out.empty())
    throw ConfigError("flags", "planner",
                      "--planner and --answers are required");
  write_stats(dataset::compute_stats(fs::path(args.planner_out),
                                     fs::path(args.answers_out)),
              args.stats_out);
  return 0;
}

int cmd_triples_extract(const CliConfig &cfg, const std::string &out_path) {
  if (out_path.empty())
    throw ConfigError("flags", "out", "required by triples extract");
  Runtime rt;
  rt.cfg = cfg;
  rt.cfg.triples.clear();
  if (rt.cfg.extractor_script.empty())
    rt.cfg.extractor_script = rt.cfg.script;
  load_corpus(rt);
  make_extractor(rt);
  std::ofstream out(out_path);
  if (!out)
    throw Error("cannot write " + out_path);
  std::size_t total = 0;
  for (const auto &doc : rt.corpus->documents()) {
    const auto triples = rt.extractor->extract(doc);
    total += triples.size();
    out << serialize_triples(triples) << '\n';
  }
  std::cout << "extracted " << total << " triples from " << rt.corpus->size()
            << " passages\n";
  return 0;
}

// History records: {"subquery": "...", "triples": "(S> ...| P> ...| O> ...)"}
std::vector<IterationRecord> read_history(const std::string &path) {
  std::vector<IterationRecord> out;
  if (path.empty())
    return out;
  std::ifstream in(path);
  if (!in)
    throw Error("cannot open " + path);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos)
      continue;
    const auto rec = nlohmann::json::parse(line, nullptr, false);
    if (!rec.is_object() || !rec.contains("subquery") || !rec["subquery"].is_string())
      throw FormatError("history record needs a subquery", line_no);
    IterationRecord r;
    r.subquery = rec["subquery"].get<std::string>();
    if (rec.contains("triples") && rec["triples"].is_string())
      r.triples = parse_triples(rec["triples"].get<std::string>());
    out.push_back(std::move(r));
  }
  return out;
}

int cmd_plan_step(CliConfig cfg, const std::string &question,
                  const std::string &history_path, bool show_prompt) {
  if (question.empty())
    throw ConfigError("flags", "question", "required");
  finalize_session(cfg);
  auto model = make_backend(cfg, cfg.script, "script");
  const auto history = read_history(history_path);
  const auto prompt = render_plan_prompt(
      history, question, {cfg.session.history_budget, cfg.session.plan_exemplars});
  if (show_prompt)
    std::cerr << prompt.render() << '\n';
  const std::string reply = model->complete(prompt, *cfg.session.max_new_tokens);
  const Plan plan = parse_plan(reply, history.empty());
  std::cout << plan.label() << '\n';
  return 0;
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Iterative retrieval and graph structuring for question answering"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  app.add_option("--config", config_path, "JSON config file");
  std::map<std::string, std::string> flag_values;
  std::map<std::string, CLI::Option *> flag_options;
  for (const auto &f : config_fields()) {
    std::string flag = "--" + f.name;
    for (auto &c : flag)
      if (c == '_')
        c = '-';
    std::string help = f.help;
    if (!f.env.empty())
      help += " [" + f.env + "]";
    flag_options[f.name] = app.add_option(flag, flag_values[f.name], help);
  }

  auto *index = app.add_subcommand("index", "Dense index management");
  index->require_subcommand(1);
  auto *index_build = index->add_subcommand("build", "Embed a corpus and save the index");

  AskArgs ask_args;
  auto *ask = app.add_subcommand("ask", "Answer one question");
  ask->add_option("--question,-q", ask_args.question, "question text")->required();
  ask->add_option("--contexts", ask_args.contexts,
                  "passage sets for static mode (JSONL with a \"set\" field)");
  ask->add_option("--out", ask_args.out, "append the session trace to this file");
  ask->add_option("--graph-out", ask_args.graph_out,
                  "write the question graph to <stem>.json/.f32/.hdr");
  ask->add_option("--token-out", ask_args.token_out,
                  "append the graph token as float32");
  ask->add_flag("--timings", ask_args.timings, "include stage timings in the trace");

  EvalArgs eval_args;
  auto *eval_cmd = app.add_subcommand("eval", "Scoring");
  eval_cmd->require_subcommand(1);
  auto *eval_run = eval_cmd->add_subcommand("run", "Score predictions against references");
  eval_run->add_option("--predictions", eval_args.predictions)->required();
  eval_run->add_option("--references", eval_args.references)->required();
  eval_run->add_option("--metric", eval_args.metric,
                       "golden_match, token_f1, accuracy, rouge_l, rouge_lsum, mauve");
  eval_run->add_option("--out", eval_args.out, "JSON report path");

  DatasetArgs ds_args;
  auto *ds = app.add_subcommand("dataset", "Planner/answerer training data");
  ds->require_subcommand(1);
  auto *ds_build = ds->add_subcommand("build", "Label samples from source entries");
  ds_build->add_option("--input", ds_args.input, "source JSONL")->required();
  ds_build->add_option("--planner-out", ds_args.planner_out)->required();
  ds_build->add_option("--answers-out", ds_args.answers_out)->required();
  ds_build->add_option("--stats-out", ds_args.stats_out);
  ds_build->add_flag("--filter", ds_args.filter,
                     "ask the model which documents are helpful first");
  auto *ds_stats = ds->add_subcommand("stats", "Statistics of built files");
  ds_stats->add_option("--planner", ds_args.planner_out)->required();
  ds_stats->add_option("--answers", ds_args.answers_out)->required();
  ds_stats->add_option("--out", ds_args.stats_out);

  std::string triples_out;
  auto *triples = app.add_subcommand("triples", "Triple extraction");
  triples->require_subcommand(1);
  auto *triples_extract =
      triples->add_subcommand("extract", "Extract triples for every corpus passage");
  triples_extract->add_option("--out", triples_out, "one serialized line per passage")
      ->required();

  std::string plan_question, plan_history;
  bool show_prompt = false;
  auto *plan = app.add_subcommand("plan", "Planner debugging");
  plan->require_subcommand(1);
  auto *plan_step = plan->add_subcommand("step", "Run a single plan call");
  plan_step->add_option("--question,-q", plan_question)->required();
  plan_step->add_option("--history", plan_history,
                        "JSONL records {subquery, triples}");
  plan_step->add_flag("--show-prompt", show_prompt, "print the prompt to stderr");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    if (e.get_exit_code() == 0)
      return app.exit(e);
    std::cerr << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    std::map<std::string, std::string> flags;
    for (const auto &[name, opt] : flag_options)
      if (opt->count() > 0)
        flags[name] = flag_values[name];
    std::optional<fs::path> file;
    if (!config_path.empty())
      file = config_path;
    const CliConfig cfg = resolve_config(file, process_environment(), flags);

    if (*index_build)
      return cmd_index_build(cfg);
    if (*ask)
      return cmd_ask(cfg, ask_args);
    if (*eval_run)
      return cmd_eval(cfg, eval_args);
    if (*ds_build)
      return cmd_dataset_build(cfg, ds_args);
    if (*ds_stats)
      return cmd_dataset_stats(ds_args);
    if (*triples_extract)
      return cmd_triples_extract(cfg, triples_out);
    if (*plan_step)
      return cmd_plan_step(cfg, plan_question, plan_history, show_prompt);
  } catch (const ConfigError &e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  std::cerr << app.help();
  return 2;
}
