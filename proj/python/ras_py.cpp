#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "ras/engine.hpp"
#include "ras/evaluation.hpp"
#include "ras/graph_encoder.hpp"
#include "ras/planner.hpp"
#include "ras/triple_codec.hpp"

namespace py = pybind11;
using namespace ras;

namespace {

using TripleTuple = std::tuple<std::string, std::string, std::string>;

TripleList to_triples(const std::vector<TripleTuple> &in) {
  TripleList out;
  for (const auto &[s, p, o] : in)
    out.push_back({s, p, o});
  return out;
}

std::vector<TripleTuple> from_triples(const TripleList &in) {
  std::vector<TripleTuple> out;
  for (const auto &t : in)
    out.emplace_back(t.subject, t.predicate, t.object);
  return out;
}

std::vector<IterationRecord> to_records(
    const std::vector<std::pair<std::string, std::vector<TripleTuple>>> &history) {
  std::vector<IterationRecord> out;
  for (const auto &[q, triples] : history) {
    IterationRecord r;
    r.subquery = q;
    r.triples = to_triples(triples);
    out.push_back(std::move(r));
  }
  return out;
}

CorpusStore to_corpus(const std::vector<std::map<std::string, std::string>> &docs) {
  CorpusStore store;
  for (const auto &d : docs) {
    auto get = [&](const char *key) {
      auto it = d.find(key);
      return it == d.end() ? std::string() : it->second;
    };
    store.add({get("id"), get("title"), get("text")});
  }
  return store;
}

eval::Metric metric_of(const std::string &name) {
  const auto m = eval::parse_metric(name);
  if (!m)
    throw py::value_error("unknown metric '" + name + "'");
  return *m;
}

std::string run_question(const std::string &question, std::vector<std::string> script,
                         const std::vector<std::map<std::string, std::string>> &corpus,
                         const std::map<std::string, std::vector<TripleTuple>> &triples,
                         std::size_t top_k, std::size_t max_iterations,
                         const std::string &retriever, std::size_t embed_dim) {
  const CorpusStore store = to_corpus(corpus);
  SidecarExtractor extractor;
  for (const auto &[id, list] : triples)
    extractor.add(id, to_triples(list));
  HashEmbedder embedder(embed_dim);
  ScriptedBackend model(std::move(script));

  std::optional<Bm25Index> bm25;
  std::optional<DenseIndex> dense;
  std::unique_ptr<Retriever> ret;
  if (!store.empty()) {
    if (retriever == "bm25") {
      bm25 = Bm25Index::build(store);
      ret = std::make_unique<Bm25Retriever>(*bm25);
    } else if (retriever == "dense") {
      dense = DenseIndex::build(store, embedder, 1);
      ret = std::make_unique<DenseRetriever>(*dense, embedder);
    } else {
      throw py::value_error("retriever must be 'dense' or 'bm25'");
    }
  }

  EngineDeps deps;
  deps.model = &model;
  deps.extractor = &extractor;
  deps.embedder = &embedder;
  deps.retriever = ret.get();
  deps.corpus = &store;
  SessionConfig cfg;
  cfg.top_k = top_k;
  cfg.max_iterations = max_iterations;
  cfg.max_new_tokens = 100;
  cfg.retriever = retriever == "bm25" ? RetrieverKind::Bm25 : RetrieverKind::Dense;
  Engine engine(deps, cfg);
  py::gil_scoped_release release;
  return serialize_trace(engine.run_question(question).trace);
}

} // namespace

PYBIND11_MODULE(_ras, m) {
  m.doc() = "Retrieval and graph structuring for question answering";

  py::register_exception<Error>(m, "RasError", PyExc_RuntimeError);

  m.def("parse_triples",
        [](const std::string &text) { return from_triples(parse_triples(text)); },
        py::arg("text"));
  m.def("serialize_triples",
        [](const std::vector<TripleTuple> &t) { return serialize_triples(to_triples(t)); },
        py::arg("triples"));

  m.def("parse_plan",
        [](const std::string &text, bool first) {
          const Plan p = parse_plan(text, first);
          return p.label();
        },
        py::arg("text"), py::arg("first_iteration") = false);
  m.def("assemble_history",
        [](const std::vector<std::pair<std::string, std::vector<TripleTuple>>> &history,
           const std::string &question, std::size_t budget) {
          return assemble_history(to_records(history), question, budget);
        },
        py::arg("history"), py::arg("question"),
        py::arg("token_budget") = kDefaultHistoryBudget);
  m.def("render_plan_prompt",
        [](const std::vector<std::pair<std::string, std::vector<TripleTuple>>> &history,
           const std::string &question) {
          return render_plan_prompt(to_records(history), question).render();
        },
        py::arg("history"), py::arg("question"));
  m.def("render_answer_prompt",
        [](const std::vector<std::pair<std::string, std::vector<TripleTuple>>> &history,
           const std::string &question, bool long_form) {
          return render_answer_prompt(to_records(history), question, long_form).render();
        },
        py::arg("history"), py::arg("question"), py::arg("long_form") = false);

  m.def("normalize_text", &eval::normalize_text, py::arg("text"));
  m.def("golden_match",
        [](const std::string &pred, const std::vector<std::string> &golds) {
          return eval::golden_match(pred, golds);
        },
        py::arg("prediction"), py::arg("golds"));
  m.def("token_f1",
        [](const std::string &pred, const std::string &gold) {
          return eval::token_f1(pred, gold);
        },
        py::arg("prediction"), py::arg("gold"));
  m.def("rouge_l",
        [](const std::string &pred, const std::vector<std::string> &refs) {
          return eval::rouge_l(pred, refs);
        },
        py::arg("prediction"), py::arg("references"));
  m.def("rouge_lsum",
        [](const std::string &pred, const std::vector<std::string> &refs) {
          return eval::rouge_lsum(pred, refs);
        },
        py::arg("prediction"), py::arg("references"));
  m.def("_evaluate",
        [](const std::string &metric,
           const std::vector<std::pair<std::string, std::string>> &preds,
           const std::vector<std::pair<std::string, std::vector<std::string>>> &refs,
           std::size_t workers) {
          std::vector<eval::Prediction> p;
          for (const auto &[id, text] : preds)
            p.push_back({id, text});
          std::vector<eval::Reference> r;
          for (const auto &[id, texts] : refs)
            r.push_back({id, texts});
          py::gil_scoped_release release;
          return eval::evaluate(metric_of(metric), p, r, workers).to_json().dump();
        },
        py::arg("metric"), py::arg("predictions"), py::arg("references"),
        py::arg("workers") = 1);

  m.def("search",
        [](const std::vector<std::map<std::string, std::string>> &corpus,
           const std::string &query, std::size_t k, const std::string &retriever,
           std::size_t embed_dim, std::size_t shards) {
          const CorpusStore store = to_corpus(corpus);
          RankedDocs res;
          if (retriever == "bm25") {
            res = Bm25Index::build(store).search(query, k);
          } else if (retriever == "dense") {
            HashEmbedder embed(embed_dim);
            res = dense_search(DenseIndex::build(store, embed, shards), query, embed, k);
          } else {
            throw py::value_error("retriever must be 'dense' or 'bm25'");
          }
          std::vector<std::pair<std::string, double>> out;
          for (const auto &e : res.entries)
            out.emplace_back(e.id, e.score);
          return out;
        },
        py::arg("corpus"), py::arg("query"), py::arg("k") = 5,
        py::arg("retriever") = "bm25", py::arg("embed_dim") = 64, py::arg("shards") = 5);

  m.def("encode_triples",
        [](const std::vector<TripleTuple> &triples, std::size_t dim, std::size_t layers) {
          HashEmbedder embed(dim);
          EncoderParams p;
          p.layers = layers;
          p.dimension = dim;
          return encode_subgraph(build_subgraph(to_triples(triples), embed, 0), p);
        },
        py::arg("triples"), py::arg("dimension") = 64, py::arg("layers") = 3);

  m.def("_run_question", &run_question, py::arg("question"), py::arg("script"),
        py::arg("corpus"), py::arg("triples"), py::arg("top_k") = 5,
        py::arg("max_iterations") = 5, py::arg("retriever") = "bm25",
        py::arg("embed_dim") = 64);
}
