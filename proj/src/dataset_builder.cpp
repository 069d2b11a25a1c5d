#include "ras/dataset_builder.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <set>
#include <thread>

#include "ras/evaluation.hpp"
#include "ras/knowledge_graph.hpp"
#include "ras/prompts.hpp"
#include "text_util.hpp"

namespace ras::dataset {

namespace {

constexpr std::string_view kGraphPrefix = "Retrieved Graph Information: ";

void replace_all(std::string &s, std::string_view from, std::string_view to) {
  for (auto pos = s.find(from); pos != std::string::npos;
       pos = s.find(from, pos + to.size()))
    s.replace(pos, from.size(), to);
}

bool has_digit(std::string_view s) {
  return std::any_of(s.begin(), s.end(),
                     [](char c) { return c >= '0' && c <= '9'; });
}

std::string field_string(const nlohmann::json &rec, const char *key,
                         std::size_t line_no) {
  auto it = rec.find(key);
  if (it == rec.end() || !it->is_string())
    throw FormatError(std::string("record needs string field '") + key + "'",
                      line_no);
  return it->get<std::string>();
}

} // namespace

FilterResult parse_filter_reply(std::string_view reply, std::size_t num_docs) {
  FilterResult out;
  std::string_view line;
  for (auto l : detail::split_lines(reply))
    if (has_digit(l)) {
      line = l;
      break;
    }
  if (line.empty()) {
    out.needs_review = true;
    return out;
  }
  line = detail::trim(line);
  if (line.starts_with("Output:"))
    line.remove_prefix(7);

  std::set<std::size_t> kept;
  std::size_t i = 0;
  bool any = false;
  while (i < line.size()) {
    if (line[i] < '0' || line[i] > '9') {
      ++i;
      continue;
    }
    std::size_t value = 0;
    while (i < line.size() && line[i] >= '0' && line[i] <= '9') {
      value = value * 10 + static_cast<std::size_t>(line[i] - '0');
      ++i;
    }
    any = true;
    if (value >= 1 && value <= num_docs)
      kept.insert(value - 1);
    else
      out.out_of_range.push_back(value);
  }
  out.needs_review = !any;
  out.kept.assign(kept.begin(), kept.end());
  return out;
}

std::string render_filter_prompt(std::string_view question,
                                 std::span<const SourceDoc> docs) {
  std::string enumerated;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    if (i)
      enumerated += '\n';
    enumerated += std::to_string(i + 1) + ". " + docs[i].text;
  }
  std::string out(prompts::kFilterPrompt);
  replace_all(out, "[question]", question);
  replace_all(out, "[enumerated_documents]", enumerated);
  return out;
}

FilterResult filter_supporting_docs(std::string_view question,
                                    std::span<const SourceDoc> docs,
                                    Backend &gateway, std::size_t max_new_tokens) {
  if (docs.empty())
    throw InvalidArgument("filter_supporting_docs needs at least one document");
  PromptBundle prompt;
  prompt.question = render_filter_prompt(question, docs);
  return parse_filter_reply(gateway.complete(prompt, max_new_tokens), docs.size());
}

std::string render_subquery_prompt(std::string_view question, const SourceDoc &doc,
                                   std::span<const std::string> previous) {
  std::string out(prompts::kSubqueryPromptHead);
  out += question;
  out += "\n\nCurrent Document (" + doc.topic + "):\n" + doc.text + "\n\n";
  if (!previous.empty()) {
    out += prompts::kSubqueryPreviousHeader;
    for (const auto &q : previous)
      out += "- " + q + "\n";
    out += "\n";
  }
  out += prompts::kSubqueryPromptTail;
  return out;
}

std::string generate_subquery(std::string_view question, const SourceDoc &doc,
                              std::span<const std::string> previous,
                              Backend &gateway, std::size_t max_new_tokens) {
  PromptBundle prompt;
  prompt.question = render_subquery_prompt(question, doc, previous);
  const std::string reply = gateway.complete(prompt, max_new_tokens);
  for (auto line : detail::split_lines(reply)) {
    auto t = detail::trim(line);
    if (!t.empty())
      return std::string(t);
  }
  throw Error("empty sub-query reply for question: " + std::string(question));
}

LabeledEntry label_samples(const SourceEntry &entry, const Gateways &gateways,
                           const BuildOptions &options) {
  if (!gateways.base || !gateways.generator || !gateways.extractor)
    throw InvalidArgument("label_samples needs base, generator and extractor");
  if (entry.question.empty() || entry.answer.empty())
    throw InvalidArgument("entry needs a question and an answer");

  LabeledEntry out;
  PromptBundle direct;
  direct.question = entry.question;
  const std::string attempt =
      gateways.base->complete(direct, options.answer_tokens);
  const std::vector<std::string> golds{entry.answer};
  if (eval::golden_match(attempt, golds)) {
    out.direct = true;
    out.planner.push_back({question_line(entry.question),
                           std::string(kLabelNoRetrieval)});
    out.answers.push_back({entry.question, entry.answer});
    return out;
  }
  if (entry.docs.empty())
    throw InvalidArgument("entry on the retrieval path has no documents");

  std::vector<std::string> subqueries;
  for (const auto &doc : entry.docs)
    subqueries.push_back(generate_subquery(entry.question, doc, subqueries,
                                           *gateways.generator));

  std::vector<IterationRecord> history;
  const std::size_t n = entry.docs.size() - 1;
  for (std::size_t i = 0; i <= n; ++i) {
    IterationRecord rec;
    rec.subquery = subqueries[i];
    rec.triples = gateways.extractor->extract(
        Document{std::to_string(i), entry.docs[i].topic, entry.docs[i].text});
    history.push_back(std::move(rec));
    std::string input =
        assemble_history(history, entry.question, options.history_budget);
    if (i < n) {
      out.planner.push_back(
          {std::move(input), std::string(kLabelSubq) + " " + subqueries[i + 1]});
    } else {
      out.planner.push_back({input, std::string(kLabelSufficient)});
      out.answers.push_back({std::move(input), entry.answer});
    }
  }
  return out;
}

BuildResult build_dataset(std::span<const SourceEntry> entries,
                          const Gateways &gateways, const BuildOptions &options) {
  struct Slot {
    std::optional<LabeledEntry> labeled;
    std::vector<BuildIssue> issues;
  };
  std::vector<Slot> slots(entries.size());

  auto process = [&](std::size_t idx) {
    Slot &slot = slots[idx];
    SourceEntry entry = entries[idx];
    try {
      if (gateways.filter) {
        if (entry.docs.empty()) {
          slot.issues.push_back({idx, "no_supporting_docs", "entry has no documents"});
          return;
        }
        const auto f = filter_supporting_docs(entry.question, entry.docs,
                                              *gateways.filter);
        for (auto v : f.out_of_range)
          slot.issues.push_back(
              {idx, "index_out_of_range", "document " + std::to_string(v)});
        if (f.needs_review) {
          slot.issues.push_back({idx, "needs_review", "filter reply has no index"});
          return;
        }
        std::vector<SourceDoc> kept;
        for (auto k : f.kept)
          kept.push_back(entry.docs[k]);
        entry.docs = std::move(kept);
      }
      if (entry.docs.empty()) {
        slot.issues.push_back({idx, "no_supporting_docs", "no document kept"});
        return;
      }
      slot.labeled = label_samples(entry, gateways, options);
    } catch (const std::exception &e) {
      slot.issues.push_back({idx, "failed", e.what()});
    }
  };

  const std::size_t workers =
      std::max<std::size_t>(1, std::min(options.workers, entries.size()));
  if (workers == 1) {
    for (std::size_t i = 0; i < entries.size(); ++i)
      process(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < entries.size(); i = next++)
          process(i);
      });
    for (auto &t : pool)
      t.join();
  }

  BuildResult result;
  result.entries_in = entries.size();
  for (auto &slot : slots) {
    for (auto &issue : slot.issues)
      result.issues.push_back(std::move(issue));
    if (!slot.labeled)
      continue;
    ++result.entries_used;
    result.direct += slot.labeled->direct ? 1 : 0;
    for (auto &s : slot.labeled->planner)
      result.planner.push_back(std::move(s));
    for (auto &s : slot.labeled->answers)
      result.answers.push_back(std::move(s));
  }
  return result;
}

std::vector<SourceEntry> read_source(std::istream &in) {
  std::vector<SourceEntry> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty())
      continue;
    const auto rec = nlohmann::json::parse(line, nullptr, false);
    if (!rec.is_object())
      throw FormatError("source record is not a JSON object", line_no);
    SourceEntry e;
    e.question = field_string(rec, "question", line_no);
    e.answer = field_string(rec, "answer", line_no);
    auto docs = rec.find("docs");
    if (docs == rec.end() || !docs->is_array())
      throw FormatError("source record needs a docs array", line_no);
    for (const auto &d : *docs) {
      if (!d.is_object())
        throw FormatError("doc must be an object", line_no);
      e.docs.push_back({field_string(d, "topic", line_no),
                        field_string(d, "text", line_no)});
    }
    out.push_back(std::move(e));
  }
  return out;
}

std::vector<SourceEntry> read_source_file(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in)
    throw Error("cannot open " + path.string());
  return read_source(in);
}

void write_planner(std::ostream &out, std::span<const PlannerSample> samples) {
  for (const auto &s : samples)
    out << nlohmann::json{{"input", s.input}, {"label", s.label}}.dump() << '\n';
}

void write_answers(std::ostream &out, std::span<const AnswerSample> samples) {
  for (const auto &s : samples)
    out << nlohmann::json{{"input", s.input}, {"output", s.output}}.dump() << '\n';
}

Summary summarize(std::vector<double> values) {
  Summary s;
  if (values.empty())
    return s;
  std::sort(values.begin(), values.end());
  s.min = values.front();
  s.max = values.back();
  double sum = 0;
  for (double v : values)
    sum += v;
  s.mean = sum / static_cast<double>(values.size());
  const std::size_t n = values.size();
  s.median = n % 2 ? values[n / 2] : (values[n / 2 - 1] + values[n / 2]) / 2.0;
  return s;
}

namespace {

struct InputShape {
  std::size_t subqueries = 0;
  GraphStats graph;
};

InputShape inspect_input(std::string_view input) {
  static HashEmbedder embed(4);
  InputShape shape;
  QuestionGraph graph;
  for (auto line : detail::split_lines(input)) {
    if (line.starts_with(kLabelSubq))
      ++shape.subqueries;
    if (line.starts_with(kGraphPrefix)) {
      auto triples = parse_triples(line.substr(kGraphPrefix.size()));
      graph.merge(build_subgraph(triples, embed, graph.subgraphs().size()));
    }
  }
  shape.graph = graph.stats();
  return shape;
}

struct SideAccumulator {
  std::vector<double> in, out, subq, nodes, edges;

  void add(std::string_view input, std::string_view output) {
    const auto shape = inspect_input(input);
    in.push_back(static_cast<double>(detail::count_whitespace_tokens(input)));
    out.push_back(static_cast<double>(detail::count_whitespace_tokens(output)));
    subq.push_back(static_cast<double>(shape.subqueries));
    nodes.push_back(static_cast<double>(shape.graph.nodes));
    edges.push_back(static_cast<double>(shape.graph.edges));
  }

  SideStats finish() const {
    SideStats s;
    s.queries = in.size();
    s.input_tokens = summarize(in);
    s.output_tokens = summarize(out);
    s.subqueries = summarize(subq);
    s.nodes = summarize(nodes);
    s.edges = summarize(edges);
    return s;
  }
};

template <class Fn> void for_each_record(std::istream &in, Fn &&fn, std::size_t &failed) {
  std::string line;
  while (std::getline(in, line)) {
    if (detail::trim(line).empty())
      continue;
    const auto rec = nlohmann::json::parse(line, nullptr, false);
    if (!rec.is_object() || !fn(rec))
      ++failed;
  }
}

nlohmann::json triple_json(const Summary &s) {
  return nlohmann::json::array({s.mean, s.median, s.max});
}

nlohmann::json range_json(const Summary &s) {
  return nlohmann::json::array({s.min, s.mean, s.max});
}

nlohmann::json side_json(const SideStats &s) {
  return {{"# Queries", s.queries},
          {"# Input Tokens", triple_json(s.input_tokens)},
          {"# Output Tokens", triple_json(s.output_tokens)},
          {"# Subqueries", range_json(s.subqueries)},
          {"# Nodes", triple_json(s.nodes)},
          {"# Edges", triple_json(s.edges)}};
}

} // namespace

DatasetStats compute_stats(std::istream &planner, std::istream &answering) {
  DatasetStats stats;
  SideAccumulator plan_acc, ans_acc;
  std::vector<double> subq_tokens;

  for_each_record(
      planner,
      [&](const nlohmann::json &rec) {
        auto in = rec.find("input");
        auto label = rec.find("label");
        if (in == rec.end() || label == rec.end() || !in->is_string() ||
            !label->is_string())
          return false;
        const auto text = label->get<std::string>();
        if (text == kLabelSufficient) {
          ++stats.sufficient;
        } else if (text == kLabelNoRetrieval) {
          ++stats.no_retrieval;
        } else if (text.starts_with(std::string(kLabelSubq) + " ") &&
                   !detail::trim(std::string_view(text).substr(kLabelSubq.size()))
                        .empty()) {
          ++stats.subq;
          subq_tokens.push_back(static_cast<double>(detail::count_whitespace_tokens(
              std::string_view(text).substr(kLabelSubq.size()))));
        } else {
          return false;
        }
        plan_acc.add(in->get<std::string>(), text);
        return true;
      },
      stats.failed_records);

  for_each_record(
      answering,
      [&](const nlohmann::json &rec) {
        auto in = rec.find("input");
        auto out = rec.find("output");
        if (in == rec.end() || out == rec.end() || !in->is_string() ||
            !out->is_string() || out->get<std::string>().empty())
          return false;
        ans_acc.add(in->get<std::string>(), out->get<std::string>());
        return true;
      },
      stats.failed_records);

  stats.planning = plan_acc.finish();
  stats.answering = ans_acc.finish();
  stats.subq_tokens = summarize(subq_tokens);
  return stats;
}

DatasetStats compute_stats(const std::filesystem::path &planner,
                           const std::filesystem::path &answering) {
  std::ifstream p(planner), a(answering);
  if (!p)
    throw Error("cannot open " + planner.string());
  if (!a)
    throw Error("cannot open " + answering.string());
  return compute_stats(p, a);
}

nlohmann::json DatasetStats::to_json() const {
  nlohmann::json j;
  j["Planning Data"] = side_json(planning);
  j["Planning Data"]["# [SUFFICIENT]"] = sufficient;
  j["Planning Data"]["# [SUBQ]"] = subq;
  j["Planning Data"]["# [NO_RETRIEVAL]"] = no_retrieval;
  j["Planning Data"]["# [SUBQ] Tokens"] = range_json(subq_tokens);
  j["Answering Data"] = side_json(answering);
  j["failed_records"] = failed_records;
  return j;
}

} // namespace ras::dataset
