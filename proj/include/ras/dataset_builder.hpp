#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "ras/engine.hpp"
#include "ras/llm_gateway.hpp"
#include "ras/planner.hpp"

namespace ras::dataset {

struct SourceDoc {
  std::string topic;
  std::string text;
};

struct SourceEntry {
  std::string question;
  std::vector<SourceDoc> docs;
  std::string answer;
};

struct PlannerSample {
  std::string input;
  std::string label;
};

struct AnswerSample {
  std::string input;
  std::string output;
};

struct FilterResult {
  std::vector<std::size_t> kept; // 0-based, ascending, unique
  std::vector<std::size_t> out_of_range; // 1-based values from the reply
  bool needs_review = false;             // reply carried no index at all
};

/// Parses "1,3" style replies. An optional "Output:" prefix is accepted and
/// the first line carrying a digit is used.
FilterResult parse_filter_reply(std::string_view reply, std::size_t num_docs);

std::string render_filter_prompt(std::string_view question,
                                 std::span<const SourceDoc> docs);

FilterResult filter_supporting_docs(std::string_view question,
                                    std::span<const SourceDoc> docs,
                                    Backend &gateway,
                                    std::size_t max_new_tokens = 32);

std::string render_subquery_prompt(std::string_view question, const SourceDoc &doc,
                                   std::span<const std::string> previous);

/// First non-empty line of the reply, trimmed.
std::string generate_subquery(std::string_view question, const SourceDoc &doc,
                              std::span<const std::string> previous,
                              Backend &gateway, std::size_t max_new_tokens = 64);

struct Gateways {
  Backend *base = nullptr;           // direct answer attempt
  Backend *generator = nullptr;      // sub-query generation
  TripleExtractor *extractor = nullptr;
  Backend *filter = nullptr;         // optional; null keeps every doc
};

struct LabeledEntry {
  std::vector<PlannerSample> planner;
  std::vector<AnswerSample> answers;
  bool direct = false;
};

struct BuildOptions {
  std::size_t workers = 1;
  std::size_t history_budget = kDefaultHistoryBudget;
  std::size_t answer_tokens = 100;
};

LabeledEntry label_samples(const SourceEntry &entry, const Gateways &gateways,
                           const BuildOptions &options = {});

struct BuildIssue {
  std::size_t entry;
  std::string kind; // "no_supporting_docs", "needs_review", "failed", ...
  std::string detail;
};

struct BuildResult {
  std::vector<PlannerSample> planner;
  std::vector<AnswerSample> answers;
  std::vector<BuildIssue> issues;
  std::size_t entries_in = 0;
  std::size_t entries_used = 0;
  std::size_t direct = 0;
};

/// Filters (when a filter gateway is given) and labels every entry. Output
/// order follows input order regardless of the worker count.
BuildResult build_dataset(std::span<const SourceEntry> entries,
                          const Gateways &gateways, const BuildOptions &options = {});

std::vector<SourceEntry> read_source(std::istream &in);
std::vector<SourceEntry> read_source_file(const std::filesystem::path &path);
void write_planner(std::ostream &out, std::span<const PlannerSample> samples);
void write_answers(std::ostream &out, std::span<const AnswerSample> samples);

struct Summary {
  double min = 0, mean = 0, median = 0, max = 0;
};

Summary summarize(std::vector<double> values);

struct SideStats {
  std::size_t queries = 0;
  Summary input_tokens, output_tokens, subqueries, nodes, edges;
};

struct DatasetStats {
  SideStats planning, answering;
  std::size_t sufficient = 0, subq = 0, no_retrieval = 0;
  Summary subq_tokens;
  std::size_t failed_records = 0;

  nlohmann::json to_json() const;
};

DatasetStats compute_stats(std::istream &planner, std::istream &answering);
DatasetStats compute_stats(const std::filesystem::path &planner,
                           const std::filesystem::path &answering);

} // namespace ras::dataset
