#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace ras::eval {

/// Lowercase, drop ASCII punctuation, drop the articles a/an/the, collapse
/// whitespace.
std::string normalize_text(std::string_view s);

/// 1 iff some normalized gold is a substring of the normalized prediction.
/// Golds that normalize to nothing never match.
/// Throws InvalidArgument when golds is empty.
int golden_match(std::string_view pred, std::span<const std::string> golds);

/// Token-level F1 over normalized whitespace tokens (multiset overlap).
double token_f1(std::string_view pred, std::string_view gold);
/// Max of token_f1 over golds; throws on empty golds.
double max_token_f1(std::string_view pred, std::span<const std::string> golds);

/// 1 iff norm(pred) equals norm(gold).
int exact_match(std::string_view pred, std::string_view gold);
/// Fraction of exact matches; throws on length mismatch or empty input.
double accuracy(std::span<const std::string> preds,
                std::span<const std::string> golds);

/// Length of the longest common subsequence of two token sequences.
std::size_t lcs_length(std::span<const std::string> a,
                       std::span<const std::string> b);

/// ROUGE-L F1 (beta = 1) over raw whitespace tokens, max over refs.
double rouge_l(std::string_view pred, std::span<const std::string> refs);
/// Summary-level ROUGE-L: sentences split on newlines, union LCS per
/// reference sentence, max over refs.
double rouge_lsum(std::string_view pred, std::span<const std::string> refs);

enum class Metric { GoldenMatch, TokenF1, Accuracy, RougeL, RougeLsum, Mauve };

std::optional<Metric> parse_metric(std::string_view name);
const char *to_string(Metric m) noexcept;

/// Per-example score in [0, 1]. Mauve is not implemented and throws.
double score_example(Metric metric, std::string_view pred,
                     std::span<const std::string> golds);

struct ExampleScore {
  std::string id;
  double score;
};

struct MetricReport {
  Metric metric = Metric::GoldenMatch;
  bool available = true;
  std::vector<ExampleScore> per_example;
  std::vector<std::string> failed_ids;
  double aggregate = 0.0; // 100 * mean(per_example)

  std::size_t evaluated() const noexcept { return per_example.size(); }
  nlohmann::json to_json() const;
};

struct Prediction {
  std::string id;
  std::string text;
};

struct Reference {
  std::string id;
  std::vector<std::string> texts;
};

/// Records: {"id", "text"} for predictions; references use "texts" (array)
/// or "text".
std::vector<Prediction> read_predictions(const std::filesystem::path &path);
std::vector<Reference> read_references(const std::filesystem::path &path);

/// Scores predictions against references joined on id. Ids present on only
/// one side are reported in failed_ids and left out of the aggregate.
MetricReport evaluate(Metric metric, std::span<const Prediction> preds,
                      std::span<const Reference> refs, std::size_t workers = 1);

MetricReport run_eval(const std::filesystem::path &predictions,
                      const std::filesystem::path &references, Metric metric,
                      std::size_t workers = 1);

} // namespace ras::eval
