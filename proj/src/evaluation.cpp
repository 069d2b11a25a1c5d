#include "ras/evaluation.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <thread>
#include <unordered_map>

#include "ras/error.hpp"
#include "text_util.hpp"

namespace ras::eval {

namespace {

bool is_punct(char c) {
  const auto u = static_cast<unsigned char>(c);
  return (u >= 33 && u <= 47) || (u >= 58 && u <= 64) || (u >= 91 && u <= 96) ||
         (u >= 123 && u <= 126);
}

bool is_article(std::string_view w) { return w == "a" || w == "an" || w == "the"; }

void require_nonempty(std::span<const std::string> golds, const char *what) {
  if (golds.empty())
    throw InvalidArgument(std::string(what) + " requires at least one reference");
}

double f_measure(double hits, double pred_len, double ref_len) {
  if (hits <= 0.0 || pred_len <= 0.0 || ref_len <= 0.0)
    return 0.0;
  const double p = hits / pred_len;
  const double r = hits / ref_len;
  return 2.0 * p * r / (p + r);
}

std::vector<std::vector<std::size_t>> lcs_table(std::span<const std::string> a,
                                                std::span<const std::string> b) {
  std::vector<std::vector<std::size_t>> t(a.size() + 1,
                                          std::vector<std::size_t>(b.size() + 1, 0));
  for (std::size_t i = 1; i <= a.size(); ++i)
    for (std::size_t j = 1; j <= b.size(); ++j)
      t[i][j] = a[i - 1] == b[j - 1] ? t[i - 1][j - 1] + 1
                                     : std::max(t[i - 1][j], t[i][j - 1]);
  return t;
}

// Indices into `ref` of one LCS alignment with `cand`.
std::vector<std::size_t> lcs_ref_indices(std::span<const std::string> ref,
                                         std::span<const std::string> cand) {
  const auto t = lcs_table(ref, cand);
  std::vector<std::size_t> out;
  std::size_t i = ref.size(), j = cand.size();
  while (i > 0 && j > 0) {
    if (ref[i - 1] == cand[j - 1]) {
      out.push_back(i - 1);
      --i;
      --j;
    } else if (t[i][j - 1] > t[i - 1][j]) {
      --j;
    } else {
      --i;
    }
  }
  std::reverse(out.begin(), out.end());
  return out;
}

std::vector<std::vector<std::string>> sentences(std::string_view text) {
  std::vector<std::vector<std::string>> out;
  for (auto line : detail::split_lines(text)) {
    auto toks = detail::split_whitespace(line);
    if (!toks.empty())
      out.push_back(std::move(toks));
  }
  return out;
}

double rouge_lsum_single(std::string_view pred, std::string_view ref) {
  const auto pred_sents = sentences(pred);
  const auto ref_sents = sentences(ref);
  std::unordered_map<std::string, std::size_t> pred_counts, ref_counts;
  std::size_t pred_len = 0, ref_len = 0;
  for (const auto &s : pred_sents)
    for (const auto &t : s) {
      ++pred_counts[t];
      ++pred_len;
    }
  for (const auto &s : ref_sents)
    for (const auto &t : s) {
      ++ref_counts[t];
      ++ref_len;
    }
  if (pred_len == 0 || ref_len == 0)
    return 0.0;

  std::size_t hits = 0;
  for (const auto &r : ref_sents) {
    std::set<std::size_t> united;
    for (const auto &c : pred_sents)
      for (std::size_t idx : lcs_ref_indices(r, c))
        united.insert(idx);
    for (std::size_t idx : united) {
      const auto &tok = r[idx];
      auto rc = ref_counts.find(tok);
      auto pc = pred_counts.find(tok);
      if (rc != ref_counts.end() && pc != pred_counts.end() && rc->second > 0 &&
          pc->second > 0) {
        ++hits;
        --rc->second;
        --pc->second;
      }
    }
  }
  return f_measure(static_cast<double>(hits), static_cast<double>(pred_len),
                   static_cast<double>(ref_len));
}

} // namespace

std::string normalize_text(std::string_view s) {
  std::string stripped;
  stripped.reserve(s.size());
  for (char c : s)
    if (!is_punct(c))
      stripped.push_back(detail::ascii_lower(c));
  std::string out;
  for (const auto &w : detail::split_whitespace(stripped)) {
    if (is_article(w))
      continue;
    if (!out.empty())
      out.push_back(' ');
    out += w;
  }
  return out;
}

int golden_match(std::string_view pred, std::span<const std::string> golds) {
  require_nonempty(golds, "golden_match");
  const std::string p = normalize_text(pred);
  for (const auto &g : golds) {
    const std::string n = normalize_text(g);
    if (!n.empty() && p.find(n) != std::string::npos)
      return 1;
  }
  return 0;
}

double token_f1(std::string_view pred, std::string_view gold) {
  const auto p = detail::split_whitespace(normalize_text(pred));
  const auto g = detail::split_whitespace(normalize_text(gold));
  if (p.empty() || g.empty())
    return 0.0;
  std::unordered_map<std::string, std::size_t> counts;
  for (const auto &t : g)
    ++counts[t];
  std::size_t overlap = 0;
  for (const auto &t : p) {
    auto it = counts.find(t);
    if (it != counts.end() && it->second > 0) {
      ++overlap;
      --it->second;
    }
  }
  return f_measure(static_cast<double>(overlap), static_cast<double>(p.size()),
                   static_cast<double>(g.size()));
}

double max_token_f1(std::string_view pred, std::span<const std::string> golds) {
  require_nonempty(golds, "token_f1");
  double best = 0.0;
  for (const auto &g : golds)
    best = std::max(best, token_f1(pred, g));
  return best;
}

int exact_match(std::string_view pred, std::string_view gold) {
  return normalize_text(pred) == normalize_text(gold) ? 1 : 0;
}

double accuracy(std::span<const std::string> preds,
                std::span<const std::string> golds) {
  if (preds.size() != golds.size())
    throw InvalidArgument("accuracy needs equally many predictions and golds");
  if (preds.empty())
    throw InvalidArgument("accuracy of zero examples is undefined");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < preds.size(); ++i)
    hits += static_cast<std::size_t>(exact_match(preds[i], golds[i]));
  return static_cast<double>(hits) / static_cast<double>(preds.size());
}

std::size_t lcs_length(std::span<const std::string> a,
                       std::span<const std::string> b) {
  if (a.empty() || b.empty())
    return 0;
  // Two-row dynamic program.
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double rouge_l(std::string_view pred, std::span<const std::string> refs) {
  require_nonempty(refs, "rouge_l");
  const auto p = detail::split_whitespace(pred);
  double best = 0.0;
  for (const auto &ref : refs) {
    const auto r = detail::split_whitespace(ref);
    const double lcs = static_cast<double>(lcs_length(p, r));
    best = std::max(best, f_measure(lcs, static_cast<double>(p.size()),
                                    static_cast<double>(r.size())));
  }
  return best;
}

double rouge_lsum(std::string_view pred, std::span<const std::string> refs) {
  require_nonempty(refs, "rouge_lsum");
  double best = 0.0;
  for (const auto &ref : refs)
    best = std::max(best, rouge_lsum_single(pred, ref));
  return best;
}

std::optional<Metric> parse_metric(std::string_view name) {
  if (name == "golden_match" || name == "match")
    return Metric::GoldenMatch;
  if (name == "token_f1" || name == "f1")
    return Metric::TokenF1;
  if (name == "accuracy")
    return Metric::Accuracy;
  if (name == "rouge_l" || name == "rougeL")
    return Metric::RougeL;
  if (name == "rouge_lsum" || name == "rougeLsum")
    return Metric::RougeLsum;
  if (name == "mauve")
    return Metric::Mauve;
  return std::nullopt;
}

const char *to_string(Metric m) noexcept {
  switch (m) {
  case Metric::GoldenMatch:
    return "golden_match";
  case Metric::TokenF1:
    return "token_f1";
  case Metric::Accuracy:
    return "accuracy";
  case Metric::RougeL:
    return "rouge_l";
  case Metric::RougeLsum:
    return "rouge_lsum";
  case Metric::Mauve:
    return "mauve";
  }
  return "?";
}

double score_example(Metric metric, std::string_view pred,
                     std::span<const std::string> golds) {
  switch (metric) {
  case Metric::GoldenMatch:
    return golden_match(pred, golds);
  case Metric::TokenF1:
    return max_token_f1(pred, golds);
  case Metric::Accuracy:
    require_nonempty(golds, "accuracy");
    for (const auto &g : golds)
      if (exact_match(pred, g))
        return 1.0;
    return 0.0;
  case Metric::RougeL:
    return rouge_l(pred, golds);
  case Metric::RougeLsum:
    return rouge_lsum(pred, golds);
  case Metric::Mauve:
    break;
  }
  throw InvalidArgument("metric " + std::string(to_string(metric)) +
                        " is not available");
}

nlohmann::json MetricReport::to_json() const {
  nlohmann::json j;
  j["metric"] = to_string(metric);
  j["available"] = available;
  j["N"] = evaluated();
  j["N_failed"] = failed_ids.size();
  j["aggregate"] = available ? nlohmann::json(aggregate) : nlohmann::json(nullptr);
  auto &rows = j["per_example"] = nlohmann::json::array();
  for (const auto &e : per_example)
    rows.push_back({{"id", e.id}, {"score", e.score}});
  j["failed_ids"] = failed_ids;
  return j;
}

std::vector<Prediction> read_predictions(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in)
    throw Error("cannot open predictions file " + path.string());
  std::vector<Prediction> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty())
      continue;
    const auto rec = nlohmann::json::parse(line, nullptr, false);
    if (!rec.is_object() || !rec.contains("id") || !rec.contains("text") ||
        !rec["text"].is_string())
      throw FormatError("prediction record needs id and text", line_no);
    const auto &id = rec["id"];
    out.push_back({id.is_string() ? id.get<std::string>() : id.dump(),
                   rec["text"].get<std::string>()});
  }
  return out;
}

std::vector<Reference> read_references(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in)
    throw Error("cannot open references file " + path.string());
  std::vector<Reference> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty())
      continue;
    const auto rec = nlohmann::json::parse(line, nullptr, false);
    if (!rec.is_object() || !rec.contains("id"))
      throw FormatError("reference record needs an id", line_no);
    Reference ref;
    const auto &id = rec["id"];
    ref.id = id.is_string() ? id.get<std::string>() : id.dump();
    if (rec.contains("texts") && rec["texts"].is_array()) {
      for (const auto &t : rec["texts"]) {
        if (!t.is_string())
          throw FormatError("reference texts must be strings", line_no);
        ref.texts.push_back(t.get<std::string>());
      }
    } else if (rec.contains("text") && rec["text"].is_string()) {
      ref.texts.push_back(rec["text"].get<std::string>());
    } else {
      throw FormatError("reference record needs text or texts", line_no);
    }
    out.push_back(std::move(ref));
  }
  return out;
}

MetricReport evaluate(Metric metric, std::span<const Prediction> preds,
                      std::span<const Reference> refs, std::size_t workers) {
  MetricReport report;
  report.metric = metric;
  if (metric == Metric::Mauve) {
    report.available = false;
    return report;
  }

  std::unordered_map<std::string, const Reference *> by_id;
  for (const auto &r : refs)
    by_id.emplace(r.id, &r);
  std::set<std::string> pred_ids;

  struct Job {
    const Prediction *pred;
    const Reference *ref;
  };
  std::vector<Job> jobs;
  for (const auto &p : preds) {
    pred_ids.insert(p.id);
    auto it = by_id.find(p.id);
    if (it == by_id.end() || it->second->texts.empty())
      report.failed_ids.push_back(p.id);
    else
      jobs.push_back({&p, it->second});
  }
  for (const auto &r : refs)
    if (!pred_ids.count(r.id))
      report.failed_ids.push_back(r.id);

  std::vector<double> scores(jobs.size());
  auto run = [&](std::size_t begin, std::size_t step) {
    for (std::size_t i = begin; i < jobs.size(); i += step)
      scores[i] = score_example(metric, jobs[i].pred->text, jobs[i].ref->texts);
  };
  workers = std::max<std::size_t>(1, std::min(workers, jobs.size()));
  if (workers == 1) {
    run(0, 1);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back(run, w, workers);
    for (auto &t : pool)
      t.join();
  }

  double sum = 0.0;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    report.per_example.push_back({jobs[i].pred->id, scores[i]});
    sum += scores[i];
  }
  report.aggregate =
      jobs.empty() ? 0.0 : 100.0 * sum / static_cast<double>(jobs.size());
  return report;
}

MetricReport run_eval(const std::filesystem::path &predictions,
                      const std::filesystem::path &references, Metric metric,
                      std::size_t workers) {
  const auto preds = read_predictions(predictions);
  const auto refs = read_references(references);
  return evaluate(metric, preds, refs, workers);
}

} // namespace ras::eval
