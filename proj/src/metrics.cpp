#include "ocrisk/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ocrisk/data.hpp"
#include "ocrisk/errors.hpp"
#include "ocrisk/format.hpp"
#include "ocrisk/model.hpp"

namespace ocrisk {

double ConfusionCounts::precision() const {
  return tp + fp == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
}

double ConfusionCounts::recall() const {
  return tp + fn == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
}

ConfusionCounts confusion(std::span<const int> decisions, std::span<const int> truth) {
  if (decisions.size() != truth.size())
    throw ValidationError("decisions and truth differ in length");
  if (decisions.empty()) throw ValidationError("cannot score an empty evaluation set");
  ConfusionCounts c;
  for (std::size_t i = 0; i < decisions.size(); ++i) {
    const bool pred = decisions[i] == 1;
    const bool pos = truth[i] == 1;
    if (pred && pos) ++c.tp;
    else if (pred) ++c.fp;
    else if (pos) ++c.fn;
    else ++c.tn;
  }
  return c;
}

double f1(double p, double r) {
  if (p + r == 0.0) return 0.0;
  return 2.0 * p * r / (p + r);
}

double average_f1(std::span<const MetricsReport> reports) {
  if (reports.empty()) throw ValidationError("average_f1 needs at least one report");
  double sum = 0.0;
  for (const auto& r : reports) sum += r.f1;
  return sum / static_cast<double>(reports.size());
}

double auc(std::span<const double> scores, std::span<const int> truth) {
  if (scores.size() != truth.size()) throw ValidationError("scores and truth differ in length");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] < scores[b]; });

  // Mann-Whitney U with midranks for ties.
  double rank_sum_pos = 0.0;
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k)
      if (truth[order[k]] == 1) {
        rank_sum_pos += midrank;
        ++n_pos;
      }
    i = j;
  }
  const std::size_t n_neg = scores.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) throw ValidationError("auc needs both classes present");
  const double np = static_cast<double>(n_pos);
  return (rank_sum_pos - np * (np + 1.0) / 2.0) / (np * static_cast<double>(n_neg));
}

MetricsReport report_from(std::span<const double> scores, std::span<const int> decisions,
                          std::span<const int> truth) {
  const auto c = confusion(decisions, truth);
  MetricsReport r;
  r.precision = c.precision();
  r.recall = c.recall();
  r.f1 = f1(r.precision, r.recall);
  r.n_eval = c.total();
  const bool both = c.tp + c.fn > 0 && c.fp + c.tn > 0;
  r.auc = both ? auc(scores, truth) : 0.0;
  return r;
}

MetricsReport evaluate(const ModelParams& params, const LabeledDataset& ds,
                       std::span<const std::size_t> rows) {
  std::vector<double> scores;
  std::vector<int> decisions, truth;
  scores.reserve(rows.size());
  // Chunked to bound the activation memory on large evaluation sets.
  constexpr std::size_t kChunk = 8192;
  for (std::size_t start = 0; start < rows.size(); start += kChunk) {
    const auto part = rows.subspan(start, std::min(kChunk, rows.size() - start));
    const Eigen::VectorXd s = forward_batch(params, gather_rows(ds.features, part));
    for (Eigen::Index i = 0; i < s.size(); ++i) {
      scores.push_back(s(i));
      decisions.push_back(s(i) > 0.0 ? 1 : -1);
    }
  }
  truth = gather_labels(ds, rows);
  return report_from(scores, decisions, truth);
}

MeanStd mean_std(std::span<const double> values) {
  MeanStd out;
  if (values.empty()) return out;
  const double n = static_cast<double>(values.size());
  out.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    out.stddev = std::sqrt(ss / (n - 1.0));
  }
  return out;
}

std::string percent(double v) { return format_fixed(100.0 * v, 2); }

}  // namespace ocrisk
