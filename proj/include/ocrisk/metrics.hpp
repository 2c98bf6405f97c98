#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace ocrisk {

class ModelParams;
struct LabeledDataset;

struct ConfusionCounts {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;

  std::size_t total() const { return tp + fp + fn + tn; }
  double precision() const;  // 0 when nothing is predicted positive
  double recall() const;     // 0 when there are no positives
};

// Values in [0,1]; external interfaces print them x100 with two decimals.
struct MetricsReport {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double auc = 0.0;
  std::size_t n_eval = 0;
};

ConfusionCounts confusion(std::span<const int> decisions, std::span<const int> truth);
double f1(double precision, double recall);
double average_f1(std::span<const MetricsReport> reports);
// Rank-sum AUC; ties between a positive and a negative count one half.
double auc(std::span<const double> scores, std::span<const int> truth);

// Hard decisions at score > 0 plus AUC of the raw scores, over `rows` of ds.
MetricsReport evaluate(const ModelParams& params, const LabeledDataset& ds,
                       std::span<const std::size_t> rows);
MetricsReport report_from(std::span<const double> scores, std::span<const int> decisions,
                          std::span<const int> truth);

struct MeanStd {
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation (n - 1); 0 for n = 1
};
MeanStd mean_std(std::span<const double> values);

// "95.61" style: value x100, two decimals.
std::string percent(double v);

}  // namespace ocrisk
