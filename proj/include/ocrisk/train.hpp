#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ocrisk/data.hpp"
#include "ocrisk/metrics.hpp"
#include "ocrisk/model.hpp"
#include "ocrisk/risk.hpp"

namespace ocrisk {

// How the warm-up epochs are trained.
enum class WarmupMode {
  InEstimator,  // configured estimator with the logistic loss substituted
  PlainBce,     // cross-entropy with unlabeled treated as negative
};

struct TrainConfig {
  int epochs = 1000;
  int warmup_epochs = 20;
  double learning_rate = 0.1;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  EstimatorConfig estimator{};
  std::uint64_t seed = 0;
  int eval_every = 100;  // 0: evaluate only after the final epoch
  std::vector<std::size_t> hidden = {64, 64};
  WarmupMode warmup_mode = WarmupMode::InEstimator;
  double warmup_prob_floor = 1e-7;

  void validate() const;
};

struct EpochRecord {
  int epoch = 0;
  LossKind loss_kind = LossKind::Sigmoid;
  RiskBreakdown risk;                    // at the parameters entering the epoch
  std::optional<MetricsReport> metrics;  // held-out, after the epoch's update
};

struct TrainLog {
  std::vector<EpochRecord> records;
};

struct TrainedModel {
  ModelParams params;
  TrainLog log;
  TrainConfig config;
};

// v <- momentum*v - lr*(grad + weight_decay*param); param <- param + v.
class SgdMomentum {
 public:
  SgdMomentum(double learning_rate, double momentum, double weight_decay)
      : lr_(learning_rate), momentum_(momentum), weight_decay_(weight_decay) {}

  void step(Eigen::VectorXd& params, const Eigen::VectorXd& grad);
  const Eigen::VectorXd& velocity() const { return velocity_; }

 private:
  double lr_, momentum_, weight_decay_;
  Eigen::VectorXd velocity_;
};

// Full-batch training over every labeled positive and unlabeled row of `pu`.
// supervised_pn instead uses the ground-truth labels of all sampled rows.
// Held-out metrics are computed on rows outside `pu`.
TrainedModel train(const LabeledDataset& ds, const PUSample& pu, const TrainConfig& cfg);

// +1 iff the raw score is strictly positive.
int decide(const ModelParams& params, std::span<const double> x);
inline int decide_score(double score) { return score > 0.0 ? 1 : -1; }

enum class CalibrationMethod { PUL, PBL };

// Classifier g trained with unlabeled-as-negative, wrapped by a post-hoc
// adjustment; decisions threshold the adjusted output at 1.
struct CalibratedModel {
  TrainedModel base;
  CalibrationMethod method = CalibrationMethod::PUL;
  double c = 1.0;

  double adjusted(std::span<const double> x) const;
  double adjusted_from_score(double score) const;
  int decide(std::span<const double> x) const { return adjusted(x) > 1.0 ? 1 : -1; }
};

CalibratedModel train_calibrated(const LabeledDataset& ds, const PUSample& pu, const TrainConfig& cfg,
                                 CalibrationMethod method);

// Metrics for a calibrated model: decisions from the adjusted output, AUC
// from the underlying scores.
MetricsReport evaluate_calibrated(const CalibratedModel& model, const LabeledDataset& ds,
                                  std::span<const std::size_t> rows);

// epoch,loss_kind,pos_term,neg_term,total,inner_neg,precision,recall,f1
void write_train_log(std::ostream& out, const TrainLog& log);

}  // namespace ocrisk
