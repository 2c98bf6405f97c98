#include "ocrisk/train.hpp"

#include <cmath>
#include <limits>
#include <ostream>

#include "ocrisk/errors.hpp"
#include "ocrisk/format.hpp"
#include "ocrisk/rng.hpp"

namespace ocrisk {

void TrainConfig::validate() const {
  if (warmup_epochs < 0) throw ValidationError("warmup_epochs must be >= 0");
  if (epochs < warmup_epochs) throw ValidationError("epochs must be >= warmup_epochs");
  if (!(learning_rate > 0.0)) throw ValidationError("learning_rate must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ValidationError("momentum must lie in [0,1)");
  if (!(weight_decay >= 0.0)) throw ValidationError("weight_decay must be >= 0");
  if (eval_every < 0) throw ValidationError("eval_every must be >= 0");
  if (!(warmup_prob_floor > 0.0 && warmup_prob_floor < 0.5))
    throw ValidationError("warmup_prob_floor must lie in (0,0.5)");
  estimator.validate();
}

void SgdMomentum::step(Eigen::VectorXd& params, const Eigen::VectorXd& grad) {
  if (velocity_.size() != params.size()) velocity_ = Eigen::VectorXd::Zero(params.size());
  velocity_ = momentum_ * velocity_ - lr_ * (grad + weight_decay_ * params);
  params += velocity_;
}

namespace {

struct TrainingBatches {
  Eigen::MatrixXd positive;
  Eigen::MatrixXd other;  // unlabeled rows, or true negatives for supervised_pn
};

TrainingBatches build_batches(const LabeledDataset& ds, const PUSample& pu, Estimator est) {
  TrainingBatches b;
  if (est != Estimator::SupervisedPN) {
    b.positive = gather_rows(ds.features, pu.positive_idx);
    b.other = gather_rows(ds.features, pu.unlabeled_idx);
    return b;
  }
  std::vector<std::size_t> pos = pu.positive_idx, neg;
  for (auto i : pu.unlabeled_idx) (ds.labels.at(i) == 1 ? pos : neg).push_back(i);
  if (neg.empty()) throw ValidationError("supervised_pn needs at least one negative row");
  b.positive = gather_rows(ds.features, pos);
  b.other = gather_rows(ds.features, neg);
  return b;
}

void check_finite(double v, int epoch, const char* term) {
  if (!std::isfinite(v)) throw TrainingError("non-finite value", epoch, term);
}

}  // namespace

TrainedModel train(const LabeledDataset& ds, const PUSample& pu, const TrainConfig& cfg) {
  cfg.validate();
  if (pu.source_rows != ds.rows()) throw ValidationError("PU sample was not drawn from this dataset");
  if (pu.positive_idx.empty() || pu.unlabeled_idx.empty())
    throw ValidationError("PU sample needs labeled and unlabeled rows");

  std::vector<std::size_t> dims{ds.dim()};
  dims.insert(dims.end(), cfg.hidden.begin(), cfg.hidden.end());
  dims.push_back(1);

  TrainedModel out;
  out.config = cfg;
  out.params = init_mlp(dims, Rng(cfg.seed).split("train_init")());
  if (cfg.epochs == 0) return out;

  const auto batches = build_batches(ds, pu, cfg.estimator.estimator);
  const auto held_out = held_out_rows(ds, pu);
  SgdMomentum opt(cfg.learning_rate, cfg.momentum, cfg.weight_decay);
  out.log.records.reserve(static_cast<std::size_t>(cfg.epochs));

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const bool warm = epoch < cfg.warmup_epochs;
    EstimatorConfig est = cfg.estimator;
    if (warm) {
      est.loss = LossSpec{LossKind::Logistic, cfg.warmup_prob_floor};
      if (cfg.warmup_mode == WarmupMode::PlainBce) est.estimator = Estimator::BceUAsN;
    } else {
      est.loss = LossSpec{LossKind::Sigmoid, 0.0};
    }

    const auto pass_p = forward_pass(out.params, batches.positive);
    const auto pass_u = forward_pass(out.params, batches.other);
    const auto ev = evaluate_risk(pass_p.scores(), pass_u.scores(), est);
    check_finite(ev.breakdown.positive_term, epoch, "positive_term");
    check_finite(ev.breakdown.negative_term, epoch, "negative_term");
    check_finite(ev.breakdown.total, epoch, "total");

    Eigen::VectorXd grad = backward(out.params, pass_p, ev.dscores_p).values;
    grad += backward(out.params, pass_u, ev.dscores_u).values;
    if (!grad.allFinite()) throw TrainingError("non-finite gradient", epoch, "gradient");

    opt.step(out.params.values(), grad);
    if (!out.params.values().allFinite()) throw TrainingError("non-finite parameters", epoch, "update");

    EpochRecord rec;
    rec.epoch = epoch;
    rec.loss_kind = est.loss.kind;
    rec.risk = ev.breakdown;
    const bool last = epoch + 1 == cfg.epochs;
    const bool due = cfg.eval_every > 0 && (epoch + 1) % cfg.eval_every == 0;
    if ((last || due) && !held_out.empty()) rec.metrics = evaluate(out.params, ds, held_out);
    out.log.records.push_back(rec);
  }
  return out;
}

int decide(const ModelParams& params, std::span<const double> x) { return decide_score(forward(params, x)); }

double CalibratedModel::adjusted_from_score(double score) const {
  const double g = sigmoid(score);
  if (method == CalibrationMethod::PUL) return pul_adjust(g, c);
  if (g >= 1.0) return std::numeric_limits<double>::infinity();
  return pbl_adjust(g, c);
}

double CalibratedModel::adjusted(std::span<const double> x) const {
  return adjusted_from_score(forward(base.params, x));
}

CalibratedModel train_calibrated(const LabeledDataset& ds, const PUSample& pu, const TrainConfig& cfg,
                                 CalibrationMethod method) {
  if (cfg.estimator.estimator != Estimator::BceUAsN)
    throw ValidationError("train_calibrated requires the bce_u_as_n estimator");
  CalibratedModel m;
  m.method = method;
  m.c = calib_c(pu.n_p(), pu.n_u(), cfg.estimator.pi_p);
  if (method == CalibrationMethod::PBL && !(m.c < 1.0))
    throw ValidationError("PBL needs c < 1");
  m.base = train(ds, pu, cfg);
  return m;
}

MetricsReport evaluate_calibrated(const CalibratedModel& model, const LabeledDataset& ds,
                                  std::span<const std::size_t> rows) {
  const Eigen::VectorXd s = forward_batch(model.base.params, gather_rows(ds.features, rows));
  std::vector<double> scores(s.data(), s.data() + s.size());
  std::vector<int> decisions;
  decisions.reserve(scores.size());
  for (double v : scores) decisions.push_back(model.adjusted_from_score(v) > 1.0 ? 1 : -1);
  return report_from(scores, decisions, gather_labels(ds, rows));
}

void write_train_log(std::ostream& out, const TrainLog& log) {
  out << "epoch,loss_kind,pos_term,neg_term,total,inner_neg,precision,recall,f1\n";
  for (const auto& r : log.records) {
    out << r.epoch << ',' << to_string(r.loss_kind) << ',' << format_real(r.risk.positive_term) << ','
        << format_real(r.risk.negative_term) << ',' << format_real(r.risk.total) << ','
        << (r.risk.inner_negative ? 1 : 0) << ',';
    if (r.metrics)
      out << percent(r.metrics->precision) << ',' << percent(r.metrics->recall) << ',' << percent(r.metrics->f1);
    else
      out << ",,";
    out << '\n';
  }
}

}  // namespace ocrisk
