#include "ocrisk/risk.hpp"

#include <cmath>
#include <limits>

#include "ocrisk/errors.hpp"
#include "ocrisk/format.hpp"
#include "ocrisk/model.hpp"

namespace ocrisk {

double LossSpec::bound() const {
  if (kind == LossKind::Sigmoid) return 1.0;
  if (prob_floor > 0.0) return -std::log(prob_floor);
  return std::numeric_limits<double>::infinity();
}

std::string_view to_string(Estimator e) {
  switch (e) {
    case Estimator::SupervisedPN: return "supervised_pn";
    case Estimator::BceUAsN: return "bce_u_as_n";
    case Estimator::UnbiasedPU: return "unbiased_pu";
    case Estimator::AbsNegative: return "abs_negative";
    case Estimator::OneClass: return "one_class";
  }
  return "unknown";
}

Estimator parse_estimator(std::string_view name) {
  for (auto e : {Estimator::SupervisedPN, Estimator::BceUAsN, Estimator::UnbiasedPU,
                 Estimator::AbsNegative, Estimator::OneClass})
    if (to_string(e) == name) return e;
  throw ValidationError("unknown estimator '" + std::string(name) + "'");
}

std::string_view to_string(LossKind k) { return k == LossKind::Sigmoid ? "sigmoid" : "logistic"; }

void EstimatorConfig::validate() const {
  if (!(pi_p > 0.0 && pi_p < 1.0)) throw ValidationError("pi_p must lie in (0,1), got " + format_real(pi_p));
  if (!(alpha_p >= 0.0 && alpha_p <= 1.0))
    throw ValidationError("alpha_p must lie in [0,1], got " + format_real(alpha_p));
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw ValidationError("gamma must be >= 0");
  if (!(clamp_hi > 0.5 && clamp_hi < 1.0)) throw ValidationError("clamp_hi must lie in (0.5,1)");
  if (!(loss.prob_floor >= 0.0 && loss.prob_floor < 1.0))
    throw ValidationError("prob_floor must lie in [0,1)");
}

double loss_sigmoid(double score, int y) { return sigmoid(-y * score); }

double loss_logistic(double score, int y) {
  const double t = -y * score;
  // softplus(t) without overflow
  return std::max(t, 0.0) + std::log1p(std::exp(-std::abs(t)));
}

LossValue eval_loss(const LossSpec& loss, double score, int y) {
  if (loss.kind == LossKind::Sigmoid) {
    const double l = sigmoid(-y * score);
    return {l, -y * l * sigmoid(y * score)};
  }
  if (loss.prob_floor > 0.0 && sigmoid(y * score) < loss.prob_floor)
    return {-std::log(loss.prob_floor), 0.0};
  return {loss_logistic(score, y), -y * sigmoid(-y * score)};
}

namespace {

void require_nonempty(const Eigen::VectorXd& v, const char* what) {
  if (v.size() == 0) throw ValidationError(std::string(what) + " must be non-empty");
}

// Mean loss at a fixed label and the derivative of that mean per score.
struct MeanLoss {
  double mean = 0.0;
  Eigen::VectorXd dscores;
};

MeanLoss mean_loss(const LossSpec& loss, const Eigen::VectorXd& scores, int y) {
  MeanLoss out;
  const auto n = scores.size();
  out.dscores.resize(n);
  double sum = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto lv = eval_loss(loss, scores(i), y);
    sum += lv.value;
    out.dscores(i) = lv.dscore / static_cast<double>(n);
  }
  out.mean = sum / static_cast<double>(n);
  return out;
}

MeanLoss focal_positive(const Eigen::VectorXd& scores, const EstimatorConfig& cfg) {
  MeanLoss out;
  const auto n = scores.size();
  out.dscores.resize(n);
  double sum = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double s = scores(i);
    double one_minus_p = sigmoid(-s);
    double dp = sigmoid(s) * one_minus_p;
    if (sigmoid(s) > cfg.clamp_hi) {
      one_minus_p = 1.0 - cfg.clamp_hi;
      dp = 0.0;
    }
    const double mod = std::pow(one_minus_p, cfg.gamma);
    const double dmod = cfg.gamma == 0.0 ? 0.0 : -cfg.gamma * std::pow(one_minus_p, cfg.gamma - 1.0) * dp;
    const auto lv = eval_loss(cfg.loss, s, +1);
    sum += mod * lv.value;
    out.dscores(i) = (dmod * lv.value + mod * lv.dscore) / static_cast<double>(n);
  }
  out.mean = sum / static_cast<double>(n);
  return out;
}

// Signed (R_u^- - pi R_p^-)/(1 - pi) and its score derivatives. Written as
// R_u + pi (R_u - R_p)/(1 - pi) so equal means return R_u exactly.
struct NegativeEstimate {
  double value = 0.0;
  Eigen::VectorXd dscores_u;
  Eigen::VectorXd dscores_p;
};

NegativeEstimate negative_estimate(const Eigen::VectorXd& scores_u, const Eigen::VectorXd& scores_p,
                                   const EstimatorConfig& cfg) {
  require_nonempty(scores_u, "unlabeled scores");
  require_nonempty(scores_p, "positive scores");
  const auto u = mean_loss(cfg.loss, scores_u, -1);
  const auto p = mean_loss(cfg.loss, scores_p, -1);
  const double pi = cfg.pi_p;
  NegativeEstimate out;
  out.value = u.mean + pi * (u.mean - p.mean) / (1.0 - pi);
  out.dscores_u = u.dscores / (1.0 - pi);
  out.dscores_p = -pi / (1.0 - pi) * p.dscores;
  return out;
}

}  // namespace

double positive_risk_focal(const Eigen::VectorXd& scores_p, const EstimatorConfig& cfg) {
  require_nonempty(scores_p, "positive scores");
  return focal_positive(scores_p, cfg).mean;
}

double negative_risk_unbiased(const Eigen::VectorXd& scores_u, const Eigen::VectorXd& scores_p,
                              const EstimatorConfig& cfg) {
  return negative_estimate(scores_u, scores_p, cfg).value;
}

AbsNegativeRisk negative_risk_oc(const Eigen::VectorXd& scores_u, const Eigen::VectorXd& scores_p,
                                 const EstimatorConfig& cfg) {
  const double v = negative_estimate(scores_u, scores_p, cfg).value;
  return {std::abs(v), v < 0.0};
}

RiskEvaluation evaluate_risk(const Eigen::VectorXd& scores_p, const Eigen::VectorXd& scores_u,
                             const EstimatorConfig& cfg) {
  cfg.validate();
  require_nonempty(scores_p, "positive scores");
  require_nonempty(scores_u, cfg.estimator == Estimator::SupervisedPN ? "negative scores" : "unlabeled scores");

  RiskEvaluation ev;
  auto& b = ev.breakdown;
  const double pi = cfg.pi_p;

  switch (cfg.estimator) {
    case Estimator::SupervisedPN: {
      const auto pos = mean_loss(cfg.loss, scores_p, +1);
      const auto neg = mean_loss(cfg.loss, scores_u, -1);
      b.positive_term = pos.mean;
      b.negative_term = neg.mean;
      b.total = pi * pos.mean + (1.0 - pi) * neg.mean;
      ev.dscores_p = pi * pos.dscores;
      ev.dscores_u = (1.0 - pi) * neg.dscores;
      break;
    }
    case Estimator::BceUAsN: {
      // Plain cross-entropy over P (as +1) and U (as -1), one weight per sample.
      const LossSpec bce{LossKind::Logistic, cfg.loss.prob_floor};
      const auto pos = mean_loss(bce, scores_p, +1);
      const auto neg = mean_loss(bce, scores_u, -1);
      const double np = static_cast<double>(scores_p.size());
      const double nu = static_cast<double>(scores_u.size());
      b.positive_term = pos.mean;
      b.negative_term = neg.mean;
      b.total = (np * pos.mean + nu * neg.mean) / (np + nu);
      ev.dscores_p = pos.dscores * (np / (np + nu));
      ev.dscores_u = neg.dscores * (nu / (np + nu));
      break;
    }
    case Estimator::UnbiasedPU:
    case Estimator::AbsNegative: {
      const auto pos = mean_loss(cfg.loss, scores_p, +1);
      auto neg = negative_estimate(scores_u, scores_p, cfg);
      b.inner_negative = neg.value < 0.0;
      double sign = 1.0;
      if (cfg.estimator == Estimator::AbsNegative && b.inner_negative) sign = -1.0;
      b.positive_term = pos.mean;
      b.negative_term = sign * neg.value;
      b.total = pi * b.positive_term + (1.0 - pi) * b.negative_term;
      ev.dscores_p = pi * pos.dscores + (1.0 - pi) * sign * neg.dscores_p;
      ev.dscores_u = (1.0 - pi) * sign * neg.dscores_u;
      break;
    }
    case Estimator::OneClass: {
      const double a = cfg.alpha_p;
      const auto pos = focal_positive(scores_p, cfg);
      auto neg = negative_estimate(scores_u, scores_p, cfg);
      b.inner_negative = neg.value < 0.0;
      const double sign = b.inner_negative ? -1.0 : 1.0;
      b.positive_term = pos.mean;
      b.negative_term = sign * neg.value;
      b.total = a * b.positive_term + (1.0 - a) * b.negative_term;
      ev.dscores_p = a * pos.dscores + (1.0 - a) * sign * neg.dscores_p;
      ev.dscores_u = (1.0 - a) * sign * neg.dscores_u;
      break;
    }
  }
  return ev;
}

RiskBreakdown risk_total(const Eigen::VectorXd& scores_p, const Eigen::VectorXd& scores_u,
                         const EstimatorConfig& cfg) {
  return evaluate_risk(scores_p, scores_u, cfg).breakdown;
}

double calib_c(std::size_t n_p, std::size_t n_u, double pi_p) {
  if (n_p < 1 || n_u < 1) throw ValidationError("n_p and n_u must be >= 1");
  if (!(pi_p > 0.0 && pi_p < 1.0)) throw ValidationError("pi_p must lie in (0,1)");
  const double np = static_cast<double>(n_p);
  return np / (np + static_cast<double>(n_u) * pi_p);
}

double pul_adjust(double g, double c) {
  if (!(c > 0.0 && c <= 1.0)) throw ValidationError("c must lie in (0,1]");
  return g / c;
}

double pbl_adjust(double g, double c) {
  if (!(c > 0.0 && c < 1.0)) throw ValidationError("c must lie in (0,1)");
  if (!(g < 1.0)) throw ValidationError("pbl_adjust undefined for g >= 1 (odds diverge)");
  return (1.0 - c) / c * (g / (1.0 - g));
}

}  // namespace ocrisk
