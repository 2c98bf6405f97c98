#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <string>
#include <string_view>

namespace ocrisk {

enum class LossKind { Sigmoid, Logistic };

struct LossSpec {
  LossKind kind = LossKind::Sigmoid;
  // Logistic only: the predicted probability of the target label is floored
  // here, which caps the loss at -log(prob_floor). Zero disables the cap.
  double prob_floor = 0.0;

  // Upper bound C_l on the loss value (infinite for the uncapped logistic).
  double bound() const;
};

enum class Estimator { SupervisedPN, BceUAsN, UnbiasedPU, AbsNegative, OneClass };

std::string_view to_string(Estimator e);
Estimator parse_estimator(std::string_view name);
std::string_view to_string(LossKind k);

struct EstimatorConfig {
  Estimator estimator = Estimator::OneClass;
  double pi_p = 0.5;      // class prior supplied to the estimator
  double alpha_p = 0.3;   // positive-risk weight (one_class only)
  double gamma = 0.1;     // focusing parameter (one_class only)
  LossSpec loss{};
  double clamp_hi = 0.999;

  void validate() const;
};

struct RiskBreakdown {
  double positive_term = 0.0;
  double negative_term = 0.0;
  double total = 0.0;
  // The pre-absolute-value negative estimate R_u^- - pi_p R_p^- was < 0.
  bool inner_negative = false;
};

// Risk value plus d(total)/d(score) for every input score.
struct RiskEvaluation {
  RiskBreakdown breakdown;
  Eigen::VectorXd dscores_p;
  Eigen::VectorXd dscores_u;
};

// Per-sample loss with its exact derivative with respect to the score.
struct LossValue {
  double value = 0.0;
  double dscore = 0.0;
};

// 1 / (1 + exp(y * score)), bounded in (0, 1).
double loss_sigmoid(double score, int y);
// log(1 + exp(-y * score)), unbounded above.
double loss_logistic(double score, int y);
LossValue eval_loss(const LossSpec& loss, double score, int y);

// (1/n_p) sum (1 - p_i)^gamma l(s_i, +1) with p_i = min(sigmoid(s_i), clamp_hi).
double positive_risk_focal(const Eigen::VectorXd& scores_p, const EstimatorConfig& cfg);
// (R_u^- - pi_p R_p^-) / (1 - pi_p); may be negative.
double negative_risk_unbiased(const Eigen::VectorXd& scores_u, const Eigen::VectorXd& scores_p,
                              const EstimatorConfig& cfg);

struct AbsNegativeRisk {
  double value = 0.0;
  bool inner_negative = false;
};
// |R_u^- - pi_p R_p^-| / (1 - pi_p).
AbsNegativeRisk negative_risk_oc(const Eigen::VectorXd& scores_u, const Eigen::VectorXd& scores_p,
                                 const EstimatorConfig& cfg);

// For supervised_pn, scores_u carries the scores of true negatives.
RiskBreakdown risk_total(const Eigen::VectorXd& scores_p, const Eigen::VectorXd& scores_u,
                         const EstimatorConfig& cfg);
RiskEvaluation evaluate_risk(const Eigen::VectorXd& scores_p, const Eigen::VectorXd& scores_u,
                             const EstimatorConfig& cfg);

// Post-hoc calibration of a classifier g trained with unlabeled-as-negative.
double calib_c(std::size_t n_p, std::size_t n_u, double pi_p);
double pul_adjust(double g, double c);
double pbl_adjust(double g, double c);

}  // namespace ocrisk
