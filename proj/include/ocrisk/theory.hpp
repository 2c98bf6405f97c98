#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <vector>

#include "ocrisk/data.hpp"
#include "ocrisk/model.hpp"
#include "ocrisk/risk.hpp"

namespace ocrisk {

// Monte-Carlo check of the concentration bounds for the absolute-value
// negative risk of one frozen classifier f. The unlabeled marginal is
// pi_p P_p + (1 - pi_p) P_n with P_p, P_n taken from `distribution`; its
// own pi_p is overridden by the field below.
struct BoundSpec {
  ModelParams fixed_model;
  SyntheticSpec distribution;
  double pi_p = 0.3;
  std::size_t n_p = 50;
  std::size_t n_u = 200;
  std::size_t trials = 20000;
  // Margin alpha with (1 - pi_p) R_n^-(f) >= alpha. Must pass certify_alpha.
  double alpha_margin = 0.0;
  double sigma = 0.05;
  LossSpec loss{LossKind::Sigmoid, 0.0};
  std::uint64_t seed = 0;
  std::size_t reference_samples = 1000000;
  unsigned threads = 0;  // 0: hardware concurrency

  void validate() const;
};

// Large-sample estimate of R_n^-(f) = E_{x~P_n} l(f(x), -1).
struct ReferenceRisk {
  double value = 0.0;
  double std_error = 0.0;
  std::size_t samples = 0;
};
ReferenceRisk estimate_reference(const BoundSpec& spec);

// Largest margin accepted by certification: 0.9 (1 - pi_p) R_ref.
double max_certified_alpha(const ReferenceRisk& ref, double pi_p);
// Throws ValidationError naming the margin when alpha exceeds the limit.
void certify_alpha(const BoundSpec& spec, const ReferenceRisk& ref);

// Closed forms.
double delta_f_closed(double alpha, double c_l, double pi_p, std::size_t n_p, std::size_t n_u);
double c_sigma(double c_l, double sigma, double pi_p);
double sample_complexity(double pi_p, std::size_t n_p, std::size_t n_u);  // pi_p/sqrt(n_p) + 1/sqrt(n_u)
double bias_bound(double pi_p, double c_l, double delta_f);

// Certifies alpha against a fresh reference estimate, then evaluates Delta_f.
double delta_f(const BoundSpec& spec);

struct BoundReport {
  std::size_t n_p = 0;
  std::size_t n_u = 0;
  std::size_t trials = 0;
  double pi_p = 0.0;
  double alpha = 0.0;
  double c_l = 0.0;
  double sigma = 0.0;

  double empirical_p_s_minus = 0.0;
  double delta_f = 0.0;
  double lemma_slack = 0.0;  // 3 sqrt(delta_f / trials)
  bool lemma_pass = false;

  double empirical_bias = 0.0;
  double bias_bound = 0.0;
  double mc_std = 0.0;  // std error of empirical_bias, reference error included
  bool bias_pass = false;

  double quantile_level = 0.0;  // 1 - sigma - delta_f, clamped to [0, 1]
  double deviation_quantile_at_1_minus_sigma_minus_delta = 0.0;
  double deviation_bound = 0.0;
  double deviation_median = 0.0;
  bool deviation_pass = false;

  double true_negative_risk_ref = 0.0;
  double reference_std_error = 0.0;

  bool all_pass() const { return lemma_pass && bias_pass && deviation_pass; }
};

// Both run the same trials and fill every field; they differ only in name.
BoundReport mc_lemma1(const BoundSpec& spec);
BoundReport mc_theorem1(const BoundSpec& spec);
// Same, reusing a reference estimate (still certified).
BoundReport verify_bounds(const BoundSpec& spec, const ReferenceRisk& ref);

// One report per (n_p, n_u) cell; the reference is estimated once. With
// alpha_margin <= 0 the largest certified margin is used.
std::vector<BoundReport> verify_grid(BoundSpec base, const std::vector<std::size_t>& n_p_values,
                                     const std::vector<std::size_t>& n_u_values);

void write_bound_csv(std::ostream& out, const std::vector<BoundReport>& reports);
void write_bound_summary(std::ostream& out, const std::vector<BoundReport>& reports);

}  // namespace ocrisk
