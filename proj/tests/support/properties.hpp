#pragma once

// Randomised identities of the risk estimators. Each returns the number of
// instances that violated the identity.

#include <cmath>
#include <cstddef>

#include "ocrisk/risk.hpp"
#include "support/checks.hpp"

namespace ocrisk::testing {

struct ScorePair {
  Eigen::VectorXd p, u;
  EstimatorConfig cfg;
};

inline ScorePair random_scores(Rng& rng) {
  ScorePair s;
  const double scale = 0.1 + 4.0 * rng.uniform();
  s.p = random_vector(static_cast<Eigen::Index>(1 + rng.below(50)), rng, scale);
  s.u = random_vector(static_cast<Eigen::Index>(1 + rng.below(50)), rng, scale);
  // Shift the positives up or down so both inner branches are common.
  s.p.array() += 3.0 * rng.normal();
  s.cfg.pi_p = 0.01 + 0.98 * rng.uniform();
  s.cfg.alpha_p = rng.uniform();
  s.cfg.gamma = 3.0 * rng.uniform();
  return s;
}

// negative_risk_oc >= negative_risk_unbiased, with equality iff inner >= 0.
inline std::size_t violations_oc_dominates(std::uint64_t seed, std::size_t instances) {
  Rng rng = Rng(seed).split("oc_dominates");
  std::size_t bad = 0;
  for (std::size_t i = 0; i < instances; ++i) {
    const auto s = random_scores(rng);
    const double unb = negative_risk_unbiased(s.u, s.p, s.cfg);
    const auto oc = negative_risk_oc(s.u, s.p, s.cfg);
    const bool ok = oc.value >= 0.0 && oc.value >= unb && oc.inner_negative == (unb < 0.0) &&
                    ((unb >= 0.0) == (oc.value == unb));
    bad += !ok;
  }
  return bad;
}

// Equal mean negative losses c0 on P and U give exactly c0.
inline std::size_t violations_constant_loss(std::uint64_t seed, std::size_t instances) {
  Rng rng = Rng(seed).split("constant_loss");
  std::size_t bad = 0;
  for (std::size_t i = 0; i < instances; ++i) {
    auto s = random_scores(rng);
    s.p = s.u;
    double sum = 0.0;
    for (Eigen::Index k = 0; k < s.u.size(); ++k) sum += loss_sigmoid(s.u(k), -1);
    const double c0 = sum / static_cast<double>(s.u.size());
    bad += negative_risk_unbiased(s.u, s.p, s.cfg) != c0;
    bad += negative_risk_oc(s.u, s.p, s.cfg).value != c0;
  }
  return bad;
}

// gamma = 0 focal risk equals the plain mean positive loss.
inline std::size_t violations_focal_gamma0(std::uint64_t seed, std::size_t instances, double tol = 1e-12) {
  Rng rng = Rng(seed).split("focal_gamma0");
  std::size_t bad = 0;
  for (std::size_t i = 0; i < instances; ++i) {
    auto s = random_scores(rng);
    s.cfg.gamma = 0.0;
    double sum = 0.0;
    for (Eigen::Index k = 0; k < s.p.size(); ++k) sum += loss_sigmoid(s.p(k), +1);
    bad += std::abs(positive_risk_focal(s.p, s.cfg) - sum / static_cast<double>(s.p.size())) > tol;
  }
  return bad;
}

// one_class with alpha_p = pi_p and gamma = 0 coincides with unbiased_pu
// whenever the inner estimate is non-negative. Instances on the other
// branch are redrawn; `checked` receives the number compared.
inline std::size_t violations_oc_matches_unbiased(std::uint64_t seed, std::size_t instances, double tol = 1e-12) {
  Rng rng = Rng(seed).split("oc_matches_unbiased");
  std::size_t bad = 0, checked = 0;
  while (checked < instances) {
    auto s = random_scores(rng);
    s.cfg.gamma = 0.0;
    s.cfg.alpha_p = s.cfg.pi_p;
    if (negative_risk_unbiased(s.u, s.p, s.cfg) < 0.0) continue;
    ++checked;
    EstimatorConfig oc = s.cfg, unb = s.cfg;
    oc.estimator = Estimator::OneClass;
    unb.estimator = Estimator::UnbiasedPU;
    const auto a = risk_total(s.p, s.u, oc);
    const auto b = risk_total(s.p, s.u, unb);
    bad += std::abs(a.total - b.total) > tol;
  }
  return bad;
}

}  // namespace ocrisk::testing
