#include "ocrisk/theory.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <thread>

#include "ocrisk/errors.hpp"
#include "ocrisk/format.hpp"
#include "ocrisk/rng.hpp"

namespace ocrisk {

namespace {

SyntheticSpec mixture_of(const BoundSpec& spec) {
  SyntheticSpec d = spec.distribution;
  d.pi_p = spec.pi_p;
  return d;
}

double mean_negative_loss(const BoundSpec& spec, const Eigen::MatrixXd& x) {
  const Eigen::VectorXd s = forward_batch(spec.fixed_model, x);
  double sum = 0.0;
  for (Eigen::Index i = 0; i < s.size(); ++i) sum += eval_loss(spec.loss, s(i), -1).value;
  return sum / static_cast<double>(s.size());
}

struct Trial {
  double inner = 0.0;  // R_u^- - pi_p R_p^-
  double oc = 0.0;     // |inner| / (1 - pi_p)
};

Trial run_trial(const BoundSpec& spec, const SyntheticSpec& dist, const Rng& root, std::size_t t) {
  Rng rng = root.split("trial", t);
  const Eigen::MatrixXd xp = sample_class(dist, true, spec.n_p, rng);
  const Eigen::MatrixXd xu = sample_marginal(dist, spec.n_u, rng);
  Trial out;
  out.inner = mean_negative_loss(spec, xu) - spec.pi_p * mean_negative_loss(spec, xp);
  out.oc = std::abs(out.inner) / (1.0 - spec.pi_p);
  return out;
}

// Lower empirical quantile: smallest x with F_n(x) >= q.
double order_quantile(std::vector<double> v, double q) {
  if (v.empty() || q <= 0.0) return 0.0;
  std::sort(v.begin(), v.end());
  auto k = static_cast<std::size_t>(std::ceil(q * static_cast<double>(v.size())));
  k = std::clamp<std::size_t>(k, 1, v.size());
  return v[k - 1];
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

void BoundSpec::validate() const {
  if (fixed_model.size() == 0) throw ValidationError("fixed_model is empty");
  if (fixed_model.input_dim() != distribution.dim)
    throw ValidationError("fixed_model input size does not match the distribution dimension");
  distribution.validate();
  if (!(pi_p > 0.0 && pi_p < 1.0)) throw ValidationError("pi_p must lie in (0,1)");
  if (n_p < 1 || n_u < 1) throw ValidationError("n_p and n_u must be >= 1");
  if (trials < 1000) throw ValidationError("trials must be >= 1000, got " + std::to_string(trials));
  if (!(sigma > 0.0 && sigma < 1.0)) throw ValidationError("sigma must lie in (0,1), got " + format_real(sigma));
  if (!std::isfinite(loss.bound())) throw ValidationError("bounds need a bounded loss");
  if (reference_samples < 1000) throw ValidationError("reference_samples must be >= 1000");
}

ReferenceRisk estimate_reference(const BoundSpec& spec) {
  spec.validate();
  Rng rng = Rng(spec.seed).split("reference");
  const SyntheticSpec dist = mixture_of(spec);
  constexpr std::size_t kChunk = 65536;
  double sum = 0.0, sum_sq = 0.0;
  for (std::size_t done = 0; done < spec.reference_samples; done += kChunk) {
    const std::size_t n = std::min(kChunk, spec.reference_samples - done);
    const Eigen::VectorXd s = forward_batch(spec.fixed_model, sample_class(dist, false, n, rng));
    for (Eigen::Index i = 0; i < s.size(); ++i) {
      const double l = eval_loss(spec.loss, s(i), -1).value;
      sum += l;
      sum_sq += l * l;
    }
  }
  const double n = static_cast<double>(spec.reference_samples);
  ReferenceRisk ref;
  ref.samples = spec.reference_samples;
  ref.value = sum / n;
  const double var = std::max(0.0, (sum_sq - n * ref.value * ref.value) / (n - 1.0));
  ref.std_error = std::sqrt(var / n);
  return ref;
}

double max_certified_alpha(const ReferenceRisk& ref, double pi_p) { return 0.9 * (1.0 - pi_p) * ref.value; }

void certify_alpha(const BoundSpec& spec, const ReferenceRisk& ref) {
  const double limit = max_certified_alpha(ref, spec.pi_p);
  if (!(spec.alpha_margin > 0.0))
    throw ValidationError("alpha_margin must be > 0, got " + format_real(spec.alpha_margin));
  if (spec.alpha_margin > limit)
    throw ValidationError("alpha_margin " + format_real(spec.alpha_margin) +
                          " is not certified: it must be <= 0.9 (1 - pi_p) R_n^-(f) = " + format_real(limit));
}

double delta_f_closed(double alpha, double c_l, double pi_p, std::size_t n_p, std::size_t n_u) {
  const double a = alpha / c_l;
  const double denom = pi_p * pi_p / static_cast<double>(n_p) + 1.0 / static_cast<double>(n_u);
  return std::exp(-2.0 * a * a / denom);
}

double c_sigma(double c_l, double sigma, double pi_p) {
  return c_l * std::sqrt(std::log(2.0 / sigma) / 2.0) / (1.0 - pi_p);
}

double sample_complexity(double pi_p, std::size_t n_p, std::size_t n_u) {
  return pi_p / std::sqrt(static_cast<double>(n_p)) + 1.0 / std::sqrt(static_cast<double>(n_u));
}

double bias_bound(double pi_p, double c_l, double delta_f) { return 2.0 * pi_p * c_l * delta_f / (1.0 - pi_p); }

double delta_f(const BoundSpec& spec) {
  certify_alpha(spec, estimate_reference(spec));
  return delta_f_closed(spec.alpha_margin, spec.loss.bound(), spec.pi_p, spec.n_p, spec.n_u);
}

BoundReport verify_bounds(const BoundSpec& spec, const ReferenceRisk& ref) {
  spec.validate();
  certify_alpha(spec, ref);

  const SyntheticSpec dist = mixture_of(spec);
  const Rng root = Rng(spec.seed).split("trials");
  std::vector<Trial> trials(spec.trials);

  unsigned workers = spec.threads ? spec.threads : std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, spec.trials));
  auto work = [&](unsigned w) {
    for (std::size_t t = w; t < spec.trials; t += workers) trials[t] = run_trial(spec, dist, root, t);
  };
  if (workers <= 1) {
    work(0);
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work, w);
  }

  BoundReport r;
  r.n_p = spec.n_p;
  r.n_u = spec.n_u;
  r.trials = spec.trials;
  r.pi_p = spec.pi_p;
  r.alpha = spec.alpha_margin;
  r.c_l = spec.loss.bound();
  r.sigma = spec.sigma;
  r.true_negative_risk_ref = ref.value;
  r.reference_std_error = ref.std_error;

  const double n = static_cast<double>(spec.trials);
  std::size_t negatives = 0;
  double sum = 0.0, sum_sq = 0.0;
  std::vector<double> dev;
  dev.reserve(spec.trials);
  for (const auto& t : trials) {
    if (t.inner < 0.0) ++negatives;
    sum += t.oc;
    sum_sq += t.oc * t.oc;
    dev.push_back(std::abs(t.oc - ref.value));
  }

  r.empirical_p_s_minus = static_cast<double>(negatives) / n;
  r.delta_f = delta_f_closed(r.alpha, r.c_l, r.pi_p, r.n_p, r.n_u);
  r.lemma_slack = 3.0 * std::sqrt(r.delta_f / n);
  r.lemma_pass = r.empirical_p_s_minus <= r.delta_f + r.lemma_slack;

  const double mean = sum / n;
  const double var = std::max(0.0, (sum_sq - n * mean * mean) / (n - 1.0));
  r.empirical_bias = mean - ref.value;
  r.bias_bound = bias_bound(r.pi_p, r.c_l, r.delta_f);
  r.mc_std = std::sqrt(var / n + ref.std_error * ref.std_error);
  r.bias_pass = r.empirical_bias >= -3.0 * r.mc_std && r.empirical_bias <= r.bias_bound + 3.0 * r.mc_std;

  r.quantile_level = std::clamp(1.0 - r.sigma - r.delta_f, 0.0, 1.0);
  r.deviation_quantile_at_1_minus_sigma_minus_delta = order_quantile(dev, r.quantile_level);
  r.deviation_bound = c_sigma(r.c_l, r.sigma, r.pi_p) * sample_complexity(r.pi_p, r.n_p, r.n_u);
  r.deviation_median = median(dev);
  r.deviation_pass = r.deviation_quantile_at_1_minus_sigma_minus_delta <= r.deviation_bound;
  return r;
}

BoundReport mc_lemma1(const BoundSpec& spec) { return verify_bounds(spec, estimate_reference(spec)); }

BoundReport mc_theorem1(const BoundSpec& spec) { return verify_bounds(spec, estimate_reference(spec)); }

std::vector<BoundReport> verify_grid(BoundSpec base, const std::vector<std::size_t>& n_p_values,
                                     const std::vector<std::size_t>& n_u_values) {
  if (n_p_values.empty() || n_u_values.empty()) throw ValidationError("empty (n_p, n_u) grid");
  const ReferenceRisk ref = estimate_reference(base);
  if (base.alpha_margin <= 0.0) base.alpha_margin = max_certified_alpha(ref, base.pi_p);
  std::vector<BoundReport> out;
  for (auto np : n_p_values)
    for (auto nu : n_u_values) {
      BoundSpec cell = base;
      cell.n_p = np;
      cell.n_u = nu;
      out.push_back(verify_bounds(cell, ref));
    }
  return out;
}

void write_bound_csv(std::ostream& out, const std::vector<BoundReport>& reports) {
  out << "n_p,n_u,trials,pi_p,alpha,c_l,sigma,p_s_minus,delta_f,lemma_slack,lemma,"
         "empirical_bias,bias_bound,mc_std,bias,quantile_level,deviation_quantile,deviation_bound,"
         "deviation_median,deviation,reference_risk,reference_se\n";
  auto flag = [](bool ok) { return ok ? "PASS" : "FAIL"; };
  for (const auto& r : reports) {
    out << r.n_p << ',' << r.n_u << ',' << r.trials << ',' << format_real(r.pi_p) << ','
        << format_real(r.alpha) << ',' << format_real(r.c_l) << ',' << format_real(r.sigma) << ','
        << format_real(r.empirical_p_s_minus) << ',' << format_real(r.delta_f) << ','
        << format_real(r.lemma_slack) << ',' << flag(r.lemma_pass) << ',' << format_real(r.empirical_bias)
        << ',' << format_real(r.bias_bound) << ',' << format_real(r.mc_std) << ',' << flag(r.bias_pass) << ','
        << format_real(r.quantile_level) << ',' << format_real(r.deviation_quantile_at_1_minus_sigma_minus_delta)
        << ',' << format_real(r.deviation_bound) << ',' << format_real(r.deviation_median) << ','
        << flag(r.deviation_pass) << ',' << format_real(r.true_negative_risk_ref) << ','
        << format_real(r.reference_std_error) << '\n';
  }
}

void write_bound_summary(std::ostream& out, const std::vector<BoundReport>& reports) {
  std::size_t failed = 0;
  for (const auto& r : reports) {
    out << "cell n_p=" << r.n_p << " n_u=" << r.n_u << '\n'
        << "  P(S-)      " << format_fixed(r.empirical_p_s_minus, 6) << " <= " << format_fixed(r.delta_f, 6)
        << " + " << format_fixed(r.lemma_slack, 6) << (r.lemma_pass ? "  PASS" : "  FAIL") << '\n'
        << "  bias       " << format_fixed(r.empirical_bias, 6) << " in [" << format_fixed(-3.0 * r.mc_std, 6)
        << ", " << format_fixed(r.bias_bound + 3.0 * r.mc_std, 6) << "]" << (r.bias_pass ? "  PASS" : "  FAIL")
        << '\n'
        << "  deviation  q" << format_fixed(r.quantile_level, 4) << " "
        << format_fixed(r.deviation_quantile_at_1_minus_sigma_minus_delta, 6) << " <= "
        << format_fixed(r.deviation_bound, 6) << (r.deviation_pass ? "  PASS" : "  FAIL") << '\n';
    if (!r.all_pass()) ++failed;
  }
  if (!reports.empty())
    out << "reference R_n^-(f) = " << format_real(reports.front().true_negative_risk_ref) << " (se "
        << format_real(reports.front().reference_std_error) << "), alpha = "
        << format_real(reports.front().alpha) << '\n';
  out << (failed ? std::to_string(failed) + " cell(s) failed\n" : "all cells passed\n");
}

}  // namespace ocrisk
