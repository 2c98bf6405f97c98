#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "ocrisk/data.hpp"
#include "ocrisk/errors.hpp"
#include "ocrisk/metrics.hpp"
#include "ocrisk/model.hpp"
#include "ocrisk/rng.hpp"

using namespace ocrisk;

TEST_CASE("confusion counts") {
  const std::vector<int> truth{1, 1, -1, -1, 1};
  const auto right = confusion(truth, truth);
  CHECK(right.fp == 0);
  CHECK(right.fn == 0);
  CHECK(right.tp == 3);
  CHECK(right.tn == 2);

  std::vector<int> flipped;
  for (int y : truth) flipped.push_back(-y);
  const auto wrong = confusion(flipped, truth);
  CHECK(wrong.tp == 0);
  CHECK(wrong.tn == 0);

  const std::vector<int> d{1, 1, -1}, t{1, -1, -1};
  const auto c = confusion(d, t);
  CHECK(c.tp == 1);
  CHECK(c.fp == 1);
  CHECK(c.fn == 0);
  CHECK(c.tn == 1);
  CHECK(c.total() == 3);

  CHECK_THROWS_AS(confusion(d, truth), ValidationError);
  CHECK_THROWS_AS(confusion(std::vector<int>{}, std::vector<int>{}), ValidationError);
}

TEST_CASE("confusion is invariant under joint permutation") {
  Rng rng(4);
  std::vector<int> d(200), t(200);
  for (std::size_t i = 0; i < d.size(); ++i) {
    d[i] = rng.bernoulli(0.4) ? 1 : -1;
    t[i] = rng.bernoulli(0.3) ? 1 : -1;
  }
  const auto base = confusion(d, t);
  std::vector<std::size_t> order(d.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<int> d2, t2;
  for (auto i : order) {
    d2.push_back(d[i]);
    t2.push_back(t[i]);
  }
  const auto perm = confusion(d2, t2);
  CHECK(perm.tp == base.tp);
  CHECK(perm.fp == base.fp);
  CHECK(perm.fn == base.fn);
  CHECK(perm.tn == base.tn);
}

TEST_CASE("precision and recall zero-denominator conventions") {
  ConfusionCounts none{0, 0, 5, 10};
  CHECK(none.precision() == 0.0);
  CHECK(none.recall() == 0.0);
  ConfusionCounts no_pos{0, 3, 0, 10};
  CHECK(no_pos.recall() == 0.0);
}

TEST_CASE("f1 values") {
  CHECK(f1(1.0, 1.0) == 1.0);
  CHECK(f1(0.0, 0.7) == 0.0);
  CHECK(f1(0.0, 0.0) == 0.0);
  CHECK(f1(0.9926, 0.9941) == doctest::Approx(0.9933494337343334).epsilon(1e-14));
  CHECK(percent(f1(0.9926, 0.9941)) == "99.33");

  Rng rng(7);
  for (int i = 0; i < 1000; ++i) {
    const double p = rng.uniform(), r = rng.uniform();
    const double v = f1(p, r);
    CHECK(v >= std::min(p, r) - 1e-15);
    CHECK(v <= std::max(p, r) + 1e-15);
    CHECK(v <= 2.0 * std::min(p, r) + 1e-15);
  }
}

TEST_CASE("average f1") {
  MetricsReport a, b;
  a.f1 = 0.9;
  b.f1 = 0.7;
  CHECK(average_f1(std::vector<MetricsReport>{a}) == 0.9);
  CHECK(average_f1(std::vector<MetricsReport>{a, b}) == doctest::Approx(0.8).epsilon(1e-15));
  CHECK_THROWS_AS(average_f1(std::vector<MetricsReport>{}), ValidationError);
}

TEST_CASE("auc by rank sum") {
  const std::vector<double> sep{0.1, 0.2, 0.8, 0.9};
  const std::vector<int> truth{-1, -1, 1, 1};
  CHECK(auc(sep, truth) == 1.0);
  const std::vector<double> flat{0.3, 0.3, 0.3, 0.3};
  CHECK(auc(flat, truth) == 0.5);
  CHECK(auc(std::vector<double>{0.9, 0.4, 0.6}, std::vector<int>{1, -1, 1}) == 1.0);
  CHECK(auc(std::vector<double>{0.9, 0.4, 0.6, 0.4}, std::vector<int>{1, -1, -1, 1}) == doctest::Approx(0.625));
  CHECK_THROWS_AS(auc(sep, std::vector<int>{1, 1, 1, 1}), ValidationError);
  CHECK_THROWS_AS(auc(sep, std::vector<int>{1, -1}), ValidationError);
}

TEST_CASE("auc matches brute-force pair counting and is rank invariant") {
  Rng rng(12);
  for (int rep = 0; rep < 20; ++rep) {
    const std::size_t n = 5 + rng.below(60);
    std::vector<double> s(n);
    std::vector<int> t(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = std::round(4.0 * rng.normal()) / 2.0;  // plenty of ties
      t[i] = rng.bernoulli(0.4) ? 1 : -1;
    }
    t[0] = 1;
    t[1] = -1;
    double wins = 0.0, pairs = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (t[i] == 1 && t[j] == -1) {
          pairs += 1.0;
          wins += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
        }
    CHECK(auc(s, t) == doctest::Approx(wins / pairs).epsilon(1e-14));
    std::vector<double> warped;
    for (double v : s) warped.push_back(std::exp(3.0 * v) - 7.0);
    CHECK(auc(warped, t) == doctest::Approx(auc(s, t)).epsilon(1e-14));
  }
}

TEST_CASE("evaluate thresholds raw scores at zero") {
  LabeledDataset ds;
  ds.features.resize(4, 1);
  ds.features << -1.0, 0.0, 2.0, 3.0;
  ds.labels = {-1, 1, 1, -1};
  ds.pi_p_true = 0.5;
  ModelParams identity({1, 1});
  identity.weight(0)(0, 0) = 1.0;
  const std::vector<std::size_t> rows{0, 1, 2, 3};
  const auto m = evaluate(identity, ds, rows);
  // decisions: -1, -1 (score 0), +1, +1
  CHECK(m.precision == 0.5);
  CHECK(m.recall == 0.5);
  CHECK(m.f1 == 0.5);
  CHECK(m.n_eval == 4);
  CHECK(m.auc == doctest::Approx(0.5));
}

TEST_CASE("mean and sample std") {
  const std::vector<double> v{1.0, 2.0, 3.0, 4.0};
  const auto ms = mean_std(v);
  CHECK(ms.mean == 2.5);
  CHECK(ms.stddev == doctest::Approx(std::sqrt(5.0 / 3.0)).epsilon(1e-15));
  CHECK(mean_std(std::vector<double>{0.3}).stddev == 0.0);
  CHECK(percent(0.93584) == "93.58");
  CHECK(percent(0.0) == "0.00");
  CHECK(percent(1.0) == "100.00");
}
