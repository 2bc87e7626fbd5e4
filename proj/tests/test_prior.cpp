#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "rtplan/prior/policy.hpp"
#include "rtplan/stats.hpp"
#include "testutil.hpp"

using namespace rtplan;
using namespace rtplan::prior;

namespace {

Dataset repeated_pair_dataset(const std::vector<double>& s, const std::vector<double>& a,
                              int n) {
  Dataset data;
  Trajectory traj;
  for (int i = 0; i < n; ++i) traj.transitions.push_back({s, a, 0.0, s, i + 1 == n});
  data.trajectories.push_back(traj);
  data.meta.state_dim = static_cast<int>(s.size());
  data.meta.action_dim = static_cast<int>(a.size());
  data.meta.transition_count = n;
  return data;
}

}  // namespace

TEST_CASE("train_bc: degenerate single-pair dataset is fit to 1e-3") {
  std::vector<double> s = {0.4, -0.6};
  std::vector<double> a = {0.3, -0.2};
  Dataset data = repeated_pair_dataset(s, a, 50);
  BcConfig cfg;
  cfg.steps = 900;
  cfg.batch = 16;
  cfg.hidden = {24, 24};
  cfg.seed = 5;
  BcResult res = train_bc(data, cfg);
  net::Vec mean = res.policy.mean_action(s);
  CHECK(std::abs(mean[0] - a[0]) <= 1e-3);
  CHECK(std::abs(mean[1] - a[1]) <= 1e-3);

  // Best-so-far training loss curve is monotone non-increasing.
  double best = res.loss_curve[0];
  for (double v : res.loss_curve) {
    best = std::min(best, v);
    CHECK(best <= v + 1e-12);
  }
}

TEST_CASE("train_bc: recovers a deterministic linear policy; deterministic per seed") {
  // a = clip(K s) on random in-distribution states.
  Rng rng(6);
  const double k00 = 0.8, k11 = -0.5;
  Dataset data;
  data.meta.state_dim = 2;
  data.meta.action_dim = 2;
  for (int e = 0; e < 30; ++e) {
    Trajectory traj;
    for (int t = 0; t < 25; ++t) {
      std::vector<double> s = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
      std::vector<double> a = {std::clamp(k00 * s[0], -1.0, 1.0),
                               std::clamp(k11 * s[1], -1.0, 1.0)};
      traj.transitions.push_back({s, a, 0.0, s, t == 24});
    }
    data.trajectories.push_back(traj);
  }
  data.meta.transition_count = data.transition_count();

  BcConfig cfg;
  cfg.steps = 1200;
  cfg.batch = 64;
  cfg.hidden = {32, 32};
  cfg.seed = 7;
  BcResult res = train_bc(data, cfg);

  Rng eval(9);
  double se = 0.0;
  int n = 0;
  for (int i = 0; i < 300; ++i) {
    std::vector<double> s = {eval.uniform(-1, 1), eval.uniform(-1, 1)};
    net::Vec mean = res.policy.mean_action(s);
    double e0 = mean[0] - k00 * s[0];
    double e1 = mean[1] - k11 * s[1];
    se += e0 * e0 + e1 * e1;
    n += 2;
  }
  CHECK(se / n <= 1e-3);

  BcResult res2 = train_bc(data, cfg);
  CHECK(res2.policy.net().params().checksum() == res.policy.net().params().checksum());

  Dataset empty;
  empty.meta = data.meta;
  CHECK_THROWS_AS(train_bc(empty, cfg), std::invalid_argument);
}

TEST_CASE("sample_action: degenerate variance, clipping contract, empirical mean, determinism") {
  PriorPolicy policy(2, 2, {16, 16}, 3);
  // Push the log-variance head far below the clamp floor.
  net::Vec& hb = policy.net().params().at("head.b").data;
  hb[2] = -30.0;
  hb[3] = -30.0;

  std::vector<double> s = {0.2, -0.3};
  net::Vec mean = policy.mean_action(s);
  Rng rng(1);
  net::Vec a = policy.sample_action(s, 0.0, rng);
  CHECK(std::abs(a[0] - mean[0]) <= 3 * std::exp(-5.0));
  CHECK(std::abs(a[1] - mean[1]) <= 3 * std::exp(-5.0));

  // Bounded output and empirical mean within 3 standard errors.
  net::Vec& hb2 = policy.net().params().at("head.b").data;
  hb2[2] = -2.0;
  hb2[3] = -2.0;
  Rng draw(2);
  double acc0 = 0.0;
  std::vector<double> xs;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    net::Vec x = policy.sample_action(s, 0.05, draw);
    CHECK(x[0] >= -1.0);
    CHECK(x[0] <= 1.0);
    CHECK(x[1] >= -1.0);
    CHECK(x[1] <= 1.0);
    acc0 += x[0];
    xs.push_back(x[0]);
  }
  double se = stats::sample_std(xs) / std::sqrt(static_cast<double>(n));
  CHECK(std::abs(acc0 / n - mean[0]) <= 3 * se);

  Rng r1(8), r2(8);
  CHECK(policy.sample_action(s, 0.05, r1) == policy.sample_action(s, 0.05, r2));
}

TEST_CASE("mc_returns: hand-computed values, myopic case, zeros, Bellman identity") {
  Trajectory traj;
  std::vector<double> s = {0.0};
  for (double r : {1.0, 1.0, 1.0}) traj.transitions.push_back({s, {0.0}, r, s, false});
  traj.transitions.back().done = true;

  net::Vec g = mc_returns(traj, 0.5);
  CHECK(g == net::Vec{1.75, 1.5, 1.0});
  CHECK(mc_returns(traj, 0.0) == net::Vec{1.0, 1.0, 1.0});

  Trajectory zeros = traj;
  for (auto& tr : zeros.transitions) tr.reward = 0.0;
  CHECK(mc_returns(zeros, 0.9) == net::Vec{0.0, 0.0, 0.0});

  PointMass2D env;
  PdPolicy pol(0.6, 0.8, 0.35);
  Rng rng(5);
  Trajectory ep = roll_episode(env, pol, rng);
  net::Vec gr = mc_returns(ep, 0.97);
  for (std::size_t t = 0; t + 1 < ep.size(); ++t)
    CHECK(gr[t] == doctest::Approx(ep.transitions[t].reward + 0.97 * gr[t + 1]).epsilon(1e-12));

  CHECK_THROWS_AS(mc_returns(traj, -0.1), std::invalid_argument);
  CHECK_THROWS_AS(mc_returns(traj, 1.5), std::invalid_argument);
}

TEST_CASE("train_value_mc: geometric-series target, zero rewards, determinism") {
  // r = c with gamma = 0.5 -> V ~ 2c away from the tail; state encodes t/T.
  const double c = 0.7;
  Dataset data;
  data.meta.state_dim = 1;
  data.meta.action_dim = 1;
  const int T = 40;
  for (int e = 0; e < 10; ++e) {
    Trajectory traj;
    for (int t = 0; t < T; ++t) {
      std::vector<double> s = {static_cast<double>(t) / T};
      std::vector<double> s2 = {static_cast<double>(t + 1) / T};
      traj.transitions.push_back({s, {0.0}, c, s2, t + 1 == T});
    }
    data.trajectories.push_back(traj);
  }
  data.meta.transition_count = data.transition_count();

  ValueConfig cfg;
  cfg.steps = 900;
  cfg.batch = 64;
  cfg.hidden = {24, 24};
  cfg.seed = 11;
  ValueResult res = train_value_mc(data, 0.5, cfg);
  // Early states have effectively converged geometric targets.
  for (double t0 : {0.0, 0.1, 0.2, 0.4}) {
    double v = res.value.value(std::vector<double>{t0});
    CHECK(std::abs(v - 2.0 * c) <= 0.1 * 2.0 * c);
  }

  Dataset zeros = data;
  for (auto& traj : zeros.trajectories)
    for (auto& tr : traj.transitions) tr.reward = 0.0;
  ValueResult zr = train_value_mc(zeros, 0.5, cfg);
  Rng rng(2);
  for (int i = 0; i < 50; ++i) {
    double v = zr.value.value(std::vector<double>{rng.uniform(0, 1)});
    CHECK(std::abs(v) <= 1e-2);
  }

  ValueResult res2 = train_value_mc(data, 0.5, cfg);
  CHECK(res2.value.net().params().checksum() == res.value.net().params().checksum());

  Dataset empty;
  empty.meta = data.meta;
  CHECK_THROWS_AS(train_value_mc(empty, 0.5, cfg), std::invalid_argument);
}
