#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>

#include "rtplan/belief/encoder.hpp"
#include "rtplan/model/ensemble.hpp"
#include "rtplan/stats.hpp"
#include "testutil.hpp"

using namespace rtplan;
using namespace rtplan::model;

namespace {

EnsembleModel make_model(int sd, int ad, int ld, std::size_t members, std::size_t elites,
                         std::uint64_t seed) {
  EnsembleConfig cfg;
  cfg.state_dim = sd;
  cfg.action_dim = ad;
  cfg.latent_dim = ld;
  cfg.members = members;
  cfg.elites = elites;
  cfg.hidden = {24, 24};
  return EnsembleModel(cfg, seed);
}

}  // namespace

TEST_CASE("select_elites: sorting, ties, saturation, range errors, shift invariance") {
  CHECK(select_elites({3, 1, 2}, 2) == std::vector<std::size_t>{1, 2});
  CHECK(select_elites({1, 1, 2}, 1) == std::vector<std::size_t>{0});
  CHECK(select_elites({5, 4, 3}, 3) == std::vector<std::size_t>{0, 1, 2});
  CHECK_THROWS_AS(select_elites({1, 2}, 0), std::invalid_argument);
  CHECK_THROWS_AS(select_elites({1, 2}, 3), std::invalid_argument);

  Rng rng(3);
  std::vector<double> losses(9);
  for (auto& x : losses) x = rng.uniform(-5, 5);
  auto base = select_elites(losses, 4);
  for (auto& x : losses) x += 123.456;
  CHECK(select_elites(losses, 4) == base);
}

TEST_CASE("predict: zero member gives next-state mean = s; elite checks; determinism") {
  EnsembleModel model = make_model(3, 2, 4, 4, 2, 11);
  model.set_elites({0, 2});
  for (const auto& name : model.member(0).params().names())
    for (double& x : model.member(0).params().at(name).data) x = 0.0;
  model.member(0).rebind();

  net::Vec s = {0.5, -1.0, 2.0}, a = {0.1, 0.2}, m = {0, 0, 0, 0};
  GaussianPrediction pred = model.predict(s, a, m, 0);
  CHECK(pred.next_state_mean(s) == s);
  CHECK(pred.reward_mean() == 0.0);

  CHECK_THROWS_AS(model.predict(s, a, m, 1), std::invalid_argument);

  GaussianPrediction p1 = model.predict(s, a, m, 2);
  GaussianPrediction p2 = model.predict(s, a, m, 2);
  CHECK(p1.mean == p2.mean);
  CHECK(p1.logvar == p2.logvar);
}

TEST_CASE("sample_transition: degenerate limits, uniform member frequencies, determinism") {
  EnsembleModel model = make_model(2, 1, 2, 5, 5, 7);

  // Variance clamped to the floor: samples stay within 3 sigma = 3 e^-5.
  GaussianPrediction pred;
  pred.mean = {1.0, -2.0};
  pred.logvar = {net::kLogVarMin, net::kLogVarMin};
  Rng rng(5);
  for (int i = 0; i < 200; ++i) {
    net::Vec x = sample_from_prediction(pred, rng);
    CHECK(std::abs(x[0] - 1.0) < 5 * std::exp(-5.0));
    CHECK(std::abs(x[1] + 2.0) < 5 * std::exp(-5.0));
  }
  // Variance numerically zeroed: the sample is the mean.
  pred.logvar = {-std::numeric_limits<double>::infinity(),
                 -std::numeric_limits<double>::infinity()};
  CHECK(sample_from_prediction(pred, rng) == pred.mean);

  // Member selection is uniform across elites (chi-square p > 0.01).
  net::Vec s = {0.0, 0.0}, a = {0.0}, m = {0.0, 0.0};
  std::vector<std::size_t> counts(5, 0);
  Rng draw(99);
  for (int i = 0; i < 10000; ++i) counts[model.sample_transition(s, a, m, draw).member]++;
  double stat = stats::chi_square_stat_uniform(counts);
  double p = 1.0 - stats::chi_square_cdf(stat, 4.0);
  CHECK(p > 0.01);

  Rng r1(42), r2(42);
  auto s1 = model.sample_transition(s, a, m, r1);
  auto s2 = model.sample_transition(s, a, m, r2);
  CHECK(s1.next_state == s2.next_state);
  CHECK(s1.reward == s2.reward);
  CHECK(s1.member == s2.member);
}

TEST_CASE("normalizer: round trip within 1e-12") {
  Dataset data = testutil::make_linear_dataset(3, 2, 4, 25, 2);
  Normalizer norm;
  norm.fit(data);
  Rng rng(8);
  for (int i = 0; i < 50; ++i) {
    net::Vec x(5);
    for (auto& v : x) v = rng.uniform(-3, 3);
    net::Vec back = norm.denormalize(norm.normalize(x));
    for (std::size_t d = 0; d < x.size(); ++d) CHECK(back[d] == doctest::Approx(x[d]).epsilon(1e-12));
  }
}

TEST_CASE("train_mle: fits noiseless linear dynamics; deterministic; frozen encoder") {
  Dataset data = testutil::make_linear_dataset(2, 2, 24, 30, 5);

  belief::EncoderConfig ec;
  ec.state_dim = 2;
  ec.action_dim = 2;
  ec.latent_dim = 2;
  ec.hidden_dim = 12;
  ec.state_emb = 6;
  ec.action_emb = 6;
  ec.reward_emb = 3;
  belief::Encoder encoder(ec, 3);

  EnsembleConfig mc;
  mc.state_dim = 2;
  mc.action_dim = 2;
  mc.latent_dim = 2;
  mc.members = 3;
  mc.elites = 2;
  mc.hidden = {32, 32};
  EnsembleModel model(mc, 17);
  Normalizer norm;
  norm.fit(data);
  model.set_normalizer(norm);

  TrainConfig tc;
  tc.max_epochs = 40;
  tc.batch = 32;
  tc.segment_len = 2;
  tc.batches_per_epoch = 20;
  tc.patience = 10;
  tc.lr = 2e-3;
  tc.seed = 1;
  std::uint64_t enc_sum_before = encoder.params().checksum();
  TrainReport report = train_mle(model, data, encoder, tc);
  CHECK(encoder.params().checksum() == enc_sum_before);

  // Best-so-far training curve is monotone non-increasing.
  double best = report.epoch_train_nll.empty() ? 0.0 : report.epoch_train_nll[0];
  for (double v : report.epoch_train_nll) {
    best = std::min(best, v);
    CHECK(best <= v + 1e-12);
  }

  model.set_elites(select_elites(report.val_nll, mc.elites));

  // Held-out next-state RMSE under the first elite.
  Dataset held = testutil::make_linear_dataset(2, 2, 4, 20, 777);
  double se = 0.0;
  std::size_t n = 0;
  for (const auto& traj : held.trajectories) {
    auto beliefs = encoder.encode(traj);
    for (std::size_t h = 0; h < traj.size(); ++h) {
      const auto& tr = traj.transitions[h];
      GaussianPrediction pred =
          model.predict(tr.state, tr.action, beliefs[h].mu, model.elite_indices()[0]);
      net::Vec ns = pred.next_state_mean(tr.state);
      for (std::size_t d = 0; d < ns.size(); ++d) se += (ns[d] - tr.next_state[d]) * (ns[d] - tr.next_state[d]);
      n += ns.size();
    }
  }
  double rmse = std::sqrt(se / n);
  CHECK(rmse <= 1e-2);

  // Same seed, same result.
  EnsembleModel model2(mc, 17);
  model2.set_normalizer(norm);
  TrainReport report2 = train_mle(model2, data, encoder, tc);
  CHECK(report2.val_nll == report.val_nll);

  // Error paths.
  Dataset empty;
  empty.meta = data.meta;
  empty.meta.transition_count = 0;
  CHECK_THROWS_AS(train_mle(model, empty, encoder, tc), std::invalid_argument);
  TrainConfig long_seg = tc;
  long_seg.segment_len = 1000;
  CHECK_THROWS_AS(train_mle(model, data, encoder, long_seg), std::invalid_argument);
}

TEST_CASE("ensemble checkpoint round trip") {
  EnsembleModel model = make_model(2, 1, 2, 3, 2, 23);
  model.set_elites({1, 2});
  Normalizer norm;
  norm.mean = {0.1, 0.2, 0.3};
  norm.std = {1.0, 2.0, 3.0};
  model.set_normalizer(norm);
  auto path = (std::filesystem::temp_directory_path() / "rtplan_ens_ckpt.bin").string();
  model.save(path);
  EnsembleModel back = EnsembleModel::load(path);
  CHECK(back.elite_indices() == model.elite_indices());
  CHECK(back.normalizer().mean == norm.mean);
  CHECK(back.normalizer().std == norm.std);
  for (std::size_t k = 0; k < model.member_count(); ++k)
    CHECK(back.member(k).params().checksum() == model.member(k).params().checksum());
  std::filesystem::remove(path);
}
