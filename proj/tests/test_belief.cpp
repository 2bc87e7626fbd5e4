#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "rtplan/belief/vae.hpp"
#include "rtplan/net/gradcheck.hpp"
#include "rtplan/net/tape.hpp"
#include "rtplan/stats.hpp"
#include "testutil.hpp"

using namespace rtplan;
using namespace rtplan::belief;

namespace {

EncoderConfig small_encoder_cfg(int sd, int ad, int ld = 3) {
  EncoderConfig ec;
  ec.state_dim = sd;
  ec.action_dim = ad;
  ec.latent_dim = ld;
  ec.hidden_dim = 10;
  ec.state_emb = 5;
  ec.action_emb = 5;
  ec.reward_emb = 3;
  return ec;
}

model::EnsembleModel small_decoder(int sd, int ad, int ld, std::size_t members,
                                   std::uint64_t seed) {
  model::EnsembleConfig mc;
  mc.state_dim = sd;
  mc.action_dim = ad;
  mc.latent_dim = ld;
  mc.members = members;
  mc.elites = members;
  mc.hidden = {16, 16};
  return model::EnsembleModel(mc, seed);
}

Trajectory fixed_point_prefix(int steps) {
  Trajectory traj;
  std::vector<double> s = {0.3, -0.2, 0.0, 0.0};
  for (int t = 0; t < steps; ++t)
    traj.transitions.push_back({s, {0.0, 0.0}, 0.0, s, t + 1 == steps});
  return traj;
}

}  // namespace

TEST_CASE("encode: zero parameters give mu = 0, logvar = 0 at every step") {
  EncoderConfig ec = small_encoder_cfg(4, 2);
  Encoder enc(ec, 5);
  for (const auto& name : enc.params().names())
    for (double& x : enc.params().at(name).data) x = 0.0;
  Trajectory prefix = fixed_point_prefix(6);
  auto beliefs = enc.encode(prefix);
  REQUIRE(beliefs.size() == 7);
  for (const auto& bp : beliefs) {
    CHECK(bp.mu == net::Vec(3, 0.0));
    CHECK(bp.log_var == net::Vec(3, 0.0));
  }
}

TEST_CASE("encode: determinism and tape/plain agreement") {
  Encoder enc(small_encoder_cfg(4, 2), 9);
  PointMass2D env;
  PdPolicy pol(0.6, 0.8, 0.35);
  Rng rng(3);
  Trajectory traj = roll_episode(env, pol, rng);
  traj.transitions.resize(8);
  traj.transitions.back().done = false;

  auto b1 = enc.encode(traj);
  auto b2 = enc.encode(traj);
  for (std::size_t i = 0; i < b1.size(); ++i) {
    CHECK(b1[i].mu == b2[i].mu);
    CHECK(b1[i].log_var == b2[i].log_var);
  }

  net::Tape tape;
  auto steps = enc.encode_tape(tape, traj, traj.size());
  for (std::size_t i = 0; i < steps.size(); ++i) {
    for (std::size_t d = 0; d < b1[i].mu.size(); ++d) {
      CHECK(tape.val(steps[i].mu)[d] == doctest::Approx(b1[i].mu[d]).epsilon(1e-14));
      CHECK(tape.val(steps[i].logvar)[d] == doctest::Approx(b1[i].log_var[d]).epsilon(1e-14));
    }
  }
}

TEST_CASE("encode: causality under mutation of later transitions") {
  Encoder enc(small_encoder_cfg(4, 2), 13);
  PointMass2D env;
  PdPolicy pol(0.6, 0.8, 0.35);
  Rng rng(4);
  Trajectory traj = roll_episode(env, pol, rng);
  traj.transitions.resize(10);
  traj.transitions.back().done = false;

  const std::size_t h = 5;
  auto before = enc.encode(traj);
  Trajectory mutated = traj;
  Rng mrng(6);
  for (std::size_t i = h; i < mutated.size(); ++i) {
    for (auto& x : mutated.transitions[i].action) x = mrng.uniform(-1, 1);
    mutated.transitions[i].reward = mrng.uniform(-5, 5);
    for (auto& x : mutated.transitions[i].next_state) x = mrng.uniform(-2, 2);
    if (i > h)
      for (auto& x : mutated.transitions[i].state) x = mrng.uniform(-2, 2);
  }
  auto after = enc.encode_from(mutated.transitions[0].state, mutated);
  for (std::size_t step = 0; step <= h; ++step) {
    CHECK(before[step].mu == after[step].mu);
    CHECK(before[step].log_var == after[step].log_var);
  }
  CHECK(before[h + 1].mu != after[h + 1].mu);
}

TEST_CASE("encoder gradients match finite differences") {
  Encoder enc(small_encoder_cfg(3, 2, 2), 21);
  // Move every parameter (biases included) off the ReLU kinks so central
  // differences are valid everywhere.
  Rng prng(77);
  for (const auto& name : enc.params().names())
    for (double& x : enc.params().at(name).data) x = prng.uniform(-0.3, 0.3);
  Trajectory traj;
  Rng rng(2);
  std::vector<double> s = {0.1, -0.2, 0.4};
  for (int t = 0; t < 5; ++t) {
    std::vector<double> a = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
    std::vector<double> s2 = {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
    traj.transitions.push_back({s, a, rng.uniform(-1, 1), s2, t == 4});
    s = s2;
  }
  auto loss = [&](net::ParamStore& ps, net::Gradients* g) {
    (void)ps;
    net::Tape tape;
    auto steps = enc.encode_tape(tape, traj, traj.size());
    auto last = steps.back();
    auto l = tape.add(tape.sum(tape.square_f(last.mu)), tape.sum(tape.square_f(last.logvar)));
    if (g) {
      tape.backward(l);
      tape.add_param_grads(enc.params(), *g);
    }
    return tape.val(l)[0];
  };
  CHECK(net::gradcheck(loss, enc.params(), 1e-5) <= 1e-4);
}

TEST_CASE("kl_gaussian closed forms") {
  BeliefParams q, p;
  q.mu = {1.0};
  q.log_var = {0.0};
  p.mu = {0.0};
  p.log_var = {0.0};
  CHECK(kl_gaussian(q, p) == doctest::Approx(0.5).epsilon(1e-12));
  q.mu = {0.0};
  q.log_var = {std::log(4.0)};
  CHECK(kl_gaussian(q, p) == doctest::Approx(0.5 * (4.0 - 1.0 - std::log(4.0))).epsilon(1e-12));
  CHECK(kl_gaussian(p, p) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(kl_gaussian(q, q) == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("reparameterized sample: gradient of a linear readout w.r.t. mu is exact") {
  net::ParamStore ps;
  ps.add("mu", {3}).data = {0.2, -0.4, 0.9};
  ps.add("lv", {3}).data = {-0.5, 0.3, 0.0};
  net::Vec c = {1.5, -2.0, 0.5};
  Rng rng(31);
  for (int rep = 0; rep < 5; ++rep) {
    net::Vec z = {rng.normal(), rng.normal(), rng.normal()};
    net::Tape tape;
    auto mu = tape.param(ps, "mu");
    auto lv = tape.param(ps, "lv");
    auto sigma = tape.exp_f(tape.scale(lv, 0.5));
    auto m = tape.add(mu, tape.mul_const(sigma, z));
    auto loss = tape.dot_const(m, c);
    tape.backward(loss);
    net::Gradients g(ps);
    tape.add_param_grads(ps, g);
    CHECK(g.at("mu") == c);  // independent of the drawn z
  }
}

TEST_CASE("elbo: unit-variance decoder at its own mean; zero-KL identity") {
  // All-zero decoder: mean 0, logvar 0. Fixed-point data: targets are 0.
  Encoder enc(small_encoder_cfg(4, 2), 3);
  model::EnsembleModel dec = small_decoder(4, 2, 3, 2, 4);
  for (std::size_t k = 0; k < dec.member_count(); ++k) {
    for (const auto& name : dec.member(k).params().names())
      for (double& x : dec.member(k).params().at(name).data) x = 0.0;
    dec.member(k).rebind();
  }
  Trajectory traj = fixed_point_prefix(8);
  const int t = 5;
  Rng rng(7);
  double e0 = elbo(enc, dec, traj, t, 0.0, rng);
  const double d = 5.0;  // predicted vector dim: state_dim + 1
  double expected = (t + 1) * (-0.5 * d * std::log(2.0 * 3.14159265358979323846));
  CHECK(e0 == doctest::Approx(expected).epsilon(1e-9));

  // Zero-parameter encoder: posterior equals its sequential prior at every
  // step, so the KL term contributes exactly nothing.
  Encoder zero_enc(small_encoder_cfg(4, 2), 3);
  for (const auto& name : zero_enc.params().names())
    for (double& x : zero_enc.params().at(name).data) x = 0.0;
  Rng r1(9), r2(9);
  double with_kl = elbo(zero_enc, dec, traj, t, 1.0, r1);
  double without_kl = elbo(zero_enc, dec, traj, t, 0.0, r2);
  CHECK(with_kl == doctest::Approx(without_kl).epsilon(1e-12));

  Rng r3(1);
  CHECK_THROWS_AS(elbo(enc, dec, traj, traj.size(), 0.1, r3), std::invalid_argument);
}

TEST_CASE("elbo is a lower bound on the quadrature log-likelihood") {
  // 1-dim latent; the exact marginal under the decoder + N(0,1) prior is
  // computable by quadrature over m.
  EncoderConfig ec = small_encoder_cfg(2, 1, 1);
  Encoder enc(ec, 11);
  model::EnsembleModel dec = small_decoder(2, 1, 1, 1, 12);
  Trajectory traj;
  traj.transitions.push_back({{0.2, -0.1}, {0.5}, 0.3, {0.25, -0.05}, true});
  const std::size_t t = 0;
  const std::size_t member = 0;

  // log p(x) = log int N(m; 0, 1) p_dec(x | m) dm  (trapezoid over [-8, 8]).
  auto decoder_logpdf = [&](double m) {
    const auto& tr = traj.transitions[0];
    net::Vec mean, logvar;
    net::Vec latent = {m};
    dec.predict_raw(member, tr.state, tr.action, latent, mean, logvar);
    net::Vec target = {tr.next_state[0] - tr.state[0], tr.next_state[1] - tr.state[1], tr.reward};
    double lp = 0.0;
    for (std::size_t i = 0; i < target.size(); ++i) {
      double dd = target[i] - mean[i];
      lp += -0.5 * std::log(2.0 * M_PI) - 0.5 * logvar[i] - 0.5 * dd * dd * std::exp(-logvar[i]);
    }
    return lp;
  };
  const int grid = 4001;
  const double lo = -8.0, hi = 8.0, dx = (hi - lo) / (grid - 1);
  double marginal = 0.0;
  for (int i = 0; i < grid; ++i) {
    double m = lo + i * dx;
    double w = (i == 0 || i == grid - 1) ? 0.5 : 1.0;
    double prior = std::exp(-0.5 * m * m) / std::sqrt(2.0 * M_PI);
    marginal += w * prior * std::exp(decoder_logpdf(m)) * dx;
  }
  double loglik = std::log(marginal);

  // Exact ELBO: E_q[log p(x|m)] by quadrature against q, minus closed KL.
  auto beliefs = enc.encode(traj);
  double mu = beliefs[t].mu[0], lv = beliefs[t].log_var[0];
  double sd = std::exp(0.5 * lv);
  double recon = 0.0;
  for (int i = 0; i < grid; ++i) {
    double m = lo + i * dx;
    double w = (i == 0 || i == grid - 1) ? 0.5 : 1.0;
    double q = std::exp(-0.5 * (m - mu) * (m - mu) / (sd * sd)) / (sd * std::sqrt(2.0 * M_PI));
    recon += w * q * decoder_logpdf(m) * dx;
  }
  double kl = 0.5 * (-lv + std::exp(lv) + mu * mu - 1.0);
  double elbo_exact = recon - kl;
  CHECK(elbo_exact <= loglik + 1e-6);

  // The single-sample estimator averages to the exact ELBO.
  Rng rng(17);
  double acc = 0.0;
  const int reps = 4000;
  std::vector<double> samples(reps);
  for (int i = 0; i < reps; ++i) {
    samples[i] = elbo(enc, dec, traj, t, 1.0, rng, member);
    acc += samples[i];
  }
  double est = acc / reps;
  double se = stats::sample_std(samples) / std::sqrt(static_cast<double>(reps));
  CHECK(std::abs(est - elbo_exact) <= 3.0 * se + 1e-9);
}

TEST_CASE("sequential-prior KL terms are finite and non-negative") {
  Encoder enc(small_encoder_cfg(4, 2), 19);
  PointMass2D env;
  PdPolicy pol(0.6, 0.8, 0.35);
  Rng rng(8);
  Trajectory traj = roll_episode(env, pol, rng);
  traj.transitions.resize(20);
  traj.transitions.back().done = false;
  auto beliefs = enc.encode(traj);
  double total = 0.0;
  for (std::size_t t = 1; t < beliefs.size(); ++t) {
    double kl = kl_gaussian(beliefs[t], beliefs[t - 1]);
    CHECK(kl >= 0.0);
    CHECK(std::isfinite(kl));
    total += kl;
  }
  CHECK(std::isfinite(total));
}

TEST_CASE("train_vae separates two dynamics modes") {
  Dataset data = testutil::make_two_mode_dataset(14, 64, 100);

  EncoderConfig ec;
  ec.state_dim = 4;
  ec.action_dim = 2;
  ec.latent_dim = 8;
  ec.hidden_dim = 32;
  ec.state_emb = 8;
  ec.action_emb = 8;
  ec.reward_emb = 4;
  Encoder enc(ec, 51);
  model::EnsembleConfig mc;
  mc.state_dim = 4;
  mc.action_dim = 2;
  mc.latent_dim = 8;
  mc.members = 2;
  mc.elites = 2;
  mc.hidden = {48, 48};
  model::EnsembleModel dec(mc, 52);

  VaeConfig vc;
  vc.max_epochs = 140;
  vc.batches_per_epoch = 40;
  vc.batch = 8;
  vc.lr = 2e-3;
  vc.kl_weight = 0.1;
  vc.patience = 30;
  vc.seed = 4;
  VaeReport report = train_vae(enc, dec, data, vc);

  // Best-so-far validation ELBO is non-decreasing by construction.
  double best = -1e300;
  for (double v : report.val_elbo_curve) {
    best = std::max(best, v);
    CHECK(best >= v - 1e-12);
  }

  // Mode means separate; a 2-means split recovers the labels.
  std::vector<net::Vec> mus;
  std::vector<int> labels;
  for (std::size_t i = 0; i < data.trajectories.size(); ++i) {
    auto beliefs = enc.encode(data.trajectories[i]);
    mus.push_back(beliefs.back().mu);
    labels.push_back(i < data.trajectories.size() / 2 ? 0 : 1);
  }
  net::Vec mean_a(ec.latent_dim, 0.0), mean_b(ec.latent_dim, 0.0);
  int na = 0, nb = 0;
  for (std::size_t i = 0; i < mus.size(); ++i) {
    auto& m = labels[i] == 0 ? mean_a : mean_b;
    for (int d = 0; d < ec.latent_dim; ++d) m[d] += mus[i][d];
    (labels[i] == 0 ? na : nb)++;
  }
  for (int d = 0; d < ec.latent_dim; ++d) {
    mean_a[d] /= na;
    mean_b[d] /= nb;
  }
  double sep = 0.0;
  for (int d = 0; d < ec.latent_dim; ++d) sep += (mean_a[d] - mean_b[d]) * (mean_a[d] - mean_b[d]);
  sep = std::sqrt(sep);
  CHECK(sep >= 1.0);

  // Lloyd 2-means on the mu vectors.
  net::Vec ca = mus[0], cb = mus[mus.size() - 1];
  std::vector<int> assign(mus.size(), 0);
  for (int it = 0; it < 50; ++it) {
    for (std::size_t i = 0; i < mus.size(); ++i) {
      double da = 0, db = 0;
      for (int d = 0; d < ec.latent_dim; ++d) {
        da += (mus[i][d] - ca[d]) * (mus[i][d] - ca[d]);
        db += (mus[i][d] - cb[d]) * (mus[i][d] - cb[d]);
      }
      assign[i] = da <= db ? 0 : 1;
    }
    net::Vec sa(ec.latent_dim, 0.0), sb(ec.latent_dim, 0.0);
    int ka = 0, kb = 0;
    for (std::size_t i = 0; i < mus.size(); ++i) {
      for (int d = 0; d < ec.latent_dim; ++d) (assign[i] == 0 ? sa : sb)[d] += mus[i][d];
      (assign[i] == 0 ? ka : kb)++;
    }
    if (ka > 0)
      for (int d = 0; d < ec.latent_dim; ++d) ca[d] = sa[d] / ka;
    if (kb > 0)
      for (int d = 0; d < ec.latent_dim; ++d) cb[d] = sb[d] / kb;
  }
  int agree = 0;
  for (std::size_t i = 0; i < mus.size(); ++i) agree += (assign[i] == labels[i]) ? 1 : 0;
  double acc = std::max(agree, static_cast<int>(mus.size()) - agree) /
               static_cast<double>(mus.size());
  CHECK(acc >= 0.9);
}

TEST_CASE("train_vae determinism on a tiny budget") {
  Dataset data = testutil::make_two_mode_dataset(4, 20, 7);
  EncoderConfig ec = small_encoder_cfg(4, 2);
  VaeConfig vc;
  vc.max_epochs = 2;
  vc.batches_per_epoch = 4;
  vc.batch = 4;
  vc.seed = 9;

  Encoder e1(ec, 1), e2(ec, 1);
  model::EnsembleModel d1 = small_decoder(4, 2, 3, 2, 2);
  model::EnsembleModel d2 = small_decoder(4, 2, 3, 2, 2);
  train_vae(e1, d1, data, vc);
  train_vae(e2, d2, data, vc);
  CHECK(e1.params().checksum() == e2.params().checksum());
  for (std::size_t k = 0; k < d1.member_count(); ++k)
    CHECK(d1.member(k).params().checksum() == d2.member(k).params().checksum());

  Dataset empty;
  empty.meta = data.meta;
  Encoder e3(ec, 1);
  model::EnsembleModel d3 = small_decoder(4, 2, 3, 2, 2);
  CHECK_THROWS_AS(train_vae(e3, d3, empty, vc), std::invalid_argument);
}

TEST_CASE("freeze_then_finetune: frozen encoder, NLL does not increase, zero-epoch no-op") {
  Dataset data = testutil::make_two_mode_dataset(6, 24, 33);
  EncoderConfig ec = small_encoder_cfg(4, 2);
  Encoder enc(ec, 2);
  model::EnsembleModel dec = small_decoder(4, 2, 3, 3, 6);
  VaeConfig vc;
  vc.max_epochs = 4;
  vc.batches_per_epoch = 8;
  vc.batch = 6;
  vc.seed = 3;
  train_vae(enc, dec, data, vc);

  model::TrainConfig tc;
  tc.max_epochs = 8;
  tc.batch = 24;
  tc.segment_len = 4;
  tc.patience = 4;
  tc.seed = 13;

  std::uint64_t enc_sum = enc.params().checksum();
  model::TrainReport report = freeze_then_finetune(enc, dec, data, tc);
  CHECK(enc.params().checksum() == enc_sum);
  for (std::size_t k = 0; k < dec.member_count(); ++k)
    CHECK(report.val_nll[k] <= report.initial_val_nll[k] + 1e-12);

  // Zero epochs: decoder bit-identical.
  model::EnsembleModel frozen = small_decoder(4, 2, 3, 3, 6);
  model::Normalizer norm;
  norm.fit(data);
  frozen.set_normalizer(norm);
  std::vector<std::uint64_t> sums;
  for (std::size_t k = 0; k < frozen.member_count(); ++k)
    sums.push_back(frozen.member(k).params().checksum());
  model::TrainConfig zero = tc;
  zero.max_epochs = 0;
  freeze_then_finetune(enc, frozen, data, zero);
  for (std::size_t k = 0; k < frozen.member_count(); ++k)
    CHECK(frozen.member(k).params().checksum() == sums[k]);
}
