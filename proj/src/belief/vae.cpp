#include "rtplan/belief/vae.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

#include "rtplan/net/adam.hpp"
#include "rtplan/net/tape.hpp"

namespace rtplan::belief {

using net::Tape;

namespace {

Tape::Var elbo_tape(Tape& tape, const Encoder& encoder, const model::EnsembleModel& decoder,
                    const Trajectory& traj, std::size_t t, double kl_weight, std::size_t member,
                    Rng& rng) {
  if (t >= traj.size()) throw std::invalid_argument("elbo: t out of range");
  auto steps = encoder.encode_tape(tape, traj, t);

  // m = mu_t + exp(lv_t / 2) * z, one reparameterized draw.
  const std::size_t ld = tape.size(steps[t].mu);
  Vec z(ld);
  for (double& x : z) x = rng.normal();
  Tape::Var sigma = tape.exp_f(tape.scale(steps[t].logvar, 0.5));
  Tape::Var m = tape.add(steps[t].mu, tape.mul_const(sigma, z));

  Tape::Var recon;
  for (std::size_t h = 0; h <= t; ++h) {
    const Transition& tr = traj.transitions[h];
    Vec sa;
    decoder.normalizer().apply(tr.state, tr.action, sa);
    Tape::Var input = tape.concat({tape.constant(sa), m});
    auto gv = decoder.member(member).forward_gauss_tape(tape, input);
    Vec target(tr.state.size() + 1);
    for (std::size_t i = 0; i < tr.state.size(); ++i) target[i] = tr.next_state[i] - tr.state[i];
    target.back() = tr.reward;
    Tape::Var lp = tape.gauss_logpdf(gv.mean, gv.logvar, target);
    recon = recon.valid() ? tape.add(recon, lp) : lp;
  }

  Vec prior_mu(ld, 0.0), prior_lv(ld, 0.0);
  if (t > 0) {
    prior_mu = tape.val(steps[t - 1].mu);
    prior_lv = tape.val(steps[t - 1].logvar);
  }
  Tape::Var kl = tape.kl_to_const(steps[t].mu, steps[t].logvar, prior_mu, prior_lv);
  return tape.lincomb(recon, 1.0, kl, -kl_weight);
}

}  // namespace

double elbo(const Encoder& encoder, const model::EnsembleModel& decoder, const Trajectory& traj,
            std::size_t t, double kl_weight, Rng& rng, std::size_t member) {
  Tape tape;
  Tape::Var e = elbo_tape(tape, encoder, decoder, traj, t, kl_weight, member, rng);
  return tape.val(e)[0];
}

VaeReport train_vae(Encoder& encoder, model::EnsembleModel& decoder, const Dataset& data,
                    const VaeConfig& cfg) {
  if (data.trajectories.empty() || data.transition_count() == 0)
    throw std::invalid_argument("train_vae: empty dataset");

  model::Normalizer norm;
  norm.fit(data);
  decoder.set_normalizer(norm);

  Rng root(cfg.seed);
  const std::size_t K = decoder.member_count();

  std::vector<std::size_t> order(data.trajectories.size());
  std::iota(order.begin(), order.end(), 0);
  Rng split_rng = root.derive(1);
  split_rng.shuffle(order);
  std::size_t n_val =
      std::max<std::size_t>(1, static_cast<std::size_t>(cfg.val_frac * order.size()));
  if (n_val >= order.size()) n_val = std::max<std::size_t>(1, order.size() / 2);
  std::vector<std::size_t> val_idx(order.begin(), order.begin() + n_val);
  std::vector<std::size_t> train_idx(order.begin() + n_val, order.end());
  if (train_idx.empty()) train_idx = val_idx;

  // Fixed validation pairs; the latent draw per pair is also frozen so the
  // validation ELBO is comparable across epochs.
  struct Pair {
    std::size_t traj, t, member;
    std::uint64_t z_seed;
  };
  std::vector<Pair> val_pairs;
  Rng vrng = root.derive(2);
  for (std::size_t i : val_idx) {
    const auto& traj = data.trajectories[i];
    std::size_t count = std::max<std::size_t>(2, traj.size() / 16);
    for (std::size_t c = 0; c < count; ++c)
      val_pairs.push_back({i, vrng.index(traj.size()), vrng.index(K), vrng.next_u64()});
  }
  auto val_elbo = [&]() {
    double acc = 0.0;
    for (const auto& p : val_pairs) {
      Rng zr(p.z_seed);
      acc += elbo(encoder, decoder, data.trajectories[p.traj], p.t, cfg.kl_weight, zr, p.member);
    }
    return acc / static_cast<double>(val_pairs.size());
  };

  net::AdamConfig ac{cfg.lr, 0.9, 0.999, 1e-8, cfg.weight_decay};
  net::AdamW enc_opt(encoder.params(), ac);
  std::vector<net::AdamW> dec_opts;
  for (std::size_t k = 0; k < K; ++k) dec_opts.emplace_back(decoder.member(k).params(), ac);

  VaeReport report;
  report.best_val_elbo = val_elbo();
  Vec best_enc = encoder.params().flatten();
  std::vector<Vec> best_dec(K);
  for (std::size_t k = 0; k < K; ++k) best_dec[k] = decoder.member(k).params().flatten();

  int stall = 0;
  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    Rng erng = root.derive(1000 + epoch);
    for (int b = 0; b < cfg.batches_per_epoch; ++b) {
      Tape tape;
      Tape::Var loss;
      std::vector<bool> member_hit(K, false);
      for (int s = 0; s < cfg.batch; ++s) {
        std::size_t ti = train_idx[erng.index(train_idx.size())];
        const auto& traj = data.trajectories[ti];
        std::size_t t = erng.index(traj.size());
        std::size_t member = erng.index(K);
        member_hit[member] = true;
        Tape::Var e = elbo_tape(tape, encoder, decoder, traj, t, cfg.kl_weight, member, erng);
        Tape::Var neg = tape.scale(e, -1.0);
        loss = loss.valid() ? tape.add(loss, neg) : neg;
      }
      loss = tape.scale(loss, 1.0 / cfg.batch);
      tape.backward(loss);

      net::Gradients eg(encoder.params());
      tape.add_param_grads(encoder.params(), eg);
      enc_opt.step(encoder.params(), eg);
      for (std::size_t k = 0; k < K; ++k) {
        if (!member_hit[k]) continue;
        net::Gradients dg(decoder.member(k).params());
        tape.add_param_grads(decoder.member(k).params(), dg);
        dec_opts[k].step(decoder.member(k).params(), dg);
      }
    }
    double v = val_elbo();
    report.val_elbo_curve.push_back(v);
    if (v > report.best_val_elbo + 1e-9) {
      report.best_val_elbo = v;
      best_enc = encoder.params().flatten();
      for (std::size_t k = 0; k < K; ++k) best_dec[k] = decoder.member(k).params().flatten();
      stall = 0;
    } else if (++stall >= cfg.patience) {
      break;
    }
  }

  encoder.params().unflatten(best_enc);
  for (std::size_t k = 0; k < K; ++k) {
    decoder.member(k).params().unflatten(best_dec[k]);
    decoder.member(k).rebind();
  }
  return report;
}

model::TrainReport freeze_then_finetune(const Encoder& encoder, model::EnsembleModel& decoder,
                                        const Dataset& data, const model::TrainConfig& cfg) {
  return model::train_mle(decoder, data, encoder, cfg);
}

}  // namespace rtplan::belief
