#include "rtplan/model/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "rtplan/net/adam.hpp"
#include "rtplan/net/checkpoint.hpp"
#include "rtplan/net/tape.hpp"

namespace rtplan::model {

using net::ParamStore;
using net::Tape;

namespace {
constexpr double kLog2Pi = 1.8378770664093454835606594728112;
}

void Normalizer::fit(const Dataset& data) {
  if (data.transition_count() == 0) throw std::invalid_argument("Normalizer::fit: empty dataset");
  const std::size_t sd = data.meta.state_dim;
  const std::size_t ad = data.meta.action_dim;
  mean.assign(sd + ad, 0.0);
  std.assign(sd + ad, 0.0);
  double n = 0.0;
  for (const auto& traj : data.trajectories)
    for (const auto& tr : traj.transitions) {
      for (std::size_t i = 0; i < sd; ++i) mean[i] += tr.state[i];
      for (std::size_t i = 0; i < ad; ++i) mean[sd + i] += tr.action[i];
      n += 1.0;
    }
  for (double& m : mean) m /= n;
  for (const auto& traj : data.trajectories)
    for (const auto& tr : traj.transitions) {
      for (std::size_t i = 0; i < sd; ++i) {
        double d = tr.state[i] - mean[i];
        std[i] += d * d;
      }
      for (std::size_t i = 0; i < ad; ++i) {
        double d = tr.action[i] - mean[sd + i];
        std[sd + i] += d * d;
      }
    }
  for (double& s : std) s = std::max(std::sqrt(s / n), 1e-8);
}

void Normalizer::apply(std::span<const double> s, std::span<const double> a, Vec& out) const {
  out.resize(s.size() + a.size());
  for (std::size_t i = 0; i < s.size(); ++i) out[i] = (s[i] - mean[i]) / std[i];
  for (std::size_t i = 0; i < a.size(); ++i)
    out[s.size() + i] = (a[i] - mean[s.size() + i]) / std[s.size() + i];
}

Vec Normalizer::normalize(std::span<const double> x) const {
  Vec out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = (x[i] - mean[i]) / std[i];
  return out;
}

Vec Normalizer::denormalize(std::span<const double> x) const {
  Vec out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * std[i] + mean[i];
  return out;
}

Vec GaussianPrediction::next_state_mean(std::span<const double> s) const {
  Vec out(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) out[i] = s[i] + mean[i];
  return out;
}

EnsembleModel::EnsembleModel(EnsembleConfig cfg, std::uint64_t seed) : cfg_(cfg) {
  if (cfg_.elites > cfg_.members)
    throw std::invalid_argument("EnsembleModel: elites exceed member count");
  net::MlpConfig mc;
  mc.input_dim = cfg_.state_dim + cfg_.action_dim + cfg_.latent_dim;
  mc.hidden = cfg_.hidden;
  mc.output_dim = cfg_.state_dim + 1;
  mc.gaussian_head = true;
  mc.input_skip = cfg_.input_skip;
  Rng root(seed);
  for (std::size_t k = 0; k < cfg_.members; ++k) {
    Rng init = root.derive(k);
    members_.emplace_back(mc, &init);
  }
  elites_.resize(cfg_.elites);
  std::iota(elites_.begin(), elites_.end(), 0);
  norm_.mean.assign(cfg_.state_dim + cfg_.action_dim, 0.0);
  norm_.std.assign(cfg_.state_dim + cfg_.action_dim, 1.0);
}

void EnsembleModel::set_elites(std::vector<std::size_t> elites) {
  for (std::size_t e : elites)
    if (e >= members_.size()) throw std::invalid_argument("set_elites: index out of range");
  elites_ = std::move(elites);
}

void EnsembleModel::predict_raw(std::size_t member, std::span<const double> s,
                                std::span<const double> a, std::span<const double> m, Vec& mean,
                                Vec& logvar) const {
  thread_local Vec input;
  norm_.apply(s, a, input);
  input.insert(input.end(), m.begin(), m.end());
  members_[member].forward_gauss(input, mean, logvar);
}

GaussianPrediction EnsembleModel::predict(std::span<const double> s, std::span<const double> a,
                                          std::span<const double> m, std::size_t member) const {
  if (std::find(elites_.begin(), elites_.end(), member) == elites_.end())
    throw std::invalid_argument("EnsembleModel::predict: member is not an elite");
  GaussianPrediction pred;
  predict_raw(member, s, a, m, pred.mean, pred.logvar);
  return pred;
}

Vec sample_from_prediction(const GaussianPrediction& pred, Rng& rng) {
  Vec out(pred.mean.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = pred.mean[i] + std::exp(0.5 * pred.logvar[i]) * rng.normal();
  return out;
}

EnsembleModel::Sample EnsembleModel::sample_transition(std::span<const double> s,
                                                       std::span<const double> a,
                                                       std::span<const double> m,
                                                       Rng& rng) const {
  if (elites_.empty()) throw std::logic_error("sample_transition: no elites selected");
  std::size_t member = elites_[rng.index(elites_.size())];
  thread_local Vec mean, logvar;
  predict_raw(member, s, a, m, mean, logvar);
  Sample out;
  out.member = member;
  out.next_state.resize(s.size());
  for (std::size_t i = 0; i < s.size(); ++i)
    out.next_state[i] = s[i] + mean[i] + std::exp(0.5 * logvar[i]) * rng.normal();
  out.reward = mean.back() + std::exp(0.5 * logvar.back()) * rng.normal();
  return out;
}

void EnsembleModel::member_mean_step(std::size_t member, std::span<const double> s,
                                     std::span<const double> a, std::span<const double> m,
                                     Vec& next_state, double& reward) const {
  thread_local Vec mean, logvar;
  predict_raw(member, s, a, m, mean, logvar);
  next_state.resize(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) next_state[i] = s[i] + mean[i];
  reward = mean.back();
}

void EnsembleModel::save(const std::string& path) const {
  ParamStore merged;
  for (std::size_t k = 0; k < members_.size(); ++k) {
    const ParamStore& ps = members_[k].params();
    for (const auto& name : ps.names()) {
      const net::Tensor& t = ps.at(name);
      merged.add("m" + std::to_string(k) + "." + name, t.shape).data = t.data;
    }
  }
  nlohmann::json meta;
  meta["kind"] = "ensemble_model";
  meta["state_dim"] = cfg_.state_dim;
  meta["action_dim"] = cfg_.action_dim;
  meta["latent_dim"] = cfg_.latent_dim;
  meta["members"] = cfg_.members;
  meta["elites_k"] = cfg_.elites;
  meta["hidden"] = cfg_.hidden;
  meta["input_skip"] = cfg_.input_skip;
  meta["elite_indices"] = elites_;
  meta["normalizer_mean"] = norm_.mean;
  meta["normalizer_std"] = norm_.std;
  net::save_checkpoint(merged, meta, path);
}

EnsembleModel EnsembleModel::load(const std::string& path) {
  nlohmann::json meta;
  ParamStore merged = net::load_checkpoint(path, &meta);
  EnsembleConfig cfg;
  cfg.state_dim = meta.at("state_dim").get<int>();
  cfg.action_dim = meta.at("action_dim").get<int>();
  cfg.latent_dim = meta.at("latent_dim").get<int>();
  cfg.members = meta.at("members").get<std::size_t>();
  cfg.elites = meta.at("elites_k").get<std::size_t>();
  cfg.hidden = meta.at("hidden").get<std::vector<std::size_t>>();
  cfg.input_skip = meta.at("input_skip").get<bool>();
  EnsembleModel model(cfg, 0);
  for (std::size_t k = 0; k < cfg.members; ++k) {
    ParamStore& ps = model.members_[k].params();
    for (const auto& name : ps.names())
      ps.at(name).data = merged.at("m" + std::to_string(k) + "." + name).data;
    model.members_[k].rebind();
  }
  model.elites_ = meta.at("elite_indices").get<std::vector<std::size_t>>();
  model.norm_.mean = meta.at("normalizer_mean").get<Vec>();
  model.norm_.std = meta.at("normalizer_std").get<Vec>();
  return model;
}

std::vector<std::size_t> select_elites(const std::vector<double>& val_losses, std::size_t k) {
  if (k < 1 || k > val_losses.size())
    throw std::invalid_argument("select_elites: k out of range");
  std::vector<std::size_t> idx(val_losses.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return val_losses[a] < val_losses[b]; });
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

namespace {

struct Segment {
  std::size_t traj;
  std::size_t start;
};

// Gaussian NLL of (delta, reward) targets under one member, on the tape.
Tape::Var member_segment_nll(Tape& tape, const EnsembleModel& model, std::size_t member,
                             const Trajectory& traj, std::size_t start, std::size_t len,
                             const std::vector<belief::BeliefParams>& beliefs, Rng& latent_rng) {
  const net::Mlp& mlp = model.member(member);
  Tape::Var total;
  for (std::size_t h = start; h < start + len; ++h) {
    const Transition& tr = traj.transitions[h];
    Vec m(beliefs[h].mu.size());
    for (std::size_t i = 0; i < m.size(); ++i)
      m[i] = beliefs[h].mu[i] + std::exp(0.5 * beliefs[h].log_var[i]) * latent_rng.normal();
    Vec input;
    model.normalizer().apply(tr.state, tr.action, input);
    input.insert(input.end(), m.begin(), m.end());

    Vec target(tr.state.size() + 1);
    for (std::size_t i = 0; i < tr.state.size(); ++i) target[i] = tr.next_state[i] - tr.state[i];
    target.back() = tr.reward;

    auto gv = mlp.forward_gauss_tape(tape, tape.constant(input));
    Tape::Var nll = tape.scale(tape.gauss_logpdf(gv.mean, gv.logvar, target), -1.0);
    total = total.valid() ? tape.add(total, nll) : nll;
  }
  return tape.scale(total, 1.0 / static_cast<double>(len));
}

// Plain-path NLL with m = posterior mean; deterministic, used for validation.
double member_segment_nll_plain(const EnsembleModel& model, std::size_t member,
                                const Trajectory& traj, std::size_t start, std::size_t len,
                                const std::vector<belief::BeliefParams>& beliefs) {
  double total = 0.0;
  Vec mean, logvar;
  for (std::size_t h = start; h < start + len; ++h) {
    const Transition& tr = traj.transitions[h];
    model.predict_raw(member, tr.state, tr.action, beliefs[h].mu, mean, logvar);
    for (std::size_t i = 0; i <= tr.state.size(); ++i) {
      double target = i < tr.state.size() ? tr.next_state[i] - tr.state[i] : tr.reward;
      double d = target - mean[i];
      total -= -0.5 * kLog2Pi - 0.5 * logvar[i] - 0.5 * d * d * std::exp(-logvar[i]);
    }
  }
  return total / static_cast<double>(len);
}

}  // namespace

TrainReport train_mle(EnsembleModel& model, const Dataset& data, const belief::Encoder& encoder,
                      const TrainConfig& cfg) {
  if (data.trajectories.empty() || data.transition_count() == 0)
    throw std::invalid_argument("train_mle: empty dataset");
  const std::size_t H = cfg.segment_len;
  for (const auto& traj : data.trajectories)
    if (traj.size() < H)
      throw std::invalid_argument("train_mle: segment length exceeds shortest trajectory");

  Rng root(cfg.seed);
  const std::size_t K = model.member_count();

  // Validation split by trajectory.
  std::vector<std::size_t> order(data.trajectories.size());
  std::iota(order.begin(), order.end(), 0);
  Rng split_rng = root.derive(1);
  split_rng.shuffle(order);
  std::size_t n_val = std::max<std::size_t>(1, static_cast<std::size_t>(
                                                   cfg.val_frac * data.trajectories.size()));
  if (n_val >= data.trajectories.size()) n_val = data.trajectories.size() / 2;
  if (n_val == 0) n_val = 1;
  std::vector<std::size_t> val_idx(order.begin(), order.begin() + n_val);
  std::vector<std::size_t> train_idx(order.begin() + n_val, order.end());
  if (train_idx.empty()) train_idx = val_idx;

  // Beliefs are computed once per trajectory with the frozen encoder.
  std::vector<std::vector<belief::BeliefParams>> beliefs(data.trajectories.size());
  auto beliefs_for = [&](std::size_t i) -> const std::vector<belief::BeliefParams>& {
    if (beliefs[i].empty()) beliefs[i] = encoder.encode(data.trajectories[i]);
    return beliefs[i];
  };

  // Fixed validation segments, shared by all members.
  std::vector<Segment> val_segments;
  Rng val_rng = root.derive(2);
  for (std::size_t i : val_idx) {
    const auto& traj = data.trajectories[i];
    std::size_t count = std::max<std::size_t>(1, traj.size() / H);
    for (std::size_t c = 0; c < count; ++c)
      val_segments.push_back({i, val_rng.index(traj.size() - H + 1)});
  }

  auto val_nll_of = [&](std::size_t k) {
    double acc = 0.0;
    for (const auto& seg : val_segments)
      acc += member_segment_nll_plain(model, k, data.trajectories[seg.traj], seg.start, H,
                                      beliefs_for(seg.traj));
    return acc / static_cast<double>(val_segments.size());
  };

  // Per-member bootstrap resample of training trajectories.
  std::vector<std::vector<std::size_t>> boot(K);
  for (std::size_t k = 0; k < K; ++k) {
    Rng brng = root.derive(100 + k);
    boot[k].resize(train_idx.size());
    for (auto& idx : boot[k]) idx = train_idx[brng.index(train_idx.size())];
  }

  std::vector<net::AdamW> opts;
  for (std::size_t k = 0; k < K; ++k)
    opts.emplace_back(model.member(k).params(),
                      net::AdamConfig{cfg.lr, 0.9, 0.999, 1e-8, cfg.weight_decay});

  TrainReport report;
  report.val_nll.resize(K);
  report.initial_val_nll.resize(K);
  std::vector<Vec> best_params(K);
  std::vector<int> stall(K, 0);
  std::vector<bool> stopped(K, false);
  for (std::size_t k = 0; k < K; ++k) {
    report.initial_val_nll[k] = val_nll_of(k);
    report.val_nll[k] = report.initial_val_nll[k];
    best_params[k] = model.member(k).params().flatten();
  }

  std::size_t train_transitions = 0;
  for (std::size_t i : train_idx) train_transitions += data.trajectories[i].size();
  int batches = cfg.batches_per_epoch > 0
                    ? cfg.batches_per_epoch
                    : std::max<int>(1, static_cast<int>(train_transitions /
                                                        (cfg.batch * H)));

  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    bool all_stopped = true;
    double epoch_nll = 0.0;
    std::size_t epoch_terms = 0;
    for (std::size_t k = 0; k < K; ++k) {
      if (stopped[k]) continue;
      all_stopped = false;
      Rng erng = root.derive(10000 + 1000 * epoch + k);
      for (int b = 0; b < batches; ++b) {
        Tape tape;
        Tape::Var loss;
        for (int s = 0; s < cfg.batch; ++s) {
          std::size_t ti = boot[k][erng.index(boot[k].size())];
          const auto& traj = data.trajectories[ti];
          std::size_t start = erng.index(traj.size() - H + 1);
          Tape::Var nll = member_segment_nll(tape, model, k, traj, start, H,
                                             beliefs_for(ti), erng);
          loss = loss.valid() ? tape.add(loss, nll) : nll;
        }
        loss = tape.scale(loss, 1.0 / cfg.batch);
        tape.backward(loss);
        net::Gradients grads(model.member(k).params());
        tape.add_param_grads(model.member(k).params(), grads);
        opts[k].step(model.member(k).params(), grads);
        epoch_nll += tape.val(loss)[0];
        ++epoch_terms;
      }
      double v = val_nll_of(k);
      if (v < report.val_nll[k] - 1e-9) {
        report.val_nll[k] = v;
        best_params[k] = model.member(k).params().flatten();
        stall[k] = 0;
      } else if (++stall[k] >= cfg.patience) {
        stopped[k] = true;
      }
    }
    if (epoch_terms > 0) report.epoch_train_nll.push_back(epoch_nll / epoch_terms);
    if (all_stopped) break;
  }

  for (std::size_t k = 0; k < K; ++k) {
    model.member(k).params().unflatten(best_params[k]);
    model.member(k).rebind();
  }
  return report;
}

}  // namespace rtplan::model
