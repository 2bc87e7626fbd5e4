#include "rtplan/prior/policy.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "rtplan/net/adam.hpp"
#include "rtplan/net/checkpoint.hpp"
#include "rtplan/net/tape.hpp"

namespace rtplan::prior {

using net::Tape;

PriorPolicy::PriorPolicy(int state_dim, int action_dim, std::vector<std::size_t> hidden,
                         std::uint64_t seed) {
  net::MlpConfig cfg;
  cfg.input_dim = state_dim;
  cfg.hidden = std::move(hidden);
  cfg.output_dim = action_dim;
  cfg.gaussian_head = true;
  cfg.tanh_mean = true;
  Rng rng(seed);
  net_ = net::Mlp(cfg, &rng);
}

void PriorPolicy::predict(std::span<const double> s, Vec& mean, Vec& logvar) const {
  net_.forward_gauss(s, mean, logvar);
}

Vec PriorPolicy::mean_action(std::span<const double> s) const {
  thread_local Vec mean, logvar;
  net_.forward_gauss(s, mean, logvar);
  return mean;
}

Vec PriorPolicy::sample_action(std::span<const double> s, double noise_sigma, Rng& rng) const {
  if (noise_sigma < 0.0) throw std::invalid_argument("sample_action: negative noise_sigma");
  thread_local Vec mean, logvar;
  net_.forward_gauss(s, mean, logvar);
  Vec a(mean.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    a[i] = mean[i] + std::exp(0.5 * logvar[i]) * rng.normal();
  if (noise_sigma > 0.0)
    for (double& x : a) x += noise_sigma * rng.normal();
  for (double& x : a) x = std::clamp(x, -1.0, 1.0);
  return a;
}

Vec sample_action(const PriorPolicy& policy, std::span<const double> s, double noise_sigma,
                  Rng& rng) {
  return policy.sample_action(s, noise_sigma, rng);
}

void PriorPolicy::save(const std::string& path) const {
  nlohmann::json meta;
  meta["kind"] = "prior_policy";
  meta["state_dim"] = net_.config().input_dim;
  meta["action_dim"] = net_.config().output_dim;
  meta["hidden"] = net_.config().hidden;
  net::save_checkpoint(net_.params(), meta, path);
}

PriorPolicy PriorPolicy::load(const std::string& path) {
  nlohmann::json meta;
  net::ParamStore ps = net::load_checkpoint(path, &meta);
  PriorPolicy p(meta.at("state_dim").get<int>(), meta.at("action_dim").get<int>(),
                meta.at("hidden").get<std::vector<std::size_t>>(), 0);
  p.net_.params().unflatten(ps.flatten());
  p.net_.rebind();
  return p;
}

namespace {

struct FlatPairs {
  std::vector<const Transition*> items;
};

FlatPairs flatten(const Dataset& data) {
  FlatPairs out;
  for (const auto& traj : data.trajectories)
    for (const auto& tr : traj.transitions) out.items.push_back(&tr);
  return out;
}

}  // namespace

BcResult train_bc(const Dataset& data, const BcConfig& cfg) {
  if (data.transition_count() == 0) throw std::invalid_argument("train_bc: empty dataset");
  FlatPairs pairs = flatten(data);

  Rng root(cfg.seed);
  BcResult result;
  result.policy = PriorPolicy(data.meta.state_dim, data.meta.action_dim, cfg.hidden,
                              root.derive(0).seed());
  net::Mlp& net = result.policy.net();
  net::AdamW opt(net.params(), net::AdamConfig{cfg.lr, 0.9, 0.999, 1e-8, cfg.weight_decay});

  Rng rng = root.derive(1);
  for (int step = 0; step < cfg.steps; ++step) {
    Tape tape;
    Tape::Var loss;
    for (int b = 0; b < cfg.batch; ++b) {
      const Transition* tr = pairs.items[rng.index(pairs.items.size())];
      auto gv = net.forward_gauss_tape(tape, tape.constant(tr->state));
      Tape::Var nll = tape.scale(tape.gauss_logpdf(gv.mean, gv.logvar, tr->action), -1.0);
      loss = loss.valid() ? tape.add(loss, nll) : nll;
    }
    loss = tape.scale(loss, 1.0 / cfg.batch);
    tape.backward(loss);
    net::Gradients grads(net.params());
    tape.add_param_grads(net.params(), grads);
    opt.step(net.params(), grads);
    result.loss_curve.push_back(tape.val(loss)[0]);
  }
  net.rebind();
  return result;
}

}  // namespace rtplan::prior
