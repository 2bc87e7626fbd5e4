#include "rtplan/prior/policy.hpp"

#include <stdexcept>

#include "rtplan/net/adam.hpp"
#include "rtplan/net/checkpoint.hpp"
#include "rtplan/net/tape.hpp"

namespace rtplan::prior {

using net::Tape;

ValueFn::ValueFn(int state_dim, std::vector<std::size_t> hidden, std::uint64_t seed) {
  net::MlpConfig cfg;
  cfg.input_dim = state_dim;
  cfg.hidden = std::move(hidden);
  cfg.output_dim = 1;
  Rng rng(seed);
  net_ = net::Mlp(cfg, &rng);
}

double ValueFn::value(std::span<const double> s) const {
  thread_local Vec out;
  net_.forward(s, out);
  return out[0];
}

void ValueFn::save(const std::string& path) const {
  nlohmann::json meta;
  meta["kind"] = "value_fn";
  meta["state_dim"] = net_.config().input_dim;
  meta["hidden"] = net_.config().hidden;
  net::save_checkpoint(net_.params(), meta, path);
}

ValueFn ValueFn::load(const std::string& path) {
  nlohmann::json meta;
  net::ParamStore ps = net::load_checkpoint(path, &meta);
  ValueFn v(meta.at("state_dim").get<int>(), meta.at("hidden").get<std::vector<std::size_t>>(),
            0);
  v.net_.params().unflatten(ps.flatten());
  v.net_.rebind();
  return v;
}

Vec mc_returns(const Trajectory& traj, double gamma) {
  if (gamma < 0.0 || gamma > 1.0) throw std::invalid_argument("mc_returns: gamma out of [0, 1]");
  Vec g(traj.size(), 0.0);
  double acc = 0.0;
  for (std::size_t i = traj.size(); i > 0; --i) {
    acc = traj.transitions[i - 1].reward + gamma * acc;
    g[i - 1] = acc;
  }
  return g;
}

ValueResult train_value_mc(const Dataset& data, double gamma, const ValueConfig& cfg) {
  if (data.transition_count() == 0) throw std::invalid_argument("train_value_mc: empty dataset");

  struct Target {
    const Vec* state;
    double g;
  };
  std::vector<Target> targets;
  for (const auto& traj : data.trajectories) {
    Vec g = mc_returns(traj, gamma);
    for (std::size_t i = 0; i < traj.size(); ++i)
      targets.push_back({&traj.transitions[i].state, g[i]});
  }

  Rng root(cfg.seed);
  ValueResult result;
  result.value = ValueFn(data.meta.state_dim, cfg.hidden, root.derive(0).seed());
  net::Mlp& net = result.value.net();
  net::AdamW opt(net.params(), net::AdamConfig{cfg.lr, 0.9, 0.999, 1e-8, cfg.weight_decay});

  Rng rng = root.derive(1);
  for (int step = 0; step < cfg.steps; ++step) {
    Tape tape;
    Tape::Var loss;
    for (int b = 0; b < cfg.batch; ++b) {
      const Target& t = targets[rng.index(targets.size())];
      Tape::Var pred = net.forward_tape(tape, tape.constant(*t.state));
      Tape::Var err = tape.add_scalar(pred, -t.g);
      Tape::Var sq = tape.sum(tape.square_f(err));
      loss = loss.valid() ? tape.add(loss, sq) : sq;
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
