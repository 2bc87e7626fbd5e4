#include "rtplan/core/dataset.hpp"

#include <numeric>
#include <stdexcept>

namespace rtplan {

Trajectory roll_episode(const Environment& env, const Policy& behavior, Rng& rng) {
  Trajectory traj;
  traj.transitions.reserve(env.horizon());
  std::vector<double> s = env.sample_initial(rng);
  for (int t = 0; t < env.horizon(); ++t) {
    std::vector<double> a = behavior.act(s, rng);
    StepResult res = env.step(s, a, rng);
    bool last = res.done || t + 1 == env.horizon();
    traj.transitions.push_back({s, std::move(a), res.reward, res.next_state, last});
    s = std::move(res.next_state);
    if (last) break;
  }
  return traj;
}

Dataset generate_dataset(const Environment& env, const Policy& behavior, int n_episodes,
                         std::uint64_t seed) {
  if (n_episodes < 1) throw std::invalid_argument("generate_dataset: n_episodes must be >= 1");
  if (behavior.action_dim() != env.action_dim())
    throw std::invalid_argument("generate_dataset: behavior action dim != env action dim");

  Dataset data;
  Rng root(seed);
  data.trajectories.reserve(n_episodes);
  for (int e = 0; e < n_episodes; ++e) {
    Rng ep = root.derive(e);
    data.trajectories.push_back(roll_episode(env, behavior, ep));
  }
  data.meta.env_id = env.id();
  data.meta.behavior_id = behavior.id();
  data.meta.seed = seed;
  data.meta.state_dim = env.state_dim();
  data.meta.action_dim = env.action_dim();
  data.meta.transition_count = data.transition_count();
  return data;
}

Dataset subsample(const Dataset& data, std::size_t n_transitions, std::uint64_t seed) {
  Dataset out;
  out.meta = data.meta;

  std::vector<std::size_t> order(data.trajectories.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.shuffle(order);

  std::size_t total = 0;
  for (std::size_t idx : order) {
    if (total >= n_transitions) break;
    Trajectory traj = data.trajectories[idx];
    std::size_t room = n_transitions - total;
    if (traj.size() > room) {
      traj.transitions.resize(room);  // trim the last drawn trajectory
      traj.transitions.back().done = false;
    }
    total += traj.size();
    out.trajectories.push_back(std::move(traj));
  }
  out.meta.transition_count = total;
  return out;
}

double normalized_score(double ret, double random_ret, double expert_ret) {
  if (expert_ret == random_ret)
    throw std::invalid_argument("normalized_score: expert and random references coincide");
  return 100.0 * (ret - random_ret) / (expert_ret - random_ret);
}

}  // namespace rtplan
