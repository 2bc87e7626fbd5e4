#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace rtplan {

// One (s, a, r, s', done) record.
struct Transition {
  std::vector<double> state;
  std::vector<double> action;
  double reward = 0.0;
  std::vector<double> next_state;
  bool done = false;
};

// An ordered episode prefix: next_state of record i equals state of record
// i+1, and done may be true only on the final record.
struct Trajectory {
  std::vector<Transition> transitions;
  int start_time = 0;

  std::size_t size() const { return transitions.size(); }
  bool empty() const { return transitions.empty(); }

  // State observed at step h, 0 <= h <= size().
  const std::vector<double>& state_at(std::size_t h) const {
    return h < transitions.size() ? transitions[h].state : transitions.back().next_state;
  }
};

struct DatasetMeta {
  std::string env_id;
  std::string behavior_id;
  std::uint64_t seed = 0;
  std::size_t transition_count = 0;
  int state_dim = 0;
  int action_dim = 0;
};

struct Dataset {
  std::vector<Trajectory> trajectories;
  DatasetMeta meta;

  std::size_t transition_count() const {
    std::size_t n = 0;
    for (const auto& t : trajectories) n += t.size();
    return n;
  }
};

// Throws std::invalid_argument on violated invariants.
void validate(const Trajectory& traj);
void validate(const Dataset& data);

}  // namespace rtplan
