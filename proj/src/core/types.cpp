#include "rtplan/core/types.hpp"

#include <cmath>
#include <stdexcept>

namespace rtplan {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

bool all_finite(const std::vector<double>& v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

}  // namespace

void validate(const Trajectory& traj) {
  for (std::size_t i = 0; i < traj.transitions.size(); ++i) {
    const Transition& tr = traj.transitions[i];
    require(tr.state.size() == tr.next_state.size(), "transition state dims differ");
    require(std::isfinite(tr.reward), "non-finite reward");
    require(all_finite(tr.state) && all_finite(tr.next_state), "non-finite state");
    if (i + 1 < traj.transitions.size()) {
      require(!tr.done, "done before final record");
      require(tr.next_state == traj.transitions[i + 1].state, "trajectory not chained");
      require(tr.action.size() == traj.transitions[i + 1].action.size(),
              "action dims differ within trajectory");
    }
  }
  require(traj.start_time >= 0, "negative start_time");
}

void validate(const Dataset& data) {
  std::size_t n = 0;
  for (const auto& traj : data.trajectories) {
    validate(traj);
    n += traj.size();
    if (!traj.empty()) {
      require(static_cast<int>(traj.transitions[0].state.size()) == data.meta.state_dim,
              "trajectory state dim != dataset state dim");
      require(static_cast<int>(traj.transitions[0].action.size()) == data.meta.action_dim,
              "trajectory action dim != dataset action dim");
    }
  }
  require(n == data.meta.transition_count, "metadata transition count mismatch");
}

}  // namespace rtplan
