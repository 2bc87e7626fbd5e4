#pragma once

#include <cstdint>
#include <string>

#include "rtplan/core/env.hpp"
#include "rtplan/core/types.hpp"

namespace rtplan {

// Rolls one episode under `behavior`, marking done on the final record.
Trajectory roll_episode(const Environment& env, const Policy& behavior, Rng& rng);

// Deterministic given seed. Throws on n_episodes < 1 or on an action
// dimension mismatch between env and behavior.
Dataset generate_dataset(const Environment& env, const Policy& behavior, int n_episodes,
                         std::uint64_t seed);

// Draws whole trajectories in shuffled order until n_transitions is reached;
// the last drawn trajectory is trimmed if the total would exceed it. Output
// size is exactly min(n_transitions, N).
Dataset subsample(const Dataset& data, std::size_t n_transitions, std::uint64_t seed);

// 100 * (ret - random_ret) / (expert_ret - random_ret). Throws on a
// degenerate reference pair.
double normalized_score(double ret, double random_ret, double expert_ret);

}  // namespace rtplan
