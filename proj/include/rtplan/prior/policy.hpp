#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rtplan/core/types.hpp"
#include "rtplan/net/layers.hpp"
#include "rtplan/rng.hpp"

namespace rtplan::prior {

using net::Vec;

// Behavior-cloned Gaussian policy with tanh-squashed mean; emitted means lie
// in [-1, 1] and variances obey the shared log-variance clamp.
class PriorPolicy {
 public:
  PriorPolicy() = default;
  PriorPolicy(int state_dim, int action_dim, std::vector<std::size_t> hidden,
              std::uint64_t seed);

  int state_dim() const { return net_.config().input_dim; }
  int action_dim() const { return net_.config().output_dim; }
  net::Mlp& net() { return net_; }
  const net::Mlp& net() const { return net_; }

  void predict(std::span<const double> s, Vec& mean, Vec& logvar) const;
  Vec mean_action(std::span<const double> s) const;

  // Draw from the policy Gaussian, add N(0, noise_sigma^2 I), clip to [-1, 1].
  Vec sample_action(std::span<const double> s, double noise_sigma, Rng& rng) const;

  void save(const std::string& path) const;
  static PriorPolicy load(const std::string& path);

 private:
  net::Mlp net_;
};

Vec sample_action(const PriorPolicy& policy, std::span<const double> s, double noise_sigma,
                  Rng& rng);

struct BcConfig {
  int steps = 1500;
  int batch = 128;
  double lr = 1e-3;
  double weight_decay = 0.01;
  std::vector<std::size_t> hidden = {64, 64};
  std::uint64_t seed = 0;
};

struct BcResult {
  PriorPolicy policy;
  std::vector<double> loss_curve;  // per-step mean negative log-likelihood
};

// Maximizes the Gaussian log-likelihood of dataset actions given states.
BcResult train_bc(const Dataset& data, const BcConfig& cfg);

// State-value network trained by Monte-Carlo regression.
class ValueFn {
 public:
  ValueFn() = default;
  ValueFn(int state_dim, std::vector<std::size_t> hidden, std::uint64_t seed);

  double value(std::span<const double> s) const;
  net::Mlp& net() { return net_; }
  const net::Mlp& net() const { return net_; }

  void save(const std::string& path) const;
  static ValueFn load(const std::string& path);

 private:
  net::Mlp net_;
};

// Discounted returns G_t = sum_{k>=t} gamma^{k-t} r_k by backward recursion.
Vec mc_returns(const Trajectory& traj, double gamma);

struct ValueConfig {
  int steps = 1500;
  int batch = 128;
  double lr = 1e-3;
  double weight_decay = 0.01;
  std::vector<std::size_t> hidden = {64, 64};
  std::uint64_t seed = 0;
};

struct ValueResult {
  ValueFn value;
  std::vector<double> loss_curve;
};

ValueResult train_value_mc(const Dataset& data, double gamma, const ValueConfig& cfg);

}  // namespace rtplan::prior
