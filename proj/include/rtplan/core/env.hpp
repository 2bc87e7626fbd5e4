#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "rtplan/rng.hpp"

namespace rtplan {

class Policy {
 public:
  virtual ~Policy() = default;
  virtual int action_dim() const = 0;
  virtual std::vector<double> act(std::span<const double> state, Rng& rng) const = 0;
  virtual std::string id() const = 0;
};

struct StepResult {
  std::vector<double> next_state;
  double reward = 0.0;
  bool done = false;
};

// An MDP with latent dynamics parameters. step() is a pure function of
// (state, action, latent_params, rng); episode termination at the horizon
// is handled by the rollout driver, not by step().
class Environment {
 public:
  virtual ~Environment() = default;
  virtual int state_dim() const = 0;
  virtual int action_dim() const = 0;
  virtual int horizon() const = 0;
  virtual double discount() const = 0;
  virtual std::string id() const = 0;
  virtual std::vector<double> latent_params() const = 0;
  virtual std::vector<double> sample_initial(Rng& rng) const = 0;
  virtual StepResult step(std::span<const double> state, std::span<const double> action,
                          Rng& rng) const = 0;
};

// Planar point mass with drag and constant wind as latent parameters.
// State (x, y, vx, vy), action = force in [-1, 1]^2:
//   v' = (1 - drag) v + dt a + dt wind,  pos' = pos + dt v'
//   r(s, a) = -|pos - goal|^2 - 0.01 |a|^2
class PointMass2D final : public Environment {
 public:
  struct Params {
    double drag = 0.1;
    double wind_x = 0.0;
    double wind_y = 0.0;
    double goal_x = 1.0;
    double goal_y = 1.0;
    double init_half_width = 0.2;  // initial position box half-width
    int horizon = 100;
    double gamma = 0.99;
  };

  PointMass2D() = default;
  explicit PointMass2D(Params p) : p_(p) {}

  int state_dim() const override { return 4; }
  int action_dim() const override { return 2; }
  int horizon() const override { return p_.horizon; }
  double discount() const override { return p_.gamma; }
  std::string id() const override { return "pointmass2d"; }
  std::vector<double> latent_params() const override { return {p_.drag, p_.wind_x, p_.wind_y}; }
  std::vector<double> sample_initial(Rng& rng) const override;
  StepResult step(std::span<const double> state, std::span<const double> action,
                  Rng& rng) const override;

  const Params& params() const { return p_; }

  static constexpr double kDt = 0.1;

 private:
  Params p_;
};

class ZeroPolicy final : public Policy {
 public:
  explicit ZeroPolicy(int dim) : dim_(dim) {}
  int action_dim() const override { return dim_; }
  std::vector<double> act(std::span<const double>, Rng&) const override {
    return std::vector<double>(dim_, 0.0);
  }
  std::string id() const override { return "zero"; }

 private:
  int dim_;
};

class UniformRandomPolicy final : public Policy {
 public:
  explicit UniformRandomPolicy(int dim) : dim_(dim) {}
  int action_dim() const override { return dim_; }
  std::vector<double> act(std::span<const double>, Rng& rng) const override {
    std::vector<double> a(dim_);
    for (auto& x : a) x = rng.uniform(-1.0, 1.0);
    return a;
  }
  std::string id() const override { return "uniform_random"; }

 private:
  int dim_;
};

// Proportional-derivative controller toward the point-mass goal, with
// additive Gaussian action noise. Used as behavior policy (noisy, sluggish
// gains) and as the expert reference (clean, tight gains).
class PdPolicy final : public Policy {
 public:
  PdPolicy(double kp, double kd, double noise_sigma, double goal_x = 1.0, double goal_y = 1.0)
      : kp_(kp), kd_(kd), noise_(noise_sigma), gx_(goal_x), gy_(goal_y) {}

  int action_dim() const override { return 2; }
  std::vector<double> act(std::span<const double> s, Rng& rng) const override;
  std::string id() const override;

 private:
  double kp_, kd_, noise_, gx_, gy_;
};

}  // namespace rtplan
