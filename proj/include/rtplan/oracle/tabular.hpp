#pragma once

#include <string>
#include <vector>

#include "json.hpp"
#include "rtplan/plan/planner.hpp"
#include "rtplan/rng.hpp"

namespace rtplan::oracle {

using net::Vec;

// Finite MDP with known rewards and row-stochastic transitions.
struct TabularMDP {
  int n_states = 0;
  int n_actions = 0;
  std::vector<double> rewards;      // [s * n_actions + a]
  std::vector<double> transitions;  // [(s * n_actions + a) * n_states + s']

  double reward(int s, int a) const { return rewards[s * n_actions + a]; }
  double transition(int s, int a, int s2) const {
    return transitions[(s * n_actions + a) * n_states + s2];
  }
  void validate() const;  // rows sum to 1 within 1e-12

  static TabularMDP from_json(const nlohmann::json& j);
  static TabularMDP load(const std::string& path);
  nlohmann::json to_json() const;
};

// Per-(s, a) Dirichlet hyperparameters over next states; all entries > 0.
class DirichletBelief {
 public:
  DirichletBelief() = default;
  DirichletBelief(int n_states, int n_actions, double alpha0 = 1.0);

  int n_states() const { return n_states_; }
  int n_actions() const { return n_actions_; }
  double alpha(int s, int a, int s2) const { return alpha_[index(s, a, s2)]; }
  double& alpha(int s, int a, int s2) { return alpha_[index(s, a, s2)]; }
  const std::vector<double>& raw() const { return alpha_; }
  void validate() const;

  bool operator==(const DirichletBelief& other) const = default;

 private:
  std::size_t index(int s, int a, int s2) const {
    check_range(s, a, s2);
    return (static_cast<std::size_t>(s) * n_actions_ + a) * n_states_ + s2;
  }
  void check_range(int s, int a, int s2) const;

  int n_states_ = 0;
  int n_actions_ = 0;
  std::vector<double> alpha_;
};

// Conjugate update: increments only alpha_{s,a,s'} by one.
DirichletBelief dirichlet_update(const DirichletBelief& belief, int s, int a, int s2);

// Normalized alpha row; sums to 1.
Vec posterior_predictive(const DirichletBelief& belief, int s, int a);

struct BeliefOutcome {
  int next_state;
  DirichletBelief belief;
  double probability;
};

// Hyper-state expansion: one outcome per reachable next state, with the
// successor belief fixed by the conjugate update.
std::vector<BeliefOutcome> belief_mdp_transition(const DirichletBelief& belief, int s, int a);

// Tabular stochastic prior policy pi(a | s).
struct TabularPolicy {
  int n_states = 0;
  int n_actions = 0;
  std::vector<double> probs;  // [s * n_actions + a]

  double prob(int s, int a) const { return probs[s * n_actions + a]; }
  static TabularPolicy uniform(int n_states, int n_actions);
  void validate() const;
};

struct ExactPlan {
  std::vector<Vec> action_dist;  // H posterior-categorical distributions
  double expected_first_action = 0.0;
};

// Brute-force posterior plan expectation on the Bayes-adaptive instance:
// enumerates every action sequence and state/belief outcome path, weighting
// each path by p(path) * exp(kappa * discounted return) with the belief
// updated along the path. Throws if the enumeration exceeds 1e7 terms.
ExactPlan exact_posterior_plan(const DirichletBelief& belief, const TabularMDP& mdp, int s0,
                               int horizon, double kappa, const TabularPolicy& prior,
                               double gamma);

// Adapters running the sampling planner on the tabular instance. States and
// actions travel as 1-dim real vectors holding the integer index.
class TabularPlannerModel final : public plan::PlannerModel {
 public:
  TabularPlannerModel(const TabularMDP& mdp, const DirichletBelief& belief)
      : mdp_(&mdp), belief_(&belief) {}

  std::size_t member_count() const override { return 1; }
  // Root-belief predictive sample; the belief is not updated here.
  void sample_step(std::span<const double> s, std::span<const double> a,
                   std::span<const double> latent, Rng& rng, Vec& next_state,
                   double& reward) const override;
  // Bayes-adaptive rollout: samples from the running posterior predictive and
  // updates a local belief copy along the imagined path.
  void member_rollout(std::size_t member, std::span<const double> s0,
                      const std::vector<Vec>& actions, std::span<const double> latent, Rng& rng,
                      Vec& rewards, Vec& final_state) const override;

 private:
  const TabularMDP* mdp_;
  const DirichletBelief* belief_;
};

class TabularPolicyAdapter final : public plan::PlannerPolicy {
 public:
  explicit TabularPolicyAdapter(const TabularPolicy& policy) : policy_(&policy) {}
  int action_dim() const override { return 1; }
  Vec sample_plan_action(std::span<const double> s, double noise_sigma,
                         Rng& rng) const override;
  Vec mean_action(std::span<const double> s) const override;

 private:
  const TabularPolicy* policy_;
};

}  // namespace rtplan::oracle
