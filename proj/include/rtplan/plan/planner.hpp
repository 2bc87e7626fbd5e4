#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "rtplan/belief/encoder.hpp"
#include "rtplan/core/env.hpp"
#include "rtplan/model/ensemble.hpp"
#include "rtplan/prior/policy.hpp"

namespace rtplan::plan {

using net::Vec;

struct PlannerConfig {
  int horizon = 4;         // H
  int n_candidates = 512;  // candidate plans per call
  int n_latents = 1;       // posterior samples marginalized per call
  double kappa = 1.0;      // inverse temperature
  double noise_sigma = 0.0;
  double penalty = 0.0;  // ensemble return-spread penalty
  double gamma = 0.99;

  void validate() const;  // throws on violated invariants
};

// Model interface consumed by the planner. Rollout evaluation is per member
// so return spread across members can be penalized; candidate generation
// uses a stochastic mixture step.
class PlannerModel {
 public:
  virtual ~PlannerModel() = default;
  virtual std::size_t member_count() const = 0;
  virtual void sample_step(std::span<const double> s, std::span<const double> a,
                           std::span<const double> latent, Rng& rng, Vec& next_state,
                           double& reward) const = 0;
  // Rolls the full action sequence under one member from s0; fills one reward
  // per step and the terminal state. An rng is provided for models that are
  // inherently stochastic; the learned ensemble ignores it (mean rollouts).
  virtual void member_rollout(std::size_t member, std::span<const double> s0,
                              const std::vector<Vec>& actions, std::span<const double> latent,
                              Rng& rng, Vec& rewards, Vec& final_state) const = 0;
};

class PlannerPolicy {
 public:
  virtual ~PlannerPolicy() = default;
  virtual int action_dim() const = 0;
  virtual Vec sample_plan_action(std::span<const double> s, double noise_sigma,
                                 Rng& rng) const = 0;
  virtual Vec mean_action(std::span<const double> s) const = 0;
};

class ValueEstimate {
 public:
  virtual ~ValueEstimate() = default;
  virtual double value(std::span<const double> s) const = 0;
};

// Adapters over the trained artifacts.
class EnsemblePlannerModel final : public PlannerModel {
 public:
  explicit EnsemblePlannerModel(const model::EnsembleModel& m) : model_(&m) {}
  std::size_t member_count() const override { return model_->elite_indices().size(); }
  void sample_step(std::span<const double> s, std::span<const double> a,
                   std::span<const double> latent, Rng& rng, Vec& next_state,
                   double& reward) const override;
  void member_rollout(std::size_t member, std::span<const double> s0,
                      const std::vector<Vec>& actions, std::span<const double> latent, Rng& rng,
                      Vec& rewards, Vec& final_state) const override;

 private:
  const model::EnsembleModel* model_;
};

class PriorPolicyAdapter final : public PlannerPolicy {
 public:
  explicit PriorPolicyAdapter(const prior::PriorPolicy& p) : policy_(&p) {}
  int action_dim() const override { return policy_->action_dim(); }
  Vec sample_plan_action(std::span<const double> s, double noise_sigma,
                         Rng& rng) const override {
    return policy_->sample_action(s, noise_sigma, rng);
  }
  Vec mean_action(std::span<const double> s) const override { return policy_->mean_action(s); }

 private:
  const prior::PriorPolicy* policy_;
};

class ValueFnAdapter final : public ValueEstimate {
 public:
  explicit ValueFnAdapter(const prior::ValueFn& v) : value_(&v) {}
  double value(std::span<const double> s) const override { return value_->value(s); }

 private:
  const prior::ValueFn* value_;
};

// Max-subtracted softmax over kappa-scaled returns; kappa = 0 is uniform.
Vec softmax_weights(const std::vector<double>& returns, double kappa);

// Penalized H-step return of one plan under one latent:
//   score = mean_k(R_k) - penalty * std_k(R_k)   (population std over members)
// with R_k = sum_h gamma^h r_k[h] + gamma^H V(s_final_k). H = 0 gives V(s).
double rollout_return(const PlannerModel& model, const ValueEstimate* value,
                      std::span<const double> s, const std::vector<Vec>& plan,
                      std::span<const double> latent, double gamma, Rng& rng, double penalty,
                      double* member_spread = nullptr);

using Plan = std::vector<Vec>;  // H actions

struct CandidateSet {
  std::vector<Plan> plans;
};

// N candidate plans rolled from the prior policy with imagined states
// advanced by stochastic model steps conditioned on mu.
CandidateSet generate_prior_plans(const PlannerPolicy& policy, const PlannerModel& model,
                                  std::span<const double> s, std::span<const double> mu,
                                  const PlannerConfig& cfg, Rng& rng);

struct ConditionedPlan {
  Plan actions;
  std::vector<double> weights;
  std::vector<double> returns;
  std::vector<double> member_spread;
};

// Re-scores every candidate under dynamics conditioned on one latent and
// returns the softmax-weighted plan.
ConditionedPlan plan_conditioned(std::span<const double> s, std::span<const double> latent,
                                 const CandidateSet& candidates, const PlannerModel& model,
                                 const ValueEstimate* value, const PlannerConfig& cfg, Rng& rng);

struct PlanResult {
  Plan actions;  // posterior-mean plan
  std::vector<std::vector<double>> weights;        // [latent][candidate]
  std::vector<std::vector<double>> returns;        // [latent][candidate]
  std::vector<std::vector<double>> member_spread;  // [latent][candidate]
  double weight_entropy = 0.0;                     // mean over latents
};

// Marginalized planning: draw n_latents posterior samples, generate one
// candidate set under mu, evaluate per latent, average the per-latent
// weighted plans with equal weight.
PlanResult refplan_from_belief(std::span<const double> s, const Vec& mu, const Vec& sigma,
                               const PlannerModel& model, const PlannerPolicy& policy,
                               const ValueEstimate* value, const PlannerConfig& cfg, Rng& rng);

PlanResult refplan(const Trajectory& prefix, const belief::Encoder& encoder,
                   const PlannerModel& model, const PlannerPolicy& policy,
                   const ValueEstimate* value, const PlannerConfig& cfg, Rng& rng);

enum class PlannerKind { kPriorOnly, kFlat, kRefPlan };
std::string to_string(PlannerKind kind);
PlannerKind planner_kind_from_string(const std::string& s);

struct PlannerComponents {
  const belief::Encoder* encoder = nullptr;
  const PlannerModel* model = nullptr;
  const PlannerPolicy* policy = nullptr;
  const ValueEstimate* value = nullptr;
};

struct StepRecord {
  int t = 0;
  Vec state;
  Vec action;
  double reward = 0.0;
  double plan_ms = 0.0;
  int n_latents = 0;
  double kappa = 0.0;
  double weight_entropy = 0.0;
};

struct EpisodeLog {
  std::vector<StepRecord> steps;
  double episode_return = 0.0;
};

// MPC driver: re-plans every step, executes only the first action, appends
// the realized transition to the prefix before the next call. Imagined
// rollouts truncate at the horizon; done is not modeled inside the planner.
EpisodeLog mpc_episode(const Environment& env, PlannerKind kind,
                       const PlannerComponents& comps, const PlannerConfig& cfg,
                       std::uint64_t seed);

void write_step_log_csv(const EpisodeLog& log, const std::string& path);

}  // namespace rtplan::plan
