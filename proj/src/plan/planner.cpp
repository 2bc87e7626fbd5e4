#include "rtplan/plan/planner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace rtplan::plan {

void PlannerConfig::validate() const {
  if (horizon < 1) throw std::invalid_argument("PlannerConfig: horizon must be >= 1");
  if (n_candidates < 1) throw std::invalid_argument("PlannerConfig: n_candidates must be >= 1");
  if (n_latents < 1) throw std::invalid_argument("PlannerConfig: n_latents must be >= 1");
  if (kappa < 0.0) throw std::invalid_argument("PlannerConfig: kappa must be >= 0");
  if (penalty < 0.0) throw std::invalid_argument("PlannerConfig: penalty must be >= 0");
  if (gamma < 0.0 || gamma > 1.0) throw std::invalid_argument("PlannerConfig: gamma in [0, 1]");
  if (noise_sigma < 0.0) throw std::invalid_argument("PlannerConfig: noise_sigma must be >= 0");
}

void EnsemblePlannerModel::sample_step(std::span<const double> s, std::span<const double> a,
                                       std::span<const double> latent, Rng& rng, Vec& next_state,
                                       double& reward) const {
  auto sample = model_->sample_transition(s, a, latent, rng);
  next_state = std::move(sample.next_state);
  reward = sample.reward;
}

void EnsemblePlannerModel::member_rollout(std::size_t member, std::span<const double> s0,
                                          const std::vector<Vec>& actions,
                                          std::span<const double> latent, Rng&, Vec& rewards,
                                          Vec& final_state) const {
  std::size_t elite = model_->elite_indices()[member];
  rewards.resize(actions.size());
  thread_local Vec cur, next;
  cur.assign(s0.begin(), s0.end());
  for (std::size_t h = 0; h < actions.size(); ++h) {
    double r = 0.0;
    model_->member_mean_step(elite, cur, actions[h], latent, next, r);
    rewards[h] = r;
    std::swap(cur, next);
  }
  final_state = cur;
}

Vec softmax_weights(const std::vector<double>& returns, double kappa) {
  if (returns.empty()) throw std::invalid_argument("softmax_weights: empty returns");
  if (kappa < 0.0) throw std::invalid_argument("softmax_weights: negative kappa");
  for (double r : returns)
    if (!std::isfinite(r)) throw std::invalid_argument("softmax_weights: non-finite return");
  double mx = *std::max_element(returns.begin(), returns.end());
  Vec w(returns.size());
  double z = 0.0;
  for (std::size_t i = 0; i < returns.size(); ++i) {
    w[i] = std::exp(kappa * (returns[i] - mx));
    z += w[i];
  }
  for (double& x : w) x /= z;
  return w;
}

double rollout_return(const PlannerModel& model, const ValueEstimate* value,
                      std::span<const double> s, const std::vector<Vec>& plan,
                      std::span<const double> latent, double gamma, Rng& rng, double penalty,
                      double* member_spread) {
  const std::size_t members = model.member_count();
  if (members == 0) throw std::invalid_argument("rollout_return: model has no members");

  thread_local Vec rewards, final_state;
  double sum = 0.0, sum_sq = 0.0;
  for (std::size_t k = 0; k < members; ++k) {
    Rng mr = rng.derive(k);
    double ret = 0.0;
    if (plan.empty()) {
      ret = value ? value->value(s) : 0.0;
    } else {
      model.member_rollout(k, s, plan, latent, mr, rewards, final_state);
      double disc = 1.0;
      for (std::size_t h = 0; h < rewards.size(); ++h) {
        ret += disc * rewards[h];
        disc *= gamma;
      }
      if (value) ret += disc * value->value(final_state);
    }
    sum += ret;
    sum_sq += ret * ret;
  }
  double mean = sum / static_cast<double>(members);
  double var = std::max(0.0, sum_sq / static_cast<double>(members) - mean * mean);
  double spread = std::sqrt(var);
  if (member_spread) *member_spread = spread;
  return mean - penalty * spread;
}

CandidateSet generate_prior_plans(const PlannerPolicy& policy, const PlannerModel& model,
                                  std::span<const double> s, std::span<const double> mu,
                                  const PlannerConfig& cfg, Rng& rng) {
  cfg.validate();
  CandidateSet out;
  out.plans.resize(cfg.n_candidates);
  thread_local Vec cur, next;
  for (int n = 0; n < cfg.n_candidates; ++n) {
    Rng cr = rng.derive(n);
    Plan& plan = out.plans[n];
    plan.reserve(cfg.horizon);
    cur.assign(s.begin(), s.end());
    for (int h = 0; h < cfg.horizon; ++h) {
      plan.push_back(policy.sample_plan_action(cur, cfg.noise_sigma, cr));
      double r = 0.0;
      model.sample_step(cur, plan.back(), mu, cr, next, r);
      std::swap(cur, next);
    }
  }
  return out;
}

ConditionedPlan plan_conditioned(std::span<const double> s, std::span<const double> latent,
                                 const CandidateSet& candidates, const PlannerModel& model,
                                 const ValueEstimate* value, const PlannerConfig& cfg,
                                 Rng& rng) {
  if (candidates.plans.empty()) throw std::invalid_argument("plan_conditioned: no candidates");
  const std::size_t n = candidates.plans.size();
  ConditionedPlan out;
  out.returns.resize(n);
  out.member_spread.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    Rng rr = rng.derive(i);
    out.returns[i] = rollout_return(model, value, s, candidates.plans[i], latent, cfg.gamma, rr,
                                    cfg.penalty, &out.member_spread[i]);
  }
  out.weights = softmax_weights(out.returns, cfg.kappa);

  const std::size_t H = candidates.plans[0].size();
  const std::size_t ad = H > 0 ? candidates.plans[0][0].size() : 0;
  out.actions.assign(H, Vec(ad, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t h = 0; h < H; ++h)
      for (std::size_t d = 0; d < ad; ++d) out.actions[h][d] += out.weights[i] * candidates.plans[i][h][d];
  return out;
}

namespace {

double weight_entropy(const std::vector<double>& w) {
  double h = 0.0;
  for (double x : w)
    if (x > 0.0) h -= x * std::log(x);
  return h;
}

}  // namespace

PlanResult refplan_from_belief(std::span<const double> s, const Vec& mu, const Vec& sigma,
                               const PlannerModel& model, const PlannerPolicy& policy,
                               const ValueEstimate* value, const PlannerConfig& cfg, Rng& rng) {
  cfg.validate();

  Rng latent_rng = rng.derive(0);
  std::vector<Vec> latents(cfg.n_latents, Vec(mu.size()));
  for (auto& m : latents)
    for (std::size_t i = 0; i < mu.size(); ++i) m[i] = mu[i] + sigma[i] * latent_rng.normal();

  Rng gen_rng = rng.derive(1);
  CandidateSet candidates = generate_prior_plans(policy, model, s, mu, cfg, gen_rng);

  PlanResult result;
  result.weights.reserve(cfg.n_latents);
  result.returns.reserve(cfg.n_latents);
  result.member_spread.reserve(cfg.n_latents);

  const std::size_t H = cfg.horizon;
  const std::size_t ad = candidates.plans[0][0].size();
  result.actions.assign(H, Vec(ad, 0.0));
  double entropy = 0.0;
  for (int j = 0; j < cfg.n_latents; ++j) {
    Rng eval_rng = rng.derive(2 + j);
    ConditionedPlan cp =
        plan_conditioned(s, latents[j], candidates, model, value, cfg, eval_rng);
    for (std::size_t h = 0; h < H; ++h)
      for (std::size_t d = 0; d < ad; ++d) result.actions[h][d] += cp.actions[h][d];
    entropy += weight_entropy(cp.weights);
    result.weights.push_back(std::move(cp.weights));
    result.returns.push_back(std::move(cp.returns));
    result.member_spread.push_back(std::move(cp.member_spread));
  }
  const double inv = 1.0 / static_cast<double>(cfg.n_latents);
  for (auto& a : result.actions)
    for (double& d : a) d *= inv;
  result.weight_entropy = entropy * inv;
  return result;
}

PlanResult refplan(const Trajectory& prefix, const belief::Encoder& encoder,
                   const PlannerModel& model, const PlannerPolicy& policy,
                   const ValueEstimate* value, const PlannerConfig& cfg, Rng& rng) {
  if (prefix.empty()) throw std::invalid_argument("refplan: prefix must contain the start state");
  auto beliefs = encoder.encode(prefix);
  const belief::BeliefParams& bp = beliefs.back();
  const Vec& s = prefix.transitions.back().next_state;
  return refplan_from_belief(s, bp.mu, bp.stddev(), model, policy, value, cfg, rng);
}

std::string to_string(PlannerKind kind) {
  switch (kind) {
    case PlannerKind::kPriorOnly:
      return "prior_only";
    case PlannerKind::kFlat:
      return "flat";
    case PlannerKind::kRefPlan:
      return "refplan";
  }
  return "unknown";
}

PlannerKind planner_kind_from_string(const std::string& s) {
  if (s == "prior_only") return PlannerKind::kPriorOnly;
  if (s == "flat") return PlannerKind::kFlat;
  if (s == "refplan") return PlannerKind::kRefPlan;
  throw std::invalid_argument("unknown planner kind: " + s);
}

EpisodeLog mpc_episode(const Environment& env, PlannerKind kind, const PlannerComponents& comps,
                       const PlannerConfig& cfg, std::uint64_t seed) {
  if (!comps.policy) throw std::invalid_argument("mpc_episode: policy is required");
  if (kind != PlannerKind::kPriorOnly) {
    if (!comps.model) throw std::invalid_argument("mpc_episode: model is required");
    if (!comps.encoder) throw std::invalid_argument("mpc_episode: encoder is required");
    cfg.validate();
  }

  Rng root(seed);
  Rng init_rng = root.derive(0);
  Vec s = env.sample_initial(init_rng);

  EpisodeLog log;
  std::optional<belief::BeliefParams> belief;
  if (comps.encoder) belief = comps.encoder->begin(s);

  for (int t = 0; t < env.horizon(); ++t) {
    auto t0 = std::chrono::steady_clock::now();
    Vec action;
    double entropy = 0.0;
    if (kind == PlannerKind::kPriorOnly) {
      action = comps.policy->mean_action(s);
    } else {
      Rng step_rng = root.derive(1000 + static_cast<std::uint64_t>(t));
      if (kind == PlannerKind::kFlat) {
        Rng gen_rng = step_rng.derive(1);
        CandidateSet candidates =
            generate_prior_plans(*comps.policy, *comps.model, s, belief->mu, cfg, gen_rng);
        Rng eval_rng = step_rng.derive(2);
        ConditionedPlan cp = plan_conditioned(s, belief->mu, candidates, *comps.model,
                                              comps.value, cfg, eval_rng);
        action = cp.actions[0];
        entropy = weight_entropy(cp.weights);
      } else {
        PlanResult pr = refplan_from_belief(s, belief->mu, belief->stddev(), *comps.model,
                                            *comps.policy, comps.value, cfg, step_rng);
        action = pr.actions[0];
        entropy = pr.weight_entropy;
      }
    }
    double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                    .count();

    Rng env_rng = root.derive(500000 + static_cast<std::uint64_t>(t));
    StepResult res = env.step(s, action, env_rng);
    log.steps.push_back(
        {t, s, action, res.reward, ms, cfg.n_latents, cfg.kappa, entropy});
    log.episode_return += res.reward;
    if (comps.encoder) belief = comps.encoder->update(*belief, action, res.reward, res.next_state);
    s = std::move(res.next_state);
    if (res.done) break;
  }
  return log;
}

void write_step_log_csv(const EpisodeLog& log, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("write_step_log_csv: cannot open " + path);
  os.precision(17);
  if (log.steps.empty()) return;
  os << "t";
  for (std::size_t i = 0; i < log.steps[0].state.size(); ++i) os << ",s" << i;
  for (std::size_t i = 0; i < log.steps[0].action.size(); ++i) os << ",a" << i;
  os << ",reward,plan_time_ms,n_bar,kappa,weight_entropy\n";
  for (const auto& st : log.steps) {
    os << st.t;
    for (double x : st.state) os << "," << x;
    for (double x : st.action) os << "," << x;
    os << "," << st.reward << "," << st.plan_ms << "," << st.n_latents << "," << st.kappa << ","
       << st.weight_entropy << "\n";
  }
}

}  // namespace rtplan::plan
