#include "rtplan/oracle/tabular.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

namespace rtplan::oracle {

void TabularMDP::validate() const {
  if (n_states < 1 || n_actions < 1) throw std::invalid_argument("TabularMDP: empty spaces");
  if (rewards.size() != static_cast<std::size_t>(n_states * n_actions) ||
      transitions.size() != static_cast<std::size_t>(n_states * n_actions * n_states))
    throw std::invalid_argument("TabularMDP: table size mismatch");
  for (double r : rewards)
    if (!std::isfinite(r)) throw std::invalid_argument("TabularMDP: non-finite reward");
  for (int s = 0; s < n_states; ++s)
    for (int a = 0; a < n_actions; ++a) {
      double sum = 0.0;
      for (int s2 = 0; s2 < n_states; ++s2) {
        double p = transition(s, a, s2);
        if (p < 0.0) throw std::invalid_argument("TabularMDP: negative transition probability");
        sum += p;
      }
      if (std::abs(sum - 1.0) > 1e-12)
        throw std::invalid_argument("TabularMDP: transition row does not sum to 1");
    }
}

TabularMDP TabularMDP::from_json(const nlohmann::json& j) {
  TabularMDP mdp;
  mdp.n_states = j.at("n_states").get<int>();
  mdp.n_actions = j.at("n_actions").get<int>();
  mdp.rewards = j.at("rewards").get<std::vector<double>>();
  mdp.transitions = j.at("transitions").get<std::vector<double>>();
  mdp.validate();
  return mdp;
}

TabularMDP TabularMDP::load(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("TabularMDP::load: cannot open " + path);
  nlohmann::json j;
  is >> j;
  return from_json(j);
}

nlohmann::json TabularMDP::to_json() const {
  return {{"n_states", n_states},
          {"n_actions", n_actions},
          {"rewards", rewards},
          {"transitions", transitions}};
}

DirichletBelief::DirichletBelief(int n_states, int n_actions, double alpha0)
    : n_states_(n_states), n_actions_(n_actions) {
  if (alpha0 <= 0.0) throw std::invalid_argument("DirichletBelief: alpha0 must be positive");
  alpha_.assign(static_cast<std::size_t>(n_states) * n_actions * n_states, alpha0);
}

void DirichletBelief::check_range(int s, int a, int s2) const {
  if (s < 0 || s >= n_states_ || a < 0 || a >= n_actions_ || s2 < 0 || s2 >= n_states_)
    throw std::out_of_range("DirichletBelief: index out of range");
}

void DirichletBelief::validate() const {
  for (double a : alpha_)
    if (!(a > 0.0)) throw std::invalid_argument("DirichletBelief: non-positive alpha");
}

DirichletBelief dirichlet_update(const DirichletBelief& belief, int s, int a, int s2) {
  DirichletBelief out = belief;
  out.alpha(s, a, s2) += 1.0;
  return out;
}

Vec posterior_predictive(const DirichletBelief& belief, int s, int a) {
  Vec p(belief.n_states());
  double sum = 0.0;
  for (int s2 = 0; s2 < belief.n_states(); ++s2) sum += belief.alpha(s, a, s2);
  for (int s2 = 0; s2 < belief.n_states(); ++s2) p[s2] = belief.alpha(s, a, s2) / sum;
  return p;
}

std::vector<BeliefOutcome> belief_mdp_transition(const DirichletBelief& belief, int s, int a) {
  Vec p = posterior_predictive(belief, s, a);
  std::vector<BeliefOutcome> out;
  out.reserve(p.size());
  for (int s2 = 0; s2 < belief.n_states(); ++s2)
    out.push_back({s2, dirichlet_update(belief, s, a, s2), p[s2]});
  return out;
}

TabularPolicy TabularPolicy::uniform(int n_states, int n_actions) {
  TabularPolicy p;
  p.n_states = n_states;
  p.n_actions = n_actions;
  p.probs.assign(static_cast<std::size_t>(n_states) * n_actions, 1.0 / n_actions);
  return p;
}

void TabularPolicy::validate() const {
  for (int s = 0; s < n_states; ++s) {
    double sum = 0.0;
    for (int a = 0; a < n_actions; ++a) sum += prob(s, a);
    if (std::abs(sum - 1.0) > 1e-12)
      throw std::invalid_argument("TabularPolicy: row does not sum to 1");
  }
}

namespace {

// Kahan-compensated accumulator.
struct Kahan {
  double sum = 0.0;
  double comp = 0.0;
  void add(double x) {
    double y = x - comp;
    double t = sum + y;
    comp = (t - sum) - y;
    sum = t;
  }
};

struct Enumerator {
  const TabularMDP* mdp;
  const TabularPolicy* prior;
  int horizon;
  double kappa;
  double gamma;
  Kahan z;
  std::vector<std::vector<Kahan>> mass;  // [h][a]
  DirichletBelief belief;                // mutated along the DFS path

  void dfs(int s, int depth, double log_prob, double ret, std::vector<int>& actions) {
    if (depth == horizon) {
      double w = std::exp(log_prob + kappa * ret);
      z.add(w);
      for (int h = 0; h < horizon; ++h) mass[h][actions[h]].add(w);
      return;
    }
    double disc = std::pow(gamma, depth);
    for (int a = 0; a < prior->n_actions; ++a) {
      double pa = prior->prob(s, a);
      if (pa == 0.0) continue;
      actions[depth] = a;
      double r = mdp->reward(s, a);
      double row_sum = 0.0;
      for (int s2 = 0; s2 < belief.n_states(); ++s2) row_sum += belief.alpha(s, a, s2);
      for (int s2 = 0; s2 < belief.n_states(); ++s2) {
        double p = belief.alpha(s, a, s2) / row_sum;
        belief.alpha(s, a, s2) += 1.0;
        dfs(s2, depth + 1, log_prob + std::log(pa * p), ret + disc * r, actions);
        belief.alpha(s, a, s2) -= 1.0;
      }
    }
  }
};

}  // namespace

ExactPlan exact_posterior_plan(const DirichletBelief& belief, const TabularMDP& mdp, int s0,
                               int horizon, double kappa, const TabularPolicy& prior,
                               double gamma) {
  if (s0 < 0 || s0 >= mdp.n_states) throw std::out_of_range("exact_posterior_plan: bad s0");
  if (horizon < 1) throw std::invalid_argument("exact_posterior_plan: horizon must be >= 1");
  double terms = std::pow(static_cast<double>(mdp.n_actions) * mdp.n_states,
                          static_cast<double>(horizon));
  if (terms > 1e7) throw std::invalid_argument("exact_posterior_plan: enumeration guard exceeded");

  Enumerator en{&mdp, &prior, horizon, kappa, gamma, {}, {}, belief};
  en.mass.assign(horizon, std::vector<Kahan>(mdp.n_actions));
  std::vector<int> actions(horizon, 0);
  en.dfs(s0, 0, 0.0, 0.0, actions);

  ExactPlan plan;
  plan.action_dist.assign(horizon, Vec(mdp.n_actions, 0.0));
  for (int h = 0; h < horizon; ++h)
    for (int a = 0; a < mdp.n_actions; ++a)
      plan.action_dist[h][a] = en.mass[h][a].sum / en.z.sum;
  for (int a = 0; a < mdp.n_actions; ++a)
    plan.expected_first_action += static_cast<double>(a) * plan.action_dist[0][a];
  return plan;
}

namespace {

int as_index(std::span<const double> v) { return static_cast<int>(std::lround(v[0])); }

int sample_categorical(const Vec& p, Rng& rng) {
  double u = rng.uniform();
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    acc += p[i];
    if (u < acc) return static_cast<int>(i);
  }
  return static_cast<int>(p.size()) - 1;
}

}  // namespace

void TabularPlannerModel::sample_step(std::span<const double> s, std::span<const double> a,
                                      std::span<const double>, Rng& rng, Vec& next_state,
                                      double& reward) const {
  int si = as_index(s);
  int ai = as_index(a);
  Vec p = posterior_predictive(*belief_, si, ai);
  int s2 = sample_categorical(p, rng);
  next_state.assign(1, static_cast<double>(s2));
  reward = mdp_->reward(si, ai);
}

void TabularPlannerModel::member_rollout(std::size_t, std::span<const double> s0,
                                         const std::vector<Vec>& actions,
                                         std::span<const double>, Rng& rng, Vec& rewards,
                                         Vec& final_state) const {
  DirichletBelief local = *belief_;
  int s = as_index(s0);
  rewards.resize(actions.size());
  for (std::size_t h = 0; h < actions.size(); ++h) {
    int a = as_index(actions[h]);
    rewards[h] = mdp_->reward(s, a);
    Vec p = posterior_predictive(local, s, a);
    int s2 = sample_categorical(p, rng);
    local.alpha(s, a, s2) += 1.0;
    s = s2;
  }
  final_state.assign(1, static_cast<double>(s));
}

Vec TabularPolicyAdapter::sample_plan_action(std::span<const double> s, double, Rng& rng) const {
  int si = as_index(s);
  Vec row(policy_->n_actions);
  for (int a = 0; a < policy_->n_actions; ++a) row[a] = policy_->prob(si, a);
  return {static_cast<double>(sample_categorical(row, rng))};
}

Vec TabularPolicyAdapter::mean_action(std::span<const double> s) const {
  int si = as_index(s);
  double mean = 0.0;
  for (int a = 0; a < policy_->n_actions; ++a) mean += a * policy_->prob(si, a);
  return {mean};
}

}  // namespace rtplan::oracle
