#include "rtplan/belief/encoder.hpp"

#include <cmath>
#include <stdexcept>

#include "rtplan/net/checkpoint.hpp"

namespace rtplan::belief {

using net::ParamStore;
using net::Tape;

Vec BeliefParams::stddev() const {
  Vec s(log_var.size());
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = std::exp(0.5 * log_var[i]);
  return s;
}

Encoder::Encoder(EncoderConfig cfg, std::uint64_t seed) : cfg_(cfg) {
  params_.add("emb_s.w", {(std::size_t)cfg_.state_emb, (std::size_t)cfg_.state_dim});
  params_.add("emb_s.b", {(std::size_t)cfg_.state_emb});
  params_.add("emb_a.w", {(std::size_t)cfg_.action_emb, (std::size_t)cfg_.action_dim});
  params_.add("emb_a.b", {(std::size_t)cfg_.action_emb});
  params_.add("emb_r.w", {(std::size_t)cfg_.reward_emb, 1});
  params_.add("emb_r.b", {(std::size_t)cfg_.reward_emb});
  std::size_t in = cfg_.state_emb + cfg_.action_emb + cfg_.reward_emb;
  net::add_gru_params(params_, "gru", in, cfg_.hidden_dim);
  params_.add("head.w", {(std::size_t)(2 * cfg_.latent_dim), (std::size_t)cfg_.hidden_dim});
  params_.add("head.b", {(std::size_t)(2 * cfg_.latent_dim)});
  Rng rng(seed);
  params_.init_fan_in(rng);
}

namespace {

void embed_plain(const ParamStore& ps, const std::string& prefix, std::span<const double> x,
                 Vec& out) {
  const net::Tensor& w = ps.at(prefix + ".w");
  const net::Tensor& b = ps.at(prefix + ".b");
  const std::size_t rows = w.shape[0];
  const std::size_t cols = w.shape[1];
  out.resize(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    double acc = b.data[r];
    const double* wr = w.data.data() + r * cols;
    for (std::size_t c = 0; c < cols; ++c) acc += wr[c] * x[c];
    out[r] = acc > 0.0 ? acc : 0.0;
  }
}

}  // namespace

BeliefParams Encoder::step_plain(const Vec& hidden, std::span<const double> prev_action,
                                 double prev_reward, std::span<const double> state) const {
  if (static_cast<int>(state.size()) != cfg_.state_dim)
    throw std::invalid_argument("Encoder: state dim mismatch");
  if (static_cast<int>(prev_action.size()) != cfg_.action_dim)
    throw std::invalid_argument("Encoder: action dim mismatch");

  Vec es, ea, er;
  embed_plain(params_, "emb_s", state, es);
  embed_plain(params_, "emb_a", prev_action, ea);
  double r[1] = {prev_reward};
  embed_plain(params_, "emb_r", std::span<const double>(r, 1), er);

  Vec x;
  x.reserve(es.size() + ea.size() + er.size());
  x.insert(x.end(), es.begin(), es.end());
  x.insert(x.end(), ea.begin(), ea.end());
  x.insert(x.end(), er.begin(), er.end());

  BeliefParams out;
  net::gru_step(params_, "gru", x, hidden, out.hidden);

  const net::Tensor& w = params_.at("head.w");
  const net::Tensor& b = params_.at("head.b");
  const int ld = cfg_.latent_dim;
  out.mu.resize(ld);
  out.log_var.resize(ld);
  for (int rr = 0; rr < 2 * ld; ++rr) {
    double acc = b.data[rr];
    const double* wr = w.data.data() + rr * cfg_.hidden_dim;
    for (int c = 0; c < cfg_.hidden_dim; ++c) acc += wr[c] * out.hidden[c];
    if (rr < ld)
      out.mu[rr] = acc;
    else
      out.log_var[rr - ld] = net::clamp_logvar(acc);
  }
  return out;
}

BeliefParams Encoder::begin(std::span<const double> state) const {
  Vec h(cfg_.hidden_dim, 0.0);
  Vec a0(cfg_.action_dim, 0.0);
  return step_plain(h, a0, 0.0, state);
}

BeliefParams Encoder::update(const BeliefParams& prev, std::span<const double> prev_action,
                             double prev_reward, std::span<const double> state) const {
  return step_plain(prev.hidden, prev_action, prev_reward, state);
}

std::vector<BeliefParams> Encoder::encode(const Trajectory& prefix) const {
  if (prefix.empty()) throw std::invalid_argument("Encoder::encode: empty prefix; use encode_from");
  return encode_from(prefix.transitions[0].state, prefix);
}

std::vector<BeliefParams> Encoder::encode_from(std::span<const double> s0,
                                               const Trajectory& prefix) const {
  std::vector<BeliefParams> out;
  out.reserve(prefix.size() + 1);
  out.push_back(begin(s0));
  for (std::size_t h = 0; h < prefix.size(); ++h) {
    const Transition& tr = prefix.transitions[h];
    out.push_back(update(out.back(), tr.action, tr.reward, tr.next_state));
  }
  return out;
}

std::vector<Encoder::TapeStep> Encoder::encode_tape(net::Tape& tape, const Trajectory& prefix,
                                                    std::size_t t_last) const {
  if (t_last > prefix.size())
    throw std::invalid_argument("Encoder::encode_tape: t_last exceeds prefix length");
  auto& ps = const_cast<ParamStore&>(params_);
  auto embed = [&](const std::string& prefix_name, Tape::Var x, std::size_t rows,
                   std::size_t cols) {
    return tape.relu_f(tape.affine(tape.param(ps, prefix_name + ".w"),
                                   tape.param(ps, prefix_name + ".b"), x, rows, cols));
  };

  std::vector<TapeStep> steps;
  steps.reserve(t_last + 1);
  Tape::Var h = tape.constant(Vec(cfg_.hidden_dim, 0.0));
  for (std::size_t t = 0; t <= t_last; ++t) {
    Vec state = (t == 0) ? prefix.state_at(0) : prefix.transitions[t - 1].next_state;
    Vec pa = (t == 0) ? Vec(cfg_.action_dim, 0.0) : prefix.transitions[t - 1].action;
    double pr = (t == 0) ? 0.0 : prefix.transitions[t - 1].reward;

    Tape::Var es = embed("emb_s", tape.constant(state), cfg_.state_emb, cfg_.state_dim);
    Tape::Var ea = embed("emb_a", tape.constant(pa), cfg_.action_emb, cfg_.action_dim);
    Tape::Var er = embed("emb_r", tape.constant({pr}), cfg_.reward_emb, 1);
    Tape::Var x = tape.concat({es, ea, er});
    h = net::gru_step_tape(tape, ps, "gru", x, h);

    Tape::Var head = tape.affine(tape.param(ps, "head.w"), tape.param(ps, "head.b"), h,
                                 2 * cfg_.latent_dim, cfg_.hidden_dim);
    Tape::Var mu = tape.slice(head, 0, cfg_.latent_dim);
    Tape::Var lv = tape.clamp_f(tape.slice(head, cfg_.latent_dim, cfg_.latent_dim),
                                net::kLogVarMin, net::kLogVarMax);
    steps.push_back({mu, lv});
  }
  return steps;
}

LatentSample Encoder::sample(const BeliefParams& bp, Rng& rng) const {
  LatentSample s;
  s.m.resize(bp.mu.size());
  for (std::size_t i = 0; i < bp.mu.size(); ++i)
    s.m[i] = bp.mu[i] + std::exp(0.5 * bp.log_var[i]) * rng.normal();
  s.source = bp;
  return s;
}

void Encoder::save(const std::string& path, double kl_weight) const {
  nlohmann::json meta;
  meta["kind"] = "belief_encoder";
  meta["state_dim"] = cfg_.state_dim;
  meta["action_dim"] = cfg_.action_dim;
  meta["latent_dim"] = cfg_.latent_dim;
  meta["hidden_dim"] = cfg_.hidden_dim;
  meta["state_emb"] = cfg_.state_emb;
  meta["action_emb"] = cfg_.action_emb;
  meta["reward_emb"] = cfg_.reward_emb;
  meta["kl_weight"] = kl_weight;
  net::save_checkpoint(params_, meta, path);
}

Encoder Encoder::load(const std::string& path) {
  nlohmann::json meta;
  net::ParamStore ps = net::load_checkpoint(path, &meta);
  EncoderConfig cfg;
  cfg.state_dim = meta.at("state_dim").get<int>();
  cfg.action_dim = meta.at("action_dim").get<int>();
  cfg.latent_dim = meta.at("latent_dim").get<int>();
  cfg.hidden_dim = meta.at("hidden_dim").get<int>();
  cfg.state_emb = meta.at("state_emb").get<int>();
  cfg.action_emb = meta.at("action_emb").get<int>();
  cfg.reward_emb = meta.at("reward_emb").get<int>();
  Encoder enc(cfg, 0);
  enc.params_.unflatten(ps.flatten());
  return enc;
}

double kl_gaussian(const BeliefParams& q, const BeliefParams& p) {
  if (q.mu.size() != p.mu.size()) throw std::invalid_argument("kl_gaussian: dim mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < q.mu.size(); ++i) {
    double dm = q.mu[i] - p.mu[i];
    acc += 0.5 * (p.log_var[i] - q.log_var[i] + std::exp(q.log_var[i] - p.log_var[i]) +
                  dm * dm * std::exp(-p.log_var[i]) - 1.0);
  }
  return acc;
}

}  // namespace rtplan::belief
