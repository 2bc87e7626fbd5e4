#pragma once

#include <string>
#include <vector>

#include "rtplan/core/types.hpp"
#include "rtplan/net/layers.hpp"
#include "rtplan/net/tape.hpp"
#include "rtplan/rng.hpp"

namespace rtplan::belief {

using net::Vec;

struct EncoderConfig {
  int state_dim = 0;
  int action_dim = 0;
  int latent_dim = 8;
  int hidden_dim = 32;  // GRU
  int state_emb = 8;
  int action_emb = 8;
  int reward_emb = 4;
};

// Gaussian posterior parameters at one step, plus the GRU hidden state
// carried forward.
struct BeliefParams {
  Vec mu;
  Vec log_var;
  Vec hidden;

  Vec stddev() const;
};

struct LatentSample {
  Vec m;
  BeliefParams source;
};

// Recurrent variational encoder: per step, (state, prev action, prev reward)
// are embedded through distinct ReLU linear layers, fed to a GRU, and the
// hidden state is projected to (mu, log var). Step 0 uses zero-initialized
// previous action/reward and hidden state.
class Encoder {
 public:
  Encoder() = default;
  Encoder(EncoderConfig cfg, std::uint64_t seed);

  const EncoderConfig& config() const { return cfg_; }
  net::ParamStore& params() { return params_; }
  const net::ParamStore& params() const { return params_; }

  // Streaming (plain) path.
  BeliefParams begin(std::span<const double> state) const;
  BeliefParams update(const BeliefParams& prev, std::span<const double> prev_action,
                      double prev_reward, std::span<const double> state) const;

  // One BeliefParams per step 0..t for a prefix of t transitions. Step h
  // conditions only on transitions < h and the state observed at h.
  std::vector<BeliefParams> encode(const Trajectory& prefix) const;
  std::vector<BeliefParams> encode_from(std::span<const double> s0,
                                        const Trajectory& prefix) const;

  struct TapeStep {
    net::Tape::Var mu;
    net::Tape::Var logvar;
  };
  // Tape path over steps 0..t_last (inclusive); used by training.
  std::vector<TapeStep> encode_tape(net::Tape& tape, const Trajectory& prefix,
                                    std::size_t t_last) const;

  LatentSample sample(const BeliefParams& bp, Rng& rng) const;

  void save(const std::string& path, double kl_weight) const;
  static Encoder load(const std::string& path);

 private:
  BeliefParams step_plain(const Vec& hidden, std::span<const double> prev_action,
                          double prev_reward, std::span<const double> state) const;

  EncoderConfig cfg_;
  net::ParamStore params_;
};

// Closed-form KL between diagonal Gaussians given as BeliefParams.
double kl_gaussian(const BeliefParams& q, const BeliefParams& p);

}  // namespace rtplan::belief
