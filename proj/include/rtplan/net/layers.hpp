#pragma once

#include <string>
#include <vector>

#include "rtplan/net/tape.hpp"
#include "rtplan/net/tensor.hpp"

namespace rtplan::net {

// Log-variance clamp shared by every Gaussian output head.
constexpr double kLogVarMin = -10.0;
constexpr double kLogVarMax = 2.0;

inline double clamp_logvar(double lv) {
  return lv < kLogVarMin ? kLogVarMin : (lv > kLogVarMax ? kLogVarMax : lv);
}

struct MlpConfig {
  std::size_t input_dim = 0;
  std::vector<std::size_t> hidden;  // ReLU after each hidden layer
  std::size_t output_dim = 0;
  bool gaussian_head = false;  // final layer emits (mean, logvar)
  bool input_skip = false;     // concat raw input onto every hidden layer input
  bool tanh_mean = false;      // squash mean through tanh (policy head)
};

struct GaussianVars {
  Tape::Var mean;
  Tape::Var logvar;
};

// Feed-forward net owning its parameters, with a tape path for training and
// an allocation-light plain path for rollouts. Both paths share the same
// weights and produce identical values.
class Mlp {
 public:
  Mlp() = default;
  explicit Mlp(MlpConfig cfg, Rng* init_rng = nullptr);

  const MlpConfig& config() const { return cfg_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

  Tape::Var forward_tape(Tape& tape, Tape::Var input) const;      // plain output
  GaussianVars forward_gauss_tape(Tape& tape, Tape::Var input) const;

  void forward(std::span<const double> input, Vec& out) const;
  void forward_gauss(std::span<const double> input, Vec& mean, Vec& logvar) const;

  // Re-resolves cached tensor pointers (call after params() was rebuilt).
  void rebind();

 private:
  Tape::Var body_tape(Tape& tape, Tape::Var input) const;
  void body(std::span<const double> input, Vec& h) const;

  MlpConfig cfg_;
  ParamStore params_;
  std::vector<const Tensor*> ws_, bs_;  // cached per-layer tensors (incl. head)
  std::vector<std::size_t> in_dims_;    // effective input width per layer
};

// Standard GRU cell over an external ParamStore:
//   z = sig(Wz x + Uz h + bz), r = sig(Wr x + Ur h + br)
//   hcand = tanh(Wh x + Uh (r*h) + bh), h' = (1-z)*h + z*hcand
void add_gru_params(ParamStore& ps, const std::string& prefix, std::size_t input_dim,
                    std::size_t hidden_dim);
Tape::Var gru_step_tape(Tape& tape, ParamStore& ps, const std::string& prefix, Tape::Var x,
                        Tape::Var h);
void gru_step(const ParamStore& ps, const std::string& prefix, std::span<const double> x,
              std::span<const double> h, Vec& h_new);

}  // namespace rtplan::net
