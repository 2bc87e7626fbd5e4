#pragma once

#include <cstdint>
#include <vector>

#include "rtplan/net/tensor.hpp"

namespace rtplan::net {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
};

// Adam with bias correction and decoupled (multiplicative) weight decay.
class AdamW {
 public:
  AdamW() = default;
  AdamW(const ParamStore& ps, AdamConfig cfg);

  void step(ParamStore& ps, const Gradients& grads);

  const AdamConfig& config() const { return cfg_; }
  std::int64_t steps_taken() const { return t_; }

 private:
  AdamConfig cfg_;
  std::vector<double> m_, v_;
  std::int64_t t_ = 0;
};

}  // namespace rtplan::net
