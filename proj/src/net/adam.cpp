#include "rtplan/net/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace rtplan::net {

AdamW::AdamW(const ParamStore& ps, AdamConfig cfg) : cfg_(cfg) {
  m_.assign(ps.parameter_count(), 0.0);
  v_.assign(ps.parameter_count(), 0.0);
}

void AdamW::step(ParamStore& ps, const Gradients& grads) {
  if (m_.size() != ps.parameter_count())
    throw std::invalid_argument("AdamW::step: state/param size mismatch");
  ++t_;
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  const double decay = 1.0 - cfg_.lr * cfg_.weight_decay;

  std::size_t off = 0;
  for (const auto& name : ps.names()) {
    Vec& p = ps.at(name).data;
    const Vec& g = grads.at(name);
    for (std::size_t i = 0; i < p.size(); ++i, ++off) {
      double gi = g[i];
      m_[off] = cfg_.beta1 * m_[off] + (1.0 - cfg_.beta1) * gi;
      v_[off] = cfg_.beta2 * v_[off] + (1.0 - cfg_.beta2) * gi * gi;
      double mhat = m_[off] / c1;
      double vhat = v_[off] / c2;
      p[i] = p[i] * decay - cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
  }
}

}  // namespace rtplan::net
