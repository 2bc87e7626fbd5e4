#include "rtplan/net/tape.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rtplan::net {

namespace {
constexpr double kLog2Pi = 1.8378770664093454835606594728112;

double sigmoid(double x) { return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); }
double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }
}  // namespace

int Tape::push(Node n) {
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

Tape::Var Tape::constant(Vec v) {
  Node n;
  n.op = Op::kLeaf;
  n.value = std::move(v);
  return {push(std::move(n))};
}

Tape::Var Tape::param(ParamStore& ps, const std::string& name) {
  for (const auto& b : bindings_)
    if (b.store == &ps && b.name == name) return {b.var};
  Node n;
  n.op = Op::kLeaf;
  n.value = ps.at(name).data;
  int id = push(std::move(n));
  bindings_.push_back({&ps, name, id});
  return {id};
}

Tape::Var Tape::affine(Var w, Var b, Var x, std::size_t rows, std::size_t cols) {
  const Vec& wv = val(w);
  const Vec& bv = val(b);
  const Vec& xv = val(x);
  if (wv.size() != rows * cols || bv.size() != rows || xv.size() != cols)
    throw std::invalid_argument("Tape::affine: shape mismatch");
  Node n;
  n.op = Op::kAffine;
  n.parents = {w.id, b.id, x.id};
  n.s0 = static_cast<double>(rows);
  n.s1 = static_cast<double>(cols);
  n.value.assign(rows, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    double acc = bv[r];
    const double* wr = wv.data() + r * cols;
    for (std::size_t c = 0; c < cols; ++c) acc += wr[c] * xv[c];
    n.value[r] = acc;
  }
  return {push(std::move(n))};
}

Tape::Var Tape::add(Var a, Var b) {
  if (size(a) != size(b)) throw std::invalid_argument("Tape::add: size mismatch");
  Node n;
  n.op = Op::kAdd;
  n.parents = {a.id, b.id};
  n.value = val(a);
  const Vec& bv = val(b);
  for (std::size_t i = 0; i < n.value.size(); ++i) n.value[i] += bv[i];
  return {push(std::move(n))};
}

Tape::Var Tape::sub(Var a, Var b) {
  if (size(a) != size(b)) throw std::invalid_argument("Tape::sub: size mismatch");
  Node n;
  n.op = Op::kSub;
  n.parents = {a.id, b.id};
  n.value = val(a);
  const Vec& bv = val(b);
  for (std::size_t i = 0; i < n.value.size(); ++i) n.value[i] -= bv[i];
  return {push(std::move(n))};
}

Tape::Var Tape::mul(Var a, Var b) {
  if (size(a) != size(b)) throw std::invalid_argument("Tape::mul: size mismatch");
  Node n;
  n.op = Op::kMul;
  n.parents = {a.id, b.id};
  n.value = val(a);
  const Vec& bv = val(b);
  for (std::size_t i = 0; i < n.value.size(); ++i) n.value[i] *= bv[i];
  return {push(std::move(n))};
}

Tape::Var Tape::scale(Var a, double c) {
  Node n;
  n.op = Op::kScale;
  n.parents = {a.id};
  n.s0 = c;
  n.value = val(a);
  for (double& x : n.value) x *= c;
  return {push(std::move(n))};
}

Tape::Var Tape::add_scalar(Var a, double c) {
  Node n;
  n.op = Op::kScale;  // gradient identical to scale with c=1
  n.parents = {a.id};
  n.s0 = 1.0;
  n.value = val(a);
  for (double& x : n.value) x += c;
  return {push(std::move(n))};
}

Tape::Var Tape::lincomb(Var a, double ca, Var b, double cb) {
  if (size(a) != size(b)) throw std::invalid_argument("Tape::lincomb: size mismatch");
  Node n;
  n.op = Op::kLincomb;
  n.parents = {a.id, b.id};
  n.s0 = ca;
  n.s1 = cb;
  n.value.assign(size(a), 0.0);
  const Vec& av = val(a);
  const Vec& bv = val(b);
  for (std::size_t i = 0; i < n.value.size(); ++i) n.value[i] = ca * av[i] + cb * bv[i];
  return {push(std::move(n))};
}

Tape::Var Tape::mul_const(Var a, Vec c) {
  if (size(a) != c.size()) throw std::invalid_argument("Tape::mul_const: size mismatch");
  Node n;
  n.op = Op::kMulConst;
  n.parents = {a.id};
  n.aux = std::move(c);
  n.value = val(a);
  for (std::size_t i = 0; i < n.value.size(); ++i) n.value[i] *= n.aux[i];
  return {push(std::move(n))};
}

Tape::Var Tape::add_const(Var a, Vec c) {
  if (size(a) != c.size()) throw std::invalid_argument("Tape::add_const: size mismatch");
  Node n;
  n.op = Op::kScale;
  n.parents = {a.id};
  n.s0 = 1.0;
  n.value = val(a);
  for (std::size_t i = 0; i < n.value.size(); ++i) n.value[i] += c[i];
  return {push(std::move(n))};
}

Tape::Var Tape::concat(const std::vector<Var>& parts) {
  Node n;
  n.op = Op::kConcat;
  for (Var p : parts) {
    n.parents.push_back(p.id);
    const Vec& v = val(p);
    n.value.insert(n.value.end(), v.begin(), v.end());
  }
  return {push(std::move(n))};
}

Tape::Var Tape::slice(Var a, std::size_t offset, std::size_t len) {
  if (offset + len > size(a)) throw std::invalid_argument("Tape::slice: out of range");
  Node n;
  n.op = Op::kSlice;
  n.parents = {a.id};
  n.s0 = static_cast<double>(offset);
  const Vec& av = val(a);
  n.value.assign(av.begin() + offset, av.begin() + offset + len);
  return {push(std::move(n))};
}

Tape::Var Tape::tanh_f(Var a) {
  Node n;
  n.op = Op::kTanh;
  n.parents = {a.id};
  n.value = val(a);
  for (double& x : n.value) x = std::tanh(x);
  return {push(std::move(n))};
}

Tape::Var Tape::sigmoid_f(Var a) {
  Node n;
  n.op = Op::kSigmoid;
  n.parents = {a.id};
  n.value = val(a);
  for (double& x : n.value) x = sigmoid(x);
  return {push(std::move(n))};
}

Tape::Var Tape::relu_f(Var a) {
  Node n;
  n.op = Op::kRelu;
  n.parents = {a.id};
  n.value = val(a);
  for (double& x : n.value) x = std::max(x, 0.0);
  return {push(std::move(n))};
}

Tape::Var Tape::softplus_f(Var a) {
  Node n;
  n.op = Op::kSoftplus;
  n.parents = {a.id};
  n.value = val(a);
  for (double& x : n.value) x = softplus(x);
  return {push(std::move(n))};
}

Tape::Var Tape::exp_f(Var a) {
  Node n;
  n.op = Op::kExp;
  n.parents = {a.id};
  n.value = val(a);
  for (double& x : n.value) x = std::exp(x);
  return {push(std::move(n))};
}

Tape::Var Tape::square_f(Var a) {
  Node n;
  n.op = Op::kSquare;
  n.parents = {a.id};
  n.value = val(a);
  for (double& x : n.value) x = x * x;
  return {push(std::move(n))};
}

Tape::Var Tape::clamp_f(Var a, double lo, double hi) {
  Node n;
  n.op = Op::kClamp;
  n.parents = {a.id};
  n.s0 = lo;
  n.s1 = hi;
  n.value = val(a);
  for (double& x : n.value) x = std::clamp(x, lo, hi);
  return {push(std::move(n))};
}

Tape::Var Tape::sum(Var a) {
  Node n;
  n.op = Op::kSum;
  n.parents = {a.id};
  n.s0 = 1.0;
  double acc = 0.0;
  for (double x : val(a)) acc += x;
  n.value = {acc};
  return {push(std::move(n))};
}

Tape::Var Tape::mean_f(Var a) {
  Node n;
  n.op = Op::kSum;
  n.parents = {a.id};
  n.s0 = 1.0 / static_cast<double>(size(a));
  double acc = 0.0;
  for (double x : val(a)) acc += x;
  n.value = {acc * n.s0};
  return {push(std::move(n))};
}

Tape::Var Tape::dot_const(Var a, Vec c) {
  if (size(a) != c.size()) throw std::invalid_argument("Tape::dot_const: size mismatch");
  Node n;
  n.op = Op::kDotConst;
  n.parents = {a.id};
  n.aux = std::move(c);
  double acc = 0.0;
  const Vec& av = val(a);
  for (std::size_t i = 0; i < av.size(); ++i) acc += av[i] * n.aux[i];
  n.value = {acc};
  return {push(std::move(n))};
}

Tape::Var Tape::gauss_logpdf(Var mean, Var logvar, Vec x) {
  if (size(mean) != x.size() || size(logvar) != x.size())
    throw std::invalid_argument("Tape::gauss_logpdf: size mismatch");
  Node n;
  n.op = Op::kGaussLogPdf;
  n.parents = {mean.id, logvar.id};
  n.aux = std::move(x);
  const Vec& mu = val(mean);
  const Vec& lv = val(logvar);
  double acc = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    double d = n.aux[i] - mu[i];
    acc += -0.5 * kLog2Pi - 0.5 * lv[i] - 0.5 * d * d * std::exp(-lv[i]);
  }
  n.value = {acc};
  return {push(std::move(n))};
}

Tape::Var Tape::kl_to_const(Var mu_q, Var lv_q, Vec mu_p, Vec lv_p) {
  if (size(mu_q) != mu_p.size() || size(lv_q) != lv_p.size() || mu_p.size() != lv_p.size())
    throw std::invalid_argument("Tape::kl_to_const: size mismatch");
  Node n;
  n.op = Op::kKlToConst;
  n.parents = {mu_q.id, lv_q.id};
  n.aux = std::move(mu_p);
  n.aux2 = std::move(lv_p);
  const Vec& mq = val(mu_q);
  const Vec& lq = val(lv_q);
  double acc = 0.0;
  for (std::size_t i = 0; i < mq.size(); ++i) {
    double dm = mq[i] - n.aux[i];
    acc += 0.5 * (n.aux2[i] - lq[i] + std::exp(lq[i] - n.aux2[i]) +
                  dm * dm * std::exp(-n.aux2[i]) - 1.0);
  }
  n.value = {acc};
  return {push(std::move(n))};
}

void Tape::backward(Var loss) {
  if (!loss.valid() || nodes_[loss.id].value.size() != 1)
    throw std::invalid_argument("Tape::backward: loss must be a scalar node");
  for (auto& n : nodes_) n.grad.assign(n.value.size(), 0.0);
  nodes_[loss.id].grad[0] = 1.0;

  for (int id = loss.id; id >= 0; --id) {
    Node& n = nodes_[id];
    bool any = false;
    for (double g : n.grad)
      if (g != 0.0) {
        any = true;
        break;
      }
    if (!any || n.op == Op::kLeaf) continue;

    switch (n.op) {
      case Op::kAffine: {
        auto rows = static_cast<std::size_t>(n.s0);
        auto cols = static_cast<std::size_t>(n.s1);
        Node& w = nodes_[n.parents[0]];
        Node& b = nodes_[n.parents[1]];
        Node& x = nodes_[n.parents[2]];
        for (std::size_t r = 0; r < rows; ++r) {
          double g = n.grad[r];
          if (g == 0.0) continue;
          b.grad[r] += g;
          double* wgr = w.grad.data() + r * cols;
          const double* wr = w.value.data() + r * cols;
          for (std::size_t c = 0; c < cols; ++c) {
            wgr[c] += g * x.value[c];
            x.grad[c] += g * wr[c];
          }
        }
        break;
      }
      case Op::kAdd: {
        Node& a = nodes_[n.parents[0]];
        Node& b = nodes_[n.parents[1]];
        for (std::size_t i = 0; i < n.grad.size(); ++i) {
          a.grad[i] += n.grad[i];
          b.grad[i] += n.grad[i];
        }
        break;
      }
      case Op::kSub: {
        Node& a = nodes_[n.parents[0]];
        Node& b = nodes_[n.parents[1]];
        for (std::size_t i = 0; i < n.grad.size(); ++i) {
          a.grad[i] += n.grad[i];
          b.grad[i] -= n.grad[i];
        }
        break;
      }
      case Op::kMul: {
        Node& a = nodes_[n.parents[0]];
        Node& b = nodes_[n.parents[1]];
        for (std::size_t i = 0; i < n.grad.size(); ++i) {
          a.grad[i] += n.grad[i] * b.value[i];
          b.grad[i] += n.grad[i] * a.value[i];
        }
        break;
      }
      case Op::kScale: {
        Node& a = nodes_[n.parents[0]];
        for (std::size_t i = 0; i < n.grad.size(); ++i) a.grad[i] += n.s0 * n.grad[i];
        break;
      }
      case Op::kLincomb: {
        Node& a = nodes_[n.parents[0]];
        Node& b = nodes_[n.parents[1]];
        for (std::size_t i = 0; i < n.grad.size(); ++i) {
          a.grad[i] += n.s0 * n.grad[i];
          b.grad[i] += n.s1 * n.grad[i];
        }
        break;
      }
      case Op::kMulConst: {
        Node& a = nodes_[n.parents[0]];
        for (std::size_t i = 0; i < n.grad.size(); ++i) a.grad[i] += n.aux[i] * n.grad[i];
        break;
      }
      case Op::kConcat: {
        std::size_t off = 0;
        for (int pid : n.parents) {
          Node& p = nodes_[pid];
          for (std::size_t i = 0; i < p.value.size(); ++i) p.grad[i] += n.grad[off + i];
          off += p.value.size();
        }
        break;
      }
      case Op::kSlice: {
        Node& a = nodes_[n.parents[0]];
        auto off = static_cast<std::size_t>(n.s0);
        for (std::size_t i = 0; i < n.grad.size(); ++i) a.grad[off + i] += n.grad[i];
        break;
      }
      case Op::kTanh: {
        Node& a = nodes_[n.parents[0]];
        for (std::size_t i = 0; i < n.grad.size(); ++i)
          a.grad[i] += n.grad[i] * (1.0 - n.value[i] * n.value[i]);
        break;
      }
      case Op::kSigmoid: {
        Node& a = nodes_[n.parents[0]];
        for (std::size_t i = 0; i < n.grad.size(); ++i)
          a.grad[i] += n.grad[i] * n.value[i] * (1.0 - n.value[i]);
        break;
      }
      case Op::kRelu: {
        Node& a = nodes_[n.parents[0]];
        for (std::size_t i = 0; i < n.grad.size(); ++i)
          if (a.value[i] > 0.0) a.grad[i] += n.grad[i];
        break;
      }
      case Op::kSoftplus: {
        Node& a = nodes_[n.parents[0]];
        for (std::size_t i = 0; i < n.grad.size(); ++i)
          a.grad[i] += n.grad[i] * sigmoid(a.value[i]);
        break;
      }
      case Op::kExp: {
        Node& a = nodes_[n.parents[0]];
        for (std::size_t i = 0; i < n.grad.size(); ++i) a.grad[i] += n.grad[i] * n.value[i];
        break;
      }
      case Op::kSquare: {
        Node& a = nodes_[n.parents[0]];
        for (std::size_t i = 0; i < n.grad.size(); ++i)
          a.grad[i] += n.grad[i] * 2.0 * a.value[i];
        break;
      }
      case Op::kClamp: {
        Node& a = nodes_[n.parents[0]];
        for (std::size_t i = 0; i < n.grad.size(); ++i)
          if (a.value[i] >= n.s0 && a.value[i] <= n.s1) a.grad[i] += n.grad[i];
        break;
      }
      case Op::kSum: {
        Node& a = nodes_[n.parents[0]];
        double g = n.grad[0] * n.s0;
        for (std::size_t i = 0; i < a.grad.size(); ++i) a.grad[i] += g;
        break;
      }
      case Op::kDotConst: {
        Node& a = nodes_[n.parents[0]];
        for (std::size_t i = 0; i < a.grad.size(); ++i) a.grad[i] += n.grad[0] * n.aux[i];
        break;
      }
      case Op::kGaussLogPdf: {
        Node& mu = nodes_[n.parents[0]];
        Node& lv = nodes_[n.parents[1]];
        double g = n.grad[0];
        for (std::size_t i = 0; i < mu.value.size(); ++i) {
          double d = n.aux[i] - mu.value[i];
          double inv = std::exp(-lv.value[i]);
          mu.grad[i] += g * d * inv;
          lv.grad[i] += g * (-0.5 + 0.5 * d * d * inv);
        }
        break;
      }
      case Op::kKlToConst: {
        Node& mq = nodes_[n.parents[0]];
        Node& lq = nodes_[n.parents[1]];
        double g = n.grad[0];
        for (std::size_t i = 0; i < mq.value.size(); ++i) {
          mq.grad[i] += g * (mq.value[i] - n.aux[i]) * std::exp(-n.aux2[i]);
          lq.grad[i] += g * 0.5 * (std::exp(lq.value[i] - n.aux2[i]) - 1.0);
        }
        break;
      }
      case Op::kLeaf:
        break;
    }
  }
}

void Tape::add_param_grads(const ParamStore& ps, Gradients& out) const {
  for (const auto& b : bindings_) {
    if (b.store != &ps) continue;
    const Vec& g = nodes_[b.var].grad;
    if (g.empty()) continue;
    Vec& dst = out.at(b.name);
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += g[i];
  }
}

}  // namespace rtplan::net
