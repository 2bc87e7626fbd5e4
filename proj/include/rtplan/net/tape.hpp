#pragma once

#include <string>
#include <vector>

#include "rtplan/net/tensor.hpp"

namespace rtplan::net {

// Reverse-mode tape over vector-valued nodes. Covers exactly the primitives
// this project composes: affine maps, pointwise nonlinearities, concat/slice,
// reductions, diagonal-Gaussian log-density and KL. Parameters are bound
// once per tape, so reuse across time steps accumulates gradients naturally.
class Tape {
 public:
  struct Var {
    int id = -1;
    bool valid() const { return id >= 0; }
  };

  void reserve(std::size_t n) { nodes_.reserve(n); }

  Var constant(Vec v);
  Var param(ParamStore& ps, const std::string& name);

  const Vec& val(Var v) const { return nodes_[v.id].value; }
  const Vec& grad(Var v) const { return nodes_[v.id].grad; }
  std::size_t size(Var v) const { return nodes_[v.id].value.size(); }

  // y = W x + b with W row-major (rows, cols) and b length rows.
  Var affine(Var w, Var b, Var x, std::size_t rows, std::size_t cols);

  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var scale(Var a, double c);
  Var add_scalar(Var a, double c);
  Var lincomb(Var a, double ca, Var b, double cb);
  Var mul_const(Var a, Vec c);
  Var add_const(Var a, Vec c);

  Var concat(const std::vector<Var>& parts);
  Var slice(Var a, std::size_t offset, std::size_t len);

  Var tanh_f(Var a);
  Var sigmoid_f(Var a);
  Var relu_f(Var a);
  Var softplus_f(Var a);
  Var exp_f(Var a);
  Var square_f(Var a);
  Var clamp_f(Var a, double lo, double hi);

  Var sum(Var a);
  Var mean_f(Var a);
  Var dot_const(Var a, Vec c);

  // Scalar log N(x | mean, diag exp(logvar)), summed over dimensions.
  Var gauss_logpdf(Var mean, Var logvar, Vec x);

  // Scalar KL(N(mu_q, exp(lv_q)) || N(mu_p, exp(lv_p))) with a constant prior.
  Var kl_to_const(Var mu_q, Var lv_q, Vec mu_p, Vec lv_p);

  // Backpropagates from a scalar loss node. Throws if loss is not scalar.
  void backward(Var loss);

  // Accumulates gradients of leaves bound to `ps` into `out`.
  void add_param_grads(const ParamStore& ps, Gradients& out) const;

 private:
  enum class Op {
    kLeaf,
    kAffine,
    kAdd,
    kSub,
    kMul,
    kScale,
    kLincomb,
    kMulConst,
    kConcat,
    kSlice,
    kTanh,
    kSigmoid,
    kRelu,
    kSoftplus,
    kExp,
    kSquare,
    kClamp,
    kSum,
    kDotConst,
    kGaussLogPdf,
    kKlToConst,
  };

  struct Node {
    Op op = Op::kLeaf;
    Vec value;
    Vec grad;
    std::vector<int> parents;
    double s0 = 0.0, s1 = 0.0;
    Vec aux;   // constant payload (dot weights, logpdf target, prior params)
    Vec aux2;  // second constant payload
  };

  struct Binding {
    const ParamStore* store;
    std::string name;
    int var;
  };

  int push(Node n);
  Node& node(Var v) { return nodes_[v.id]; }

  std::vector<Node> nodes_;
  std::vector<Binding> bindings_;
};

}  // namespace rtplan::net
