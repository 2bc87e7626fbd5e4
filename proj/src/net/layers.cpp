#include "rtplan/net/layers.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rtplan::net {

namespace {

std::string layer_name(std::size_t i) { return "l" + std::to_string(i); }

void affine_plain(const Tensor& w, const Tensor& b, const double* x, double* out) {
  const std::size_t rows = w.shape[0];
  const std::size_t cols = w.shape[1];
  for (std::size_t r = 0; r < rows; ++r) {
    double acc = b.data[r];
    const double* wr = w.data.data() + r * cols;
    for (std::size_t c = 0; c < cols; ++c) acc += wr[c] * x[c];
    out[r] = acc;
  }
}

}  // namespace

Mlp::Mlp(MlpConfig cfg, Rng* init_rng) : cfg_(std::move(cfg)) {
  std::size_t prev = cfg_.input_dim;
  for (std::size_t i = 0; i < cfg_.hidden.size(); ++i) {
    std::size_t in = (i == 0 || !cfg_.input_skip) ? prev : prev + cfg_.input_dim;
    params_.add(layer_name(i) + ".w", {cfg_.hidden[i], in});
    params_.add(layer_name(i) + ".b", {cfg_.hidden[i]});
    prev = cfg_.hidden[i];
  }
  std::size_t head_out = cfg_.gaussian_head ? 2 * cfg_.output_dim : cfg_.output_dim;
  params_.add("head.w", {head_out, prev});
  params_.add("head.b", {head_out});
  if (init_rng) params_.init_fan_in(*init_rng);
  rebind();
}

void Mlp::rebind() {
  ws_.clear();
  bs_.clear();
  in_dims_.clear();
  for (std::size_t i = 0; i < cfg_.hidden.size(); ++i) {
    ws_.push_back(&params_.at(layer_name(i) + ".w"));
    bs_.push_back(&params_.at(layer_name(i) + ".b"));
    in_dims_.push_back(ws_.back()->shape[1]);
  }
  ws_.push_back(&params_.at("head.w"));
  bs_.push_back(&params_.at("head.b"));
  in_dims_.push_back(ws_.back()->shape[1]);
}

Tape::Var Mlp::body_tape(Tape& tape, Tape::Var input) const {
  auto& ps = const_cast<ParamStore&>(params_);
  Tape::Var h = input;
  for (std::size_t i = 0; i < cfg_.hidden.size(); ++i) {
    Tape::Var in = (i == 0 || !cfg_.input_skip) ? h : tape.concat({h, input});
    Tape::Var w = tape.param(ps, layer_name(i) + ".w");
    Tape::Var b = tape.param(ps, layer_name(i) + ".b");
    h = tape.relu_f(tape.affine(w, b, in, cfg_.hidden[i], in_dims_[i]));
  }
  Tape::Var w = tape.param(ps, "head.w");
  Tape::Var b = tape.param(ps, "head.b");
  std::size_t head_out = cfg_.gaussian_head ? 2 * cfg_.output_dim : cfg_.output_dim;
  return tape.affine(w, b, h, head_out, in_dims_.back());
}

Tape::Var Mlp::forward_tape(Tape& tape, Tape::Var input) const {
  if (cfg_.gaussian_head) throw std::logic_error("Mlp::forward_tape: gaussian head present");
  Tape::Var out = body_tape(tape, input);
  return cfg_.tanh_mean ? tape.tanh_f(out) : out;
}

GaussianVars Mlp::forward_gauss_tape(Tape& tape, Tape::Var input) const {
  if (!cfg_.gaussian_head) throw std::logic_error("Mlp::forward_gauss_tape: no gaussian head");
  Tape::Var out = body_tape(tape, input);
  Tape::Var mean = tape.slice(out, 0, cfg_.output_dim);
  if (cfg_.tanh_mean) mean = tape.tanh_f(mean);
  Tape::Var logvar = tape.clamp_f(tape.slice(out, cfg_.output_dim, cfg_.output_dim),
                                  kLogVarMin, kLogVarMax);
  return {mean, logvar};
}

void Mlp::body(std::span<const double> input, Vec& out) const {
  if (input.size() != cfg_.input_dim) throw std::invalid_argument("Mlp: input dim mismatch");
  thread_local Vec buf_a, buf_b;
  const double* cur = input.data();
  std::size_t cur_len = input.size();
  Vec* next = &buf_a;
  for (std::size_t i = 0; i < cfg_.hidden.size(); ++i) {
    const double* x = cur;
    thread_local Vec skip_buf;
    if (i > 0 && cfg_.input_skip) {
      skip_buf.resize(cur_len + input.size());
      std::copy(cur, cur + cur_len, skip_buf.begin());
      std::copy(input.begin(), input.end(), skip_buf.begin() + cur_len);
      x = skip_buf.data();
    }
    next->resize(cfg_.hidden[i]);
    affine_plain(*ws_[i], *bs_[i], x, next->data());
    for (double& v : *next) v = std::max(v, 0.0);
    cur = next->data();
    cur_len = next->size();
    next = (next == &buf_a) ? &buf_b : &buf_a;
  }
  std::size_t head_out = cfg_.gaussian_head ? 2 * cfg_.output_dim : cfg_.output_dim;
  out.resize(head_out);
  affine_plain(*ws_.back(), *bs_.back(), cur, out.data());
}

void Mlp::forward(std::span<const double> input, Vec& out) const {
  if (cfg_.gaussian_head) throw std::logic_error("Mlp::forward: gaussian head present");
  body(input, out);
  if (cfg_.tanh_mean)
    for (double& v : out) v = std::tanh(v);
}

void Mlp::forward_gauss(std::span<const double> input, Vec& mean, Vec& logvar) const {
  if (!cfg_.gaussian_head) throw std::logic_error("Mlp::forward_gauss: no gaussian head");
  thread_local Vec raw;
  body(input, raw);
  mean.assign(raw.begin(), raw.begin() + cfg_.output_dim);
  if (cfg_.tanh_mean)
    for (double& v : mean) v = std::tanh(v);
  logvar.resize(cfg_.output_dim);
  for (std::size_t i = 0; i < cfg_.output_dim; ++i)
    logvar[i] = clamp_logvar(raw[cfg_.output_dim + i]);
}

void add_gru_params(ParamStore& ps, const std::string& prefix, std::size_t input_dim,
                    std::size_t hidden_dim) {
  for (const char* gate : {"z", "r", "h"}) {
    ps.add(prefix + ".w" + gate, {hidden_dim, input_dim});
    ps.add(prefix + ".u" + gate, {hidden_dim, hidden_dim});
    ps.add(prefix + ".b" + gate, {hidden_dim});
  }
}

Tape::Var gru_step_tape(Tape& tape, ParamStore& ps, const std::string& prefix, Tape::Var x,
                        Tape::Var h) {
  std::size_t in = tape.size(x);
  std::size_t hd = tape.size(h);
  auto gate = [&](const char* g, Tape::Var hin) {
    Tape::Var wx = tape.affine(tape.param(ps, prefix + ".w" + g),
                               tape.param(ps, prefix + ".b" + g), x, hd, in);
    Tape::Var zero = tape.constant(Vec(hd, 0.0));
    Tape::Var uh = tape.affine(tape.param(ps, prefix + ".u" + g), zero, hin, hd, hd);
    return tape.add(wx, uh);
  };
  Tape::Var z = tape.sigmoid_f(gate("z", h));
  Tape::Var r = tape.sigmoid_f(gate("r", h));
  Tape::Var rh = tape.mul(r, h);
  Tape::Var cand = tape.tanh_f(gate("h", rh));
  // h' = (1-z)*h + z*cand = h - z*h + z*cand
  Tape::Var zh = tape.mul(z, h);
  Tape::Var zc = tape.mul(z, cand);
  return tape.add(tape.sub(h, zh), zc);
}

void gru_step(const ParamStore& ps, const std::string& prefix, std::span<const double> x,
              std::span<const double> h, Vec& h_new) {
  const std::size_t hd = h.size();
  thread_local Vec z, r, cand, rh;
  auto sig = [](double v) {
    return v >= 0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
  };
  // Summation order mirrors the tape path (wx+b, then uh, then add) so both
  // paths agree bitwise.
  auto gate = [&](const char* g, std::span<const double> hin, Vec& out) {
    const Tensor& w = ps.at(prefix + ".w" + g);
    const Tensor& u = ps.at(prefix + ".u" + g);
    const Tensor& b = ps.at(prefix + ".b" + g);
    out.resize(hd);
    for (std::size_t i = 0; i < hd; ++i) {
      double wx = b.data[i];
      const double* wr = w.data.data() + i * x.size();
      for (std::size_t c = 0; c < x.size(); ++c) wx += wr[c] * x[c];
      double uh = 0.0;
      const double* ur = u.data.data() + i * hd;
      for (std::size_t c = 0; c < hd; ++c) uh += ur[c] * hin[c];
      out[i] = wx + uh;
    }
  };
  gate("z", h, z);
  gate("r", h, r);
  rh.resize(hd);
  for (std::size_t i = 0; i < hd; ++i) {
    z[i] = sig(z[i]);
    r[i] = sig(r[i]);
    rh[i] = r[i] * h[i];
  }
  gate("h", rh, cand);
  h_new.resize(hd);
  for (std::size_t i = 0; i < hd; ++i) {
    double c = std::tanh(cand[i]);
    h_new[i] = (h[i] - z[i] * h[i]) + z[i] * c;
  }
}

}  // namespace rtplan::net
