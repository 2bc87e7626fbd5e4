#include "rtplan/net/tensor.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

namespace rtplan::net {

Tensor& ParamStore::add(const std::string& name, std::vector<std::size_t> shape) {
  if (contains(name)) throw std::invalid_argument("ParamStore: duplicate tensor " + name);
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  names_.push_back(name);
  Tensor& t = tensors_[name];
  t.shape = std::move(shape);
  t.data.assign(n, 0.0);
  return t;
}

Tensor& ParamStore::at(const std::string& name) {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw std::invalid_argument("ParamStore: unknown tensor " + name);
  return it->second;
}

const Tensor& ParamStore::at(const std::string& name) const {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw std::invalid_argument("ParamStore: unknown tensor " + name);
  return it->second;
}

std::size_t ParamStore::parameter_count() const {
  std::size_t n = 0;
  for (const auto& name : names_) n += at(name).size();
  return n;
}

Vec ParamStore::flatten() const {
  Vec out;
  out.reserve(parameter_count());
  for (const auto& name : names_) {
    const Vec& d = at(name).data;
    out.insert(out.end(), d.begin(), d.end());
  }
  return out;
}

void ParamStore::unflatten(std::span<const double> flat) {
  if (flat.size() != parameter_count())
    throw std::invalid_argument("ParamStore::unflatten: size mismatch");
  std::size_t off = 0;
  for (const auto& name : names_) {
    Vec& d = at(name).data;
    std::copy(flat.begin() + off, flat.begin() + off + d.size(), d.begin());
    off += d.size();
  }
}

std::uint64_t ParamStore::checksum() const {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](const void* p, std::size_t n) {
    const unsigned char* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 1099511628211ULL;
    }
  };
  for (const auto& name : names_) {
    mix(name.data(), name.size());
    const Vec& d = at(name).data;
    mix(d.data(), d.size() * sizeof(double));
  }
  return h;
}

void ParamStore::init_fan_in(Rng& rng) {
  for (const auto& name : names_) {
    Tensor& t = at(name);
    if (t.shape.size() >= 2) {
      double bound = 1.0 / std::sqrt(static_cast<double>(t.shape.back()));
      for (double& x : t.data) x = rng.uniform(-bound, bound);
    } else {
      for (double& x : t.data) x = 0.0;
    }
  }
}

Gradients::Gradients(const ParamStore& ps) : names_(ps.names()) {
  for (const auto& name : names_) grads_[name] = Vec(ps.at(name).size(), 0.0);
}

void Gradients::zero() {
  for (auto& [k, v] : grads_) std::fill(v.begin(), v.end(), 0.0);
}

void Gradients::scale(double c) {
  for (auto& [k, v] : grads_)
    for (double& x : v) x *= c;
}

void Gradients::add(const Gradients& other) {
  for (const auto& name : names_) {
    const Vec& src = other.at(name);
    Vec& dst = grads_.at(name);
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
  }
}

}  // namespace rtplan::net
