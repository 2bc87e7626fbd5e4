#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "rtplan/rng.hpp"

namespace rtplan::net {

using Vec = std::vector<double>;

struct Tensor {
  std::vector<std::size_t> shape;
  Vec data;

  std::size_t size() const { return data.size(); }
};

// Named parameter tensors with a stable iteration order.
class ParamStore {
 public:
  Tensor& add(const std::string& name, std::vector<std::size_t> shape);
  Tensor& at(const std::string& name);
  const Tensor& at(const std::string& name) const;
  bool contains(const std::string& name) const { return tensors_.count(name) > 0; }

  const std::vector<std::string>& names() const { return names_; }
  std::size_t parameter_count() const;

  Vec flatten() const;
  void unflatten(std::span<const double> flat);

  // FNV-1a over the raw bytes of all tensors in name order.
  std::uint64_t checksum() const;

  // Uniform fan-in initialization: U(-1/sqrt(fan_in), 1/sqrt(fan_in)) for
  // matrices, zeros for vectors (biases).
  void init_fan_in(Rng& rng);

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, Tensor> tensors_;
};

// Per-tensor gradient buffers aligned with a ParamStore.
class Gradients {
 public:
  Gradients() = default;
  explicit Gradients(const ParamStore& ps);

  Vec& at(const std::string& name) { return grads_.at(name); }
  const Vec& at(const std::string& name) const { return grads_.at(name); }
  bool contains(const std::string& name) const { return grads_.count(name) > 0; }
  const std::vector<std::string>& names() const { return names_; }

  void zero();
  void scale(double c);
  void add(const Gradients& other);  // elementwise accumulate

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, Vec> grads_;
};

}  // namespace rtplan::net
