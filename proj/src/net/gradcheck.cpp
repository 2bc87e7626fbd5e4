#include "rtplan/net/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "rtplan/rng.hpp"

namespace rtplan::net {

double gradcheck(const LossFn& f, ParamStore& ps, double eps, std::size_t max_coords,
                 std::uint64_t seed) {
  if (eps <= 0.0) throw std::invalid_argument("gradcheck: eps must be positive");

  Gradients analytic(ps);
  f(ps, &analytic);
  Vec ga;
  ga.reserve(ps.parameter_count());
  for (const auto& name : ps.names()) {
    const Vec& g = analytic.at(name);
    ga.insert(ga.end(), g.begin(), g.end());
  }

  const std::size_t n = ps.parameter_count();
  std::vector<std::size_t> coords(n);
  std::iota(coords.begin(), coords.end(), 0);
  if (n > max_coords) {
    Rng rng(seed);
    rng.shuffle(coords);
    coords.resize(max_coords);
  }

  Vec flat = ps.flatten();
  double max_rel = 0.0;
  for (std::size_t c : coords) {
    double orig = flat[c];
    flat[c] = orig + eps;
    ps.unflatten(flat);
    double fp = f(ps, nullptr);
    flat[c] = orig - eps;
    ps.unflatten(flat);
    double fm = f(ps, nullptr);
    flat[c] = orig;
    double fd = (fp - fm) / (2.0 * eps);
    double rel = std::abs(ga[c] - fd) / std::max(1e-4, std::abs(ga[c]) + std::abs(fd));
    max_rel = std::max(max_rel, rel);
  }
  ps.unflatten(flat);
  return max_rel;
}

}  // namespace rtplan::net
