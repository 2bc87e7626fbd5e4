#pragma once

#include <cstdint>
#include <functional>

#include "rtplan/net/tensor.hpp"

namespace rtplan::net {

// Scalar objective over a parameter store. When `grads` is non-null the
// callee must also accumulate d(loss)/d(params) into it (typically via a
// tape backward pass).
using LossFn = std::function<double(ParamStore& ps, Gradients* grads)>;

// Compares analytic gradients against central differences with step eps.
// All coordinates are checked unless the store exceeds max_coords, in which
// case a seeded subsample of max_coords coordinates is used. Returns the
// maximum per-coordinate relative error |a - fd| / max(1e-4, |a| + |fd|).
double gradcheck(const LossFn& f, ParamStore& ps, double eps, std::size_t max_coords = 200,
                 std::uint64_t seed = 0);

}  // namespace rtplan::net
