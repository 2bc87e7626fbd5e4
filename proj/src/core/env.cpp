#include "rtplan/core/env.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace rtplan {

namespace {
double clip1(double x) { return std::clamp(x, -1.0, 1.0); }
}  // namespace

std::vector<double> PointMass2D::sample_initial(Rng& rng) const {
  double w = p_.init_half_width;
  return {rng.uniform(-w, w), rng.uniform(-w, w), 0.0, 0.0};
}

StepResult PointMass2D::step(std::span<const double> s, std::span<const double> a,
                             Rng&) const {
  double ax = clip1(a[0]);
  double ay = clip1(a[1]);
  double dx = s[0] - p_.goal_x;
  double dy = s[1] - p_.goal_y;
  double reward = -(dx * dx + dy * dy) - 0.01 * (ax * ax + ay * ay);

  double vx = (1.0 - p_.drag) * s[2] + kDt * ax + kDt * p_.wind_x;
  double vy = (1.0 - p_.drag) * s[3] + kDt * ay + kDt * p_.wind_y;
  StepResult out;
  out.next_state = {s[0] + kDt * vx, s[1] + kDt * vy, vx, vy};
  out.reward = reward;
  out.done = false;
  return out;
}

std::vector<double> PdPolicy::act(std::span<const double> s, Rng& rng) const {
  double ax = kp_ * (gx_ - s[0]) - kd_ * s[2];
  double ay = kp_ * (gy_ - s[1]) - kd_ * s[3];
  if (noise_ > 0.0) {
    ax += rng.normal(0.0, noise_);
    ay += rng.normal(0.0, noise_);
  }
  return {clip1(ax), clip1(ay)};
}

std::string PdPolicy::id() const {
  std::ostringstream os;
  os << "pd(kp=" << kp_ << ",kd=" << kd_ << ",sigma=" << noise_ << ")";
  return os.str();
}

}  // namespace rtplan
