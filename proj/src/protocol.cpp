#include "szc/protocol.hpp"

#include <algorithm>
#include <stdexcept>

namespace szc {

Protocol Protocol::from_knots(std::vector<double> t, std::vector<double> alpha) {
  if (t.size() < 2) throw std::domain_error("Protocol: need at least 2 knots");
  if (t.front() != 0.0) throw std::domain_error("Protocol: first knot time must be 0");
  Protocol p;
  p.spline = CubicSpline(t, alpha);  // validates ordering and finiteness
  p.duration = t.back();
  p.knot_t = std::move(t);
  p.knot_alpha = std::move(alpha);
  return p;
}

Protocol Protocol::linear_ramp(double duration, double alpha_start, double alpha_end) {
  return from_knots({0.0, duration}, {alpha_start, alpha_end});
}

Protocol Protocol::constant(double duration, double alpha) {
  return from_knots({0.0, duration}, {alpha, alpha});
}

Protocol Protocol::reversed() const {
  std::vector<double> t(knot_t.size()), a(knot_alpha.size());
  for (std::size_t i = 0; i < knot_t.size(); ++i) {
    t[i] = duration - knot_t[knot_t.size() - 1 - i];
    a[i] = knot_alpha[knot_alpha.size() - 1 - i];
  }
  t.front() = 0.0;
  return from_knots(std::move(t), std::move(a));
}

Protocol Protocol::resampled(int n_knots) const {
  if (n_knots < 2) throw std::domain_error("Protocol::resampled: need at least 2 knots");
  std::vector<double> t(n_knots), a(n_knots);
  for (int i = 0; i < n_knots; ++i) {
    t[i] = duration * static_cast<double>(i) / (n_knots - 1);
    a[i] = spline(t[i]);
  }
  t.back() = duration;
  return from_knots(std::move(t), std::move(a));
}

Protocol spline_build(const std::vector<std::pair<double, double>>& knots) {
  std::vector<double> t, a;
  t.reserve(knots.size());
  a.reserve(knots.size());
  for (const auto& [ti, ai] : knots) {
    t.push_back(ti);
    a.push_back(ai);
  }
  return Protocol::from_knots(std::move(t), std::move(a));
}

}  // namespace szc
