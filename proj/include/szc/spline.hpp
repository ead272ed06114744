#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace szc {

// Natural cubic spline: C2 interpolant with zero second derivative at both
// ends.  Two knots degenerate to a straight line.
class CubicSpline {
 public:
  CubicSpline() = default;
  CubicSpline(std::span<const double> x, std::span<const double> y);

  // Evaluates the spline; arguments outside [x_front, x_back] extrapolate the
  // boundary segments.
  double operator()(double t) const;

  double second_derivative_at_knot(std::size_t i) const { return m_[i]; }
  std::size_t size() const { return x_.size(); }

 private:
  std::vector<double> x_, y_, m_;  // m = second derivatives at knots
};

}  // namespace szc
