#pragma once

#include <vector>

#include "szc/spline.hpp"

namespace szc {

// A barrier-strength protocol alpha(t) on [0, T]: a knot sequence interpolated
// by a natural cubic spline.  Alpha values are in E0*L units.
struct Protocol {
  double duration = 0.0;  // T
  std::vector<double> knot_t;
  std::vector<double> knot_alpha;
  CubicSpline spline;

  static Protocol from_knots(std::vector<double> t, std::vector<double> alpha);
  static Protocol linear_ramp(double duration, double alpha_start, double alpha_end);
  static Protocol constant(double duration, double alpha);

  double operator()(double t) const { return spline(t); }
  double alpha_start() const { return knot_alpha.front(); }
  double alpha_end() const { return knot_alpha.back(); }

  // Knot sequence of the protocol reversed in time (t -> T - t).
  Protocol reversed() const;

  // Spline resampled onto n uniformly spaced knots over [0, T].
  Protocol resampled(int n_knots) const;
};

// Builds a protocol from (time, value) knots; first knot time must be 0.
Protocol spline_build(const std::vector<std::pair<double, double>>& knots);

}  // namespace szc
